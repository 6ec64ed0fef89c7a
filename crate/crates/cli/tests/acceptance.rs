//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria that cannot be met are reported as FAIL without failing `cargo test`; set
//! `QMEM_ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit. `QMEM_ACCEPTANCE_ONLY=1,5`
//! restricts the run to the listed criteria.

use qmem_cli::config::{Family, ScanConfig};
use qmem_cli::reproduce::{
    ga2_pair, ga3_pair, qubit_table_witness, qutrit_table_witness, QUBIT_VIOLATION, QUTRIT_COEFF_SUM, QUTRIT_VIOLATION,
};
use qmem_cli::scan::{run_scan, ScanRow};
use quantum_memory::channel::link_product;
use quantum_memory::criteria::{
    classify_three_level, classify_two_level, dephasing_instrument, three_level_classical_decomposition, MemoryKind,
};
use quantum_memory::dynamics::{
    channel_three_level, channel_two_level, dephasing_channel, three_level_state, GiantAtom3LParams, ThreeLevelDecay,
};
use quantum_memory::random::{rng, unit_disk};
use quantum_memory::sdp::{
    ppt_robustness, robustness_from_weight, robustness_markovianity, robustness_quantum_memory_with,
    seesaw_lower_bound, PptOptions, SeesawOptions, Tolerances,
};
use quantum_memory::witness::{
    evaluate_witness, restricted_witness_search, verify_witness, Normalization, RestrictedBasis, SearchOptions,
    VerifyMode,
};
use rand::Rng;
use std::f64::consts::PI;
use std::time::Instant;

/// Detection threshold on r*.
const DETECT: f64 = 1e-6;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let w = qubit_table_witness().unwrap();
    let (e1, e2) = ga2_pair(2.0 * PI, 5.9, 7.0).unwrap();
    let v = evaluate_witness(&w, &e1, &e2).unwrap();
    let n = v / w.trace_sum();
    let secs = start.elapsed().as_secs_f64();
    let (f1, f2) = ga2_pair(40.0 * PI, 5.9, 7.0).unwrap();
    let v40 = evaluate_witness(&w, &f1, &f2).unwrap();
    let bound = QUBIT_VIOLATION * (1.0 - 0.02);
    outcome(
        v <= bound && n <= -1e-2 && secs < 1.0,
        format!(
            "<W> = {v:.5} (need <= {bound:.5}), normalized {n:.5} (need <= -0.01), {secs:.3}s; at omega_e tau = 40 pi <W> = {v40:.5}"
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (e1, e2) = ga3_pair(6.0, 6.92).unwrap();
    let r = restricted_witness_search(
        &e1,
        &e2,
        &RestrictedBasis::qutrit_states(),
        Normalization::CoeffSum(QUTRIT_COEFF_SUM),
        &SearchOptions::default(),
    )
    .unwrap();
    let bound = QUTRIT_VIOLATION * (1.0 - 0.1);
    let search_ok = r.value <= bound;
    let search_secs = start.elapsed().as_secs_f64();
    let w3 = qutrit_table_witness().unwrap();
    let cert = verify_witness(&w3, VerifyMode::Extended, &Tolerances::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        search_ok && cert.valid && secs < 300.0,
        format!(
            "search <W> = {:.5} with sum w = {QUTRIT_COEFF_SUM} (need <= {bound:.5}, {search_secs:.1}s); tables valid = {} (identity shift needed {:.4}); {secs:.1}s total",
            r.value, cert.valid, cert.shift
        ),
    )
}

fn grid_index<'a>(rows: &'a [ScanRow], n_dt: usize) -> impl Fn(usize, usize) -> &'a ScanRow {
    move |i, j| &rows[i * n_dt + j]
}

fn peak(rows: &[ScanRow]) -> &ScanRow {
    rows.iter().max_by(|a, b| a.r_quantum.unwrap_or(0.0).total_cmp(&b.r_quantum.unwrap_or(0.0))).unwrap()
}

fn ga_scan(family: Family) -> (ScanConfig, Vec<ScanRow>, f64) {
    let mut c = ScanConfig::standard(family);
    c.workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let start = Instant::now();
    let rows = run_scan(&c).unwrap();
    (c, rows, start.elapsed().as_secs_f64())
}

fn detected(r: &ScanRow) -> bool {
    r.r_quantum.unwrap_or(0.0) > DETECT
}

fn criterion_3(scan: &(ScanConfig, Vec<ScanRow>, f64)) -> Outcome {
    let (c, rows, secs) = scan;
    let (n1, n2) = (c.t1_grid.steps, c.dt_grid.steps);
    let at = grid_index(rows, n2);
    let analytic = |i: usize, j: usize| at(i, j).analytic_verdict.as_deref() == Some("QuantumMemory");
    let mut mismatches = 0;
    let mut unexplained = 0;
    for i in 0..n1 {
        for j in 0..n2 {
            if detected(at(i, j)) == analytic(i, j) {
                continue;
            }
            mismatches += 1;
            // A disagreement is acceptable only next to the analytic boundary.
            let mut near = false;
            for a in i.saturating_sub(1)..=(i + 1).min(n1 - 1) {
                for b in j.saturating_sub(1)..=(j + 1).min(n2 - 1) {
                    near |= analytic(a, b) != analytic(i, j);
                }
            }
            if !near {
                unexplained += 1;
            }
        }
    }
    let errors = rows.iter().filter(|r| r.solver_status.contains("error")).count();
    let p = peak(rows);
    let peak_ok = (p.t1 - 5.9).abs() <= 0.2 && (p.dt - 1.1).abs() <= 0.2;
    outcome(
        unexplained == 0 && peak_ok && errors == 0 && *secs < 600.0,
        format!(
            "{n1}x{n2} grid: {mismatches} cells differ from the closed form, {unexplained} away from its boundary, {errors} solver errors; peak r* = {:.5} at ({:.3}, {:.3}); {secs:.1}s",
            p.r_quantum.unwrap(), p.t1, p.dt
        ),
    )
}

fn criterion_4(two: &(ScanConfig, Vec<ScanRow>, f64)) -> Outcome {
    let three = ga_scan(Family::Ga3);
    let (_, rows3, secs) = &three;
    let rows2 = &two.1;
    let inter = rows2.iter().zip(rows3.iter()).filter(|(a, b)| detected(a) && detected(b)).count();
    let union = rows2.iter().zip(rows3.iter()).filter(|(a, b)| detected(a) || detected(b)).count();
    let jaccard = inter as f64 / union.max(1) as f64;
    let (p2, p3) = (peak(rows2), peak(rows3));
    let ratio = p3.r_quantum.unwrap() / p2.r_quantum.unwrap();
    outcome(
        jaccard >= 0.9 && (0.35..=0.65).contains(&ratio) && *secs < 3600.0,
        format!(
            "Jaccard {jaccard:.3} (need >= 0.9); peak r* {:.5} at ({:.3}, {:.3}), ratio to two-level {ratio:.3} (need 0.35..0.65); {secs:.1}s",
            p3.r_quantum.unwrap(), p3.t1, p3.dt
        ),
    )
}

fn random_three_level(g: &mut impl Rng) -> ThreeLevelDecay {
    let d = unit_disk(g);
    let gg = g.random::<f64>() * (1.0 - d.norm_sqr());
    let phi_s = g.random::<f64>() * 2.0 * PI;
    ThreeLevelDecay { d, g: gg, s: 1.0 - d.norm_sqr() - gg, phi_s, time: 0.0 }
}

fn criterion_5() -> Outcome {
    let mut g = rng(5);
    let opts = PptOptions::default();
    let (mut disagree2, mut false_pos2) = (0, 0);
    for _ in 0..300 {
        let (c1, c2) = (unit_disk(&mut g), unit_disk(&mut g));
        let run = ppt_robustness(&channel_two_level(c1).unwrap(), &channel_two_level(c2).unwrap(), &opts).unwrap();
        let det = robustness_from_weight(run.s_star).1 > DETECT;
        let kind = classify_two_level(c1, c2).kind;
        if det != (kind == MemoryKind::QuantumMemory) {
            disagree2 += 1;
            if kind == MemoryKind::Markovian {
                false_pos2 += 1;
            }
        }
    }
    let (mut disagree3, mut false_pos3, mut explained, mut faint) = (0, 0, 0, 0);
    for _ in 0..100 {
        let (s1, s2) = (random_three_level(&mut g), random_three_level(&mut g));
        let r = robustness_quantum_memory_with(&s1.channel().unwrap(), &s2.channel().unwrap(), &opts, false).unwrap();
        let det = r.r_star > DETECT;
        let kind = classify_three_level(&s1, &s2).kind;
        if det != (kind == MemoryKind::QuantumMemory) {
            disagree3 += 1;
            if kind == MemoryKind::Markovian {
                false_pos3 += 1;
            } else if let Ok(dec) = three_level_classical_decomposition(&s1, &s2) {
                if dec.recombine().unwrap().max_abs_diff(&s2.channel().unwrap()) < 1e-10 {
                    explained += 1;
                }
            } else if r.r_star > 0.0 {
                faint += 1;
            }
        }
    }
    outcome(
        disagree2 == 0 && disagree3 == 0,
        format!(
            "d=2: {disagree2}/300 disagreements ({false_pos2} false positives); d=3: {disagree3}/100 disagreements ({false_pos3} false positives, {explained} of them with an explicit classical decomposition, {faint} with 0 < r* <= 1e-6)"
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut g = rng(6);
    let (mut worst, mut quantum, mut missed, mut nonmono) = (0.0_f64, 0, 0, 0);
    for _ in 0..100 {
        let (a1, a2) = (unit_disk(&mut g), unit_disk(&mut g));
        let inst = dephasing_instrument(a1, a2).unwrap();
        let (e1, e2) = (dephasing_channel(a1).unwrap(), dephasing_channel(a2).unwrap());
        worst = worst.max(inst.decomposition.recombine().unwrap().max_abs_diff(&e2));
        let q = robustness_quantum_memory_with(&e1, &e2, &PptOptions::default(), false).unwrap();
        if q.r_star > DETECT {
            quantum += 1;
        }
        if a2.norm() > a1.norm() + 1e-6 {
            nonmono += 1;
            if robustness_markovianity(&e1, &e2).unwrap().r_star <= 0.0 {
                missed += 1;
            }
        }
    }
    outcome(
        worst <= 1e-10 && quantum == 0 && missed == 0,
        format!("recombination error {worst:.2e}; {quantum}/100 with r_quantum > 1e-6; {missed}/{nonmono} growing pairs with r_markov = 0"),
    )
}

fn criterion_7() -> Outcome {
    let c = ScanConfig::standard(Family::Heisenberg);
    let rows = run_scan(&c).unwrap();
    let sep = rows.iter().filter(|r| r.r_markov.unwrap_or(0.0) > 0.05 && r.r_quantum.unwrap_or(1.0) < DETECT).count();
    let qm = rows.iter().filter(|r| detected(r)).count();
    let best = rows
        .iter()
        .filter(|r| r.r_quantum.unwrap_or(1.0) < DETECT)
        .max_by(|a, b| a.r_markov.unwrap_or(0.0).total_cmp(&b.r_markov.unwrap_or(0.0)))
        .unwrap();
    outcome(
        sep > 0 && qm > 0,
        format!(
            "{} points: {sep} classical but non-Markovian with r_markov > 0.05 (largest {:.4} at t = {:.2}, dt = {:.2}), {qm} with quantum memory",
            rows.len(),
            best.r_markov.unwrap(),
            best.t1,
            best.dt
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut g = rng(8);
    let (mut e2l, mut e3l) = (0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let (c1, c2) = (unit_disk(&mut g), unit_disk(&mut g));
        let l = link_product(&channel_two_level(c1).unwrap(), &channel_two_level(c2).unwrap()).unwrap();
        e2l = e2l.max(l.max_abs_diff(&channel_two_level(c1 * c2).unwrap()));
        let d = unit_disk(&mut g);
        let gg = g.random::<f64>() * (1.0 - d.norm_sqr());
        let d2 = unit_disk(&mut g);
        let g2 = g.random::<f64>() * (1.0 - d2.norm_sqr());
        let (p, p2) = (g.random::<f64>() * 2.0 * PI, g.random::<f64>() * 2.0 * PI);
        let l =
            link_product(&channel_three_level(d, gg, p).unwrap(), &channel_three_level(d2, g2, p2).unwrap()).unwrap();
        let expect = channel_three_level(d * d2, gg + d.norm_sqr() * g2, p + p2).unwrap();
        e3l = e3l.max(l.max_abs_diff(&expect));
    }
    let p = GiantAtom3LParams::new(40.0 * PI, 20.0 * PI, 4.0, 8.0);
    let mut cons = 0.0_f64;
    for k in 0..=500 {
        let s = three_level_state(k as f64 * 0.01, &p).unwrap();
        cons = cons.max((s.d.norm_sqr() + s.g + s.s - 1.0).abs());
    }
    outcome(
        e2l <= 1e-10 && e3l <= 1e-10 && cons <= 1e-6,
        format!(
            "two-level composition error {e2l:.2e}, three-level {e3l:.2e}; population defect up to 5 tau {cons:.2e}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut g = rng(9);
    let mut close = 0;
    let mut log = Vec::new();
    for k in 0..20 {
        // Draw pairs with a revival so the bound is not trivially one.
        let (c1, c2) = loop {
            let (a, b) = (unit_disk(&mut g), unit_disk(&mut g));
            if b.norm() > a.norm() {
                break (a, b);
            }
        };
        let (e1, e2) = (channel_two_level(c1).unwrap(), channel_two_level(c2).unwrap());
        let ppt = ppt_robustness(&e1, &e2, &PptOptions::default()).unwrap();
        let ss = seesaw_lower_bound(&e1, &e2, &SeesawOptions { seed: k, ..Default::default() }).unwrap();
        if ss.s_lower >= ppt.s_star - 1e-4 && ss.check.passes(1e-7) {
            close += 1;
        } else {
            log.push(format!("pair {k}: seesaw {:.6} vs PPT {:.6}", ss.s_lower, ppt.s_star));
        }
    }
    let mut detail = format!("{close}/20 see-saw values within 1e-4 of the PPT bound (need >= 18)");
    if !log.is_empty() {
        detail += &format!("; {}", log.join(", "));
    }
    outcome(close >= 18, detail)
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("QMEM_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let want = |k: u32| only.as_ref().map_or(true, |o| o.contains(&k));
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut run = |k: u32, f: &dyn Fn() -> Outcome| {
        if want(k) {
            let start = Instant::now();
            let o = f();
            println!(
                "criterion {k}: {} ({:.1}s) {}",
                if o.passed { "PASS" } else { "FAIL" },
                start.elapsed().as_secs_f64(),
                o.detail
            );
            results.push((k, o));
        }
    };
    run(1, &criterion_1);
    run(2, &criterion_2);
    if want(3) || want(4) {
        let two = ga_scan(Family::Ga2);
        run(3, &|| criterion_3(&two));
        run(4, &|| criterion_4(&two));
    }
    run(5, &criterion_5);
    run(6, &criterion_6);
    run(7, &criterion_7);
    run(8, &criterion_8);
    run(9, &criterion_9);
    let failed: Vec<u32> = results.iter().filter(|(_, o)| !o.passed).map(|(k, _)| *k).collect();
    println!("acceptance: {}/{} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() && std::env::var_os("QMEM_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
