//! Lower bounds on the classical mixing weight by alternating optimization.
//!
//! With the outcome channels `K_i` fixed the program is linear in the instrument `{I_i}` and
//! `s`; with the instrument fixed it is linear in the channels. Alternating the two never
//! decreases `s`, and every iterate is an explicit classical decomposition.

use super::lmi::{Affine, HermVar, Lmi};
use super::problem::{SolveStatus, Tolerances};
use super::programs::robustness_from_weight;
use super::sectors::Sectors;
use crate::channel::{is_cptp, link_product, ChoiOperator};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{eigh, min_eigenvalue, CMat, C64, ONE};
use crate::random::{random_unitary_channel, rng};
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct SeesawOptions {
    /// Number of instrument outcomes; `None` picks `2 d^2`.
    pub n: Option<usize>,
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Improvement below which a restart is considered converged.
    pub improvement_tol: f64,
    pub tolerances: Tolerances,
}

impl Default for SeesawOptions {
    fn default() -> Self {
        Self {
            n: None,
            iterations: 100,
            restarts: 4,
            seed: 0,
            improvement_tol: 1e-8,
            tolerances: Tolerances::default(),
        }
    }
}

/// Fewer outcomes than this tends to leave the alternation stuck well below the optimum.
pub fn default_outcomes(d: usize) -> usize {
    2 * d * d
}

/// Explicit decomposition `s E2 + G' = sum_i K_i ∘ I_i` with `G' >= 0`.
#[derive(Clone, Debug, Serialize)]
pub struct SeesawCertificate {
    pub s: f64,
    pub instrument: Vec<ChoiOperator>,
    pub channels: Vec<ChoiOperator>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CertificateCheck {
    pub instrument_min_eigenvalue: f64,
    pub instrument_sum_error: f64,
    pub channel_min_eigenvalue: f64,
    pub channel_trace_error: f64,
    pub slack_min_eigenvalue: f64,
}

impl CertificateCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.instrument_min_eigenvalue >= -tol
            && self.instrument_sum_error <= tol
            && self.channel_min_eigenvalue >= -tol
            && self.channel_trace_error <= tol
            && self.slack_min_eigenvalue >= -tol
    }
}

impl SeesawCertificate {
    /// Recombines the decomposition with explicit link products and reports every defect.
    pub fn check(&self, e1: &ChoiOperator, e2: &ChoiOperator) -> Result<CertificateCheck> {
        let mut sum = CMat::zeros(e1.matrix().nrows(), e1.matrix().ncols());
        let mut recombined = CMat::zeros(e2.matrix().nrows(), e2.matrix().ncols());
        let mut inst_min = f64::INFINITY;
        let mut chan_min = f64::INFINITY;
        let mut chan_trace: f64 = 0.0;
        for (i, k) in self.instrument.iter().zip(&self.channels) {
            sum += i.matrix();
            inst_min = inst_min.min(min_eigenvalue(i.matrix()));
            let rep = is_cptp(k, 0.0);
            chan_min = chan_min.min(rep.min_eigenvalue);
            chan_trace = chan_trace.max(rep.trace_deviation);
            recombined += link_product(i, k)?.matrix();
        }
        let slack = recombined - e2.matrix() * C64::new(self.s, 0.0);
        Ok(CertificateCheck {
            instrument_min_eigenvalue: inst_min,
            instrument_sum_error: (sum - e1.matrix()).iter().fold(0.0_f64, |a, z| a.max(z.norm())),
            channel_min_eigenvalue: chan_min,
            channel_trace_error: chan_trace,
            slack_min_eigenvalue: min_eigenvalue(&slack),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SeesawResult {
    pub s_lower: f64,
    pub r_upper: f64,
    pub certificate: SeesawCertificate,
    pub check: CertificateCheck,
    /// Best value after each alternation of the winning restart.
    pub history: Vec<f64>,
    /// True when the winning restart ran out of iterations while still improving.
    pub stalled: bool,
}

/// Support of `E1` with whitened columns: `E1 = V V^†`.
fn whitened_support(e1: &ChoiOperator) -> CMat {
    let (vals, vecs) = eigh(e1.matrix());
    let scale = vals.iter().fold(1.0_f64, |a, &b| a.max(b.abs()));
    let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > 1e-10 * scale).collect();
    CMat::from_fn(vecs.nrows(), keep.len(), |x, c| vecs[(x, keep[c])] * vals[keep[c]].sqrt())
}

fn link_into(i: &CMat, k: &CMat, d: usize) -> CMat {
    let mut out = CMat::zeros(d * d, d * d);
    for a in 0..d {
        for a2 in 0..d {
            for m in 0..d {
                for l in 0..d {
                    let f = i[(a * d + m, a2 * d + l)];
                    if f.norm() == 0.0 {
                        continue;
                    }
                    for b in 0..d {
                        for b2 in 0..d {
                            out[(a * d + b, a2 * d + b2)] += f * k[(m * d + b, l * d + b2)];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Step with the channels fixed: optimize the instrument (restricted to the support of E1).
fn instrument_step(
    e2: &ChoiOperator,
    v: &CMat,
    channels: &[CMat],
    d: usize,
    tol: &Tolerances,
) -> Result<Option<(f64, Vec<CMat>)>> {
    let n = channels.len();
    let r = v.ncols();
    let mut next = 0;
    let free: Vec<HermVar> = (0..n - 1).map(|_| HermVar::free(&Sectors::single(r), &mut next)).collect();
    let s = next;
    next += 1;
    let mut last = Affine::constant(&CMat::identity(r, r), 0.0);
    for m in &free {
        last.extend_scaled(&m.expr, -1.0);
    }
    let mut lmi = Lmi::new();
    lmi.set_vars(next);
    lmi.objective[s] = 1.0;
    let parts: Vec<&Affine> = free.iter().map(|m| &m.expr).chain(std::iter::once(&last)).collect();
    for (k, m) in parts.iter().enumerate() {
        let g = lmi.add_group(format!("I{k}"), Sectors::single(r));
        lmi.add(g, m, 1.0);
    }
    // Image of each support matrix unit under `M -> link(V M V^†, K_k)`.
    let mut gexpr = Affine::new();
    for (m, kmat) in parts.iter().zip(channels) {
        let mut cache = std::collections::HashMap::new();
        gexpr.extend_scaled(
            &m.map(|u, w, val, out| {
                let img = cache.entry((u, w)).or_insert_with(|| {
                    let unit = CMat::from_fn(d * d, d * d, |x, x2| v[(x, u)] * v[(x2, w)].conj());
                    link_into(&unit, kmat, d)
                });
                for q in 0..d * d {
                    for p in 0..d * d {
                        let z = img[(p, q)];
                        if z.norm() > 1e-15 {
                            out.push((p, q, z * val));
                        }
                    }
                }
            }),
            1.0,
        );
    }
    gexpr.add_matrix(Some(s), e2.matrix(), -1.0, 0.0);
    let gg = lmi.add_group("G", Sectors::single(d * d));
    lmi.add(gg, &gexpr, 1.0);
    let gs = lmi.add_group("s", Sectors::single(1));
    let mut se = Affine::new();
    se.push(Some(s), 0, 0, ONE);
    lmi.add(gs, &se, 1.0);
    let sol = lmi.solve(tol)?;
    if !matches!(sol.status, SolveStatus::Optimal | SolveStatus::MaxIter) {
        return Ok(None);
    }
    let inst = parts.iter().map(|m| v * m.evaluate(&sol.y, r) * v.adjoint()).collect();
    Ok(Some((sol.y[s], inst)))
}

/// Step with the instrument fixed: optimize the outcome channels.
fn channel_step(e2: &ChoiOperator, inst: &[CMat], d: usize, tol: &Tolerances) -> Result<Option<(f64, Vec<CMat>)>> {
    let mut next = 0;
    let ks: Vec<HermVar> = inst
        .iter()
        .map(|_| HermVar::with_partial_trace(&Sectors::single(d * d), d, &CMat::identity(d, d), &mut next))
        .collect::<Result<_>>()?;
    let s = next;
    next += 1;
    let mut lmi = Lmi::new();
    lmi.set_vars(next);
    lmi.objective[s] = 1.0;
    let mut gexpr = Affine::new();
    for (k, (kv, im)) in ks.iter().zip(inst).enumerate() {
        let g = lmi.add_group(format!("K{k}"), Sectors::single(d * d));
        lmi.add(g, &kv.expr, 1.0);
        gexpr.extend_scaled(
            &kv.expr.map(|p, q, val, out| {
                let (m, b, l, b2) = (p / d, p % d, q / d, q % d);
                for a in 0..d {
                    for a2 in 0..d {
                        let f = im[(a * d + m, a2 * d + l)];
                        if f.norm() > 0.0 {
                            out.push((a * d + b, a2 * d + b2, f * val));
                        }
                    }
                }
            }),
            1.0,
        );
    }
    gexpr.add_matrix(Some(s), e2.matrix(), -1.0, 0.0);
    let gg = lmi.add_group("G", Sectors::single(d * d));
    lmi.add(gg, &gexpr, 1.0);
    let gs = lmi.add_group("s", Sectors::single(1));
    let mut se = Affine::new();
    se.push(Some(s), 0, 0, ONE);
    lmi.add(gs, &se, 1.0);
    let sol = lmi.solve(tol)?;
    if !matches!(sol.status, SolveStatus::Optimal | SolveStatus::MaxIter) {
        return Ok(None);
    }
    Ok(Some((sol.y[s], ks.iter().map(|k| k.value(&sol.y)).collect())))
}

/// Largest weight not above `s` for which the slack of the decomposition is PSD.
fn certified_weight(e2: &ChoiOperator, inst: &[CMat], chans: &[CMat], s: f64, d: usize) -> f64 {
    let mut total = CMat::zeros(d * d, d * d);
    for (i, k) in inst.iter().zip(chans) {
        total += link_into(i, k, d);
    }
    let ok = |w: f64| min_eigenvalue(&(&total - e2.matrix() * C64::new(w, 0.0))) >= -1e-12;
    if ok(s) {
        return s;
    }
    let (mut lo, mut hi) = (0.0, s);
    if !ok(lo) {
        return 0.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn seesaw_lower_bound(e1: &ChoiOperator, e2: &ChoiOperator, opts: &SeesawOptions) -> Result<SeesawResult> {
    let d = e1.dim_in();
    if e1.dim_out() != d || e2.dim_in() != d || e2.dim_out() != d {
        return dim_err("see-saw needs two channels on one dimension");
    }
    let n = opts.n.unwrap_or_else(|| default_outcomes(d));
    if n == 0 {
        return Err(Error::Invalid("need at least one outcome".into()));
    }
    let v = whitened_support(e1);
    let mut g = rng(opts.seed);
    let mut best: Option<(f64, Vec<CMat>, Vec<CMat>, Vec<f64>, bool)> = None;
    for _ in 0..opts.restarts.max(1) {
        let mut chans: Vec<CMat> = (0..n).map(|_| random_unitary_channel(d, &mut g).into_matrix()).collect();
        let mut inst: Vec<CMat> = Vec::new();
        let mut s_cur = f64::NEG_INFINITY;
        let mut history = Vec::new();
        let mut stalled = true;
        for _ in 0..opts.iterations {
            let Some((_, new_inst)) = instrument_step(e2, &v, &chans, d, &opts.tolerances)? else {
                break;
            };
            let Some((s_new, new_chans)) = channel_step(e2, &new_inst, d, &opts.tolerances)? else {
                break;
            };
            let s_new = certified_weight(e2, &new_inst, &new_chans, s_new.min(1.0), d);
            if s_new + 1e-12 < s_cur {
                stalled = false;
                break;
            }
            let gain = s_new - s_cur;
            inst = new_inst;
            chans = new_chans;
            s_cur = s_new;
            history.push(s_cur);
            if gain < opts.improvement_tol || s_cur >= 1.0 - 1e-12 {
                stalled = false;
                break;
            }
        }
        if inst.is_empty() {
            continue;
        }
        if best.as_ref().map_or(true, |b| s_cur > b.0) {
            best = Some((s_cur, inst, chans, history, stalled));
        }
    }
    let Some((s, inst, chans, history, stalled)) = best else {
        return Err(Error::Solver("every see-saw restart failed".into()));
    };
    let certificate = SeesawCertificate {
        s,
        instrument: inst.into_iter().map(|m| ChoiOperator::from_hermitian_part(d, d, m)).collect(),
        channels: chans.into_iter().map(|m| ChoiOperator::from_hermitian_part(d, d, m)).collect(),
    };
    let check = certificate.check(e1, e2)?;
    let (s_lower, r_upper) = robustness_from_weight(s);
    Ok(SeesawResult { s_lower, r_upper, certificate, check, history, stalled })
}
