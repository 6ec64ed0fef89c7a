//! The memory programs: PPT-relaxed classical future, robustness against mixing with an
//! arbitrary channel, and robustness of Markovianity.
//!
//! Register order for the bipartite future operator is `A D D' B`: `A` is the input of the
//! first channel, `D` its output, `D'` the input of the transition and `B` the final output.

use super::lmi::{Affine, HermVar, Lmi, LmiSolution};
use super::problem::{Equality, HermSparse, LinearTerm, SdpProblem, SdpSolution, SolveStatus, Tolerances};
use super::sectors::{Charge, PhaseSymmetry, Sectors};
use super::solve;
use crate::channel::ChoiOperator;
use crate::criteria::{MemoryKind, MemoryVerdict};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{eigh, partial_trace, CMat, C64, ONE};
use crate::witness::{repair_witness, WitnessPair};
use serde::Serialize;

/// Pairs with `s* >= 1 - MEMBERSHIP_THRESHOLD` count as inside the (relaxed) classical future.
pub const MEMBERSHIP_THRESHOLD: f64 = 1e-6;

const COVARIANCE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum SymmetryChoice {
    Auto,
    Off,
    Fixed(PhaseSymmetry),
}

#[derive(Clone, Debug)]
pub struct PptOptions {
    pub symmetry: SymmetryChoice,
    /// Restrict the future operator to the support of `E1 ⊗ 1`. The optimal value is unchanged;
    /// without it the program has no interior point whenever `E1` is rank deficient.
    pub facial_reduction: bool,
    pub tolerances: Tolerances,
}

impl Default for PptOptions {
    fn default() -> Self {
        Self { symmetry: SymmetryChoice::Auto, facial_reduction: true, tolerances: Tolerances::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RobustnessResult {
    pub s_star: f64,
    pub r_star: f64,
    pub verdict: MemoryVerdict,
    pub status: SolveStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_witness: Option<WitnessPair>,
}

fn pair_dim(e1: &ChoiOperator, e2: &ChoiOperator) -> Result<usize> {
    let d = e1.dim_in();
    for e in [e1, e2] {
        if e.dim_in() != d || e.dim_out() != d {
            return dim_err(format!(
                "expected two channels on the same dimension, got {}->{} and {}->{}",
                e1.dim_in(),
                e1.dim_out(),
                e2.dim_in(),
                e2.dim_out()
            ));
        }
    }
    Ok(d)
}

fn pick_symmetry(choice: &SymmetryChoice, channels: &[&ChoiOperator]) -> PhaseSymmetry {
    match choice {
        SymmetryChoice::Auto => PhaseSymmetry::detect(channels, COVARIANCE_TOL),
        SymmetryChoice::Off => PhaseSymmetry::trivial(),
        SymmetryChoice::Fixed(s) => {
            if channels.iter().all(|c| s.covariant(c, COVARIANCE_TOL)) {
                s.clone()
            } else {
                PhaseSymmetry::trivial()
            }
        }
    }
}

/// Converts a mixing weight into robustness, clamping solver noise at the ends.
pub fn robustness_from_weight(s: f64) -> (f64, f64) {
    let s = s.clamp(0.0, 1.0);
    let s = if s >= 1.0 - 1e-9 { 1.0 } else { s };
    (s, if s > 0.0 { 1.0 / s - 1.0 } else { f64::INFINITY })
}

fn accept(sol: &LmiSolution) -> Result<()> {
    match sol.status {
        SolveStatus::Optimal => Ok(()),
        SolveStatus::Infeasible => Err(Error::Solver("program reported infeasible".into())),
        _ if sol.raw.duality_gap.abs() < 1e-5 && sol.raw.primal_infeasibility < 1e-6 => Ok(()),
        other => Err(Error::Solver(format!(
            "solver stopped with {other:?} (gap {:.2e}, residual {:.2e})",
            sol.raw.duality_gap, sol.raw.primal_infeasibility
        ))),
    }
}

// ---------------------------------------------------------------------------------------------
// Dense standard form, written out constraint by constraint.

fn flat(ds: &[usize], d: usize) -> usize {
    ds.iter().fold(0, |acc, &x| acc * d + x)
}

/// Pushes rows fixing the real and imaginary parts of `(p, q)` of a sum of operators.
fn entry_rows(prob: &mut SdpProblem, p: usize, q: usize, mut fill: impl FnMut(bool, &mut Vec<LinearTerm>) -> f64) {
    let parts: &[bool] = if p == q { &[false] } else { &[false, true] };
    for &imag in parts {
        let mut terms = Vec::new();
        let rhs = fill(imag, &mut terms);
        terms.retain(|t| !t.coeff.is_empty());
        prob.equalities.push(Equality { terms, rhs });
    }
}

/// Coefficient reading off Re or Im of entry `(p, q)` of a Hermitian block.
fn reader(p: usize, q: usize, imag: bool, scale: f64) -> HermSparse {
    let mut h = HermSparse::new();
    if p == q {
        if !imag {
            h.add(p, p, C64::new(scale, 0.0));
        }
    } else if imag {
        h.add(p, q, C64::new(0.0, 0.5 * scale));
    } else {
        h.add(p, q, C64::new(0.5 * scale, 0.0));
    }
    h
}

/// The PPT relaxation of the classical future of `E1` in plain standard form.
///
/// Blocks are `X` and `Y` (dimension d^4), then with mixing the unnormalized slack channel
/// `G` (d^2) and the scalar `s`. `Y` is tied to the partial transpose of `X` over `A D` entry by
/// entry. With mixing the program maximizes `s` subject to `<Φ|X|Φ> = s E2 + G`; without it,
/// it is the feasibility problem `<Φ|X|Φ> = E2`.
pub fn build_ppt_membership(e1: &ChoiOperator, e2: &ChoiOperator, mixing: bool) -> Result<SdpProblem> {
    let d = pair_dim(e1, e2)?;
    let (n, n3, n2) = (d.pow(4), d.pow(3), d * d);
    let mut prob = SdpProblem::new(mixing);
    let bx = prob.add_block("X", n);
    let by = prob.add_block("Y", n);
    let (bg, bs) = if mixing { (prob.add_block("G", n2), prob.add_block("s", 1)) } else { (usize::MAX, usize::MAX) };
    let term = |block, coeff| LinearTerm { block, coeff };
    for q in 0..n {
        for p in 0..=q {
            let (xp, xq) = ((q / n2) * n2 + p % n2, (p / n2) * n2 + q % n2);
            entry_rows(&mut prob, p, q, |imag, terms| {
                terms.push(term(by, reader(p, q, imag, 1.0)));
                let mut h = HermSparse::new();
                if xp == xq {
                    if !imag {
                        h.add(xp, xp, C64::new(-1.0, 0.0));
                    }
                } else {
                    h.add(xp, xq, if imag { C64::new(0.0, -0.5) } else { C64::new(-0.5, 0.0) });
                }
                terms.push(term(bx, h));
                0.0
            });
        }
    }
    let e1m = e1.matrix();
    for x2 in 0..n3 {
        for x in 0..=x2 {
            let (ad, dp) = (x / d, x % d);
            let (ad2, dp2) = (x2 / d, x2 % d);
            let target = if dp == dp2 { e1m[(ad, ad2)] } else { C64::new(0.0, 0.0) };
            entry_rows(&mut prob, x, x2, |imag, terms| {
                let mut h = HermSparse::new();
                for b in 0..d {
                    for (p, q, v) in reader(x * d + b, x2 * d + b, imag, 1.0).entries() {
                        h.add(p, q, v);
                    }
                }
                terms.push(term(bx, h));
                if imag {
                    target.im
                } else {
                    target.re
                }
            });
        }
    }
    let e2m = e2.matrix();
    for g2 in 0..n2 {
        for g in 0..=g2 {
            let (a, b) = (g / d, g % d);
            let (a2, b2) = (g2 / d, g2 % d);
            entry_rows(&mut prob, g, g2, |imag, terms| {
                let mut h = HermSparse::new();
                for dl in 0..d {
                    for dl2 in 0..d {
                        let p = flat(&[a, dl, dl, b], d);
                        let q = flat(&[a2, dl2, dl2, b2], d);
                        if p == q {
                            if !imag {
                                h.add(p, p, ONE);
                            }
                        } else {
                            h.add(p, q, if imag { C64::new(0.0, 0.5) } else { C64::new(0.5, 0.0) });
                        }
                    }
                }
                terms.push(term(bx, h));
                let target = if imag { e2m[(g, g2)].im } else { e2m[(g, g2)].re };
                if mixing {
                    terms.push(term(bg, reader(g, g2, imag, -1.0)));
                    let mut hs = HermSparse::new();
                    hs.add(0, 0, C64::new(-target, 0.0));
                    terms.push(term(bs, hs));
                    0.0
                } else {
                    target
                }
            });
        }
    }
    if mixing {
        let mut hs = HermSparse::new();
        hs.add(0, 0, ONE);
        prob.objective.push(term(bs, hs));
    }
    prob.validate()?;
    Ok(prob)
}

/// Mixing weight from a solved mixing-form membership problem.
pub fn membership_weight(solution: &SdpSolution) -> Option<f64> {
    solution.primal_blocks.get(3).map(|s| s[(0, 0)].re)
}

// ---------------------------------------------------------------------------------------------
// Reduced matrix-inequality form used for actual computations.

/// Basis of the `A D` support kept for the future operator, one column per retained
/// eigenvector of `E1` (restricted to symmetry sectors).
#[derive(Clone, Debug)]
struct Support {
    /// Whitened columns spanning the kept support.
    cols: Vec<Vec<(usize, C64)>>,
    /// The same directions normalized.
    units: Vec<Vec<(usize, C64)>>,
    lambdas: Vec<f64>,
    charges: Vec<Charge>,
}

impl Support {
    /// For every `A D` index, the kept unit columns touching it.
    fn by_index(&self, n: usize) -> Vec<Vec<(usize, C64)>> {
        let mut out = vec![Vec::new(); n];
        for (sigma, col) in self.units.iter().enumerate() {
            for &(x, v) in col {
                out[x].push((sigma, v));
            }
        }
        out
    }
}

fn support(e1: &ChoiOperator, sym: &PhaseSymmetry, facial: bool) -> Support {
    let d = e1.dim_in();
    let sectors = Sectors::from_charges(&sym.charges(d, &[-1, 1]));
    let m = e1.matrix();
    let scale = m.diagonal().iter().map(|z| z.re.abs()).fold(1.0, f64::max);
    let mut out = Support { cols: Vec::new(), units: Vec::new(), lambdas: Vec::new(), charges: Vec::new() };
    for (k, members) in sectors.members.iter().enumerate() {
        let sub = CMat::from_fn(members.len(), members.len(), |a, b| m[(members[a], members[b])]);
        let (vals, vecs) = eigh(&sub);
        for (j, &lam) in vals.iter().enumerate() {
            if facial && lam <= 1e-10 * scale {
                continue;
            }
            // Kept directions are whitened so that every pinned partial trace is the identity;
            // otherwise tiny eigenvalues of E1 ruin the conditioning near the optimum.
            let (w, lam) = if lam > 1e-10 * scale { (lam.sqrt(), 1.0) } else { (1.0, lam.max(0.0)) };
            let unit: Vec<(usize, C64)> = members
                .iter()
                .enumerate()
                .filter_map(|(a, &x)| {
                    let v = vecs[(a, j)];
                    (v.norm() > 1e-14).then_some((x, v))
                })
                .collect();
            out.cols.push(unit.iter().map(|&(x, v)| (x, v * w)).collect());
            out.units.push(unit);
            out.lambdas.push(lam);
            out.charges.push(sectors.charges[k].clone());
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct PptRun {
    pub s_star: f64,
    pub status: SolveStatus,
    pub solution: LmiSolution,
    pub block_sizes: Vec<usize>,
    d: usize,
    support: Support,
    tolerances: Tolerances,
}

pub(crate) fn pt_ad(p: usize, q: usize, d: usize) -> (usize, usize) {
    let n2 = d * d;
    ((q / n2) * n2 + p % n2, (p / n2) * n2 + q % n2)
}

pub(crate) fn phi_contract(p: usize, q: usize, d: usize) -> Option<(usize, usize)> {
    let (a, dl, dp, b) = (p / (d * d * d), (p / (d * d)) % d, (p / d) % d, p % d);
    let (a2, dl2, dp2, b2) = (q / (d * d * d), (q / (d * d)) % d, (q / d) % d, q % d);
    (dl == dp && dl2 == dp2).then_some((a * d + b, a2 * d + b2))
}

/// Solves `max s` over the PPT relaxation of `s E2 + (1 - s) G ∈ F[E1]`.
pub fn ppt_robustness(e1: &ChoiOperator, e2: &ChoiOperator, opts: &PptOptions) -> Result<PptRun> {
    let d = pair_dim(e1, e2)?;
    let sym = pick_symmetry(&opts.symmetry, &[e1, e2]);
    let sup = support(e1, &sym, opts.facial_reduction);
    let r = sup.cols.len();
    let inner = d * d;

    let mut x_charges = Vec::with_capacity(r * inner);
    for q in &sup.charges {
        for dp in 0..d {
            for b in 0..d {
                x_charges.push(sym.add(q, &sym.charge(&[dp, b], &[-1, 1])));
            }
        }
    }
    let x_sectors = Sectors::from_charges(&x_charges);
    let pinned =
        CMat::from_fn(r * d, r * d, |u, w| if u == w { C64::new(sup.lambdas[u / d], 0.0) } else { C64::new(0.0, 0.0) });
    let mut next = 0;
    let x = HermVar::with_partial_trace(&x_sectors, d, &pinned, &mut next)?;
    let s = next;
    next += 1;

    let mut lmi = Lmi::new();
    lmi.set_vars(next);
    lmi.objective[s] = 1.0;

    let gx = lmi.add_group("X", x_sectors);
    lmi.add(gx, &x.expr, 1.0);

    let full = x.expr.map(|u, w, v, out| {
        let (rho, rest) = (u / inner, u % inner);
        let (rho2, rest2) = (w / inner, w % inner);
        for &(xa, alpha) in &sup.cols[rho] {
            for &(xb, beta) in &sup.cols[rho2] {
                out.push((xa * inner + rest, xb * inner + rest2, v * alpha * beta.conj()));
            }
        }
    });

    // The partial transpose vanishes on conj(ker E1) ⊗ C^{d^2}; compress onto the conjugate
    // of the kept support so that the block keeps an interior.
    let mut y_charges = Vec::with_capacity(r * inner);
    for q in &sup.charges {
        let neg: Vec<i64> = q.iter().map(|x| -x).collect();
        let neg = sym.add(&neg, &vec![0; neg.len()]);
        for dp in 0..d {
            for b in 0..d {
                y_charges.push(sym.add(&neg, &sym.charge(&[dp, b], &[-1, 1])));
            }
        }
    }
    let by_x = sup.by_index(inner);
    let gy = lmi.add_group("Y", Sectors::from_charges(&y_charges));
    let y = full.map(|p, q, v, out| {
        let (a, b) = pt_ad(p, q, d);
        let (x, rest, x2, rest2) = (a / inner, a % inner, b / inner, b % inner);
        for &(sigma, va) in &by_x[x] {
            for &(sigma2, vb) in &by_x[x2] {
                out.push((sigma * inner + rest, sigma2 * inner + rest2, va * v * vb.conj()));
            }
        }
    });
    lmi.add(gy, &y, 1.0);

    let gg = lmi.add_group("G", Sectors::from_charges(&sym.charges(d, &[-1, 1])));
    let mut g = full.map(|p, q, v, out| {
        if let Some((a, b)) = phi_contract(p, q, d) {
            out.push((a, b, v));
        }
    });
    g.add_matrix(Some(s), e2.matrix(), -1.0, 0.0);
    lmi.add(gg, &g, 1.0);

    let gs = lmi.add_group("s", Sectors::single(1));
    let mut se = Affine::new();
    se.push(Some(s), 0, 0, ONE);
    lmi.add(gs, &se, 1.0);

    if lmi.leak > 1e-8 {
        return Err(Error::Solver(format!("symmetry reduction dropped entries of size {:.2e}", lmi.leak)));
    }
    let block_sizes = lmi.block_sizes();
    let sol = lmi.solve(&opts.tolerances)?;
    accept(&sol)?;
    Ok(PptRun {
        s_star: sol.y[s],
        status: sol.status,
        solution: sol,
        block_sizes,
        d,
        support: sup,
        tolerances: opts.tolerances.clone(),
    })
}

impl PptRun {
    /// Reads a witness off the dual variables.
    ///
    /// With `Q`, `R`, `K` the multipliers of the `X`, `Y` and `G` blocks, stationarity in `X`
    /// makes `Q + R^{T_AD} + K ⊗ Φ` (compressed to the kept support) equal to `h ⊗ 1_B`, and
    /// `(Tr_D' h, -K)` separates the pair with value `s* - 1`. Off the support of `E1` the
    /// first operator is completed by a multiple of the kernel projector, which leaves the
    /// value on the probed pair untouched, plus the smallest identity shift that certifies it.
    pub fn witness(&self) -> Result<WitnessPair> {
        let d = self.d;
        let inner = d * d;
        let z = &self.solution.multipliers;
        let (q_red, r, k) = (&z[0], &z[1], &z[2]);
        if k.norm() < 1e-10 {
            return Err(Error::Solver("dual multiplier vanishes; no witness available".into()));
        }
        let sup = &self.support;
        let rank = sup.cols.len();
        // Isometry from the kept support (ρ) into A D.
        let p1 = CMat::from_fn(inner, rank, |x, rho| {
            sup.cols[rho].iter().find(|e| e.0 == x).map_or(C64::new(0.0, 0.0), |e| e.1)
        });
        // Pull R^{T_AD} + K ⊗ Φ back to the reduced space and add Q.
        let n = d.pow(4);
        // Undo the compression of the transposed block: R = (V̄ ⊗ 1) R̂ (V̄ ⊗ 1)^†.
        let vbar = CMat::from_fn(inner, rank, |x, sigma| {
            sup.units[sigma].iter().find(|e| e.0 == x).map_or(C64::new(0.0, 0.0), |e| e.1.conj())
        });
        let vlift = crate::linalg::kron(&vbar, &CMat::identity(inner, inner));
        let r = &vlift * r * vlift.adjoint();
        let mut full = CMat::zeros(n, n);
        for p in 0..n {
            for q in 0..n {
                let (a, b) = pt_ad(p, q, d);
                full[(a, b)] += r[(p, q)];
                if let Some((g1, g2)) = phi_contract(p, q, d) {
                    full[(p, q)] += k[(g1, g2)];
                }
            }
        }
        let lift = crate::linalg::kron(&p1, &CMat::identity(inner, inner));
        let h_red = q_red + lift.adjoint() * &full * &lift;
        let hb = partial_trace(&h_red, &[rank, d, d], 2)? / C64::new(d as f64, 0.0);
        let w1_red = partial_trace(&hb, &[rank, d], 1)?;
        // The support columns are orthogonal but scaled; map back with the pseudo-inverse.
        let gram_inv = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            rank,
            (0..rank).map(|c| C64::new(1.0 / p1.column(c).norm_squared(), 0.0)),
        ));
        let pinv = &gram_inv * p1.adjoint();
        let w1 = pinv.adjoint() * w1_red * &pinv;
        let kernel = CMat::identity(inner, inner) - &p1 * &pinv;
        let pair = WitnessPair::new(w1, -k.clone())?;
        repair_witness(&pair, &kernel, &self.tolerances)
    }
}

// ---------------------------------------------------------------------------------------------

/// Solves `max s` subject to `s E2 + (1 - s) G = K ∘ E1` with `K` and `G` channels.
pub fn markov_robustness(
    e1: &ChoiOperator,
    e2: &ChoiOperator,
    symmetry: &SymmetryChoice,
    tol: &Tolerances,
) -> Result<(f64, SolveStatus)> {
    let d = pair_dim(e1, e2)?;
    let sym = pick_symmetry(symmetry, &[e1, e2]);
    let sectors = Sectors::from_charges(&sym.charges(d, &[-1, 1]));
    let mut next = 0;
    let k = HermVar::with_partial_trace(&sectors, d, &CMat::identity(d, d), &mut next)?;
    let s = next;
    next += 1;
    let mut lmi = Lmi::new();
    lmi.set_vars(next);
    lmi.objective[s] = 1.0;
    let gk = lmi.add_group("K", sectors.clone());
    lmi.add(gk, &k.expr, 1.0);
    let e1m = e1.matrix();
    let mut g = k.expr.map(|p, q, v, out| {
        let (kk, b, l, b2) = (p / d, p % d, q / d, q % d);
        for a in 0..d {
            for a2 in 0..d {
                let f = e1m[(a * d + kk, a2 * d + l)];
                if f.norm() > 0.0 {
                    out.push((a * d + b, a2 * d + b2, f * v));
                }
            }
        }
    });
    g.add_matrix(Some(s), e2.matrix(), -1.0, 0.0);
    let gg = lmi.add_group("G", sectors);
    lmi.add(gg, &g, 1.0);
    let gs = lmi.add_group("s", Sectors::single(1));
    let mut se = Affine::new();
    se.push(Some(s), 0, 0, ONE);
    lmi.add(gs, &se, 1.0);
    let sol = lmi.solve(tol)?;
    accept(&sol)?;
    Ok((sol.y[s], sol.status))
}

fn verdict(kind: MemoryKind, r: f64) -> MemoryVerdict {
    MemoryVerdict { kind, margin: if kind == MemoryKind::Markovian { 0.0 } else { -r } }
}

/// Robustness of quantum memory of the pair `(E1, E2)` under the PPT relaxation.
///
/// The relaxation enlarges the classical future, so the returned `r*` is a lower bound on the
/// true robustness and any `r* > 0` certifies quantum memory. When memory is detected a witness
/// is read off the dual solution.
pub fn robustness_quantum_memory(e1: &ChoiOperator, e2: &ChoiOperator) -> Result<RobustnessResult> {
    robustness_quantum_memory_with(e1, e2, &PptOptions::default(), true)
}

pub fn robustness_quantum_memory_with(
    e1: &ChoiOperator,
    e2: &ChoiOperator,
    opts: &PptOptions,
    extract_witness: bool,
) -> Result<RobustnessResult> {
    let run = ppt_robustness(e1, e2, opts)?;
    let (s, r) = robustness_from_weight(run.s_star);
    if s < 1.0 - MEMBERSHIP_THRESHOLD {
        let dual_witness = if extract_witness { Some(run.witness()?) } else { None };
        return Ok(RobustnessResult {
            s_star: s,
            r_star: r,
            verdict: verdict(MemoryKind::QuantumMemory, r),
            status: run.status,
            dual_witness,
        });
    }
    let (sm, _) = markov_robustness(e1, e2, &opts.symmetry, &opts.tolerances)?;
    let (sm, rm) = robustness_from_weight(sm);
    let kind = if sm < 1.0 - MEMBERSHIP_THRESHOLD { MemoryKind::ClassicalNonMarkovian } else { MemoryKind::Markovian };
    Ok(RobustnessResult { s_star: s, r_star: r, verdict: verdict(kind, rm), status: run.status, dual_witness: None })
}

/// Robustness of Markovianity: how much noise `E2` tolerates before it is reachable from `E1`
/// by a single channel. A nonzero value is then resolved into classical or quantum memory.
pub fn robustness_markovianity(e1: &ChoiOperator, e2: &ChoiOperator) -> Result<RobustnessResult> {
    let opts = PptOptions::default();
    let (s, status) = markov_robustness(e1, e2, &opts.symmetry, &opts.tolerances)?;
    let (s, r) = robustness_from_weight(s);
    let kind = if s >= 1.0 - MEMBERSHIP_THRESHOLD {
        MemoryKind::Markovian
    } else {
        let q = ppt_robustness(e1, e2, &opts)?;
        if q.s_star < 1.0 - MEMBERSHIP_THRESHOLD {
            MemoryKind::QuantumMemory
        } else {
            MemoryKind::ClassicalNonMarkovian
        }
    };
    Ok(RobustnessResult { s_star: s, r_star: r, verdict: verdict(kind, r), status, dual_witness: None })
}

/// Solves a problem produced by [`build_ppt_membership`] and returns its mixing weight, or
/// `1` / `0` for feasible / infeasible pure membership problems.
pub fn solve_membership(problem: &SdpProblem, tol: &Tolerances) -> Result<(f64, SdpSolution)> {
    let sol = solve(problem, tol)?;
    let s = match membership_weight(&sol) {
        Some(s) => s,
        None => match sol.status {
            SolveStatus::Optimal => 1.0,
            SolveStatus::Infeasible => 0.0,
            other => return Err(Error::Solver(format!("membership problem ended with {other:?}"))),
        },
    };
    Ok((s, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::*;
    use crate::linalg::c;
    use crate::witness::evaluate_witness;

    fn ga2(a1: f64, a2: f64) -> (ChoiOperator, ChoiOperator) {
        let p = GiantAtom2LParams::new(40.0 * std::f64::consts::PI, 12.0);
        let e = |a: f64| channel_two_level(amplitude_c(rate_time_to_tau(a, p.amplitude_rate()), &p).unwrap()).unwrap();
        (e(a1), e(a2))
    }

    #[test]
    fn decaying_pair_is_markovian() {
        let e1 = channel_two_level(c(0.6, 0.2)).unwrap();
        let e2 = channel_two_level(c(0.3, -0.1)).unwrap();
        let r = robustness_quantum_memory(&e1, &e2).unwrap();
        assert!(r.r_star <= 1e-6);
        assert_eq!(r.verdict.kind, MemoryKind::Markovian);
        assert!(r.dual_witness.is_none());
        let m = robustness_markovianity(&e1, &e2).unwrap();
        assert!(m.r_star <= 1e-6);
    }

    #[test]
    fn fast_program_agrees_with_dense_form() {
        let (e1, e2) = ga2(5.9, 7.0);
        let fast = ppt_robustness(&e1, &e2, &PptOptions::default()).unwrap();
        let plain =
            ppt_robustness(&e1, &e2, &PptOptions { symmetry: SymmetryChoice::Off, ..Default::default() }).unwrap();
        let (dense, _) =
            solve_membership(&build_ppt_membership(&e1, &e2, true).unwrap(), &Tolerances::default()).unwrap();
        assert!((fast.s_star - dense).abs() < 1e-5, "{} vs {}", fast.s_star, dense);
        assert!((fast.s_star - plain.s_star).abs() < 1e-6);
        assert!(fast.s_star < 0.9);
    }

    #[test]
    fn revival_gives_verified_negative_witness() {
        let (e1, e2) = ga2(5.9, 7.0);
        let r = robustness_quantum_memory(&e1, &e2).unwrap();
        assert_eq!(r.verdict.kind, MemoryKind::QuantumMemory);
        let w = r.dual_witness.unwrap();
        let v = evaluate_witness(&w, &e1, &e2).unwrap();
        // The validity repair may add a tiny identity shift to W1.
        assert!(v < -0.1 && v <= -(1.0 - r.s_star) + 1e-5, "{v}");
        let cert =
            crate::witness::verify_witness(&w, crate::witness::VerifyMode::Extended, &Tolerances::default()).unwrap();
        assert!(cert.valid);
    }

    #[test]
    fn dephasing_revival_is_classical_but_not_markovian() {
        let e1 = dephasing_channel(c(0.2, 0.0)).unwrap();
        let e2 = dephasing_channel(c(0.0, -0.6)).unwrap();
        let q = robustness_quantum_memory(&e1, &e2).unwrap();
        assert!(q.r_star <= 1e-6);
        assert_eq!(q.verdict.kind, MemoryKind::ClassicalNonMarkovian);
        let m = robustness_markovianity(&e1, &e2).unwrap();
        assert!(m.r_star > 0.1);
        assert_eq!(m.verdict.kind, MemoryKind::ClassicalNonMarkovian);
    }

    #[test]
    fn identity_then_anything_is_markovian() {
        let e1 = ChoiOperator::identity(2);
        let e2 = channel_two_level(c(0.1, 0.7)).unwrap();
        let (s, _) = markov_robustness(&e1, &e2, &SymmetryChoice::Auto, &Tolerances::default()).unwrap();
        assert!(s > 1.0 - 1e-6);
    }

    #[test]
    fn robustness_from_weight_edges() {
        assert_eq!(robustness_from_weight(1.0 - 1e-12), (1.0, 0.0));
        let (s, r) = robustness_from_weight(0.8);
        assert!((s - 0.8).abs() < 1e-15 && (r - 0.25).abs() < 1e-12);
    }

    #[test]
    fn three_level_revival_detected() {
        let p = GiantAtom3LParams::new(40.0 * std::f64::consts::PI, 20.0 * std::f64::consts::PI, 4.0, 8.0);
        let e = |a: f64| three_level_state(rate_time_to_tau(a, p.amplitude_rate()), &p).unwrap().channel().unwrap();
        let run = ppt_robustness(&e(5.9), &e(7.0), &PptOptions::default()).unwrap();
        assert!(run.s_star < 0.95 && run.s_star > 0.9, "{}", run.s_star);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let e1 = ChoiOperator::identity(2);
        let e2 = ChoiOperator::identity(3);
        assert!(ppt_robustness(&e1, &e2, &PptOptions::default()).is_err());
    }
}
