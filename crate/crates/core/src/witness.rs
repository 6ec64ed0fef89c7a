//! Linear witnesses of quantum memory: a pair `(W1, W2)` with `tr(W1 E1) + tr(W2 E2) >= 0` for
//! every pair of channels whose second member lies in the (PPT-relaxed) classical future of
//! the first.
//!
//! A pair is certified valid by exhibiting `R >= 0` and `H` on `A D D'` with `Tr_D' H = W1` such
//! that `H ⊗ 1_B + W2 ⊗ Φ - R^{T_AD} >= 0`. The strict form fixes `H = W1 ⊗ 1 / d`.

use crate::channel::{apply_channel, ChoiOperator};
use crate::error::{dim_err, invalid, Error, Result};
use crate::linalg::{c, hermitian_part, hermiticity_defect, kron, pauli, trace_product, CMat, C64, ONE, ZERO};
use crate::sdp::lmi::{Affine, HermVar, Lmi};
use crate::sdp::programs::{phi_contract, ppt_robustness, pt_ad, PptOptions, PptRun, MEMBERSHIP_THRESHOLD};
use crate::sdp::sectors::{PhaseSymmetry, Sectors};
use crate::sdp::{SolveStatus, Tolerances};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WitnessJson", into = "WitnessJson")]
pub struct WitnessPair {
    pub w1: CMat,
    pub w2: CMat,
}

#[derive(Serialize, Deserialize)]
struct WitnessJson {
    dim: usize,
    w1_re: Vec<Vec<f64>>,
    w1_im: Vec<Vec<f64>>,
    w2_re: Vec<Vec<f64>>,
    w2_im: Vec<Vec<f64>>,
}

fn rows(m: &CMat, f: impl Fn(C64) -> f64) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| f(m[(r, c)])).collect()).collect()
}

fn from_rows(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<CMat> {
    let n = re.len();
    if im.len() != n || re.iter().chain(im).any(|r| r.len() != n) {
        return dim_err("witness matrix parts must be square and of equal size");
    }
    Ok(CMat::from_fn(n, n, |r, cc| c(re[r][cc], im[r][cc])))
}

impl From<WitnessPair> for WitnessJson {
    fn from(w: WitnessPair) -> Self {
        WitnessJson {
            dim: w.dim(),
            w1_re: rows(&w.w1, |z| z.re),
            w1_im: rows(&w.w1, |z| z.im),
            w2_re: rows(&w.w2, |z| z.re),
            w2_im: rows(&w.w2, |z| z.im),
        }
    }
}

impl TryFrom<WitnessJson> for WitnessPair {
    type Error = Error;
    fn try_from(j: WitnessJson) -> Result<Self> {
        let w = WitnessPair::new(from_rows(&j.w1_re, &j.w1_im)?, from_rows(&j.w2_re, &j.w2_im)?)?;
        if w.dim() != j.dim {
            return dim_err(format!("witness declares dim {} but matrices have local dimension {}", j.dim, w.dim()));
        }
        Ok(w)
    }
}

impl WitnessPair {
    /// Both operators live on `C^d ⊗ C^d`; slightly non-Hermitian input is symmetrized.
    pub fn new(w1: CMat, w2: CMat) -> Result<Self> {
        let n = w1.nrows();
        let d = (n as f64).sqrt().round() as usize;
        if d * d != n || !w1.is_square() || w2.shape() != w1.shape() || d < 2 {
            return dim_err(format!(
                "witness operators must both be d^2 x d^2, got {:?} and {:?}",
                w1.shape(),
                w2.shape()
            ));
        }
        let scale = 1.0 + w1.norm().max(w2.norm());
        for w in [&w1, &w2] {
            if hermiticity_defect(w) > 1e-9 * scale {
                return invalid("witness operators must be Hermitian");
            }
        }
        Ok(Self { w1: hermitian_part(&w1), w2: hermitian_part(&w2) })
    }

    pub fn dim(&self) -> usize {
        (self.w1.nrows() as f64).sqrt().round() as usize
    }

    /// `(W1 + t 1, W2)`: raises the value on every pair by `t d`.
    pub fn shifted(&self, t: f64) -> Self {
        let n = self.w1.nrows();
        Self { w1: &self.w1 + CMat::identity(n, n) * c(t, 0.0), w2: self.w2.clone() }
    }

    pub fn trace_sum(&self) -> f64 {
        self.w1.trace().re + self.w2.trace().re
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("witness serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

pub fn evaluate_witness(w: &WitnessPair, e1: &ChoiOperator, e2: &ChoiOperator) -> Result<f64> {
    let n = w.w1.nrows();
    for e in [e1, e2] {
        if e.matrix().nrows() != n || e.dim_in() != e.dim_out() {
            return dim_err(format!("witness acts on dimension {n}, channel Choi is {}", e.matrix().nrows()));
        }
    }
    Ok(trace_product(&w.w1, e1.matrix()) + trace_product(&w.w2, e2.matrix()))
}

// ---------------------------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerifyMode {
    Strict,
    Extended,
}

#[derive(Clone, Debug)]
pub struct WitnessCertificate {
    pub valid: bool,
    /// Smallest `t` making `(W1 + t 1, W2)` certifiable; nonpositive for valid witnesses.
    pub shift: f64,
    pub q: CMat,
    pub r: CMat,
    pub status: SolveStatus,
}

/// Tolerance on the certified shift.
pub const VALIDITY_TOL: f64 = 1e-8;

struct Validity {
    r: HermVar,
    q: Affine,
}

/// Adds the certificate constraints for an affine witness `(W1(y), W2(y))` to `lmi`.
fn add_validity(
    lmi: &mut Lmi,
    d: usize,
    sym: &PhaseSymmetry,
    w1: &Affine,
    w2: &Affine,
    mode: VerifyMode,
    next: &mut usize,
) -> Result<Validity> {
    let n2 = d * d;
    let r = HermVar::free(&Sectors::from_charges(&sym.charges(d, &[1, -1, -1, 1])), next);
    let h = match mode {
        VerifyMode::Strict => w1.map(|x, x2, v, out| {
            for dp in 0..d {
                out.push((x * d + dp, x2 * d + dp, v / d as f64));
            }
        }),
        VerifyMode::Extended => {
            let hs = Sectors::from_charges(&sym.charges(d, &[-1, 1, -1]));
            let mut h = HermVar::with_partial_trace(&hs, d, &CMat::zeros(n2, n2), next)?.expr;
            h.extend_scaled(&w1.map(|x, x2, v, out| out.push((x * d + d - 1, x2 * d + d - 1, v))), 1.0);
            h
        }
    };
    let mut q = h.map(|p, p2, v, out| {
        for b in 0..d {
            out.push((p * d + b, p2 * d + b, v));
        }
    });
    q.extend_scaled(
        &w2.map(|g, g2, v, out| {
            let (a, b, a2, b2) = (g / d, g % d, g2 / d, g2 % d);
            for dl in 0..d {
                for dl2 in 0..d {
                    let p = ((a * d + dl) * d + dl) * d + b;
                    let pq = ((a2 * d + dl2) * d + dl2) * d + b2;
                    out.push((p, pq, v));
                }
            }
        }),
        1.0,
    );
    q.extend_scaled(
        &r.expr.map(|p, p2, v, out| {
            let (a, b) = pt_ad(p, p2, d);
            out.push((a, b, v));
        }),
        -1.0,
    );
    lmi.set_vars(*next);
    let gr = lmi.add_group("R", Sectors::from_charges(&sym.charges(d, &[1, -1, -1, 1])));
    lmi.add(gr, &r.expr, 1.0);
    let gq = lmi.add_group("Q", Sectors::from_charges(&sym.charges(d, &[-1, 1, -1, 1])));
    lmi.add(gq, &q, 1.0);
    debug_assert!(phi_contract(0, 0, d).is_some());
    Ok(Validity { r, q })
}

/// Finds the smallest shift `t` for which `(W1 + t 1, W2)` has a validity certificate.
pub fn verify_witness(w: &WitnessPair, mode: VerifyMode, tol: &Tolerances) -> Result<WitnessCertificate> {
    Ok(shift_program(w, None, mode, tol)?.0)
}

/// Makes `w` valid with as little change as possible on pairs whose first channel is
/// supported away from `kernel`: `W1` gains `mu * kernel` (free) and then `t 1` (minimal).
pub fn repair_witness(w: &WitnessPair, kernel: &CMat, tol: &Tolerances) -> Result<WitnessPair> {
    let use_kernel = kernel.norm() > 1e-12;
    let (cert, mu) = shift_program(w, use_kernel.then_some(kernel), VerifyMode::Extended, tol)?;
    let w1 = &w.w1 + kernel * c(mu, 0.0);
    Ok(WitnessPair::new(w1, w.w2.clone())?.shifted(cert.shift.max(0.0)))
}

fn shift_program(
    w: &WitnessPair,
    kernel: Option<&CMat>,
    mode: VerifyMode,
    tol: &Tolerances,
) -> Result<(WitnessCertificate, f64)> {
    let d = w.dim();
    let mut ops = vec![&w.w1, &w.w2];
    ops.extend(kernel);
    let sym = PhaseSymmetry::detect_operators(d, &ops, 1e-12);
    let mut lmi = Lmi::new();
    let mut next = 0;
    let t = next;
    next += 1;
    let mut w1 = Affine::constant(&w.w1, 0.0);
    for x in 0..d * d {
        w1.push(Some(t), x, x, ONE);
    }
    let mu = kernel.map(|k| {
        let v = next;
        next += 1;
        w1.add_matrix(Some(v), k, 1.0, 1e-14);
        v
    });
    let w2 = Affine::constant(&w.w2, 0.0);
    let v = add_validity(&mut lmi, d, &sym, &w1, &w2, mode, &mut next)?;
    lmi.objective[t] = -1.0;
    if lmi.leak > 1e-9 {
        return Err(Error::Solver(format!("witness symmetry reduction dropped entries of size {:.2e}", lmi.leak)));
    }
    let sol = lmi.solve(tol)?;
    if sol.status == SolveStatus::Infeasible {
        return Err(Error::Solver("validity program reported infeasible".into()));
    }
    let shift = sol.y[t];
    let n = d.pow(4);
    let cert = WitnessCertificate {
        valid: shift <= VALIDITY_TOL,
        shift,
        q: hermitian_part(&v.q.evaluate(&sol.y, n)),
        r: v.r.value(&sol.y),
        status: sol.status,
    };
    Ok((cert, mu.map_or(0.0, |m| sol.y[m])))
}

/// Witness read off the dual of a PPT robustness run that detected memory.
pub fn extract_witness_from_dual(run: &PptRun) -> Result<WitnessPair> {
    if run.s_star >= 1.0 - MEMBERSHIP_THRESHOLD {
        return invalid(format!("no memory detected (s* = {:.9}); the dual carries no witness", run.s_star));
    }
    run.witness()
}

/// Solves the robustness program and extracts its witness.
pub fn witness_for_pair(e1: &ChoiOperator, e2: &ChoiOperator) -> Result<(PptRun, WitnessPair)> {
    let run = ppt_robustness(e1, e2, &PptOptions::default())?;
    let w = extract_witness_from_dual(&run)?;
    Ok((run, w))
}

// ---------------------------------------------------------------------------------------------

/// Operators used as preparations and measurements; the witness is assembled as
/// `W_α = sum_ij w^α_ij ρ_i^T ⊗ O_j` over the entries `(α, i, j)` of the mask (α ∈ {0, 1}).
#[derive(Clone, Debug)]
pub struct RestrictedBasis {
    pub preparations: Vec<CMat>,
    pub observables: Vec<CMat>,
    pub mask: Vec<(usize, usize, usize)>,
}

impl RestrictedBasis {
    pub fn new(preparations: Vec<CMat>, observables: Vec<CMat>, mut mask: Vec<(usize, usize, usize)>) -> Result<Self> {
        let Some(first) = preparations.first() else {
            return invalid("basis needs at least one preparation");
        };
        let d = first.nrows();
        for m in preparations.iter().chain(&observables) {
            if m.nrows() != d || m.ncols() != d {
                return dim_err("basis operators must share one dimension");
            }
            if hermiticity_defect(m) > 1e-12 {
                return invalid("basis operators must be Hermitian");
            }
        }
        mask.sort_unstable();
        mask.dedup();
        if mask.is_empty() {
            return invalid("mask is empty");
        }
        if mask.iter().any(|&(a, i, j)| a > 1 || i >= preparations.len() || j >= observables.len()) {
            return invalid("mask entry out of range");
        }
        Ok(Self { preparations, observables, mask })
    }

    pub fn full(preparations: Vec<CMat>, observables: Vec<CMat>) -> Result<Self> {
        let (np, no) = (preparations.len(), observables.len());
        let mask = (0..2).flat_map(|a| (0..np).flat_map(move |i| (0..no).map(move |j| (a, i, j)))).collect();
        Self::new(preparations, observables, mask)
    }

    /// Raw Pauli operators, identity first. The tables feed `sigma_i^T` into the channel, so the
    /// preparations are the transposed Paulis and the assembled operators are `sigma_i ⊗ sigma_j`.
    pub fn pauli() -> Self {
        let p: Vec<CMat> = (0..4).map(pauli).collect();
        let preps = p.iter().map(|m| m.transpose()).collect();
        Self::full(preps, p).expect("pauli basis is valid")
    }

    /// Projectors onto the eleven qutrit states built from the levels `g, s, e`: the three
    /// levels and the superpositions of `g` or `s` with `e` with relative phases `±1, ±i`.
    /// As for the Pauli basis the channel receives the transposed projector.
    pub fn qutrit_states() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = |a: [C64; 3]| nalgebra::DVector::from_column_slice(&a);
        let (o, z, i) = (ONE, ZERO, c(0.0, 1.0));
        let kets = [
            v([o, z, z]),
            v([z, o, z]),
            v([z, z, o]),
            v([o * s, z, o * s]),
            v([z, o * s, o * s]),
            v([o * s, z, -o * s]),
            v([z, o * s, -o * s]),
            v([o * s, z, i * s]),
            v([o * s, z, -i * s]),
            v([z, o * s, i * s]),
            v([z, o * s, -i * s]),
        ];
        let p: Vec<CMat> = kets.iter().map(|k| k * k.adjoint()).collect();
        let preps = p.iter().map(|m| m.transpose()).collect();
        Self::full(preps, p).expect("qutrit basis is valid")
    }

    pub fn dim(&self) -> usize {
        self.preparations[0].nrows()
    }

    pub fn operator(&self, i: usize, j: usize) -> CMat {
        kron(&self.preparations[i].transpose(), &self.observables[j])
    }

    pub fn with_mask(&self, mask: Vec<(usize, usize, usize)>) -> Result<Self> {
        Self::new(self.preparations.clone(), self.observables.clone(), mask)
    }
}

/// Coefficient tables, rows indexed by preparation and columns by measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessCoefficients {
    pub w: [Vec<Vec<f64>>; 2],
    pub normalization: f64,
}

fn parse_table(s: &str) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(s.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let row = rec
            .iter()
            .map(|x| x.parse::<f64>().map_err(|e| Error::Parse(format!("{x:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        out.push(row);
    }
    Ok(out)
}

impl WitnessCoefficients {
    pub fn zeros(preparations: usize, observables: usize) -> Self {
        Self {
            w: [vec![vec![0.0; observables]; preparations], vec![vec![0.0; observables]; preparations]],
            normalization: 0.0,
        }
    }

    pub fn from_csv(first: &str, second: &str) -> Result<Self> {
        let w = [parse_table(first)?, parse_table(second)?];
        let shape = |t: &Vec<Vec<f64>>| (t.len(), t.first().map_or(0, |r| r.len()));
        if shape(&w[0]) != shape(&w[1]) || w.iter().flatten().any(|r| r.len() != shape(&w[0]).1) {
            return dim_err("coefficient tables must be rectangular and of equal shape");
        }
        let mut out = Self { w, normalization: 0.0 };
        out.normalization = out.sum();
        Ok(out)
    }

    pub fn to_csv(&self, alpha: usize) -> String {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for row in &self.w[alpha] {
            wtr.write_record(row.iter().map(|x| format!("{x:.6}"))).expect("in-memory csv");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory csv")).expect("utf8 csv")
    }

    pub fn sum(&self) -> f64 {
        self.w.iter().flatten().flatten().sum()
    }

    /// Published two-level tables (Pauli basis).
    pub fn qubit_tables() -> Self {
        Self::from_csv(include_str!("../fixtures/qubit_w1.csv"), include_str!("../fixtures/qubit_w2.csv"))
            .expect("shipped qubit tables parse")
    }

    /// Published three-level tables (eleven-state basis).
    pub fn qutrit_tables() -> Self {
        Self::from_csv(include_str!("../fixtures/qutrit_w1.csv"), include_str!("../fixtures/qutrit_w2.csv"))
            .expect("shipped qutrit tables parse")
    }

    /// Mask of the nonzero entries.
    pub fn support(&self) -> Vec<(usize, usize, usize)> {
        let mut m = Vec::new();
        for (a, t) in self.w.iter().enumerate() {
            for (i, row) in t.iter().enumerate() {
                for (j, &x) in row.iter().enumerate() {
                    if x != 0.0 {
                        m.push((a, i, j));
                    }
                }
            }
        }
        m
    }
}

pub fn assemble_from_coefficients(coeffs: &WitnessCoefficients, basis: &RestrictedBasis) -> Result<WitnessPair> {
    let (np, no) = (basis.preparations.len(), basis.observables.len());
    if coeffs.w.iter().any(|t| t.len() != np || t.iter().any(|r| r.len() != no)) {
        return dim_err(format!("coefficients must be {np}x{no} per time point"));
    }
    let allowed: std::collections::HashSet<_> = basis.mask.iter().copied().collect();
    let d = basis.dim();
    let mut w = [CMat::zeros(d * d, d * d), CMat::zeros(d * d, d * d)];
    for (a, t) in coeffs.w.iter().enumerate() {
        for (i, row) in t.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                if !allowed.contains(&(a, i, j)) {
                    return invalid(format!("coefficient ({a}, {i}, {j}) lies outside the mask"));
                }
                w[a] += basis.operator(i, j) * c(x, 0.0);
            }
        }
    }
    let [w1, w2] = w;
    WitnessPair::new(w1, w2)
}

/// `sum w^α_ij tr(O_j E_α(ρ_i))`, evaluated by applying the channels directly.
pub fn coefficient_form_value(
    coeffs: &WitnessCoefficients,
    basis: &RestrictedBasis,
    e1: &ChoiOperator,
    e2: &ChoiOperator,
) -> Result<f64> {
    let mut total = 0.0;
    for (a, e) in [e1, e2].into_iter().enumerate() {
        for (i, row) in coeffs.w[a].iter().enumerate() {
            let out = apply_channel(e, &basis.preparations[i])?;
            for (j, &x) in row.iter().enumerate() {
                if x != 0.0 {
                    total += x * trace_product(&basis.observables[j], &out);
                }
            }
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Normalization {
    /// Fixes `tr W1 + tr W2`.
    TraceSum(f64),
    /// Fixes the sum of all coefficients.
    CoeffSum(f64),
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    /// Average over diagonal phase symmetries shared by the channels and the basis.
    pub symmetry: bool,
    pub tolerances: Tolerances,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { symmetry: true, tolerances: Tolerances::default() }
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub coefficients: WitnessCoefficients,
    pub witness: WitnessPair,
    pub value: f64,
    pub normalized_value: f64,
    pub status: SolveStatus,
    pub orbits: usize,
}

/// Position of `m` among `set` up to `1e-9`, if present.
fn find(set: &[CMat], m: &CMat) -> Option<usize> {
    set.iter().position(|x| (x - m).norm() < 1e-9)
}

/// Orbits of mask entries under the phase generators that permute the basis.
fn mask_orbits(basis: &RestrictedBasis, sym: &PhaseSymmetry) -> (PhaseSymmetry, Vec<Vec<(usize, usize, usize)>>) {
    let mut kept = PhaseSymmetry::trivial();
    let mut perms: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for g in 0..sym.weights.len() {
        let u = sym.unitary(g);
        let act =
            |set: &[CMat]| -> Option<Vec<usize>> { set.iter().map(|m| find(set, &(&u * m * u.adjoint()))).collect() };
        if let (Some(pp), Some(po)) = (act(&basis.preparations), act(&basis.observables)) {
            let closed = basis.mask.iter().all(|&(a, i, j)| basis.mask.binary_search(&(a, pp[i], po[j])).is_ok());
            if closed {
                kept = kept.combine(PhaseSymmetry::generator(
                    sym.weights[g].clone(),
                    if sym.moduli[g] > 0 { sym.moduli[g] } else { 4 },
                ));
                perms.push((pp, po));
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    let mut orbits = Vec::new();
    for &e in &basis.mask {
        if seen.contains(&e) {
            continue;
        }
        let mut orbit = vec![e];
        seen.insert(e);
        let mut k = 0;
        while k < orbit.len() {
            let (a, i, j) = orbit[k];
            for (pp, po) in &perms {
                let f = (a, pp[i], po[j]);
                if seen.insert(f) {
                    orbit.push(f);
                }
            }
            k += 1;
        }
        orbits.push(orbit);
    }
    (kept, orbits)
}

/// Minimizes the witness value on `(E1, E2)` over coefficients supported on the mask,
/// subject to validity and the chosen normalization.
pub fn restricted_witness_search(
    e1: &ChoiOperator,
    e2: &ChoiOperator,
    basis: &RestrictedBasis,
    normalization: Normalization,
    opts: &SearchOptions,
) -> Result<SearchResult> {
    let d = basis.dim();
    for e in [e1, e2] {
        if e.dim_in() != d || e.dim_out() != d {
            return dim_err(format!("basis dimension {d} does not match channel {}->{}", e.dim_in(), e.dim_out()));
        }
    }
    let sym = if opts.symmetry { PhaseSymmetry::detect(&[e1, e2], 1e-10) } else { PhaseSymmetry::trivial() };
    let (sym, orbits) = mask_orbits(basis, &sym);
    let ops: Vec<(usize, CMat)> = orbits
        .iter()
        .map(|o| {
            let mut m = CMat::zeros(d * d, d * d);
            for &(_, i, j) in o {
                m += basis.operator(i, j);
            }
            (o[0].0, m)
        })
        .collect();

    // Drop orbit operators that are linear combinations of earlier ones within each time point.
    let mut kept: Vec<usize> = Vec::new();
    for alpha in 0..2 {
        let mut q: Vec<CMat> = Vec::new();
        for (k, (a, m)) in ops.iter().enumerate() {
            if *a != alpha {
                continue;
            }
            let mut r = m.clone();
            for b in &q {
                let proj = b.dotc(&r);
                r -= b * proj;
            }
            let nr = r.norm();
            if nr > 1e-9 * m.norm().max(1.0) {
                q.push(r / c(nr, 0.0));
                kept.push(k);
            }
        }
    }

    let (target, weight): (f64, Vec<f64>) = match normalization {
        Normalization::TraceSum(v) => (v, ops.iter().map(|(_, m)| m.trace().re).collect()),
        Normalization::CoeffSum(v) => (v, orbits.iter().map(|o| o.len() as f64).collect()),
    };
    let pivot = kept
        .iter()
        .copied()
        .max_by(|&a, &b| weight[a].abs().total_cmp(&weight[b].abs()))
        .filter(|&k| weight[k].abs() > 1e-12)
        .ok_or_else(|| Error::Invalid("normalization cannot be met by any allowed coefficient".into()))?;
    let lam: Vec<f64> =
        ops.iter().map(|(a, m)| trace_product(m, if *a == 0 { e1.matrix() } else { e2.matrix() })).collect();

    let mut lmi = Lmi::new();
    let mut next = 0;
    let free: Vec<usize> = kept.iter().copied().filter(|&k| k != pivot).collect();
    let vars: Vec<usize> = free
        .iter()
        .map(|_| {
            next += 1;
            next - 1
        })
        .collect();
    let mut w = [Affine::new(), Affine::new()];
    let base = target / weight[pivot];
    w[ops[pivot].0].add_matrix(None, &ops[pivot].1, base, 0.0);
    let mut objective = Vec::with_capacity(free.len());
    for (&k, &v) in free.iter().zip(&vars) {
        let ratio = weight[k] / weight[pivot];
        w[ops[k].0].add_matrix(Some(v), &ops[k].1, 1.0, 0.0);
        if ratio != 0.0 {
            w[ops[pivot].0].add_matrix(Some(v), &ops[pivot].1, -ratio, 0.0);
        }
        objective.push(lam[k] - ratio * lam[pivot]);
    }
    let [w1, w2] = w;
    add_validity(&mut lmi, d, &sym, &w1, &w2, VerifyMode::Extended, &mut next)?;
    for (&v, &o) in vars.iter().zip(&objective) {
        lmi.objective[v] = -o;
    }
    if lmi.leak > 1e-9 {
        return Err(Error::Solver(format!("search symmetry reduction dropped entries of size {:.2e}", lmi.leak)));
    }
    let sol = lmi.solve(&opts.tolerances)?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::MaxIter | SolveStatus::NumericalTrouble => {}
        SolveStatus::Infeasible => return Err(Error::Invalid("no valid witness meets the normalization".into())),
    }

    let mut coefficients = WitnessCoefficients::zeros(basis.preparations.len(), basis.observables.len());
    let mut value_of = vec![0.0; ops.len()];
    let mut pivot_value = base;
    for (&k, &v) in free.iter().zip(&vars) {
        value_of[k] = sol.y[v];
        pivot_value -= weight[k] / weight[pivot] * sol.y[v];
    }
    value_of[pivot] = pivot_value;
    for (o, &x) in orbits.iter().zip(&value_of) {
        for &(a, i, j) in o {
            coefficients.w[a][i][j] = x;
        }
    }
    coefficients.normalization = target;
    let witness = assemble_from_coefficients(&coefficients, basis)?;
    let value = evaluate_witness(&witness, e1, e2)?;
    let normalized_value = value / witness.trace_sum();
    Ok(SearchResult { coefficients, witness, value, normalized_value, status: sol.status, orbits: kept.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::channel_two_level;
    use crate::random::{random_cptp, random_hermitian, random_state, rng};

    #[test]
    fn json_round_trip() {
        let mut g = rng(3);
        let w = WitnessPair::new(random_hermitian(4, &mut g), random_hermitian(4, &mut g)).unwrap();
        let back = WitnessPair::from_json(&w.to_json()).unwrap();
        assert!((back.w1 - &w.w1).norm() < 1e-15 && (back.w2 - &w.w2).norm() < 1e-15);
        assert!(WitnessPair::from_json(r#"{"dim":3,"w1_re":[[1]],"w1_im":[[0]],"w2_re":[[1]],"w2_im":[[0]]}"#).is_err());
    }

    #[test]
    fn transpose_identity() {
        let mut g = rng(11);
        for d in [2, 3] {
            let e = random_cptp(d, d, d, &mut g);
            let rho = random_state(d, &mut g);
            let o = random_hermitian(d, &mut g);
            let lhs = trace_product(&kron(&rho.transpose(), &o), e.matrix());
            let rhs = trace_product(&o, &apply_channel(&e, &rho).unwrap());
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn positive_pair_is_valid_and_negative_phi_is_not() {
        let tol = Tolerances::default();
        let ok = WitnessPair::new(CMat::identity(4, 4) * c(0.25, 0.0), CMat::zeros(4, 4)).unwrap();
        for mode in [VerifyMode::Strict, VerifyMode::Extended] {
            let cert = verify_witness(&ok, mode, &tol).unwrap();
            assert!(cert.valid, "{mode:?} shift {}", cert.shift);
            assert!(crate::linalg::min_eigenvalue(&cert.r) > -1e-7);
            assert!(crate::linalg::min_eigenvalue(&cert.q) > -1e-7);
        }
        let bad = WitnessPair::new(CMat::zeros(4, 4), -crate::linalg::phi_plus(2)).unwrap();
        assert!(!verify_witness(&bad, VerifyMode::Extended, &tol).unwrap().valid);
        let id = ChoiOperator::identity(2);
        assert!(evaluate_witness(&bad, &id, &id).unwrap() < 0.0);
    }

    #[test]
    fn single_coefficient_assembles_to_identity_product() {
        let basis = RestrictedBasis::pauli();
        let mut co = WitnessCoefficients::zeros(4, 4);
        co.w[0][0][0] = 1.0;
        let w = assemble_from_coefficients(&co, &basis).unwrap();
        assert!((w.w1 - CMat::identity(4, 4)).norm() < 1e-15);
        assert!(w.w2.norm() == 0.0);
        let narrow = basis.with_mask(vec![(1, 0, 0)]).unwrap();
        assert!(assemble_from_coefficients(&co, &narrow).is_err());
    }

    #[test]
    fn coefficient_form_matches_operator_form() {
        let mut g = rng(5);
        for basis in [RestrictedBasis::pauli(), RestrictedBasis::qutrit_states()] {
            let d = basis.dim();
            let n = basis.preparations.len();
            let mut co = WitnessCoefficients::zeros(n, n);
            for t in co.w.iter_mut() {
                for row in t.iter_mut() {
                    for x in row.iter_mut() {
                        *x = crate::random::unit_disk(&mut g).re;
                    }
                }
            }
            let w = assemble_from_coefficients(&co, &basis).unwrap();
            let e1 = random_cptp(d, d, 2, &mut g);
            let e2 = random_cptp(d, d, 3, &mut g);
            let a = evaluate_witness(&w, &e1, &e2).unwrap();
            let b = coefficient_form_value(&co, &basis, &e1, &e2).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn shipped_tables_parse() {
        let q = WitnessCoefficients::qubit_tables();
        assert_eq!(q.support().len(), 12);
        let w = assemble_from_coefficients(&q, &RestrictedBasis::pauli()).unwrap();
        assert!((w.trace_sum() - 4.0 * (1.012 + 0.659)).abs() < 1e-12);
        let t = WitnessCoefficients::qutrit_tables();
        assert!((t.sum() - 27.033).abs() < 1e-9);
        let w3 = assemble_from_coefficients(&t, &RestrictedBasis::qutrit_states()).unwrap();
        assert!((w3.trace_sum() - t.sum()).abs() < 1e-9);
        let csv = q.to_csv(1);
        assert!(csv.starts_with("0.659000,0.000000,0.000000,-0.598000"));
    }

    #[test]
    fn qutrit_orbits_use_the_phase_group() {
        let basis = RestrictedBasis::qutrit_states();
        let sym = PhaseSymmetry::torus(3);
        let (kept, orbits) = mask_orbits(&basis, &sym);
        assert_eq!(kept.weights.len(), 3);
        assert_eq!(orbits.len(), 2 * 31);
        assert_eq!(orbits.iter().map(|o| o.len()).sum::<usize>(), basis.mask.len());
        let e = channel_two_level(c(0.3, 0.2)).unwrap();
        assert!(!PhaseSymmetry::detect(&[&e], 1e-12).is_trivial());
    }
}
