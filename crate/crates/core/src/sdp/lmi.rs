//! Linear matrix inequalities in the form `maximize b.y  s.t.  F0 + sum_i y_i F_i >= 0`,
//! assembled block by block and handed to the standard-form solver as its dual.
//!
//! Affine Hermitian expressions are kept as lists of full-matrix entries so that entrywise
//! maps (partial transposes, contractions, embeddings) can be applied term by term.

use super::problem::{Equality, HermSparse, LinearTerm, SdpProblem, SdpSolution, SolveStatus, Tolerances};
use super::sectors::Sectors;
use super::solver::solve;
use crate::error::{dim_err, Result};
use crate::linalg::{CMat, C64, I, ONE};
use std::collections::BTreeMap;

/// One full-matrix entry of an affine expression; `var == None` is the constant part.
#[derive(Clone, Copy, Debug)]
pub struct Term {
    pub var: Option<usize>,
    pub p: usize,
    pub q: usize,
    pub v: C64,
}

#[derive(Clone, Debug, Default)]
pub struct Affine {
    pub terms: Vec<Term>,
}

impl Affine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(m: &CMat, tol: f64) -> Self {
        let mut a = Self::new();
        a.add_matrix(None, m, 1.0, tol);
        a
    }

    pub fn push(&mut self, var: Option<usize>, p: usize, q: usize, v: C64) {
        self.terms.push(Term { var, p, q, v });
    }

    pub fn add_matrix(&mut self, var: Option<usize>, m: &CMat, scale: f64, tol: f64) {
        for q in 0..m.ncols() {
            for p in 0..m.nrows() {
                let v = m[(p, q)];
                if v.norm() > tol {
                    self.push(var, p, q, v * scale);
                }
            }
        }
    }

    pub fn extend_scaled(&mut self, other: &Affine, scale: f64) {
        self.terms.extend(other.terms.iter().map(|t| Term { v: t.v * scale, ..*t }));
    }

    /// Applies a linear map given entrywise: each input entry `(p, q, v)` emits output entries.
    pub fn map(&self, mut f: impl FnMut(usize, usize, C64, &mut Vec<(usize, usize, C64)>)) -> Affine {
        let mut out = Affine::new();
        let mut buf = Vec::new();
        for t in &self.terms {
            buf.clear();
            f(t.p, t.q, t.v, &mut buf);
            out.terms.extend(buf.iter().map(|&(p, q, v)| Term { var: t.var, p, q, v }));
        }
        out
    }

    /// Value of the expression at `y`, as a dense `n x n` matrix.
    pub fn evaluate(&self, y: &[f64], n: usize) -> CMat {
        let mut m = CMat::zeros(n, n);
        for t in &self.terms {
            let w = match t.var {
                Some(k) => y[k],
                None => 1.0,
            };
            m[(t.p, t.q)] += t.v * w;
        }
        m
    }
}

/// Hermitian matrix variable that is block diagonal over `sectors`, optionally with its
/// partial trace over the last tensor factor (of dimension `last`) pinned to a given matrix.
#[derive(Clone, Debug)]
pub struct HermVar {
    pub dim: usize,
    pub expr: Affine,
    pub vars: std::ops::Range<usize>,
}

impl HermVar {
    pub fn free(sectors: &Sectors, next_var: &mut usize) -> Self {
        Self::build(sectors, None, next_var)
    }

    /// `fixed` lives on the space with the last factor removed and must respect the sectors.
    pub fn with_partial_trace(sectors: &Sectors, last: usize, fixed: &CMat, next_var: &mut usize) -> Result<Self> {
        if sectors.dim() != fixed.nrows() * last || !fixed.is_square() {
            return dim_err(format!(
                "pinned partial trace is {}x{} but the variable has dimension {} with last factor {}",
                fixed.nrows(),
                fixed.ncols(),
                sectors.dim(),
                last
            ));
        }
        Ok(Self::build(sectors, Some((last, fixed)), next_var))
    }

    fn build(sectors: &Sectors, pinned: Option<(usize, &CMat)>, next_var: &mut usize) -> Self {
        let start = *next_var;
        let mut expr = Affine::new();
        let emit = |var: Option<usize>, p: usize, q: usize, v: C64, expr: &mut Affine| {
            expr.push(var, p, q, v);
            if p != q {
                expr.push(var, q, p, v.conj());
            }
            if let (Some((last, _)), Some(_)) = (pinned, var) {
                let (bp, bq) = (p % last, q % last);
                if bp == bq {
                    let (pp, qq) = (p - bp + last - 1, q - bq + last - 1);
                    expr.push(var, pp, qq, -v);
                    if pp != qq {
                        expr.push(var, qq, pp, -v.conj());
                    }
                }
            }
        };
        for members in &sectors.members {
            for (a, &p) in members.iter().enumerate() {
                for &q in &members[a..] {
                    if let Some((last, _)) = pinned {
                        if p % last == last - 1 && q % last == last - 1 {
                            continue;
                        }
                    }
                    if p == q {
                        emit(Some(*next_var), p, q, ONE, &mut expr);
                        *next_var += 1;
                    } else {
                        emit(Some(*next_var), p, q, ONE, &mut expr);
                        emit(Some(*next_var + 1), p, q, I, &mut expr);
                        *next_var += 2;
                    }
                }
            }
        }
        if let Some((last, fixed)) = pinned {
            for r in 0..fixed.nrows() {
                for c in 0..fixed.ncols() {
                    let v = fixed[(r, c)];
                    if v.norm() > 0.0 {
                        expr.push(None, r * last + last - 1, c * last + last - 1, v);
                    }
                }
            }
        }
        Self { dim: sectors.dim(), expr, vars: start..*next_var }
    }

    pub fn value(&self, y: &[f64]) -> CMat {
        self.expr.evaluate(y, self.dim)
    }
}

#[derive(Clone, Debug)]
struct Group {
    name: String,
    sectors: Sectors,
    first_block: usize,
}

/// Handle to a constrained operator split into sector blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupId(pub usize);

#[derive(Clone, Debug, Default)]
pub struct Lmi {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    groups: Vec<Group>,
    constants: Vec<HermSparse>,
    coeffs: Vec<BTreeMap<usize, HermSparse>>,
    block_dims: Vec<usize>,
    block_names: Vec<String>,
    /// Largest entry dropped because it linked two different sectors.
    pub leak: f64,
}

#[derive(Clone, Debug)]
pub struct LmiSolution {
    pub status: SolveStatus,
    pub y: Vec<f64>,
    pub value: f64,
    pub upper: f64,
    /// Dual solver variables, one per group, reassembled into full operators.
    pub multipliers: Vec<CMat>,
    pub raw: SdpSolution,
}

impl Lmi {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reserve_vars(&mut self, n: usize) -> std::ops::Range<usize> {
        let start = self.n_vars;
        self.n_vars += n;
        self.objective.resize(self.n_vars, 0.0);
        start..self.n_vars
    }

    /// Sets `n_vars` after variables were allocated through a shared counter.
    pub fn set_vars(&mut self, n: usize) {
        self.n_vars = self.n_vars.max(n);
        self.objective.resize(self.n_vars, 0.0);
    }

    pub fn add_group(&mut self, name: impl Into<String>, sectors: Sectors) -> GroupId {
        let name = name.into();
        let first_block = self.block_dims.len();
        for (k, m) in sectors.members.iter().enumerate() {
            self.block_dims.push(m.len());
            self.block_names.push(if sectors.members.len() == 1 { name.clone() } else { format!("{name}[{k}]") });
            self.constants.push(HermSparse::new());
            self.coeffs.push(BTreeMap::new());
        }
        self.groups.push(Group { name, sectors, first_block });
        GroupId(self.groups.len() - 1)
    }

    pub fn group_name(&self, g: GroupId) -> &str {
        &self.groups[g.0].name
    }

    /// Adds `scale * expr` to the operator constrained by group `g`.
    pub fn add(&mut self, g: GroupId, expr: &Affine, scale: f64) {
        let group = &self.groups[g.0];
        for t in &expr.terms {
            let s = &group.sectors;
            if s.sector_of[t.p] != s.sector_of[t.q] {
                self.leak = self.leak.max(t.v.norm() * scale.abs());
                continue;
            }
            let (lp, lq) = (s.local[t.p], s.local[t.q]);
            if lp > lq {
                continue;
            }
            let block = group.first_block + s.sector_of[t.p];
            let target = match t.var {
                None => &mut self.constants[block],
                Some(k) => self.coeffs[block].entry(k).or_default(),
            };
            target.add_full_entry(lp, lq, t.v * scale);
        }
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.block_dims.clone()
    }

    /// The standard-form problem whose dual is this LMI.
    pub fn to_problem(&mut self) -> SdpProblem {
        let mut prob = SdpProblem::new(false);
        for (d, n) in self.block_dims.iter().zip(&self.block_names) {
            prob.add_block(n.clone(), *d);
        }
        let mut rows: Vec<Vec<LinearTerm>> = vec![Vec::new(); self.n_vars];
        for (b, (c, map)) in self.constants.iter_mut().zip(self.coeffs.iter_mut()).enumerate() {
            c.compress();
            if !c.is_empty() {
                prob.objective.push(LinearTerm { block: b, coeff: c.clone() });
            }
            for (&k, f) in map.iter_mut() {
                f.compress();
                if f.is_empty() {
                    continue;
                }
                let mut neg = HermSparse::new();
                for (p, q, v) in f.entries() {
                    neg.add(p, q, -v);
                }
                rows[k].push(LinearTerm { block: b, coeff: neg });
            }
        }
        for (k, terms) in rows.into_iter().enumerate() {
            prob.equalities.push(Equality { terms, rhs: self.objective[k] });
        }
        prob
    }

    pub fn solve(&mut self, tol: &Tolerances) -> Result<LmiSolution> {
        let prob = self.to_problem();
        let raw = solve(&prob, tol)?;
        let y = raw.dual_multipliers.clone();
        let multipliers = self
            .groups
            .iter()
            .map(|g| {
                let n = g.sectors.dim();
                let mut m = CMat::zeros(n, n);
                for (k, members) in g.sectors.members.iter().enumerate() {
                    let z = &raw.primal_blocks[g.first_block + k];
                    for (a, &p) in members.iter().enumerate() {
                        for (b, &q) in members.iter().enumerate() {
                            m[(p, q)] = z[(a, b)];
                        }
                    }
                }
                m
            })
            .collect();
        Ok(LmiSolution {
            status: raw.status,
            value: raw.dual_objective,
            upper: raw.objective_value,
            y,
            multipliers,
            raw,
        })
    }
}

/// Matrix units for a flat index over `factors` copies of dimension `d`.
pub fn digits(idx: usize, d: usize, factors: usize) -> Vec<usize> {
    let mut out = vec![0; factors];
    let mut i = idx;
    for k in (0..factors).rev() {
        out[k] = i % d;
        i /= d;
    }
    out
}

pub fn undigits(ds: &[usize], d: usize) -> usize {
    ds.iter().fold(0, |acc, &x| acc * d + x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{min_eigenvalue, partial_trace};
    use crate::sdp::sectors::PhaseSymmetry;

    #[test]
    fn pinned_partial_trace_holds_for_any_parameters() {
        let sym = PhaseSymmetry::torus(2);
        let sectors = Sectors::from_charges(&sym.charges(2, &[-1, 1, -1, 1]));
        let fixed = CMat::from_fn(8, 8, |r, c| {
            let (dr, dc) = (digits(r, 2, 3), digits(c, 2, 3));
            let qr = -(dr[0] as i64) + dr[1] as i64 - dr[2] as i64;
            let qc = -(dc[0] as i64) + dc[1] as i64 - dc[2] as i64;
            if qr == qc {
                C64::new((r + 2 * c) as f64 * 0.1, if r == c { 0.0 } else { (r as f64 - c as f64) * 0.05 })
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let fixed = crate::linalg::hermitian_part(&fixed);
        let mut next = 0;
        let v = HermVar::with_partial_trace(&sectors, 2, &fixed, &mut next).unwrap();
        let y: Vec<f64> = (0..next).map(|k| (k as f64 * 0.37).sin()).collect();
        let x = v.value(&y);
        assert!(crate::linalg::hermiticity_defect(&x) < 1e-14);
        let t = partial_trace(&x, &[2, 2, 2, 2], 3).unwrap();
        assert!(crate::linalg::max_abs_diff(&t, &fixed) < 1e-12);
    }

    #[test]
    fn tiny_lmi() {
        // maximize y  s.t. [[1, y], [y, 1]] >= 0 has optimum 1.
        let mut lmi = Lmi::new();
        let y = lmi.reserve_vars(1).start;
        lmi.objective[y] = 1.0;
        let g = lmi.add_group("M", Sectors::single(2));
        let mut e = Affine::constant(&CMat::identity(2, 2), 0.0);
        e.push(Some(y), 0, 1, ONE);
        e.push(Some(y), 1, 0, ONE);
        lmi.add(g, &e, 1.0);
        let sol = lmi.solve(&Tolerances::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.y[0] - 1.0).abs() < 1e-6, "{:?}", sol.y);
        assert!(min_eigenvalue(&sol.multipliers[0]) > -1e-9);
    }
}
