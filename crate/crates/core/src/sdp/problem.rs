use crate::error::{dim_err, Result};
use crate::linalg::{CMat, C64};
use serde::Serialize;

/// Sparse Hermitian matrix stored as upper-triangle entries. Entry `(p, q, v)` with `p < q`
/// stands for `v E_pq + conj(v) E_qp`; diagonal entries carry real values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HermSparse {
    entries: Vec<(u32, u32, C64)>,
}

impl HermSparse {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `v E_pq + conj(v) E_qp` (or `Re(v) E_pp` on the diagonal).
    pub fn add(&mut self, p: usize, q: usize, v: C64) {
        let (p, q, v) = if p <= q { (p, q, v) } else { (q, p, v.conj()) };
        let v = if p == q { C64::new(v.re, 0.0) } else { v };
        self.entries.push((p as u32, q as u32, v));
    }

    /// Adds the single full-matrix entry `v` at `(p, q)` of a Hermitian matrix whose partner
    /// entry is added separately. Only entries with `p <= q` are kept.
    pub fn add_full_entry(&mut self, p: usize, q: usize, v: C64) {
        if p < q {
            self.entries.push((p as u32, q as u32, v));
        } else if p == q {
            self.entries.push((p as u32, q as u32, C64::new(v.re, 0.0)));
        }
    }

    /// Merges duplicates and drops zeros.
    pub fn compress(&mut self) {
        self.entries.sort_by_key(|&(p, q, _)| (p, q));
        let mut out: Vec<(u32, u32, C64)> = Vec::with_capacity(self.entries.len());
        for &(p, q, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == p && last.1 == q => last.2 += v,
                _ => out.push((p, q, v)),
            }
        }
        out.retain(|e| e.2.norm() > 1e-15);
        self.entries = out;
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.entries.iter().map(|&(p, q, v)| (p as usize, q as usize, v))
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.iter().map(|&(_, q, _)| q as usize).max()
    }

    /// Calls `f(p, q, a_pq)` for every nonzero entry of the full matrix.
    #[inline]
    pub fn for_each_full(&self, mut f: impl FnMut(usize, usize, C64)) {
        for &(p, q, v) in &self.entries {
            let (p, q) = (p as usize, q as usize);
            f(p, q, v);
            if p != q {
                f(q, p, v.conj());
            }
        }
    }

    /// Re tr(A M) for an arbitrary square `M`.
    #[inline]
    pub fn inner_re(&self, m: &CMat) -> f64 {
        let mut s = 0.0;
        for &(p, q, v) in &self.entries {
            let (p, q) = (p as usize, q as usize);
            if p == q {
                s += v.re * m[(p, p)].re;
            } else {
                s += (v * m[(q, p)]).re + (v.conj() * m[(p, q)]).re;
            }
        }
        s
    }

    pub fn add_to(&self, m: &mut CMat, scale: f64) {
        for &(p, q, v) in &self.entries {
            let (p, q) = (p as usize, q as usize);
            m[(p, q)] += v * scale;
            if p != q {
                m[(q, p)] += v.conj() * scale;
            }
        }
    }

    pub fn to_dense(&self, n: usize) -> CMat {
        let mut m = CMat::zeros(n, n);
        self.add_to(&mut m, 1.0);
        m
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|&(p, q, v)| if p == q { v.norm_sqr() } else { 2.0 * v.norm_sqr() }).sum()
    }

    pub fn from_dense(m: &CMat, tol: f64) -> Self {
        let mut s = Self::new();
        for q in 0..m.ncols() {
            for p in 0..=q {
                let v = m[(p, q)];
                if v.norm() > tol {
                    s.add_full_entry(p, q, v);
                }
            }
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockSpec {
    pub name: String,
    pub dim: usize,
}

#[derive(Clone, Debug)]
pub struct LinearTerm {
    pub block: usize,
    pub coeff: HermSparse,
}

#[derive(Clone, Debug)]
pub struct Equality {
    pub terms: Vec<LinearTerm>,
    pub rhs: f64,
}

/// `optimize sum_j tr(C_j X_j)` subject to `sum_j tr(A_ij X_j) = b_i` and `X_j ⪰ 0`.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub blocks: Vec<BlockSpec>,
    pub equalities: Vec<Equality>,
    pub objective: Vec<LinearTerm>,
    pub maximize: bool,
}

impl SdpProblem {
    pub fn new(maximize: bool) -> Self {
        Self { blocks: Vec::new(), equalities: Vec::new(), objective: Vec::new(), maximize }
    }

    pub fn add_block(&mut self, name: impl Into<String>, dim: usize) -> usize {
        self.blocks.push(BlockSpec { name: name.into(), dim });
        self.blocks.len() - 1
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dim).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let check = |t: &LinearTerm| -> Result<()> {
            let Some(b) = self.blocks.get(t.block) else {
                return dim_err(format!("term refers to missing block {}", t.block));
            };
            if let Some(mx) = t.coeff.max_index() {
                if mx >= b.dim {
                    return dim_err(format!("coefficient index {mx} outside block {} of size {}", b.name, b.dim));
                }
            }
            Ok(())
        };
        for e in &self.equalities {
            if !e.rhs.is_finite() {
                return dim_err("non-finite right-hand side");
            }
            e.terms.iter().try_for_each(check)?;
        }
        self.objective.iter().try_for_each(check)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
    NumericalTrouble,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// The PSD variables `X_j`.
    pub primal_blocks: Vec<CMat>,
    /// Multipliers `y_i` of the equalities.
    pub dual_multipliers: Vec<f64>,
    /// Dual slacks `Z_j = C_j - sum_i y_i A_ij`, in the sign convention of a minimization.
    pub dual_slack_blocks: Vec<CMat>,
    pub objective_value: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub feasibility: f64,
    pub gap: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { feasibility: 1e-8, gap: 1e-7, max_iter: 200 }
    }
}
