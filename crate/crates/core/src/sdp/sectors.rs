//! Diagonal phase symmetries and the block structure they induce.
//!
//! A symmetry is generated by phase rotations `|k> -> exp(i theta w_g(k)) |k>`. A basis vector
//! of a multipartite space gets the charge `sum_p sign_p w_g(level_p)` (reduced modulo the
//! generator's order when it is finite). Operators commuting with the induced action are
//! block diagonal over equal-charge sectors.

use crate::channel::ChoiOperator;
use crate::linalg::{split_index, CMat};
use std::collections::BTreeMap;

pub type Charge = Vec<i64>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseSymmetry {
    /// One weight vector per generator, indexed by level.
    pub weights: Vec<Vec<i64>>,
    /// Order of each generator; 0 means a continuous U(1).
    pub moduli: Vec<i64>,
}

impl PhaseSymmetry {
    pub fn trivial() -> Self {
        Self { weights: Vec::new(), moduli: Vec::new() }
    }

    pub fn is_trivial(&self) -> bool {
        self.weights.is_empty()
    }

    /// Independent U(1) phases on every level.
    pub fn torus(d: usize) -> Self {
        let weights = (0..d).map(|k| (0..d).map(|l| i64::from(k == l)).collect()).collect();
        Self { weights, moduli: vec![0; d] }
    }

    pub fn generator(weights: Vec<i64>, modulus: i64) -> Self {
        Self { weights: vec![weights], moduli: vec![modulus] }
    }

    pub fn combine(mut self, other: Self) -> Self {
        self.weights.extend(other.weights);
        self.moduli.extend(other.moduli);
        self
    }

    pub fn charge(&self, levels: &[usize], signs: &[i64]) -> Charge {
        self.weights
            .iter()
            .zip(&self.moduli)
            .map(|(w, &m)| {
                let q: i64 = levels.iter().zip(signs).map(|(&l, &s)| s * w[l]).sum();
                if m > 0 {
                    q.rem_euclid(m)
                } else {
                    q
                }
            })
            .collect()
    }

    /// Sum of two charges, reduced by the generator orders.
    pub fn add(&self, a: &[i64], b: &[i64]) -> Charge {
        a.iter()
            .zip(b)
            .zip(&self.moduli)
            .map(|((x, y), &m)| if m > 0 { (x + y).rem_euclid(m) } else { x + y })
            .collect()
    }

    /// Charges of all basis vectors of `(C^d)^{⊗k}` with the given signs.
    pub fn charges(&self, d: usize, signs: &[i64]) -> Vec<Charge> {
        let dims = vec![d; signs.len()];
        let n = d.pow(signs.len() as u32);
        let mut digits = vec![0; signs.len()];
        (0..n)
            .map(|i| {
                split_index(i, &dims, &mut digits);
                self.charge(&digits, signs)
            })
            .collect()
    }

    /// True when every entry of `m` linking different charges is below `tol`.
    pub fn respects(&self, m: &CMat, charges: &[Charge], tol: f64) -> bool {
        let n = m.nrows();
        (0..n).all(|r| (0..n).all(|c| charges[r] == charges[c] || m[(r, c)].norm() <= tol))
    }

    pub fn covariant(&self, choi: &ChoiOperator, tol: f64) -> bool {
        choi.dim_in() == choi.dim_out() && self.respects(choi.matrix(), &self.charges(choi.dim_in(), &[-1, 1]), tol)
    }

    /// The largest symmetry of the listed candidates under which every channel is covariant:
    /// per-level U(1) phases first, then per-level parities when no U(1) survives.
    pub fn detect(channels: &[&ChoiOperator], tol: f64) -> Self {
        let Some(first) = channels.first() else {
            return Self::trivial();
        };
        let d = first.dim_in();
        if channels.iter().any(|c| c.dim_in() != d || c.dim_out() != d) {
            return Self::trivial();
        }
        let mats: Vec<&CMat> = channels.iter().map(|c| c.matrix()).collect();
        Self::detect_operators(d, &mats, tol)
    }

    /// Same as [`PhaseSymmetry::detect`] for bare operators on `C^d ⊗ C^d` transforming
    /// like Choi operators.
    pub fn detect_operators(d: usize, ops: &[&CMat], tol: f64) -> Self {
        if ops.iter().any(|m| m.nrows() != d * d || m.ncols() != d * d) {
            return Self::trivial();
        }
        let unit = |k: usize| (0..d).map(|l| i64::from(k == l)).collect::<Vec<_>>();
        let fits = |cand: &Self| {
            let q = cand.charges(d, &[-1, 1]);
            ops.iter().all(|m| cand.respects(m, &q, tol))
        };
        let mut sym = Self::trivial();
        for modulus in [0, 2] {
            for k in 0..d {
                let cand = Self::generator(unit(k), modulus);
                if fits(&cand) {
                    sym = sym.combine(cand);
                }
            }
            if !sym.is_trivial() {
                break;
            }
        }
        sym
    }

    /// Replaces every continuous generator by its subgroup of order `m`.
    pub fn discretize(&self, m: i64) -> Self {
        let moduli = self.moduli.iter().map(|&x| if x == 0 { m } else { x }).collect();
        Self { weights: self.weights.clone(), moduli }
    }

    /// Diagonal unitary of generator `g` at its elementary angle (`2π/m`, or `π/2` for U(1)).
    pub fn unitary(&self, g: usize) -> CMat {
        let m = if self.moduli[g] > 0 { self.moduli[g] } else { 4 };
        let w = &self.weights[g];
        CMat::from_fn(w.len(), w.len(), |r, c| {
            if r == c {
                crate::linalg::C64::from_polar(1.0, 2.0 * std::f64::consts::PI * w[r] as f64 / m as f64)
            } else {
                crate::linalg::ZERO
            }
        })
    }
}

/// Partition of a basis into equal-charge sectors; members are kept in increasing order.
#[derive(Clone, Debug)]
pub struct Sectors {
    pub sector_of: Vec<usize>,
    pub local: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    pub charges: Vec<Charge>,
}

impl Sectors {
    pub fn from_charges(charges: &[Charge]) -> Self {
        let mut ids: BTreeMap<&Charge, usize> = BTreeMap::new();
        for q in charges {
            let next = ids.len();
            ids.entry(q).or_insert(next);
        }
        let mut members = vec![Vec::new(); ids.len()];
        let mut sector_of = Vec::with_capacity(charges.len());
        let mut local = Vec::with_capacity(charges.len());
        for (i, q) in charges.iter().enumerate() {
            let s = ids[q];
            sector_of.push(s);
            local.push(members[s].len());
            members[s].push(i);
        }
        let mut sector_charges = vec![Vec::new(); members.len()];
        for (q, &s) in &ids {
            sector_charges[s] = (*q).clone();
        }
        Self { sector_of, local, members, charges: sector_charges }
    }

    pub fn single(n: usize) -> Self {
        Self::from_charges(&vec![Vec::new(); n])
    }

    pub fn dim(&self) -> usize {
        self.sector_of.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(|m| m.len()).collect()
    }

    /// Number of real parameters of a Hermitian operator with this block structure.
    pub fn hermitian_params(&self) -> usize {
        self.members.iter().map(|m| m.len() * m.len()).sum()
    }

    pub fn same(&self, p: usize, q: usize) -> bool {
        self.sector_of[p] == self.sector_of[q]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{channel_three_level, channel_two_level, heisenberg_channel, HeisenbergParams};
    use crate::linalg::C64;

    #[test]
    fn three_level_sector_sizes() {
        let sym = PhaseSymmetry::torus(3);
        let x = Sectors::from_charges(&sym.charges(3, &[-1, 1, -1, 1]));
        let y = Sectors::from_charges(&sym.charges(3, &[1, -1, -1, 1]));
        assert_eq!(x.members.len(), 19);
        assert_eq!(x.sizes().into_iter().max(), Some(15));
        assert_eq!(x.hermitian_params(), 639);
        assert_eq!(y.hermitian_params(), 639);
    }

    #[test]
    fn detection() {
        let e = channel_three_level(C64::from_polar(0.5, 0.3), 0.2, 1.0).unwrap();
        let sym = PhaseSymmetry::detect(&[&e], 1e-12);
        assert_eq!(sym.weights.len(), 3);
        let c = channel_two_level(C64::new(0.3, 0.1)).unwrap();
        assert_eq!(PhaseSymmetry::detect(&[&c], 1e-12).moduli, vec![0, 0]);
        let h = heisenberg_channel(0.7, &HeisenbergParams { jx: -1.0, jy: -2.0, jz: -3.0, time: 0.0 }).unwrap();
        let sym = PhaseSymmetry::detect(&[&h], 1e-12);
        assert!(sym.moduli.iter().all(|&m| m == 2));
        assert!(!sym.is_trivial());
    }
}
