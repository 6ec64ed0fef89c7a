//! Primal-dual interior-point method (HKM direction, Mehrotra predictor-corrector) for
//! semidefinite programs over complex Hermitian blocks.

use super::problem::{HermSparse, SdpProblem, SdpSolution, SolveStatus, Tolerances};
use crate::error::Result;
use crate::linalg::{CMat, C64};
use nalgebra::{Cholesky, DMatrix, DVector};

struct Data {
    dims: Vec<usize>,
    /// Per block, the constraints touching it, sorted by constraint index.
    by_block: Vec<Vec<(usize, HermSparse)>>,
    c: Vec<HermSparse>,
    b: DVector<f64>,
    m: usize,
}

fn build_data(problem: &SdpProblem, rows: &[usize], row_scale: &[f64], sign: f64) -> Data {
    let nb = problem.blocks.len();
    let mut by_block: Vec<Vec<(usize, HermSparse)>> = vec![Vec::new(); nb];
    for (new_i, &old_i) in rows.iter().enumerate() {
        let eq = &problem.equalities[old_i];
        let mut per_block: Vec<Option<HermSparse>> = vec![None; nb];
        for t in &eq.terms {
            let entry = per_block[t.block].get_or_insert_with(HermSparse::new);
            for (p, q, v) in t.coeff.entries() {
                entry.add(p, q, v * row_scale[old_i]);
            }
        }
        for (blk, hs) in per_block.into_iter().enumerate() {
            if let Some(mut hs) = hs {
                hs.compress();
                if !hs.is_empty() {
                    by_block[blk].push((new_i, hs));
                }
            }
        }
    }
    let mut c = vec![HermSparse::new(); nb];
    for t in &problem.objective {
        for (p, q, v) in t.coeff.entries() {
            c[t.block].add(p, q, v * sign);
        }
    }
    for cb in &mut c {
        cb.compress();
    }
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|&i| problem.equalities[i].rhs * row_scale[i]));
    Data { dims: problem.blocks.iter().map(|b| b.dim).collect(), by_block, c, b, m: rows.len() }
}

fn row_norms(problem: &SdpProblem) -> Vec<f64> {
    problem
        .equalities
        .iter()
        .map(|e| {
            let mut per: std::collections::BTreeMap<usize, HermSparse> = Default::default();
            for t in &e.terms {
                let h = per.entry(t.block).or_default();
                for (p, q, v) in t.coeff.entries() {
                    h.add(p, q, v);
                }
            }
            per.values_mut()
                .map(|h| {
                    h.compress();
                    h.frobenius_sq()
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Gram matrix of the scaled constraint operators.
fn gram(data: &Data) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(data.m, data.m);
    for (blk, list) in data.by_block.iter().enumerate() {
        let n = data.dims[blk];
        let mut owners: std::collections::HashMap<(usize, usize), Vec<(usize, C64)>> = Default::default();
        for (i, hs) in list {
            for (p, q, v) in hs.entries() {
                owners.entry((p, q)).or_default().push((*i, v));
            }
        }
        let _ = n;
        for ((p, q), list) in owners {
            let w = if p == q { 1.0 } else { 2.0 };
            for &(i, a) in &list {
                for &(j, b) in &list {
                    g[(i, j)] += w * (a * b.conj()).re;
                }
            }
        }
    }
    g
}

/// Greedy pivoted Cholesky; returns a maximal well-conditioned independent subset of rows.
fn independent_rows(g: &DMatrix<f64>, rel_tol: f64) -> Vec<usize> {
    let m = g.nrows();
    let scale = (0..m).map(|i| g[(i, i)]).fold(0.0, f64::max).max(1e-300);
    let mut d: Vec<f64> = (0..m).map(|i| g[(i, i)]).collect();
    let mut used = vec![false; m];
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut piv = Vec::new();
    loop {
        let Some(j) = (0..m).filter(|&i| !used[i]).max_by(|&a, &b| d[a].total_cmp(&d[b])) else {
            break;
        };
        if d[j] <= rel_tol * scale {
            break;
        }
        used[j] = true;
        let s = d[j].sqrt();
        let mut col = vec![0.0; m];
        col[j] = s;
        for i in 0..m {
            if used[i] {
                continue;
            }
            let mut v = g[(i, j)];
            for c in &cols {
                v -= c[i] * c[j];
            }
            v /= s;
            col[i] = v;
            d[i] -= v * v;
        }
        cols.push(col);
        piv.push(j);
    }
    piv.sort_unstable();
    piv
}

fn sym(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

fn inner(a: &CMat, b: &CMat) -> f64 {
    // Re tr(A B) for Hermitian A, B.
    a.iter().zip(b.transpose().iter()).map(|(x, y)| (x * y).re).sum()
}

fn hermitian_inverse(m: &CMat) -> Option<CMat> {
    Cholesky::new(m.clone()).map(|c| c.inverse())
}

/// Largest step keeping `x + a dx` positive semidefinite.
fn max_step(x: &CMat, dx: &CMat) -> f64 {
    let Some(ch) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = ch.l();
    let Some(a1) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(w) = l.solve_lower_triangular(&a1.adjoint()) else {
        return 0.0;
    };
    let w = sym(&w);
    let lmin = w.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

struct Iterate {
    x: Vec<CMat>,
    z: Vec<CMat>,
    y: DVector<f64>,
}

#[derive(Clone, Copy)]
struct Metrics {
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    gap: f64,
}

impl Metrics {
    fn merit(&self) -> f64 {
        self.pinf.max(self.dinf).max(self.gap)
    }
}

pub fn solve(problem: &SdpProblem, tol: &Tolerances) -> Result<SdpSolution> {
    problem.validate()?;
    let sign = if problem.maximize { -1.0 } else { 1.0 };
    let norms = row_norms(problem);
    let m_all = problem.equalities.len();
    let row_scale: Vec<f64> = norms.iter().map(|&n| if n > 0.0 { 1.0 / n } else { 1.0 }).collect();

    // Rows with no coefficients must have a zero right-hand side.
    let mut candidate: Vec<usize> = Vec::new();
    for i in 0..m_all {
        if norms[i] == 0.0 {
            if problem.equalities[i].rhs.abs() > tol.feasibility {
                return Ok(trivial_failure(problem, SolveStatus::Infeasible));
            }
        } else {
            candidate.push(i);
        }
    }
    let full = build_data(problem, &candidate, &row_scale, sign);
    let g = gram(&full);
    let keep_local = independent_rows(&g, 1e-12);
    let (data, rows) = if keep_local.len() == candidate.len() {
        (full, candidate.clone())
    } else {
        // Check that dropped rows are consistent combinations of the kept ones.
        let kept: Vec<usize> = keep_local.iter().map(|&k| candidate[k]).collect();
        let gkk = DMatrix::from_fn(keep_local.len(), keep_local.len(), |a, b| g[(keep_local[a], keep_local[b])]);
        let chol = Cholesky::new(gkk);
        let bk = DVector::from_iterator(keep_local.len(), keep_local.iter().map(|&k| full.b[k]));
        if let Some(ch) = chol {
            for (local, &orig) in candidate.iter().enumerate() {
                if keep_local.binary_search(&local).is_ok() {
                    continue;
                }
                let col = DVector::from_iterator(keep_local.len(), keep_local.iter().map(|&k| g[(k, local)]));
                let alpha = ch.solve(&col);
                let predicted = alpha.dot(&bk);
                let actual = full.b[local];
                if (predicted - actual).abs() > 1e-7 * (1.0 + actual.abs()) {
                    let _ = orig;
                    return Ok(trivial_failure(problem, SolveStatus::Infeasible));
                }
            }
        } else {
            return Ok(trivial_failure(problem, SolveStatus::NumericalTrouble));
        }
        (build_data(problem, &kept, &row_scale, sign), kept)
    };

    let mut sol = interior_point(&data, tol);
    // Map the multipliers back to the caller's rows and scaling.
    let mut y_full = vec![0.0; m_all];
    for (k, &orig) in rows.iter().enumerate() {
        y_full[orig] = sol.dual_multipliers[k] * row_scale[orig] * sign;
    }
    sol.dual_multipliers = y_full;
    if problem.maximize {
        sol.objective_value = -sol.objective_value;
        sol.dual_objective = -sol.dual_objective;
    }
    Ok(sol)
}

fn trivial_failure(problem: &SdpProblem, status: SolveStatus) -> SdpSolution {
    SdpSolution {
        status,
        primal_blocks: problem.blocks.iter().map(|b| CMat::zeros(b.dim, b.dim)).collect(),
        dual_multipliers: vec![0.0; problem.equalities.len()],
        dual_slack_blocks: problem.blocks.iter().map(|b| CMat::zeros(b.dim, b.dim)).collect(),
        objective_value: f64::NAN,
        dual_objective: f64::NAN,
        duality_gap: f64::INFINITY,
        primal_infeasibility: f64::INFINITY,
        dual_infeasibility: f64::INFINITY,
        iterations: 0,
    }
}

fn aty(data: &Data, y: &DVector<f64>) -> Vec<CMat> {
    data.by_block
        .iter()
        .zip(&data.dims)
        .map(|(list, &n)| {
            let mut acc = CMat::zeros(n, n);
            for (i, hs) in list {
                if y[*i] != 0.0 {
                    hs.add_to(&mut acc, y[*i]);
                }
            }
            acc
        })
        .collect()
}

fn apply_a(data: &Data, blocks: &[CMat]) -> DVector<f64> {
    let mut out = DVector::zeros(data.m);
    for (blk, list) in data.by_block.iter().enumerate() {
        for (i, hs) in list {
            out[*i] += hs.inner_re(&blocks[blk]);
        }
    }
    out
}

fn schur(data: &Data, x: &[CMat], zinv: &[CMat]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(data.m, data.m);
    for (blk, list) in data.by_block.iter().enumerate() {
        let n = data.dims[blk];
        let (xb, zb) = (&x[blk], &zinv[blk]);
        let mut t = CMat::zeros(n, n);
        for (a_pos, (i, ai)) in list.iter().enumerate() {
            t.fill(C64::new(0.0, 0.0));
            ai.for_each_full(|p, q, a| {
                for r in 0..n {
                    let coef = a * xb[(q, r)];
                    if coef.re == 0.0 && coef.im == 0.0 {
                        continue;
                    }
                    let zc = zb.column(p);
                    let mut tc = t.column_mut(r);
                    tc.axpy(coef, &zc, C64::new(1.0, 0.0));
                }
            });
            for (j, aj) in &list[a_pos..] {
                let v = aj.inner_re(&t);
                m[(*i, *j)] += v;
            }
        }
    }
    for i in 0..data.m {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}

fn factor(mut m: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let scale = (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..6 {
        if let Some(c) = Cholesky::new(m.clone()) {
            return Some(c);
        }
        let next = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
        for i in 0..m.nrows() {
            m[(i, i)] += next - reg;
        }
        reg = next;
    }
    None
}

fn residuals(data: &Data, it: &Iterate, c_dense: &[CMat]) -> (DVector<f64>, Vec<CMat>) {
    let at = aty(data, &it.y);
    let rd: Vec<CMat> = (0..data.dims.len()).map(|k| &c_dense[k] - &at[k] - &it.z[k]).collect();
    let rp = &data.b - apply_a(data, &it.x);
    (rp, rd)
}

fn metrics(data: &Data, it: &Iterate, rp: &DVector<f64>, rd: &[CMat], bnorm: f64, cnorm: f64) -> Metrics {
    let pobj: f64 = (0..data.dims.len()).map(|k| data.c[k].inner_re(&it.x[k])).sum();
    let dobj = data.b.dot(&it.y);
    Metrics {
        pobj,
        dobj,
        pinf: rp.norm() / (1.0 + bnorm),
        dinf: rd.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() / (1.0 + cnorm),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
    }
}

fn evaluate(data: &Data, it: &Iterate, c_dense: &[CMat], bnorm: f64, cnorm: f64) -> Metrics {
    let (rp, rd) = residuals(data, it, c_dense);
    metrics(data, it, &rp, &rd, bnorm, cnorm)
}

fn interior_point(data: &Data, tol: &Tolerances) -> SdpSolution {
    let nb = data.dims.len();
    let ntot: f64 = data.dims.iter().sum::<usize>() as f64;
    let bnorm = data.b.norm();
    let cnorm = data.c.iter().map(|c| c.frobenius_sq()).sum::<f64>().sqrt();
    let c_dense: Vec<CMat> = data.c.iter().zip(&data.dims).map(|(c, &n)| c.to_dense(n)).collect();

    let mut xi: f64 = 10.0;
    let mut eta: f64 = 10.0;
    for (blk, list) in data.by_block.iter().enumerate() {
        let n = data.dims[blk] as f64;
        xi = xi.max(n.sqrt());
        eta = eta.max(n.sqrt());
        for (i, hs) in list {
            let an = hs.frobenius_sq().sqrt();
            xi = xi.max(n.sqrt() * (1.0 + data.b[*i].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
    }
    eta = eta.max(cnorm);
    let mut it = Iterate {
        x: data.dims.iter().map(|&n| CMat::identity(n, n).scale(xi)).collect(),
        z: data.dims.iter().map(|&n| CMat::identity(n, n).scale(eta)).collect(),
        y: DVector::zeros(data.m),
    };

    let trace = std::env::var_os("QM_SDP_TRACE").is_some();
    let mut best: Option<(f64, Iterate, Metrics, usize)> = None;
    let mut status = SolveStatus::MaxIter;
    let mut stalls = 0;
    let mut iterations = 0;
    for iter in 0..tol.max_iter {
        iterations = iter;
        let Some(zinv): Option<Vec<CMat>> = it.z.iter().map(hermitian_inverse).collect() else {
            status = SolveStatus::NumericalTrouble;
            break;
        };
        let (rp, rd) = residuals(data, &it, &c_dense);
        let met = metrics(data, &it, &rp, &rd, bnorm, cnorm);
        let (pobj, dobj) = (met.pobj, met.dobj);
        let xz: f64 = (0..nb).map(|k| inner(&it.x[k], &it.z[k])).sum();
        if trace {
            eprintln!(
                "{iter:3} p={:.6e} d={:.6e} pinf={:.2e} dinf={:.2e} gap={:.2e} mu={:.2e}",
                met.pobj,
                met.dobj,
                met.pinf,
                met.dinf,
                met.gap,
                xz / ntot
            );
        }
        let mu = xz / ntot;
        let merit = met.merit();
        if best.as_ref().map_or(true, |b| merit < b.0) {
            best = Some((merit, Iterate { x: it.x.clone(), z: it.z.clone(), y: it.y.clone() }, met, iter));
        }
        if met.pinf <= tol.feasibility && met.dinf <= tol.feasibility && met.gap <= tol.gap {
            status = SolveStatus::Optimal;
            break;
        }
        let xnorm: f64 = it.x.iter().map(|x| x.norm()).sum();
        let ynorm = it.y.amax();
        if dobj > 1e9 * (1.0 + cnorm) && met.dinf < 1e-6 || pobj < -1e9 * (1.0 + bnorm) && met.pinf < 1e-6 {
            status = SolveStatus::Infeasible;
            break;
        }
        if xnorm > 1e13 || ynorm > 1e13 {
            status = SolveStatus::Infeasible;
            break;
        }

        let mmat = schur(data, &it.x, &zinv);
        let Some(chol) = factor(mmat) else {
            status = SolveStatus::NumericalTrouble;
            break;
        };
        let xrdz: Vec<CMat> = (0..nb).map(|k| &it.x[k] * &rd[k] * &zinv[k]).collect();
        let direction = |psi: &[CMat]| -> (Vec<CMat>, DVector<f64>, Vec<CMat>) {
            let r: Vec<CMat> = (0..nb).map(|k| &psi[k] - &xrdz[k]).collect();
            let rhs = &rp - apply_a(data, &r);
            let mut dy = chol.solve(&rhs);
            let rhs_norm = rhs.norm();
            let mut dz: Vec<CMat>;
            let mut dx: Vec<CMat>;
            let mut round = 0;
            loop {
                let atdy = aty(data, &dy);
                dz = (0..nb).map(|k| &rd[k] - &atdy[k]).collect();
                dx = (0..nb).map(|k| &psi[k] - sym(&(&it.x[k] * &dz[k] * &zinv[k]))).collect();
                // Iterative refinement against the exact operator; the factorization may be
                // regularized or inaccurate near the optimum.
                let res = &rp - apply_a(data, &dx);
                if trace {
                    eprintln!("    refine {round}: {:.3e} / {:.3e}", res.norm(), rhs_norm);
                }
                if round == 3 || res.norm() <= 1e-12 * (1.0 + rhs_norm) {
                    break;
                }
                dy += chol.solve(&res);
                round += 1;
            }
            (dx, dy, dz)
        };
        let steps = |dx: &[CMat], dz: &[CMat]| -> (f64, f64) {
            let ap = (0..nb).map(|k| max_step(&it.x[k], &dx[k])).fold(f64::INFINITY, f64::min);
            let ad = (0..nb).map(|k| max_step(&it.z[k], &dz[k])).fold(f64::INFINITY, f64::min);
            (ap, ad)
        };

        let psi_aff: Vec<CMat> = it.x.iter().map(|x| -x).collect();
        let (dx_a, _dy_a, dz_a) = direction(&psi_aff);
        let (ap_a, ad_a) = steps(&dx_a, &dz_a);
        let (ap_a, ad_a) = (ap_a.min(1.0), ad_a.min(1.0));
        let mu_aff: f64 =
            (0..nb).map(|k| inner(&(&it.x[k] + dx_a[k].scale(ap_a)), &(&it.z[k] + dz_a[k].scale(ad_a)))).sum::<f64>()
                / ntot;
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);
        let psi: Vec<CMat> =
            (0..nb).map(|k| zinv[k].scale(sigma * mu) - &it.x[k] - sym(&(&dx_a[k] * &dz_a[k] * &zinv[k]))).collect();
        let (dx, dy, dz) = direction(&psi);
        let (ap, ad) = steps(&dx, &dz);
        let gamma = 0.9 + 0.09 * ap_a.min(ad_a);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls >= 3 {
                status = SolveStatus::NumericalTrouble;
                break;
            }
        } else {
            stalls = 0;
        }
        for k in 0..nb {
            it.x[k] = sym(&(&it.x[k] + dx[k].scale(ap)));
            it.z[k] = sym(&(&it.z[k] + dz[k].scale(ad)));
        }
        it.y += dy.scale(ad);
    }

    let (final_it, met) = match (status, best) {
        (SolveStatus::Optimal, _) | (_, None) => {
            let met = evaluate(data, &it, &c_dense, bnorm, cnorm);
            (it, met)
        }
        (_, Some((_, b_it, b_met, _))) => (b_it, b_met),
    };
    SdpSolution {
        status,
        primal_blocks: final_it.x,
        dual_multipliers: final_it.y.iter().copied().collect(),
        dual_slack_blocks: final_it.z,
        objective_value: met.pobj,
        dual_objective: met.dobj,
        duality_gap: met.gap,
        primal_infeasibility: met.pinf,
        dual_infeasibility: met.dinf,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, c};
    use crate::random;
    use crate::sdp::problem::{Equality, LinearTerm};

    fn term(block: usize, m: &CMat) -> LinearTerm {
        LinearTerm { block, coeff: HermSparse::from_dense(m, 0.0) }
    }

    #[test]
    fn scalar_bound() {
        // max s subject to s + u = 1, s, u >= 0.
        let mut p = SdpProblem::new(true);
        let s = p.add_block("s", 1);
        let u = p.add_block("u", 1);
        let one = CMat::identity(1, 1);
        p.equalities.push(Equality { terms: vec![term(s, &one), term(u, &one)], rhs: 1.0 });
        p.objective.push(term(s, &one));
        let sol = solve(&p, &Tolerances::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-7);
    }

    #[test]
    fn matrix_bound() {
        // max s subject to s I + U = I (2x2), i.e. s I ⪯ I.
        let mut p = SdpProblem::new(true);
        let s = p.add_block("s", 1);
        let u = p.add_block("U", 2);
        for (a, b) in [(0, 0), (1, 1)] {
            let mut e = HermSparse::new();
            e.add(a, b, c(1.0, 0.0));
            p.equalities.push(Equality {
                terms: vec![term(s, &CMat::identity(1, 1)), LinearTerm { block: u, coeff: e }],
                rhs: 1.0,
            });
        }
        for (re, im) in [(1.0, 0.0), (0.0, 1.0)] {
            let mut e = HermSparse::new();
            e.add(0, 1, c(re, im) * 0.5);
            p.equalities.push(Equality { terms: vec![LinearTerm { block: u, coeff: e }], rhs: 0.0 });
        }
        p.objective.push(term(s, &CMat::identity(1, 1)));
        let sol = solve(&p, &Tolerances::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-7);
    }

    /// Builds a problem whose optimum is known from a complementary primal-dual pair.
    fn planted(seed: u64, dims: &[usize], m: usize) -> (SdpProblem, f64) {
        let mut rng = random::rng(seed);
        let mut p = SdpProblem::new(false);
        let mut xs = Vec::new();
        let mut zs = Vec::new();
        for (k, &n) in dims.iter().enumerate() {
            p.add_block(format!("X{k}"), n);
            let u = random::haar_unitary(n, &mut rng);
            let r = n / 2;
            let mut dx = CMat::zeros(n, n);
            let mut dz = CMat::zeros(n, n);
            for i in 0..n {
                if i < r {
                    dx[(i, i)] = c(1.0 + i as f64, 0.0);
                } else {
                    dz[(i, i)] = c(0.5 + i as f64, 0.0);
                }
            }
            xs.push(&u * dx * u.adjoint());
            zs.push(&u * dz * u.adjoint());
        }
        let mut cmat: Vec<CMat> = zs.clone();
        for _ in 0..m {
            let mut terms = Vec::new();
            let mut rhs = 0.0;
            let yi: f64 = rand::Rng::random::<f64>(&mut rng) - 0.5;
            for (k, &n) in dims.iter().enumerate() {
                let a = random::random_hermitian(n, &mut rng);
                rhs += linalg::trace_product(&a, &xs[k]);
                cmat[k] += a.scale(yi);
                terms.push(term(k, &a));
            }
            p.equalities.push(Equality { terms, rhs });
        }
        let opt: f64 = (0..dims.len()).map(|k| linalg::trace_product(&cmat[k], &xs[k])).sum();
        for (k, cm) in cmat.iter().enumerate() {
            p.objective.push(term(k, cm));
        }
        (p, opt)
    }

    #[test]
    fn planted_optimum_is_recovered() {
        for seed in 0..4 {
            let (p, opt) = planted(seed, &[4, 3, 1], 14);
            let sol = solve(&p, &Tolerances::default()).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal, "seed {seed}");
            assert!((sol.objective_value - opt).abs() < 1e-6 * (1.0 + opt.abs()), "{} vs {opt}", sol.objective_value);
            assert!((sol.dual_objective - sol.objective_value).abs() < 1e-6 * (1.0 + opt.abs()));
        }
    }

    #[test]
    fn inconsistent_duplicate_rows_are_infeasible() {
        let mut p = SdpProblem::new(false);
        let x = p.add_block("x", 1);
        let one = CMat::identity(1, 1);
        p.equalities.push(Equality { terms: vec![term(x, &one)], rhs: 1.0 });
        p.equalities.push(Equality { terms: vec![term(x, &one.scale(2.0))], rhs: 3.0 });
        p.objective.push(term(x, &one));
        assert_eq!(solve(&p, &Tolerances::default()).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn consistent_duplicate_rows_are_dropped() {
        let mut p = SdpProblem::new(false);
        let x = p.add_block("x", 2);
        let id = CMat::identity(2, 2);
        p.equalities.push(Equality { terms: vec![term(x, &id)], rhs: 1.0 });
        p.equalities.push(Equality { terms: vec![term(x, &id.scale(2.0))], rhs: 2.0 });
        let mut cm = CMat::zeros(2, 2);
        cm[(0, 0)] = c(1.0, 0.0);
        p.objective.push(term(x, &cm));
        let sol = solve(&p, &Tolerances::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.objective_value.abs() < 1e-7);
    }

    #[test]
    fn negative_trace_is_infeasible() {
        let mut p = SdpProblem::new(false);
        let x = p.add_block("x", 2);
        p.equalities.push(Equality { terms: vec![term(x, &CMat::identity(2, 2))], rhs: -1.0 });
        let sol = solve(&p, &Tolerances::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }
}
