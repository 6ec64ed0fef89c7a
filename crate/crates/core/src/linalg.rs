//! Dense complex matrix helpers for multipartite operators.

use crate::error::{dim_err, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Largest elementwise modulus of `m - m^†`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Real part of tr(A B).
pub fn trace_product(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..n {
            s += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    s
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().sum()
}

fn check_dims(m: &CMat, dims: &[usize]) -> Result<usize> {
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total {
        return dim_err(format!(
            "matrix is {}x{} but subsystem dims {:?} multiply to {}",
            m.nrows(),
            m.ncols(),
            dims,
            total
        ));
    }
    Ok(total)
}

/// Digits of a flat index in the mixed radix given by `dims` (first factor most significant).
pub fn split_index(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
}

pub fn join_index(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (d, n)| acc * n + d)
}

pub fn partial_trace(m: &CMat, dims: &[usize], traced: usize) -> Result<CMat> {
    check_dims(m, dims)?;
    if traced >= dims.len() {
        return dim_err(format!("no subsystem {traced} among {} factors", dims.len()));
    }
    let kept: Vec<usize> = dims.iter().enumerate().filter(|&(k, _)| k != traced).map(|(_, &d)| d).collect();
    let n_out: usize = kept.iter().product();
    let mut out = CMat::zeros(n_out, n_out);
    let mut rd = vec![0; kept.len()];
    let mut cd = vec![0; kept.len()];
    let mut full_r = vec![0; dims.len()];
    let mut full_c = vec![0; dims.len()];
    for r in 0..n_out {
        split_index(r, &kept, &mut rd);
        for cidx in 0..n_out {
            split_index(cidx, &kept, &mut cd);
            let mut acc = ZERO;
            for t in 0..dims[traced] {
                let mut j = 0;
                for k in 0..dims.len() {
                    if k == traced {
                        full_r[k] = t;
                        full_c[k] = t;
                    } else {
                        full_r[k] = rd[j];
                        full_c[k] = cd[j];
                        j += 1;
                    }
                }
                acc += m[(join_index(&full_r, dims), join_index(&full_c, dims))];
            }
            out[(r, cidx)] = acc;
        }
    }
    Ok(out)
}

/// Index permutation realizing the partial transpose: entry (r, c) of the result is
/// entry `map(r, c)` of the input.
pub fn partial_transpose_pair(
    r: usize,
    c: usize,
    dims: &[usize],
    transposed: &[usize],
    rd: &mut [usize],
    cd: &mut [usize],
) -> (usize, usize) {
    split_index(r, dims, rd);
    split_index(c, dims, cd);
    for &k in transposed {
        std::mem::swap(&mut rd[k], &mut cd[k]);
    }
    (join_index(rd, dims), join_index(cd, dims))
}

pub fn partial_transpose(m: &CMat, dims: &[usize], transposed: &[usize]) -> Result<CMat> {
    let n = check_dims(m, dims)?;
    if let Some(&bad) = transposed.iter().find(|&&k| k >= dims.len()) {
        return dim_err(format!("no subsystem {bad} among {} factors", dims.len()));
    }
    let mut rd = vec![0; dims.len()];
    let mut cd = vec![0; dims.len()];
    Ok(CMat::from_fn(n, n, |r, c| {
        let (i, j) = partial_transpose_pair(r, c, dims, transposed, &mut rd, &mut cd);
        m[(i, j)]
    }))
}

/// Eigenvalues (ascending) and matching eigenvectors of a Hermitian matrix.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = CMat::zeros(m.nrows(), m.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

pub fn eigenvalues(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn outer(v: &DVector<C64>) -> CMat {
    v * v.adjoint()
}

pub fn ket(d: usize, k: usize) -> DVector<C64> {
    let mut v = DVector::zeros(d);
    v[k] = ONE;
    v
}

/// Unnormalized maximally entangled projector sum_ij |ii><jj| on C^d ⊗ C^d.
pub fn phi_plus(d: usize) -> CMat {
    let mut m = CMat::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + i, j * d + j)] = ONE;
        }
    }
    m
}

pub fn pauli(k: usize) -> CMat {
    let z = ZERO;
    let o = ONE;
    match k {
        0 => CMat::from_row_slice(2, 2, &[o, z, z, o]),
        1 => CMat::from_row_slice(2, 2, &[z, o, o, z]),
        2 => CMat::from_row_slice(2, 2, &[z, -I, I, z]),
        3 => CMat::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => panic!("pauli index {k} out of range"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        CMat::from_fn(n, n, |_, _| c(next(), next()))
    }

    #[test]
    fn trace_of_phi_plus_over_b_is_identity() {
        let t = partial_trace(&phi_plus(2), &[2, 2], 1).unwrap();
        assert!(max_abs_diff(&t, &identity(2)) < 1e-15);
    }

    #[test]
    fn partial_trace_factorizes_on_products() {
        let a = random_matrix(3, 1);
        let b = random_matrix(2, 2);
        let t = partial_trace(&kron(&a, &b), &[3, 2], 1).unwrap();
        assert!(max_abs_diff(&t, &a.scale(1.0).map(|x| x * trace(&b))) < 1e-12);
        let t0 = partial_trace(&kron(&a, &b), &[3, 2], 0).unwrap();
        assert!(max_abs_diff(&t0, &b.map(|x| x * trace(&a))) < 1e-12);
    }

    #[test]
    fn partial_transpose_of_product() {
        let a = random_matrix(2, 3);
        let b = random_matrix(3, 4);
        let pt = partial_transpose(&kron(&a, &b), &[2, 3], &[0]).unwrap();
        assert!(max_abs_diff(&pt, &kron(&a.transpose(), &b)) < 1e-14);
    }

    #[test]
    fn partial_transpose_of_phi_plus_has_one_negative_eigenvalue() {
        let pt = partial_transpose(&phi_plus(2), &[2, 2], &[0]).unwrap();
        let ev = eigenvalues(&pt);
        let expected = [-1.0, 1.0, 1.0, 1.0];
        for (x, y) in ev.iter().zip(expected) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_transpose_is_involutive() {
        let m = random_matrix(8, 5);
        let dims = [2, 2, 2];
        let twice = partial_transpose(&partial_transpose(&m, &dims, &[0, 2]).unwrap(), &dims, &[0, 2]).unwrap();
        assert!(max_abs_diff(&twice, &m) < 1e-15);
    }

    #[test]
    fn bad_dims_are_rejected() {
        assert!(partial_trace(&identity(4), &[2, 3], 0).is_err());
        assert!(partial_trace(&identity(4), &[2, 2], 2).is_err());
        assert!(partial_transpose(&identity(4), &[2, 2], &[5]).is_err());
    }

    #[test]
    fn eigh_reconstructs() {
        let m = hermitian_part(&random_matrix(5, 9));
        let (vals, vecs) = eigh(&m);
        let d = CMat::from_diagonal(&DVector::from_iterator(5, vals.iter().map(|&x| c(x, 0.0))));
        assert!(max_abs_diff(&(&vecs * d * vecs.adjoint()), &m) < 1e-12);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }
}
