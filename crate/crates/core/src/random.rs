//! Seeded random channels, states and unitaries.

use crate::channel::ChoiOperator;
use crate::linalg::{self, CMat, C64};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ginibre<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    })
}

/// Haar-distributed unitary via QR of a Ginibre matrix with the phase correction.
pub fn haar_unitary<R: Rng>(d: usize, rng: &mut R) -> CMat {
    let qr = ginibre(d, d, rng).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..d {
        let diag = r[(k, k)];
        let phase = if diag.norm() > 0.0 { diag / diag.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, k)] *= phase;
        }
    }
    q
}

pub fn random_state<R: Rng>(d: usize, rng: &mut R) -> CMat {
    let g = ginibre(d, d, rng);
    let p = &g * g.adjoint();
    let t = linalg::trace(&p);
    p.map(|z| z / t)
}

/// Random channel with Kraus rank `rank`, normalized so that the output trace is preserved.
pub fn random_cptp<R: Rng>(d_in: usize, d_out: usize, rank: usize, rng: &mut R) -> ChoiOperator {
    let g = ginibre(d_in * d_out, rank.max(1), rng);
    let p = &g * g.adjoint();
    let t = linalg::partial_trace(&p, &[d_in, d_out], 1).expect("shape");
    let (vals, vecs) = linalg::eigh(&t);
    let inv_sqrt = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        d_in,
        vals.iter().map(|&v| C64::new(1.0 / v.max(1e-300).sqrt(), 0.0)),
    ));
    let s = &vecs * inv_sqrt * vecs.adjoint();
    let lift = s.kronecker(&linalg::identity(d_out));
    ChoiOperator::from_hermitian_part(d_in, d_out, &lift * p * lift.adjoint())
}

pub fn random_unitary_channel<R: Rng>(d: usize, rng: &mut R) -> ChoiOperator {
    crate::channel::unitary_channel(&haar_unitary(d, rng)).expect("Haar sample is unitary")
}

pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> CMat {
    linalg::hermitian_part(&ginibre(n, n, rng))
}

/// Uniform sample from the closed unit disk.
pub fn unit_disk<R: Rng>(rng: &mut R) -> C64 {
    let r: f64 = rng.random::<f64>().sqrt();
    let th: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    C64::from_polar(r, th)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::is_cptp;

    #[test]
    fn random_channels_are_cptp() {
        let mut r = rng(3);
        for &(a, b, k) in &[(2, 2, 1), (2, 2, 4), (3, 3, 2), (2, 3, 3)] {
            let e = random_cptp(a, b, k, &mut r);
            assert!(is_cptp(&e, 1e-9).cptp);
        }
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut r = rng(5);
        let u = haar_unitary(3, &mut r);
        assert!(linalg::max_abs_diff(&(u.adjoint() * &u), &linalg::identity(3)) < 1e-12);
    }
}
