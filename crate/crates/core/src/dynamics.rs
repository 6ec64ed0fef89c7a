//! Closed-form spontaneous-emission dynamics of giant atoms, plus the dephasing and
//! two-qubit Heisenberg example channels.
//!
//! Times are measured in units of the delay `tau`; rates enter as products with `tau`.

use crate::channel::{choi_from_action, ChoiOperator, MapAction};
use crate::error::{invalid, Result};
use crate::linalg::{CMat, C64, ONE, ZERO};
use serde::{Deserialize, Serialize};

fn default_series_terms() -> usize {
    64
}

fn default_integrator_step() -> f64 {
    1e-3
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GiantAtom2LParams {
    pub omega_e_tau: f64,
    pub gamma_tau: f64,
    #[serde(default = "default_series_terms")]
    pub series_terms: usize,
}

impl GiantAtom2LParams {
    pub fn new(omega_e_tau: f64, gamma_tau: f64) -> Self {
        Self { omega_e_tau, gamma_tau, series_terms: default_series_terms() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_tau > 0.0) || !self.omega_e_tau.is_finite() {
            return invalid("gamma_tau must be positive and omega_e_tau finite");
        }
        Ok(())
    }

    /// Amplitude decay rate (in units of 1/tau) used for the dimensionless plotting axis.
    pub fn amplitude_rate(&self) -> f64 {
        self.gamma_tau / 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GiantAtom3LParams {
    pub omega_e_tau: f64,
    pub omega_s_tau: f64,
    pub gamma1_tau: f64,
    pub gamma2_tau: f64,
    #[serde(default = "default_series_terms")]
    pub series_terms: usize,
    #[serde(default = "default_integrator_step")]
    pub integrator_step: f64,
}

impl GiantAtom3LParams {
    pub fn new(omega_e_tau: f64, omega_s_tau: f64, gamma1_tau: f64, gamma2_tau: f64) -> Self {
        Self {
            omega_e_tau,
            omega_s_tau,
            gamma1_tau,
            gamma2_tau,
            series_terms: default_series_terms(),
            integrator_step: default_integrator_step(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma1_tau > 0.0 && self.gamma2_tau > 0.0) {
            return invalid("gamma1_tau and gamma2_tau must be positive");
        }
        if !(self.integrator_step > 0.0) {
            return invalid("integrator_step must be positive");
        }
        if !self.omega_e_tau.is_finite() || !self.omega_s_tau.is_finite() {
            return invalid("frequencies must be finite");
        }
        Ok(())
    }

    pub fn gamma_bar1(&self) -> f64 {
        0.5 * (self.gamma1_tau + self.gamma2_tau)
    }

    pub fn gamma_bar2(&self) -> C64 {
        (C64::from_polar(self.gamma1_tau, -self.omega_s_tau) + self.gamma2_tau) * 0.5
    }

    pub fn amplitude_rate(&self) -> f64 {
        self.gamma_bar1()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelDecay {
    pub c: C64,
    pub time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreeLevelDecay {
    pub d: C64,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub phi_s: f64,
    pub time: f64,
}

impl ThreeLevelDecay {
    pub fn channel(&self) -> Result<ChoiOperator> {
        channel_three_level(self.d, self.g, self.phi_s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingParams {
    pub alpha: C64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergParams {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    #[serde(default)]
    pub time: f64,
}

/// `sum_{n <= floor(t)} (-a (t-n))^n / n! * exp(-k (t-n))`, the solution of the delay equation
/// `x'(t) = -k x(t) - a x(t-1)` with `x(0) = 1` and `x(t<0) = 0`.
fn delay_series(t: f64, k: C64, a: C64, cap: usize) -> Result<C64> {
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("time must be nonnegative and finite, got {t}"));
    }
    let nmax = t.floor() as usize;
    if cap < nmax + 1 {
        return invalid(format!("series_terms = {cap} but t/tau = {t} needs at least {}", nmax + 1));
    }
    let mut sum = ZERO;
    for n in 0..=nmax {
        let x = t - n as f64;
        let mut term = (-k * x).exp();
        for m in 1..=n {
            term *= -a * x / m as f64;
        }
        sum += term;
    }
    Ok(sum)
}

pub fn amplitude_c(t_over_tau: f64, p: &GiantAtom2LParams) -> Result<C64> {
    p.validate()?;
    let k = C64::new(p.gamma_tau / 2.0, p.omega_e_tau);
    delay_series(t_over_tau, k, C64::new(p.gamma_tau / 2.0, 0.0), p.series_terms)
}

pub fn amplitude_d(t_over_tau: f64, p: &GiantAtom3LParams) -> Result<C64> {
    p.validate()?;
    let k = C64::new(p.gamma_bar1(), p.omega_e_tau);
    delay_series(t_over_tau, k, p.gamma_bar2(), p.series_terms)
}

pub fn two_level_state(t_over_tau: f64, p: &GiantAtom2LParams) -> Result<TwoLevelDecay> {
    Ok(TwoLevelDecay { c: amplitude_c(t_over_tau, p)?, time: t_over_tau })
}

fn flux(t: f64, p: &GiantAtom3LParams) -> (f64, f64) {
    let d = amplitude_d(t, p).expect("validated before integration");
    let delayed = if t >= 1.0 { amplitude_d(t - 1.0, p).expect("validated") } else { ZERO };
    let cross = delayed * d.conj();
    let pop = d.norm_sqr();
    let g = p.gamma1_tau * (pop + (C64::from_polar(1.0, -p.omega_s_tau) * cross).re);
    let s = p.gamma2_tau * (pop + cross.re);
    (g, s)
}

/// Composite Simpson rule on `[a, b]` with an even number of panels no wider than `h`.
fn simpson_pair(a: f64, b: f64, h: f64, p: &GiantAtom3LParams) -> (f64, f64) {
    if b <= a {
        return (0.0, 0.0);
    }
    let mut n = ((b - a) / h).ceil() as usize;
    n = n.max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let w = (b - a) / n as f64;
    let (mut sg, mut ss) = (0.0, 0.0);
    for k in 0..=n {
        let weight = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        // Open the right end of each segment so the jump of the delayed term at integer
        // times is taken from the correct side.
        let t = if k == n { b - 1e-14 * b.max(1.0) } else { a + w * k as f64 };
        let (fg, fs) = flux(t, p);
        sg += weight * fg;
        ss += weight * fs;
    }
    (sg * w / 3.0, ss * w / 3.0)
}

/// Ground and metastable populations fed by emission from the excited level.
///
/// The fluxes are integrated piecewise between delay multiples, where the integrand is smooth.
pub fn populations_g_s(t_over_tau: f64, p: &GiantAtom3LParams) -> Result<(f64, f64)> {
    p.validate()?;
    let d_t = amplitude_d(t_over_tau, p)?;
    let (mut g, mut s) = (0.0, 0.0);
    let mut a = 0.0;
    while a < t_over_tau {
        let b = (a.floor() + 1.0).min(t_over_tau);
        let (dg, ds) = simpson_pair(a, b, p.integrator_step, p);
        g += dg;
        s += ds;
        a = b;
    }
    let defect = (d_t.norm_sqr() + g + s - 1.0).abs();
    if defect > 1e-6 {
        return invalid(format!(
            "integrator_step {} too coarse: population conservation off by {defect:.2e}",
            p.integrator_step
        ));
    }
    Ok((g, s))
}

pub fn three_level_state(t_over_tau: f64, p: &GiantAtom3LParams) -> Result<ThreeLevelDecay> {
    let d = amplitude_d(t_over_tau, p)?;
    let (g, s) = populations_g_s(t_over_tau, p)?;
    Ok(ThreeLevelDecay {
        d,
        g,
        s,
        phi_s: (p.omega_s_tau * t_over_tau).rem_euclid(std::f64::consts::TAU),
        time: t_over_tau,
    })
}

pub fn channel_two_level(c: C64) -> Result<ChoiOperator> {
    if !(c.norm() <= 1.0 + 1e-12) {
        return invalid(format!("|c| = {} exceeds 1", c.norm()));
    }
    let p = c.norm_sqr().min(1.0);
    let mut m = CMat::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(0, 3)] = c.conj();
    m[(2, 2)] = C64::new(1.0 - p, 0.0);
    m[(3, 0)] = c;
    m[(3, 3)] = C64::new(p, 0.0);
    ChoiOperator::new(2, 2, m)
}

pub fn channel_three_level(d: C64, g: f64, phi_s: f64) -> Result<ChoiOperator> {
    let pd = d.norm_sqr();
    if !(g >= -1e-9) || !(pd + g <= 1.0 + 1e-9) || !phi_s.is_finite() {
        return invalid(format!("invalid three-level data: |d|^2 = {pd}, G = {g}"));
    }
    let g = g.max(0.0);
    let rest = (1.0 - pd - g).max(0.0);
    let ph = C64::from_polar(1.0, phi_s);
    let mut m = CMat::zeros(9, 9);
    m[(0, 0)] = ONE;
    m[(0, 4)] = ph;
    m[(0, 8)] = d.conj();
    m[(4, 0)] = ph.conj();
    m[(4, 4)] = ONE;
    m[(4, 8)] = d.conj() * ph.conj();
    m[(6, 6)] = C64::new(g, 0.0);
    m[(7, 7)] = C64::new(rest, 0.0);
    m[(8, 0)] = d;
    m[(8, 4)] = d * ph;
    m[(8, 8)] = C64::new(pd, 0.0);
    ChoiOperator::new(3, 3, m)
}

pub fn dephasing_channel(alpha: C64) -> Result<ChoiOperator> {
    if !(alpha.norm() <= 1.0 + 1e-12) {
        return invalid(format!("|alpha| = {} exceeds 1", alpha.norm()));
    }
    let mut m = CMat::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(3, 3)] = ONE;
    m[(0, 3)] = alpha;
    m[(3, 0)] = alpha.conj();
    ChoiOperator::new(2, 2, m)
}

/// Bell basis (columns) of two qubits and the eigenvalues of XX, YY, ZZ on each vector.
fn bell_basis() -> (CMat, [[f64; 3]; 4]) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let r = |x: f64| C64::new(x * h, 0.0);
    let z = ZERO;
    #[rustfmt::skip]
    let b = CMat::from_row_slice(4, 4, &[
        r(1.0), r(1.0),  z,      z,
        z,      z,       r(1.0), r(1.0),
        z,      z,       r(1.0), r(-1.0),
        r(1.0), r(-1.0), z,      z,
    ]);
    let charges = [[1.0, -1.0, 1.0], [-1.0, 1.0, 1.0], [1.0, 1.0, -1.0], [-1.0, -1.0, -1.0]];
    (b, charges)
}

/// Propagator `exp(i t H)` with `2H = -(Jx XX + Jy YY + Jz ZZ)`, system factor first.
pub fn heisenberg_propagator(t: f64, p: &HeisenbergParams) -> CMat {
    let (b, charges) = bell_basis();
    let phases = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        4,
        charges.iter().map(|q| {
            let e = -0.5 * (p.jx * q[0] + p.jy * q[1] + p.jz * q[2]);
            C64::from_polar(1.0, t * e)
        }),
    ));
    &b * phases * b.adjoint()
}

/// Reduced dynamics of the first qubit with the second prepared in |1>.
pub fn heisenberg_channel(t: f64, p: &HeisenbergParams) -> Result<ChoiOperator> {
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("time must be nonnegative, got {t}"));
    }
    let u = heisenberg_propagator(t, p);
    let action = MapAction::from_fn(2, |i, j| {
        CMat::from_fn(2, 2, |k, l| {
            let mut acc = ZERO;
            for m in 0..2 {
                acc += u[(2 * k + m, 2 * i + 1)] * u[(2 * l + m, 2 * j + 1)].conj();
            }
            acc
        })
    });
    choi_from_action(&action)
}

/// Excited-state population of the two-level emitter, |c|^2, convenience for plots.
pub fn excited_population(t_over_tau: f64, p: &GiantAtom2LParams) -> Result<f64> {
    Ok(amplitude_c(t_over_tau, p)?.norm_sqr())
}

/// Converts the amplitude-rate time `kappa * t` to units of `tau`.
pub fn rate_time_to_tau(rate_time: f64, amplitude_rate: f64) -> f64 {
    rate_time / amplitude_rate
}
