use quantum_memory::channel::ChoiOperator;
use quantum_memory::dynamics::{
    amplitude_c, channel_two_level, rate_time_to_tau, three_level_state, GiantAtom2LParams, GiantAtom3LParams,
};
use quantum_memory::sdp::Tolerances;
use quantum_memory::witness::{
    assemble_from_coefficients, evaluate_witness, restricted_witness_search, verify_witness, Normalization,
    RestrictedBasis, SearchOptions, VerifyMode, WitnessCoefficients, WitnessPair,
};
use serde::Serialize;
use std::f64::consts::PI;

use crate::CliError;

/// Published violation of the two-level tables.
pub const QUBIT_VIOLATION: f64 = -0.0839;
/// Published violation of the three-level restricted witness.
pub const QUTRIT_VIOLATION: f64 = -0.016;
/// Coefficient sum the three-level witness is normalized to.
pub const QUTRIT_COEFF_SUM: f64 = 27.039;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub target: String,
    pub passed: bool,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, measured: f64, target: String, passed: bool, start: std::time::Instant) {
        self.checks.push(Check { name: name.into(), measured, target, passed, seconds: start.elapsed().as_secs_f64() });
    }
}

/// Two-level channels at amplitude-rate times `a1`, `a2`.
pub fn ga2_pair(omega_e_tau: f64, a1: f64, a2: f64) -> quantum_memory::Result<(ChoiOperator, ChoiOperator)> {
    let p = GiantAtom2LParams::new(omega_e_tau, 12.0);
    let e = |a: f64| channel_two_level(amplitude_c(rate_time_to_tau(a, p.amplitude_rate()), &p)?);
    Ok((e(a1)?, e(a2)?))
}

/// Three-level channels at the standard parameters and amplitude-rate times `a1`, `a2`.
pub fn ga3_pair(a1: f64, a2: f64) -> quantum_memory::Result<(ChoiOperator, ChoiOperator)> {
    let p = GiantAtom3LParams::new(40.0 * PI, 20.0 * PI, 4.0, 8.0);
    let e = |a: f64| three_level_state(rate_time_to_tau(a, p.amplitude_rate()), &p)?.channel();
    Ok((e(a1)?, e(a2)?))
}

pub fn qubit_table_witness() -> quantum_memory::Result<WitnessPair> {
    assemble_from_coefficients(&WitnessCoefficients::qubit_tables(), &RestrictedBasis::pauli())
}

pub fn qutrit_table_witness() -> quantum_memory::Result<WitnessPair> {
    assemble_from_coefficients(&WitnessCoefficients::qutrit_tables(), &RestrictedBasis::qutrit_states())
}

/// Loads the shipped tables and checks them against the published numbers. `full` adds the
/// validity check of the three-level tables, which takes minutes.
pub fn reproduce_fixtures(full: bool) -> Result<Report, CliError> {
    let tol = Tolerances::default();
    let mut report = Report::default();
    let now = std::time::Instant::now;

    let t = now();
    let w2 = qubit_table_witness()?;
    let (e1, e2) = ga2_pair(2.0 * PI, 5.9, 7.0)?;
    let v = evaluate_witness(&w2, &e1, &e2)?;
    report.push(
        "qubit tables: violation at (5.9, 7.0), omega_e tau = 2 pi",
        v,
        format!("< {QUBIT_VIOLATION}"),
        v < QUBIT_VIOLATION,
        t,
    );
    let n = v / w2.trace_sum();
    report.push("qubit tables: violation / (tr W1 + tr W2)", n, "< -0.01".into(), n < -0.01, t);

    let t = now();
    let cert = verify_witness(&w2, VerifyMode::Extended, &tol)?;
    report.push("qubit tables: valid witness (shift needed)", cert.shift, "valid".into(), cert.valid, t);

    let t = now();
    let basis = RestrictedBasis::pauli();
    let mask = basis.with_mask(WitnessCoefficients::qubit_tables().support())?;
    let r =
        restricted_witness_search(&e1, &e2, &mask, Normalization::TraceSum(w2.trace_sum()), &SearchOptions::default())?;
    let target = QUBIT_VIOLATION * 0.95;
    report.push("qubit search on the table support", r.value, format!("<= {target:.5}"), r.value <= target, t);

    let t = now();
    let (f1, f2) = ga3_pair(6.0, 6.92)?;
    let b3 = RestrictedBasis::qutrit_states();
    let r =
        restricted_witness_search(&f1, &f2, &b3, Normalization::CoeffSum(QUTRIT_COEFF_SUM), &SearchOptions::default())?;
    let target = QUTRIT_VIOLATION * 0.9;
    report.push(
        "qutrit search, eleven-state basis at (6, 6.92)",
        r.value,
        format!("<= {target:.5}"),
        r.value <= target,
        t,
    );

    let t = now();
    let w3 = qutrit_table_witness()?;
    let v3 = evaluate_witness(&w3, &f1, &f2)?;
    report.push("qutrit tables: value at (6, 6.92) (informational)", v3, "recorded".into(), true, t);
    if full {
        let t = now();
        let cert = verify_witness(&w3, VerifyMode::Extended, &tol)?;
        report.push("qutrit tables: valid witness (shift needed)", cert.shift, "valid".into(), cert.valid, t);
    }

    let t = now();
    for (name, w, d) in [("qubit", &w2, 2), ("qutrit", &w3, 3)] {
        let id = ChoiOperator::identity(d);
        let v = evaluate_witness(w, &id, &id)?;
        report.push(&format!("{name} tables on the identity pair"), v, ">= -1e-8".into(), v >= -1e-8, t);
    }
    Ok(report)
}
