//! Thin browser bindings over `quantum_memory`. Every export returns JSON so the page stays plain.

use quantum_memory::criteria::{classify_two_level, MemoryKind};
use quantum_memory::dynamics::{
    amplitude_c, amplitude_d, channel_two_level, rate_time_to_tau, GiantAtom2LParams, GiantAtom3LParams,
};
use quantum_memory::linalg::C64;
use quantum_memory::sdp::{
    markov_robustness, ppt_robustness, robustness_from_weight, PptOptions, SymmetryChoice, Tolerances,
};
use quantum_memory::witness::{assemble_from_coefficients, evaluate_witness, RestrictedBasis, WitnessCoefficients};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Fixed delay-scaled decay rate of the two-level emitter; times are given as `(gamma/2) t`.
const GAMMA_TAU: f64 = 12.0;

#[derive(Serialize)]
pub struct Curves {
    pub x: Vec<f64>,
    pub excited_2l: Vec<f64>,
    pub excited_3l: Vec<f64>,
}

#[derive(Serialize)]
pub struct PairReport {
    pub c1: [f64; 2],
    pub c2: [f64; 2],
    pub verdict: MemoryKind,
    pub margin: f64,
    pub r_quantum: f64,
    pub r_markov: f64,
}

#[derive(Serialize)]
pub struct WitnessReport {
    pub value: f64,
    pub normalized: f64,
}

fn ga2(omega_e_tau: f64) -> GiantAtom2LParams {
    GiantAtom2LParams::new(omega_e_tau, GAMMA_TAU)
}

fn amplitude(omega_e_tau: f64, a: f64) -> Result<C64, String> {
    let p = ga2(omega_e_tau);
    amplitude_c(rate_time_to_tau(a, p.amplitude_rate()), &p).map_err(|e| e.to_string())
}

/// `|c|^2` for the two-level emitter and `|d|^2` for the three-level one at its standard parameters.
pub fn curves(omega_e_tau: f64, x_max: f64, steps: usize) -> Result<Curves, String> {
    if steps < 2 || !(x_max > 0.0) {
        return Err("need at least two samples on a positive range".into());
    }
    let p3 = GiantAtom3LParams::new(40.0 * std::f64::consts::PI, 20.0 * std::f64::consts::PI, 4.0, 8.0);
    let mut out = Curves { x: Vec::with_capacity(steps), excited_2l: vec![], excited_3l: vec![] };
    for k in 0..steps {
        let x = x_max * k as f64 / (steps - 1) as f64;
        out.x.push(x);
        out.excited_2l.push(amplitude(omega_e_tau, x)?.norm_sqr());
        let d = amplitude_d(rate_time_to_tau(x, p3.amplitude_rate()), &p3).map_err(|e| e.to_string())?;
        out.excited_3l.push(d.norm_sqr());
    }
    Ok(out)
}

pub fn classify(omega_e_tau: f64, a1: f64, a2: f64) -> Result<PairReport, String> {
    let (c1, c2) = (amplitude(omega_e_tau, a1)?, amplitude(omega_e_tau, a2)?);
    let v = classify_two_level(c1, c2);
    let e1 = channel_two_level(c1).map_err(|e| e.to_string())?;
    let e2 = channel_two_level(c2).map_err(|e| e.to_string())?;
    let run = ppt_robustness(&e1, &e2, &PptOptions::default()).map_err(|e| e.to_string())?;
    let (r_markov, _) =
        markov_robustness(&e1, &e2, &SymmetryChoice::Auto, &Tolerances::default()).map_err(|e| e.to_string())?;
    Ok(PairReport {
        c1: [c1.re, c1.im],
        c2: [c2.re, c2.im],
        verdict: v.kind,
        margin: v.margin,
        r_quantum: robustness_from_weight(run.s_star).1,
        r_markov,
    })
}

pub fn table_witness(omega_e_tau: f64, a1: f64, a2: f64) -> Result<WitnessReport, String> {
    let w = assemble_from_coefficients(&WitnessCoefficients::qubit_tables(), &RestrictedBasis::pauli())
        .map_err(|e| e.to_string())?;
    let e1 = channel_two_level(amplitude(omega_e_tau, a1)?).map_err(|e| e.to_string())?;
    let e2 = channel_two_level(amplitude(omega_e_tau, a2)?).map_err(|e| e.to_string())?;
    let value = evaluate_witness(&w, &e1, &e2).map_err(|e| e.to_string())?;
    Ok(WitnessReport { value, normalized: value / w.trace_sum() })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = curves)]
pub fn curves_js(omega_e_tau: f64, x_max: f64, steps: usize) -> Result<String, JsValue> {
    to_js(curves(omega_e_tau, x_max, steps))
}

#[wasm_bindgen(js_name = classify)]
pub fn classify_js(omega_e_tau: f64, a1: f64, a2: f64) -> Result<String, JsValue> {
    to_js(classify(omega_e_tau, a1, a2))
}

#[wasm_bindgen(js_name = tableWitness)]
pub fn table_witness_js(omega_e_tau: f64, a1: f64, a2: f64) -> Result<String, JsValue> {
    to_js(table_witness(omega_e_tau, a1, a2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn curves_start_excited() {
        let c = curves(2.0 * PI, 12.0, 61).unwrap();
        assert_eq!(c.x.len(), 61);
        assert!((c.excited_2l[0] - 1.0).abs() < 1e-12);
        assert!((c.excited_3l[0] - 1.0).abs() < 1e-12);
        assert!(c.excited_2l.iter().all(|&p| (0.0..=1.0 + 1e-12).contains(&p)));
        assert!(curves(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn decay_is_markovian_and_revival_is_not() {
        let early = classify(2.0 * PI, 0.5, 0.9).unwrap();
        assert_eq!(early.verdict, MemoryKind::Markovian);
        assert!(early.r_quantum < 1e-6);
        let revival = classify(2.0 * PI, 5.9, 7.0).unwrap();
        assert_eq!(revival.verdict, MemoryKind::QuantumMemory);
        assert!(revival.r_quantum > 1e-3);
    }

    #[test]
    fn table_witness_matches_direct_evaluation() {
        let r = table_witness(2.0 * PI, 5.9, 7.0).unwrap();
        assert!((r.value + 0.08162).abs() < 1e-4, "{}", r.value);
        assert!(r.normalized < 0.0 && r.normalized > r.value);
        assert!(serde_json::to_string(&r).unwrap().contains("normalized"));
    }
}
