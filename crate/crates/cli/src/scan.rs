use crate::config::{Physics, ScanConfig};
use crate::CliError;
use quantum_memory::channel::ChoiOperator;
use quantum_memory::criteria::{classify_dephasing, classify_three_level, classify_two_level, MemoryVerdict};
use quantum_memory::dynamics::{
    amplitude_c, channel_two_level, dephasing_channel, heisenberg_channel, rate_time_to_tau, three_level_state,
};
use quantum_memory::linalg::C64;
use quantum_memory::sdp::{
    markov_robustness, ppt_robustness, robustness_from_weight, PptOptions, SymmetryChoice, Tolerances,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::sync::Mutex;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub t1: f64,
    pub dt: f64,
    pub r_quantum: Option<f64>,
    pub r_markov: Option<f64>,
    pub analytic_verdict: Option<String>,
    pub s_star: Option<f64>,
    pub solver_status: String,
}

pub fn dephasing_alpha(t: f64, decay: f64, frequency: f64) -> C64 {
    C64::new((-decay * t).exp() * (frequency * t).cos(), 0.0)
}

/// Channels of a family at the two times together with the closed-form verdict, when the
/// family has one.
pub fn channel_pair(
    physics: &Physics,
    t1: f64,
    t2: f64,
) -> quantum_memory::Result<(ChoiOperator, ChoiOperator, Option<MemoryVerdict>)> {
    Ok(match physics {
        Physics::Ga2 { .. } => {
            let p = physics.ga2().unwrap();
            let c1 = amplitude_c(rate_time_to_tau(t1, p.amplitude_rate()), &p)?;
            let c2 = amplitude_c(rate_time_to_tau(t2, p.amplitude_rate()), &p)?;
            (channel_two_level(c1)?, channel_two_level(c2)?, Some(classify_two_level(c1, c2)))
        }
        Physics::Ga3 { .. } => {
            let p = physics.ga3().unwrap();
            let s1 = three_level_state(rate_time_to_tau(t1, p.amplitude_rate()), &p)?;
            let s2 = three_level_state(rate_time_to_tau(t2, p.amplitude_rate()), &p)?;
            (s1.channel()?, s2.channel()?, Some(classify_three_level(&s1, &s2)))
        }
        Physics::Dephasing { decay, frequency } => {
            let a1 = dephasing_alpha(t1, *decay, *frequency);
            let a2 = dephasing_alpha(t2, *decay, *frequency);
            (dephasing_channel(a1)?, dephasing_channel(a2)?, Some(classify_dephasing(a1, a2)))
        }
        Physics::Heisenberg { .. } => {
            let p = physics.heisenberg().unwrap();
            (heisenberg_channel(t1, &p)?, heisenberg_channel(t2, &p)?, None)
        }
    })
}

pub fn tolerances(tol: Option<f64>) -> Tolerances {
    let mut t = Tolerances::default();
    if let Some(g) = tol {
        t.gap = g;
    }
    t
}

pub fn scan_point(config: &ScanConfig, t1: f64, dt: f64) -> ScanRow {
    let mut row = ScanRow {
        t1,
        dt,
        r_quantum: None,
        r_markov: None,
        analytic_verdict: None,
        s_star: None,
        solver_status: String::new(),
    };
    let (e1, e2, verdict) = match channel_pair(&config.physics, t1, t1 + dt) {
        Ok(x) => x,
        Err(e) => {
            row.solver_status = format!("error: {e}");
            return row;
        }
    };
    if config.outputs.analytic {
        row.analytic_verdict = verdict.map(|v| v.kind.to_string());
    }
    let opts = PptOptions { tolerances: tolerances(config.tol), ..Default::default() };
    let mut status = Vec::new();
    if config.outputs.quantum {
        match ppt_robustness(&e1, &e2, &opts) {
            Ok(run) => {
                let (s, r) = robustness_from_weight(run.s_star);
                row.s_star = Some(s);
                row.r_quantum = Some(r);
                status.push(format!("{:?}", run.status));
            }
            Err(e) => status.push(format!("error: {e}")),
        }
    }
    if config.outputs.markov {
        match markov_robustness(&e1, &e2, &SymmetryChoice::Auto, &opts.tolerances) {
            Ok((s, st)) => {
                row.r_markov = Some(robustness_from_weight(s).1);
                status.push(format!("{st:?}"));
            }
            Err(e) => status.push(format!("error: {e}")),
        }
    }
    status.dedup();
    row.solver_status = status.join("/");
    row
}

/// Runs the grid on `config.workers` threads. Rows are appended to `config.out` as they finish
/// and returned in grid order (t1 outer, dt inner).
pub fn run_scan(config: &ScanConfig) -> Result<Vec<ScanRow>, CliError> {
    config.validate()?;
    let points: Vec<(f64, f64)> = config
        .t1_grid
        .points()
        .into_iter()
        .flat_map(|t1| config.dt_grid.points().into_iter().map(move |dt| (t1, dt)))
        .collect();
    let writer = match &config.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Some(Mutex::new(csv::Writer::from_writer(file)))
        }
        None => None,
    };
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(config.workers).build().map_err(|e| CliError::Io(e.to_string()))?;
    let rows: Vec<ScanRow> = pool.install(|| {
        points
            .par_iter()
            .map(|&(t1, dt)| {
                let row = scan_point(config, t1, dt);
                if let Some(w) = &writer {
                    let mut w = w.lock().unwrap();
                    // A failed write only loses the incremental copy; the final rows are still returned.
                    let _ = w.serialize(&row);
                    let _ = w.flush();
                }
                row
            })
            .collect()
    });
    if let Some(w) = writer {
        w.into_inner().unwrap().flush().map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(rows)
}

pub fn read_rows(path: &std::path::Path) -> Result<Vec<ScanRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
    r.deserialize().map(|x| x.map_err(|e| CliError::Io(e.to_string()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Family, Grid};

    #[test]
    fn dephasing_scan_is_classical_everywhere() {
        let mut c = ScanConfig::standard(Family::Dephasing);
        c.t1_grid = Grid::new(0.5, 3.0, 4);
        c.dt_grid = Grid::new(0.5, 2.0, 3);
        let rows = run_scan(&c).unwrap();
        assert_eq!(rows.len(), 12);
        assert!(rows.iter().all(|r| r.r_quantum.unwrap() <= 1e-6));
        assert!(rows.iter().any(|r| r.r_markov.unwrap() > 1e-3));
    }

    #[test]
    fn ga2_identity_at_zero_delay() {
        let c = ScanConfig::standard(Family::Ga2);
        let row = scan_point(&c, 3.0, 0.0);
        assert_eq!(row.analytic_verdict.as_deref(), Some("Markovian"));
        assert!(row.r_quantum.unwrap() <= 1e-6 && row.r_markov.unwrap() <= 1e-6);
    }
}
