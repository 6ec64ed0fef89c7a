use quantum_memory::dynamics::{GiantAtom2LParams, GiantAtom3LParams, HeisenbergParams};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::PathBuf;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ga2,
    Ga3,
    Dephasing,
    Heisenberg,
}

/// Physical parameters of a scan family.
///
/// Giant-atom times are amplitude-rate times: `gamma t / 2` for the two-level atom and
/// `(gamma1 + gamma2) t / 2` for the three-level atom. Dephasing uses
/// `alpha(t) = exp(-decay t) cos(frequency t)` and Heisenberg times are in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Physics {
    Ga2 { omega_e_tau: f64, gamma_tau: f64 },
    Ga3 { omega_e_tau: f64, omega_s_tau: f64, gamma1_tau: f64, gamma2_tau: f64 },
    Dephasing { decay: f64, frequency: f64 },
    Heisenberg { jx: f64, jy: f64, jz: f64 },
}

impl Physics {
    pub fn standard(family: Family) -> Self {
        match family {
            Family::Ga2 => Physics::Ga2 { omega_e_tau: 40.0 * PI, gamma_tau: 12.0 },
            Family::Ga3 => {
                Physics::Ga3 { omega_e_tau: 40.0 * PI, omega_s_tau: 20.0 * PI, gamma1_tau: 4.0, gamma2_tau: 8.0 }
            }
            Family::Dephasing => Physics::Dephasing { decay: 1.0, frequency: 1.0 },
            Family::Heisenberg => Physics::Heisenberg { jx: -1.0, jy: -2.0, jz: -3.0 },
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Physics::Ga2 { .. } => Family::Ga2,
            Physics::Ga3 { .. } => Family::Ga3,
            Physics::Dephasing { .. } => Family::Dephasing,
            Physics::Heisenberg { .. } => Family::Heisenberg,
        }
    }

    pub fn ga2(&self) -> Option<GiantAtom2LParams> {
        match *self {
            Physics::Ga2 { omega_e_tau, gamma_tau } => Some(GiantAtom2LParams::new(omega_e_tau, gamma_tau)),
            _ => None,
        }
    }

    pub fn ga3(&self) -> Option<GiantAtom3LParams> {
        match *self {
            Physics::Ga3 { omega_e_tau, omega_s_tau, gamma1_tau, gamma2_tau } => {
                Some(GiantAtom3LParams::new(omega_e_tau, omega_s_tau, gamma1_tau, gamma2_tau))
            }
            _ => None,
        }
    }

    pub fn heisenberg(&self) -> Option<HeisenbergParams> {
        match *self {
            Physics::Heisenberg { jx, jy, jz } => Some(HeisenbergParams { jx, jy, jz, time: 0.0 }),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Grid {
    pub fn new(min: f64, max: f64, steps: usize) -> Self {
        Self { min, max, steps }
    }

    /// Evenly spaced points including both ends.
    pub fn points(&self) -> Vec<f64> {
        let h = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.min + h * i as f64).collect()
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.steps - 1) as f64
    }

    fn validate(&self, name: &str) -> Result<(), CliError> {
        if self.steps < 2 {
            return Err(CliError::Validation(format!("{name}: steps must be at least 2")));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.max > self.min && self.min >= 0.0) {
            return Err(CliError::Validation(format!("{name}: need 0 <= min < max, got [{}, {}]", self.min, self.max)));
        }
        Ok(())
    }
}

impl std::str::FromStr for Grid {
    type Err = String;

    /// `min:max:steps`
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected min:max:steps, got {s:?}"));
        }
        let f = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        let steps = parts[2].trim().parse::<usize>().map_err(|e| format!("{:?}: {e}", parts[2]))?;
        Ok(Grid { min: f(parts[0])?, max: f(parts[1])?, steps })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    #[serde(default = "yes")]
    pub quantum: bool,
    #[serde(default = "yes")]
    pub markov: bool,
    #[serde(default = "yes")]
    pub analytic: bool,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

impl Default for Outputs {
    fn default() -> Self {
        Self { quantum: true, markov: true, analytic: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    #[serde(flatten)]
    pub physics: Physics,
    pub t1_grid: Grid,
    pub dt_grid: Grid,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
    /// Duality-gap tolerance handed to the SDP solver.
    #[serde(default)]
    pub tol: Option<f64>,
}

impl ScanConfig {
    /// Grids of the published heatmaps for the giant atoms, and small demonstration grids
    /// for the other two families.
    pub fn standard(family: Family) -> Self {
        let (t1, dt) = match family {
            Family::Ga2 | Family::Ga3 => (Grid::new(0.0, 12.0, 60), Grid::new(0.0, 6.0, 30)),
            Family::Dephasing => (Grid::new(0.0, 6.0, 25), Grid::new(0.0, 3.0, 13)),
            Family::Heisenberg => (Grid::new(0.0, 3.0, 31), Grid::new(0.0, 3.0, 31)),
        };
        ScanConfig {
            physics: Physics::standard(family),
            t1_grid: t1,
            dt_grid: dt,
            outputs: Outputs::default(),
            out: None,
            workers: 1,
            seed: 0,
            tol: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.t1_grid.validate("t1_grid")?;
        self.dt_grid.validate("dt_grid")?;
        if self.workers == 0 {
            return Err(CliError::Validation("workers must be at least 1".into()));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(CliError::Validation(format!("tol must lie in (0, 1), got {t}")));
            }
        }
        if let Some(p) = self.physics.ga2() {
            p.validate()?;
        }
        if let Some(p) = self.physics.ga3() {
            p.validate()?;
        }
        if let Physics::Dephasing { decay, frequency } = self.physics {
            if !(decay >= 0.0 && frequency.is_finite()) {
                return Err(CliError::Validation("dephasing needs decay >= 0 and a finite frequency".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let c = ScanConfig::standard(Family::Ga3);
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"family\":\"ga3\""));
        assert_eq!(ScanConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn minimal_json_gets_defaults() {
        let c = ScanConfig::from_json(
            r#"{"family":"dephasing","decay":0.5,"frequency":2.0,
                "t1_grid":{"min":0,"max":1,"steps":2},"dt_grid":{"min":0,"max":1,"steps":3}}"#,
        )
        .unwrap();
        assert_eq!(c.workers, 1);
        assert!(c.outputs.quantum && c.outputs.markov && c.outputs.analytic);
        c.validate().unwrap();
    }

    #[test]
    fn bad_grids_are_rejected() {
        let mut c = ScanConfig::standard(Family::Ga2);
        c.dt_grid.steps = 1;
        assert!(c.validate().is_err());
        assert!("1:2".parse::<Grid>().is_err());
        assert_eq!("0:1:3".parse::<Grid>().unwrap().points(), vec![0.0, 0.5, 1.0]);
    }
}
