//! Run configuration: one JSON document per invocation.

use serde::Deserialize;
use spincm_core::collision::{check_permutation, CollisionConfig, CollisionMode, RecordSpec};
use spincm_core::model::{all_down_state, initial_120_state};
use spincm_core::{ComplexVector, DensityMatrix, ModelParams, C64};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub collision: CollisionSection,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub record: RecordSection,
    #[serde(default)]
    pub seed: u64,
    /// Fraction of each series discarded before the spectral analysis.
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    pub out_dir: Option<String>,
    pub master_equation: Option<MasterEquationSection>,
    pub spectrum: Option<SpectrumSection>,
    pub sync_scan: Option<SyncScanSection>,
    pub blp_scan: Option<BlpScanSection>,
}

fn default_burn_in() -> f64 {
    0.5
}

/// Collision order as written in configs; site numbers start at 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ModeConfig {
    #[default]
    Collective,
    SequentialFixed {
        order: Vec<usize>,
    },
    /// Orders are drawn from the run seed.
    SequentialRandom,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionSection {
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default = "yes")]
    pub markovian: bool,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
}

fn yes() -> bool {
    true
}

fn default_steps() -> usize {
    1000
}

impl Default for CollisionSection {
    fn default() -> Self {
        Self {
            mode: ModeConfig::default(),
            markovian: true,
            n_steps: default_steps(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Equal superpositions with relative phases 0, 2π/3, 4π/3.
    #[default]
    Phases120,
    AllDown,
    /// Amplitudes as `[re, im]` pairs; normalized on load.
    Pure(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecordSection {
    /// Adds entropy, heat and work columns and the `⟨σx_1 σx_2⟩` and `I_2` columns.
    pub thermo: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Thermal,
    Vacuum,
    Sequential,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterEquationSection {
    pub generator: Generator,
    /// Required for the sequential generator; 1-based.
    pub order: Option<Vec<usize>>,
    pub t_grid: TimeGrid,
    /// Upper bound on the integrator step; defaults to `τ/10`.
    pub max_step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TimeGrid {
    Uniform { t_max: f64, dt: f64 },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub generator: Generator,
    pub order: Option<Vec<usize>>,
    #[serde(default = "default_tol_zero")]
    pub tol_zero: f64,
}

fn default_tol_zero() -> f64 {
    spincm_core::lindblad::DEFAULT_TOL_ZERO
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyncScanSection {
    pub betas: Vec<f64>,
    pub j_x: Vec<f64>,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlpScanSection {
    pub theta_over_pi: Vec<f64>,
    pub k_samples: usize,
    pub n_steps: usize,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.model.validate().map_err(CliError::config)?;
        if !(0.0..1.0).contains(&cfg.burn_in) {
            return Err(CliError::Config(format!("burn_in must lie in [0, 1), got {}", cfg.burn_in)));
        }
        Ok(cfg)
    }

    pub fn initial_state(&self) -> Result<DensityMatrix, CliError> {
        let n = self.model.n_sys;
        match &self.initial_state {
            InitialState::Phases120 => initial_120_state(n).map_err(CliError::config),
            InitialState::AllDown => Ok(all_down_state(n)),
            InitialState::Pure(amps) => {
                if amps.len() != 1 << n {
                    return Err(CliError::Config(format!(
                        "pure state needs {} amplitudes, got {}",
                        1 << n,
                        amps.len()
                    )));
                }
                let v = ComplexVector::from_iterator(amps.len(), amps.iter().map(|a| C64::new(a[0], a[1])));
                let norm = v.norm();
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(CliError::Config("pure state amplitudes must be finite and not all zero".into()));
                }
                DensityMatrix::from_pure(&(v / C64::new(norm, 0.0)), vec![2; n]).map_err(CliError::config)
            }
        }
    }

    /// Core collision mode with 0-based orders; random orders take `seed`.
    pub fn mode(&self, seed: u64) -> Result<CollisionMode, CliError> {
        Ok(match &self.collision.mode {
            ModeConfig::Collective => CollisionMode::Collective,
            ModeConfig::SequentialFixed { order } => CollisionMode::SequentialFixed {
                order: zero_based(order, self.model.n_sys)?,
            },
            ModeConfig::SequentialRandom => CollisionMode::SequentialRandom { seed },
        })
    }

    pub fn collision_config(&self, params: ModelParams, seed: u64, record: RecordSpec) -> Result<CollisionConfig, CliError> {
        let cfg = CollisionConfig {
            params,
            mode: self.mode(seed)?,
            markovian: self.collision.markovian,
            n_steps: self.collision.n_steps,
            initial_state: self.initial_state()?,
            record,
        };
        cfg.validate().map_err(CliError::config)?;
        Ok(cfg)
    }
}

pub fn zero_based(order: &[usize], n: usize) -> Result<Vec<usize>, CliError> {
    if order.contains(&0) {
        return Err(CliError::Config(format!("site orders start at 1, got {order:?}")));
    }
    let out: Vec<usize> = order.iter().map(|k| k - 1).collect();
    check_permutation(&out, n).map_err(|_| CliError::Config(format!("{order:?} is not an order of sites 1..={n}")))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"model": {"j_x": -1, "j_y": -1, "j_z": 1, "g": 10, "beta": 10, "tau": 0.01}}"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.collision.mode, ModeConfig::Collective);
        assert!(cfg.collision.markovian);
        assert_eq!(cfg.model.n_sys, 3);
        assert_eq!(cfg.burn_in, 0.5);
        cfg.initial_state().unwrap().validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("\"tau\": 0.01", "\"tau\": 0.01, \"tua\": 1");
        assert!(matches!(RunConfig::from_json(&text), Err(CliError::Config(_))));
        let text = MINIMAL.replace("}}", "}, \"extra\": 1}");
        assert!(matches!(RunConfig::from_json(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn orders_are_one_based() {
        assert_eq!(zero_based(&[3, 1, 2], 3).unwrap(), vec![2, 0, 1]);
        assert!(zero_based(&[0, 1, 2], 3).is_err());
        assert!(zero_based(&[1, 1, 2], 3).is_err());
        assert!(zero_based(&[1, 2], 3).is_err());
    }

    #[test]
    fn invalid_physics_is_a_config_error() {
        let text = MINIMAL.replace("\"tau\": 0.01", "\"tau\": -1");
        assert!(matches!(RunConfig::from_json(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn pure_states_are_normalized() {
        let text = MINIMAL.replace(
            "}}",
            "}, \"initial_state\": {\"pure\": [[2,0],[0,0],[0,0],[0,0],[0,0],[0,0],[0,0],[0,0]]}}",
        );
        let rho = RunConfig::from_json(&text).unwrap().initial_state().unwrap();
        assert!((rho.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
    }
}
