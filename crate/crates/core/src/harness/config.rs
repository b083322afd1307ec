//! Declarative run configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::FitConfig;
use crate::forecast::{TrajectoryScheme, DEFAULT_N_SIMS};
use crate::harness::data::DataFormat;
use crate::harness::mc::MCStudySpec;
use crate::harness::rolling::{ModelKind, RollingSpec};
use crate::simulate::{DgpKind, DgpSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Model used by `fit` and `forecast`.
    pub model: ModelKind,
    pub data: DataSection,
    pub fit: FitConfig,
    pub simulate: SimulateSection,
    pub mc: McSection,
    pub forecast: ForecastSection,
    pub eval: EvalSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            model: ModelKind::Tvfi,
            data: DataSection::default(),
            fit: FitConfig::default(),
            simulate: SimulateSection::default(),
            mc: McSection::default(),
            forecast: ForecastSection::default(),
            eval: EvalSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub format: DataFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub dgp: DgpKind,
    pub n: usize,
    pub sigma: f64,
    pub burn_in: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            dgp: DgpKind::LinearTrend,
            n: 1000,
            sigma: 2.0,
            burn_in: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub dgp: DgpKind,
    pub n: usize,
    pub sigma: f64,
    pub reps: usize,
}

impl Default for McSection {
    fn default() -> Self {
        let s = MCStudySpec::default();
        Self {
            dgp: s.dgp,
            n: s.n,
            sigma: s.sigma,
            reps: s.reps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSection {
    pub horizon: usize,
    pub n_sims: usize,
    pub scheme: TrajectoryScheme,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self {
            horizon: 12,
            n_sims: DEFAULT_N_SIMS,
            scheme: TrajectoryScheme::Evolving,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub initial_window: usize,
    pub refit_every: usize,
    pub horizons: Vec<usize>,
    pub n_sims: usize,
    pub challenger: ModelKind,
    pub baseline: ModelKind,
    pub scheme: TrajectoryScheme,
}

impl Default for EvalSection {
    fn default() -> Self {
        let r = RollingSpec::default();
        Self {
            initial_window: r.initial_window,
            refit_every: r.refit_every,
            horizons: r.horizons,
            n_sims: r.n_sims,
            challenger: r.challenger,
            baseline: r.baseline,
            scheme: r.scheme,
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Fit settings carrying the run seed.
    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            seed: self.seed,
            ..self.fit.clone()
        }
    }

    pub fn dgp_spec(&self) -> DgpSpec {
        DgpSpec {
            burn_in: self.simulate.burn_in,
            ..DgpSpec::new(self.simulate.dgp.clone(), self.simulate.n, self.simulate.sigma, self.seed)
        }
    }

    pub fn mc_spec(&self) -> MCStudySpec {
        MCStudySpec {
            dgp: self.mc.dgp.clone(),
            n: self.mc.n,
            sigma: self.mc.sigma,
            reps: self.mc.reps,
            fit_config: self.fit_config(),
            seed: self.seed,
        }
    }

    pub fn rolling_spec(&self) -> RollingSpec {
        RollingSpec {
            initial_window: self.eval.initial_window,
            refit_every: self.eval.refit_every,
            horizons: self.eval.horizons.clone(),
            n_sims: self.eval.n_sims,
            challenger: self.eval.challenger,
            baseline: self.eval.baseline,
            scheme: self.eval.scheme,
            fit_config: self.fit_config(),
            seed: self.seed,
        }
    }
}
