//! Full dynamic-optimization runs under strict evaluation accounting.
//!
//! Every environment starts with a Latin hypercube design charged to its own
//! FE cap; the environment changes when the cap is reached. The framework
//! instances (MLBO, MLDDEO) and the baselines (RBO, CBO, RDDEO, plain SAEAs)
//! share one loop and differ only in how the surrogate is initialized at a
//! change and which data it is trained on.

mod objective;
mod run;
mod trace;

use serde::{Deserialize, Serialize};

pub use objective::Objective;
pub use run::{run, run_baseline, run_extended_budget, run_mlbo, run_mlddeo, ExtendedRun};
pub use trace::{EnvRecord, FeRecord, RunTrace};

use crate::error::{Error, Result};
use crate::metalearn::MetaConfig;
use crate::optim::{AcquisitionConfig, EaKind, EaParams, MaximizerConfig};
use crate::surrogates::SurrogateKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Family {
    /// Meta-learning Bayesian optimization.
    Mlbo,
    /// Meta-learning surrogate-assisted evolutionary optimization.
    Mlddeo,
    /// BO restarted from default hyperparameters at every change.
    Rbo,
    /// BO that ignores changes and trains on all data collected so far.
    Cbo,
    /// Surrogate-assisted EA restarted at every change.
    Rddeo,
    /// Plain surrogate-assisted EA; behaves as `Rddeo`.
    SaeaPlain,
}

impl Family {
    pub fn uses_meta_learning(self) -> bool {
        matches!(self, Family::Mlbo | Family::Mlddeo)
    }

    pub fn is_bo(self) -> bool {
        matches!(self, Family::Mlbo | Family::Rbo | Family::Cbo)
    }
}

/// What to run: family, surrogate, optional EA and its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    /// Display name; derived from the other fields when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub family: Family,
    #[serde(default = "default_surrogate")]
    pub surrogate: SurrogateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ea: Option<EaKind>,
    #[serde(default)]
    pub meta: MetaConfig,
    /// Promising solutions per iteration; 1 for GPR and 5 for NN when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<usize>,
    #[serde(default)]
    pub ea_params: EaParams,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub maximizer: MaximizerConfig,
}

fn default_surrogate() -> SurrogateKind {
    SurrogateKind::Gpr
}

impl AlgorithmSpec {
    pub fn new(family: Family, surrogate: SurrogateKind, ea: Option<EaKind>) -> Self {
        Self {
            name: None,
            family,
            surrogate,
            ea,
            meta: MetaConfig::default(),
            xi: None,
            ea_params: EaParams::default(),
            acquisition: AcquisitionConfig::default(),
            maximizer: MaximizerConfig::default(),
        }
    }

    pub fn mlbo() -> Self {
        Self::new(Family::Mlbo, SurrogateKind::Gpr, None)
    }

    pub fn rbo() -> Self {
        Self::new(Family::Rbo, SurrogateKind::Gpr, None)
    }

    pub fn cbo() -> Self {
        Self::new(Family::Cbo, SurrogateKind::Gpr, None)
    }

    pub fn mlddeo(surrogate: SurrogateKind, ea: EaKind) -> Self {
        Self::new(Family::Mlddeo, surrogate, Some(ea))
    }

    pub fn rddeo(surrogate: SurrogateKind, ea: EaKind) -> Self {
        Self::new(Family::Rddeo, surrogate, Some(ea))
    }

    pub fn xi(&self) -> usize {
        self.xi.unwrap_or(match self.surrogate {
            SurrogateKind::Gpr => 1,
            SurrogateKind::Nn => 5,
        })
    }

    /// Display id, e.g. `MLBO`, `MLSADE(GPR)`, `RDDEO-SACMA-ES(NN)`.
    pub fn id(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        let sa = |ea: Option<EaKind>| format!("SA{}", ea.map_or("?", |e| e.name()));
        let s = match self.surrogate {
            SurrogateKind::Gpr => "GPR",
            SurrogateKind::Nn => "NN",
        };
        match self.family {
            Family::Mlbo => "MLBO".into(),
            Family::Rbo => "RBO".into(),
            Family::Cbo => "CBO".into(),
            Family::Mlddeo => format!("ML{}({s})", sa(self.ea)),
            Family::Rddeo => format!("RDDEO-{}({s})", sa(self.ea)),
            Family::SaeaPlain => format!("{}({s})", sa(self.ea)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.meta.validate()?;
        if self.family.is_bo() {
            if self.surrogate != SurrogateKind::Gpr {
                return bad(format!("{:?} needs a GPR surrogate", self.family));
            }
            if self.ea.is_some() {
                return bad(format!("{:?} does not take an EA", self.family));
            }
        } else if self.ea.is_none() {
            return bad(format!("{:?} needs an EA", self.family));
        }
        let xi = self.xi();
        if xi == 0 {
            return bad("xi must be at least 1".into());
        }
        if self.surrogate == SurrogateKind::Gpr && xi != 1 {
            return bad("GPR-based variants pick exactly one solution (xi = 1)".into());
        }
        if !self.family.is_bo() && xi > 2 * self.ea_params.pop_size {
            return bad(format!("xi = {xi} exceeds |P ∪ Q|"));
        }
        if self.ea_params.pop_size < 2 {
            return bad("pop_size must be at least 2".into());
        }
        if !(self.acquisition.w >= 0.0) {
            return bad("UCB weight must be non-negative".into());
        }
        Ok(())
    }
}

/// Evaluation budget of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetPolicy {
    pub init_samples: usize,
    pub max_fe_per_env: usize,
    pub extended_cap_multiplier: usize,
}

impl BudgetPolicy {
    /// `4n` initial samples, `5n` FEs per environment, `7x` extension.
    pub fn for_dims(n: usize) -> Self {
        Self {
            init_samples: 4 * n,
            max_fe_per_env: 5 * n,
            extended_cap_multiplier: 7,
        }
    }

    pub fn extended_cap(&self) -> usize {
        self.max_fe_per_env * self.extended_cap_multiplier
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_fe_per_env == 0 || self.init_samples == 0 {
            return Err(Error::Config("budget sizes must be positive".into()));
        }
        if self.extended_cap_multiplier == 0 {
            return Err(Error::Config("extended_cap_multiplier must be positive".into()));
        }
        if self.init_samples >= self.extended_cap() {
            return Err(Error::Config(
                "init_samples must be below the extended per-environment cap".into(),
            ));
        }
        Ok(())
    }
}
