use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mlo_core::engine::{AlgorithmSpec, BudgetPolicy};
use mlo_core::mpb::MpbConfig;
use mlo_core::optim::EaKind;
use mlo_core::surrogates::SurrogateKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ebbc,
    BudgetRatio,
    #[serde(rename = "sensitivity_K")]
    SensitivityK,
    SensitivityXi,
}

/// Budget sizes per unit of dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetSettings {
    pub init_per_dim: usize,
    pub fe_per_dim: usize,
    pub extended_multiplier: usize,
}

impl Default for BudgetSettings {
    fn default() -> Self {
        Self {
            init_per_dim: 4,
            fe_per_dim: 5,
            extended_multiplier: 7,
        }
    }
}

impl BudgetSettings {
    pub fn policy(&self, n: usize) -> BudgetPolicy {
        BudgetPolicy {
            init_samples: self.init_per_dim * n,
            max_fe_per_env: self.fe_per_dim * n,
            extended_cap_multiplier: self.extended_multiplier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    /// Benchmark settings; `dims` is overridden per cell.
    pub problem: MpbConfig,
    pub algorithms: Vec<AlgorithmSpec>,
    pub dims: Vec<usize>,
    /// Independent runs per (algorithm, dimension).
    pub seeds: usize,
    pub mode: Mode,
    pub k_values: Vec<usize>,
    pub xi_values: Vec<usize>,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub parallelism: usize,
    pub campaign_seed: u64,
    /// Reference algorithm id for budget ratios; the first algorithm when
    /// absent.
    pub reference: Option<String>,
    pub budget: BudgetSettings,
    /// Significance level of the pairwise tests.
    pub level: f64,
}

pub fn default_algorithms() -> Vec<AlgorithmSpec> {
    use mlo_core::engine::Family;
    let mut out = vec![AlgorithmSpec::mlbo(), AlgorithmSpec::rbo(), AlgorithmSpec::cbo()];
    for ea in [EaKind::Cmaes, EaKind::Pso, EaKind::De] {
        out.push(AlgorithmSpec::mlddeo(SurrogateKind::Gpr, ea));
    }
    for ea in [EaKind::Cmaes, EaKind::Pso, EaKind::De] {
        out.push(AlgorithmSpec::new(Family::SaeaPlain, SurrogateKind::Gpr, Some(ea)));
    }
    out
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            problem: MpbConfig::default(),
            algorithms: default_algorithms(),
            dims: vec![4, 6, 8, 10],
            seeds: 20,
            mode: Mode::Ebbc,
            k_values: vec![1, 5, 15, 30, 50],
            xi_values: vec![1, 5, 10],
            output_dir: PathBuf::from("results"),
            parallelism: 0,
            campaign_seed: 20_240_601,
            reference: None,
            budget: BudgetSettings::default(),
            level: 0.05,
        }
    }
}

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_ENV: &str = "MLO_OUTPUT_DIR";

impl CampaignConfig {
    /// Smaller campaign: dimensions 4 and 6, 5 seeds, 10 environments.
    pub fn apply_desk_preset(&mut self) {
        self.dims = vec![4, 6];
        self.seeds = 5;
        self.problem.num_environments = 10;
    }

    pub fn reference_id(&self) -> Option<String> {
        self.reference
            .clone()
            .or_else(|| self.algorithms.first().map(|a| a.id()))
    }

    /// Algorithms actually run, with sweep variants expanded and named.
    pub fn expanded_algorithms(&self) -> Vec<AlgorithmSpec> {
        match self.mode {
            Mode::Ebbc | Mode::BudgetRatio => self.algorithms.clone(),
            Mode::SensitivityK => self
                .algorithms
                .iter()
                .flat_map(|a| {
                    self.k_values.iter().map(move |&k| {
                        let mut v = a.clone();
                        v.meta.few_shot_k = k;
                        v.name = Some(format!("{}[K={k}]", a.id()));
                        v
                    })
                })
                .collect(),
            Mode::SensitivityXi => self
                .algorithms
                .iter()
                .flat_map(|a| {
                    self.xi_values.iter().map(move |&xi| {
                        let mut v = a.clone();
                        v.xi = Some(xi);
                        v.name = Some(format!("{}[xi={xi}]", a.id()));
                        v
                    })
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            bail!("algorithms: at least one algorithm is required");
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            bail!("dims: must be a non-empty list of positive dimensions");
        }
        if self.seeds == 0 {
            bail!("seeds: must be positive");
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            bail!("level: must lie in (0, 1)");
        }
        if self.mode == Mode::SensitivityK && (self.k_values.is_empty() || self.k_values.contains(&0)) {
            bail!("k_values: must be a non-empty list of positive sizes");
        }
        if self.mode == Mode::SensitivityXi && (self.xi_values.is_empty() || self.xi_values.contains(&0)) {
            bail!("xi_values: must be a non-empty list of positive sizes");
        }
        let algos = self.expanded_algorithms();
        let mut ids: Vec<String> = Vec::new();
        for (i, a) in algos.iter().enumerate() {
            a.validate()
                .with_context(|| format!("algorithms[{i}] ({})", a.id()))?;
            if ids.contains(&a.id()) {
                bail!("algorithms: duplicate id {}", a.id());
            }
            ids.push(a.id());
        }
        for &n in &self.dims {
            let mut p = self.problem.clone();
            p.dims = n;
            p.validate().context("problem")?;
            self.budget.policy(n).validate().context("budget")?;
        }
        if self.mode == Mode::BudgetRatio {
            let r = self.reference_id().unwrap_or_default();
            if !ids.contains(&r) {
                bail!("reference: {r} is not among the algorithms");
            }
        }
        Ok(())
    }
}

/// Parses and validates a campaign config from a file path or inline JSON.
/// A campaign manifest is accepted as well; its config snapshot is used.
pub fn parse_config(source: &str) -> Result<CampaignConfig> {
    let text = if source.trim_start().starts_with('{') {
        source.to_string()
    } else {
        std::fs::read_to_string(source).with_context(|| format!("reading {source}"))?
    };
    let value: serde_json::Value = serde_json::from_str(&text).context("config is not valid JSON")?;
    let value = match value.get("config") {
        Some(inner) if value.get("cells").is_some() => inner.clone(),
        _ => value,
    };
    let config: CampaignConfig = serde_path_to_error::deserialize(value)
        .map_err(|e| anyhow::anyhow!("{}: {}", e.path(), e.inner()))?;
    config.validate()?;
    Ok(config)
}

pub fn resolve_output_dir(config: &mut CampaignConfig) {
    if let Ok(dir) = std::env::var(OUTPUT_ENV) {
        if !dir.is_empty() {
            config.output_dir = PathBuf::from(dir);
        }
    }
}

pub fn slug(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for c in id.chars() {
        match c {
            'a'..='z' | 'A'..='Z' | '0'..='9' | '-' => out.push(c),
            '=' => out.push('-'),
            _ => out.push('_'),
        }
    }
    out.trim_end_matches('_').to_string()
}

pub fn config_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}
