use serde::{Deserialize, Serialize};

use crate::metalearn::MetaTrace;
use crate::surrogates::SurrogateParams;

/// One true function evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeRecord {
    pub env: usize,
    /// 1-based index within the environment.
    pub fe: usize,
    pub x: Vec<f64>,
    pub y_true: f64,
    /// Running maximum of `y_true` within the environment.
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvRecord {
    pub env: usize,
    pub best_x: Vec<f64>,
    pub best_y: f64,
    pub optimum_x: Vec<f64>,
    pub optimum_y: f64,
    pub fe_count: usize,
    /// First FE index at which the environment's final best was reached.
    pub fe_to_best: usize,
    /// Extended-budget runs only: first FE index at which the target was met.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fe_to_target: Option<usize>,
    /// Surrogate training-set size after the last evaluation.
    pub train_size: usize,
    /// Parameters at the start of the first adaptation in this environment.
    pub start_params: SurrogateParams,
    pub final_params: SurrogateParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta_trace: Option<MetaTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub algorithm: String,
    pub seed: u64,
    pub dims: usize,
    pub fe_cap: usize,
    /// Set when an environment could not complete its initial design.
    pub truncated: bool,
    pub fes: Vec<FeRecord>,
    pub envs: Vec<EnvRecord>,
}

impl RunTrace {
    pub fn total_fes(&self) -> usize {
        self.fes.len()
    }

    pub fn fes_in_env(&self, env: usize) -> impl Iterator<Item = &FeRecord> {
        self.fes.iter().filter(move |r| r.env == env)
    }

    /// Flat CSV rows `algo,seed,n,env,fe,y_true,best_so_far`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("algo,seed,n,env,fe,y_true,best_so_far\n");
        for r in &self.fes {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.algorithm, self.seed, self.dims, r.env, r.fe, r.y_true, r.best_so_far
            ));
        }
        out
    }
}
