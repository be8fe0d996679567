//! Meta-learned surrogate initialization for expensive dynamic optimization.
//!
//! When the objective changes, a MAML-style meta-learner extracts initial
//! surrogate parameters from the data of previous environments; an adaptation
//! step then fits them to the few samples available in the new environment.
//! The surrogate drives either Bayesian optimization (UCB acquisition) or a
//! surrogate-assisted evolutionary algorithm (CMA-ES, PSO or DE).
//!
//! Modules:
//! - [`mpb`]: Moving Peaks Benchmark.
//! - [`surrogates`]: GPR and MLP surrogates with analytic gradients.
//! - [`metalearn`]: meta-learning and adaptation.
//! - [`optim`]: acquisition, acquisition maximizer, and the three EAs.
//! - [`engine`]: full runs under strict evaluation accounting.
//! - [`analysis`]: metrics and statistical tests.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod metalearn;
pub mod mpb;
pub mod optim;
pub mod rng;
pub mod surrogates;

pub use error::{Error, Result};
