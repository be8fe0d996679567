use crate::error::{Error, Result};
use crate::mpb::{MpbConfig, MpbState};

/// The true objective behind a per-environment evaluation cap. Every call
/// to [`Objective::evaluate`] is one charged FE.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    config: &'a MpbConfig,
    state: MpbState,
    cap: usize,
    used: usize,
    total: usize,
}

impl<'a> Objective<'a> {
    pub fn new(config: &'a MpbConfig, cap: usize) -> Result<Self> {
        Ok(Self {
            config,
            state: MpbState::init(config)?,
            cap,
            used: 0,
            total: 0,
        })
    }

    pub fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        if self.used >= self.cap {
            return Err(Error::BudgetExhausted {
                env: self.state.time_step,
            });
        }
        let y = self.state.eval(self.config, x)?;
        self.used += 1;
        self.total += 1;
        Ok(y)
    }

    /// Moves to the next environment and resets the per-environment counter.
    pub fn change(&mut self) -> Result<()> {
        self.state = self.state.advance(self.config)?;
        self.used = 0;
        Ok(())
    }

    pub fn set_cap(&mut self, cap: usize) {
        self.cap = cap;
    }

    pub fn remaining(&self) -> usize {
        self.cap.saturating_sub(self.used)
    }

    pub fn used_in_env(&self) -> usize {
        self.used
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn env(&self) -> usize {
        self.state.time_step
    }

    pub fn state(&self) -> &MpbState {
        &self.state
    }
}
