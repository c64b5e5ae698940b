use crate::{Error, Result};

/// Uniform grid `t_n = n · h`, `n = 0..=steps`, with `h = t_max / steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, steps: usize) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) || steps == 0 {
            return Err(Error::InvalidGrid { t_max, steps });
        }
        Ok(Self { t_max, steps })
    }

    /// Grid on `[0, t_max]` whose step is as close as possible to `h`.
    pub fn with_step(t_max: f64, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidGrid { t_max, steps: 0 });
        }
        let steps = libm::round(t_max / h);
        if !(steps >= 1.0 && steps < usize::MAX as f64) {
            return Err(Error::InvalidGrid { t_max, steps: 0 });
        }
        Self::new(t_max, steps as usize)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self) -> f64 {
        self.t_max / self.steps as f64
    }

    /// Number of nodes, `steps + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, n: usize) -> f64 {
        if n == self.steps {
            self.t_max
        } else {
            n as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |n| self.node(n))
    }

    /// Same horizon with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Self {
        Self { t_max: self.t_max, steps: self.steps * factor.max(1) }
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::GridMismatch { expected: self.len(), found: len });
        }
        Ok(())
    }
}
