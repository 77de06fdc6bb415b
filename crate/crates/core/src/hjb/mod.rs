//! Reduced Hamilton-Jacobi-Bellman equation in `(t, nu, portfolio vega)`.

mod io;
mod policy;
mod solver;
mod value;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OptionSpec;
use crate::quoting::{IntensityCurve, Side, TradeSizeLaw};

pub use policy::{QuotePolicy, QuoteSource};
pub use solver::{cfl_number, solve, solve_with, SolveOptions};
pub use value::ValueFunction;

/// Risk preferences and limits of the market maker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraderConfig {
    /// Risk aversion (1/currency).
    pub gamma: f64,
    /// Lowest admissible quote (currency).
    pub delta_floor: f64,
    /// Limit on the absolute portfolio vega.
    pub vega_limit: f64,
    /// Trading horizon (years).
    pub horizon: f64,
}

impl TraderConfig {
    pub fn validate(&self, book: &OptionBook) -> Result<()> {
        if !(self.gamma >= 0.0)
            || !(self.vega_limit > 0.0)
            || !(self.horizon > 0.0)
            || !self.delta_floor.is_finite()
        {
            return Err(Error::InvalidParameter(format!(
                "invalid trader config {self:?}"
            )));
        }
        let first_maturity = book
            .options
            .iter()
            .map(|o| o.maturity)
            .fold(f64::INFINITY, f64::min);
        if self.horizon >= first_maturity {
            return Err(Error::InvalidParameter(format!(
                "horizon {} must end before the first maturity {first_maturity}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Whether `vega` is inside the risk limit.
    #[inline]
    pub fn admissible(&self, vega: f64) -> bool {
        vega.abs() <= self.vega_limit * (1.0 + 1e-12)
    }
}

/// Options the market maker quotes, with their frozen vegas, trade sizes and fill curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionBook {
    pub options: Vec<OptionSpec>,
    /// Vega of each option at time 0.
    pub vegas: Vec<f64>,
    pub sizes: Vec<TradeSizeLaw>,
    /// `[bid, ask]` curve of each option.
    pub curves: Vec<[IntensityCurve; 2]>,
    /// Model price of each option at time 0.
    pub reference_prices: Vec<f64>,
}

impl OptionBook {
    pub fn new(
        options: Vec<OptionSpec>,
        vegas: Vec<f64>,
        sizes: Vec<TradeSizeLaw>,
        curves: Vec<[IntensityCurve; 2]>,
        reference_prices: Vec<f64>,
    ) -> Result<Self> {
        let book = Self {
            options,
            vegas,
            sizes,
            curves,
            reference_prices,
        };
        book.validate()?;
        Ok(book)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.options.len();
        if n == 0
            || self.vegas.len() != n
            || self.sizes.len() != n
            || self.curves.len() != n
            || self.reference_prices.len() != n
        {
            return Err(Error::InvalidParameter(
                "option book fields must have one entry per option".into(),
            ));
        }
        if let Some(v) = self.vegas.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "vegas must be positive, got {v}"
            )));
        }
        for c in self.curves.iter().flatten() {
            c.validate()?;
        }
        for s in &self.sizes {
            TradeSizeLaw::new(s.z)?;
        }
        Ok(())
    }

    /// Checks that at least one trade fits inside the vega limit.
    pub fn check_tradable(&self, vega_limit: f64) -> Result<()> {
        if (0..self.len()).any(|i| self.jump(i) < 2.0 * vega_limit) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "every trade moves the portfolio vega by more than 2 * {vega_limit}"
            )))
        }
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    /// Portfolio-vega change `z^i V^i` of one trade in option `i`.
    #[inline]
    pub fn jump(&self, i: usize) -> f64 {
        self.sizes[i].z * self.vegas[i]
    }

    #[inline]
    pub fn curve(&self, i: usize, side: Side) -> &IntensityCurve {
        &self.curves[i][side.index()]
    }

    /// Book reduced to the options at `indices`.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            options: indices.iter().map(|&i| self.options[i]).collect(),
            vegas: indices.iter().map(|&i| self.vegas[i]).collect(),
            sizes: indices.iter().map(|&i| self.sizes[i]).collect(),
            curves: indices.iter().map(|&i| self.curves[i]).collect(),
            reference_prices: indices.iter().map(|&i| self.reference_prices[i]).collect(),
        }
    }
}

/// Discretization of `[0, T] x [nu_min, nu_max] x [-vega_limit, vega_limit]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverGrid {
    /// Number of time steps; the solution has `n_time + 1` slices.
    pub n_time: usize,
    pub nu_min: f64,
    pub nu_max: f64,
    pub n_nu: usize,
    pub n_vega: usize,
}

impl SolverGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_time == 0
            || self.n_nu < 2
            || self.n_vega < 2
            || !(self.nu_min > 0.0 && self.nu_max > self.nu_min)
        {
            return Err(Error::InvalidParameter(format!(
                "invalid solver grid {self:?}"
            )));
        }
        Ok(())
    }

    pub fn nu_nodes(&self) -> Vec<f64> {
        uniform(self.nu_min, self.nu_max, self.n_nu)
    }

    /// Nodes `vega_limit * (2m/(n-1) - 1)`, symmetric about 0.
    pub fn vega_nodes(&self, vega_limit: f64) -> Vec<f64> {
        (0..self.n_vega)
            .map(|m| vega_limit * (2.0 * m as f64 / (self.n_vega - 1) as f64 - 1.0))
            .collect()
    }

    /// Doubles the number of time steps and vega intervals.
    pub fn refined(&self) -> Self {
        Self {
            n_time: 2 * self.n_time,
            n_vega: 2 * self.n_vega - 1,
            ..*self
        }
    }
}

pub(crate) fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}
