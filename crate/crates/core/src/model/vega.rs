use serde::{Deserialize, Serialize};

use super::heston::heston_closed_form;
use super::params::{MarketState, Measure, OptionSpec, StochVolParams};
use super::paths::{mean_stderr, simulate_terminal_spots, McConfig};
use crate::error::{Error, Result};

pub const DEFAULT_VEGA_BUMP: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VegaMethod {
    ClosedForm,
    MonteCarlo(McConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VegaEstimate {
    pub value: f64,
    /// Zero for the closed-form method.
    pub stderr: f64,
}

/// Sensitivity to `sqrt(nu)` by a central difference of width `2 * bump`.
///
/// The Monte Carlo path reuses the seed for both bumps, so the estimate is
/// the mean of pathwise payoff differences.
pub fn vega(
    option: &OptionSpec,
    state: &MarketState,
    params: &StochVolParams,
    bump: f64,
    method: VegaMethod,
) -> Result<VegaEstimate> {
    let root = state.variance.sqrt();
    if !(bump > 0.0) || root - bump <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "vega bump must satisfy 0 < bump < sqrt(nu) (bump = {bump}, sqrt(nu) = {root})"
        )));
    }
    let up = MarketState {
        variance: (root + bump).powi(2),
        ..*state
    };
    let down = MarketState {
        variance: (root - bump).powi(2),
        ..*state
    };
    match method {
        VegaMethod::ClosedForm => {
            let hi = heston_closed_form(option, &up, params)?;
            let lo = heston_closed_form(option, &down, params)?;
            Ok(VegaEstimate {
                value: (hi - lo) / (2.0 * bump),
                stderr: 0.0,
            })
        }
        VegaMethod::MonteCarlo(mc) => {
            let tau = option.time_to_maturity(state.time);
            let hi = simulate_terminal_spots(params, Measure::Q, &up, tau, &mc)?;
            let lo = simulate_terminal_spots(params, Measure::Q, &down, tau, &mc)?;
            let diffs: Vec<f64> = hi
                .iter()
                .zip(&lo)
                .map(|(&a, &b)| (option.payoff(a) - option.payoff(b)) / (2.0 * bump))
                .collect();
            let (value, stderr) = mean_stderr(&diffs);
            Ok(VegaEstimate { value, stderr })
        }
    }
}
