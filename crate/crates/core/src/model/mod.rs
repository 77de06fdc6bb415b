//! Market model: diffusion simulation, pricing, vegas and implied volatility.

pub mod black_scholes;
pub mod heston;
pub mod params;
pub mod paths;
pub mod quadrature;
pub mod vega;

pub use black_scholes::{bs_price, bs_vega, implied_vol, implied_vol_tau};
pub use heston::{heston_closed_form, CfSlice, CfValues, DELTA_BUMP};
pub use params::{MarketState, MeanReversion, Measure, OptionKind, OptionSpec, StochVolParams};
pub use paths::{
    diffusion_step, draw_pair, mean_stderr, price_option, price_options, simulate_paths, McConfig,
    PathEnsemble,
};
pub use vega::{vega, VegaEstimate, VegaMethod, DEFAULT_VEGA_BUMP};
