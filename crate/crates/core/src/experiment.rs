//! Experiment configuration. Defaults reproduce the reference setup: a
//! Heston underlying at 10 with 20 calls on a 5x4 strike/maturity grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hjb::{OptionBook, SolverGrid, TraderConfig};
use crate::model::{
    self, MarketState, McConfig, MeanReversion, OptionKind, OptionSpec, StochVolParams, VegaMethod,
};
use crate::quoting::{IntensityCurve, TradeSizeLaw};
use crate::sim::HedgeMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BookSpec {
    pub strikes: Vec<f64>,
    pub maturities: Vec<f64>,
    pub kind: OptionKind,
    /// Trading days per year in the request-rate rule.
    pub trading_days: f64,
    /// Requests per day for an at-the-money option.
    pub requests_per_day: f64,
    /// Decay of the request rate with `|S0 - K|`.
    pub moneyness_decay: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Currency amount per transaction; `z = notional / price`.
    pub notional_per_trade: f64,
    pub vega_bump: f64,
    /// Monte Carlo used for the reference prices behind the trade sizes.
    pub pricing: PricingSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingSpec {
    pub n_paths: usize,
    pub steps_per_year: f64,
    pub seed: u64,
}

impl PricingSpec {
    pub fn mc_for(&self, tau: f64) -> McConfig {
        McConfig::new(
            self.n_paths,
            ((tau * self.steps_per_year).ceil() as usize).max(1),
            self.seed,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraderSpec {
    pub gamma: f64,
    /// Explicit quote floor; when absent it is `-floor_units * max_i(V^i) / beta`.
    pub delta_floor: Option<f64>,
    pub floor_units: f64,
    pub vega_limit: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub n_episodes: usize,
    pub n_steps: usize,
    pub hedge: HedgeMode,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionSpec {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Standard errors above this are flagged.
    pub tolerance: f64,
    pub n_t: usize,
    pub n_spot: usize,
    pub n_nu: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: StochVolParams,
    pub initial: MarketState,
    pub book: BookSpec,
    pub trader: TraderSpec,
    pub grid: SolverGrid,
    pub surface: PricingSpec,
    pub simulation: SimulationSpec,
    pub correction: CorrectionSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: StochVolParams {
                mu: 0.0,
                xi: 0.2,
                rho: -0.5,
                drift_p: MeanReversion::new(2.0, 0.04),
                drift_q: MeanReversion::new(3.0, 0.0225),
            },
            initial: MarketState {
                spot: 10.0,
                variance: 0.0225,
                time: 0.0,
            },
            book: BookSpec {
                strikes: vec![8.0, 9.0, 10.0, 11.0, 12.0],
                maturities: vec![1.0, 1.5, 2.0, 3.0],
                kind: OptionKind::Call,
                trading_days: 252.0,
                requests_per_day: 30.0,
                moneyness_decay: 0.7,
                alpha: 0.7,
                beta: 150.0,
                notional_per_trade: 5e5,
                vega_bump: model::DEFAULT_VEGA_BUMP,
                pricing: PricingSpec {
                    n_paths: 100_000,
                    steps_per_year: 100.0,
                    seed: 20_200_101,
                },
            },
            trader: TraderSpec {
                gamma: 1e-3,
                delta_floor: None,
                floor_units: 50.0,
                vega_limit: 1e7,
                horizon: 0.0012,
            },
            grid: SolverGrid {
                n_time: 180,
                nu_min: 0.0144,
                nu_max: 0.0324,
                n_nu: 30,
                n_vega: 40,
            },
            surface: PricingSpec {
                n_paths: 100_000,
                steps_per_year: 100.0,
                seed: 7,
            },
            simulation: SimulationSpec {
                n_episodes: 1000,
                n_steps: 1200,
                hedge: HedgeMode::Delta,
                seed: 11,
            },
            correction: CorrectionSpec {
                n_paths: 2000,
                n_steps: 120,
                seed: 13,
                tolerance: 1e3,
                n_t: 3,
                n_spot: 33,
                n_nu: 25,
            },
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        MarketState::new(self.initial.spot, self.initial.variance, self.initial.time)?;
        self.grid.validate()?;
        let b = &self.book;
        if b.strikes.is_empty() || b.maturities.is_empty() {
            return Err(Error::InvalidParameter(
                "book needs at least one strike and one maturity".into(),
            ));
        }
        for &k in &b.strikes {
            for &t in &b.maturities {
                OptionSpec::new(k, t, b.kind)?;
            }
        }
        if !(b.notional_per_trade > 0.0
            && b.beta > 0.0
            && b.requests_per_day > 0.0
            && b.trading_days > 0.0)
        {
            return Err(Error::InvalidParameter(
                "book notional, beta and request rates must be positive".into(),
            ));
        }
        let min_maturity = b.maturities.iter().copied().fold(f64::INFINITY, f64::min);
        let t = &self.trader;
        if !(t.horizon > 0.0 && t.horizon < min_maturity)
            || !(t.vega_limit > 0.0)
            || !(t.gamma >= 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "invalid trader settings {t:?}"
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Options in strike-major order within each maturity: `(K_1, T_1), (K_2, T_1), ...`.
    pub fn options(&self) -> Result<Vec<OptionSpec>> {
        let b = &self.book;
        let mut out = Vec::new();
        for &t in &b.maturities {
            for &k in &b.strikes {
                out.push(OptionSpec::new(k, t, b.kind)?);
            }
        }
        Ok(out)
    }

    /// Request rate `days * per_day / (1 + decay |S0 - K|)`.
    pub fn request_rate(&self, strike: f64) -> f64 {
        let b = &self.book;
        b.trading_days * b.requests_per_day
            / (1.0 + b.moneyness_decay * (self.initial.spot - strike).abs())
    }

    /// Prices, vegas, sizes and curves of the configured book.
    pub fn build_book(&self) -> Result<OptionBook> {
        self.validate()?;
        let options = self.options()?;
        let mut prices = vec![0.0; options.len()];
        for &t in &self.book.maturities {
            let idx: Vec<usize> = (0..options.len())
                .filter(|&i| options[i].maturity == t)
                .collect();
            let group: Vec<OptionSpec> = idx.iter().map(|&i| options[i]).collect();
            let mc = self.book.pricing.mc_for(t - self.initial.time);
            for (&i, (p, _)) in idx.iter().zip(model::price_options(
                &group,
                &self.initial,
                &self.params,
                &mc,
            )?) {
                prices[i] = p;
            }
        }
        self.book_with_prices(&options, &prices)
    }

    /// As [`Self::build_book`] with given reference prices.
    pub fn book_with_prices(&self, options: &[OptionSpec], prices: &[f64]) -> Result<OptionBook> {
        let b = &self.book;
        let mut vegas = Vec::with_capacity(options.len());
        let mut sizes = Vec::with_capacity(options.len());
        let mut curves = Vec::with_capacity(options.len());
        for (o, &price) in options.iter().zip(prices) {
            let vega = model::vega(
                o,
                &self.initial,
                &self.params,
                b.vega_bump,
                VegaMethod::ClosedForm,
            )?
            .value;
            if !(price > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "option K={} T={} has nonpositive reference price {price}",
                    o.strike, o.maturity
                )));
            }
            let curve =
                IntensityCurve::logistic(self.request_rate(o.strike), b.alpha, b.beta, vega)?;
            vegas.push(vega);
            sizes.push(TradeSizeLaw::new(b.notional_per_trade / price)?);
            curves.push([curve, curve]);
        }
        OptionBook::new(options.to_vec(), vegas, sizes, curves, prices.to_vec())
    }

    pub fn trader_config(&self, book: &OptionBook) -> TraderConfig {
        let t = &self.trader;
        let max_vega = book.vegas.iter().copied().fold(0.0, f64::max);
        TraderConfig {
            gamma: t.gamma,
            delta_floor: t
                .delta_floor
                .unwrap_or(-t.floor_units * max_vega / self.book.beta),
            vega_limit: t.vega_limit,
            horizon: t.horizon,
        }
    }
}
