#![allow(dead_code)]

pub mod desk;
pub mod oracles;

use std::sync::OnceLock;

use optmm::experiment::ExperimentConfig;
use optmm::hjb::{OptionBook, TraderConfig};
use optmm::model::{MeanReversion, StochVolParams};

/// Reference configuration with a lighter Monte Carlo for the trade sizes.
pub fn config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.book.pricing.n_paths = 20_000;
    cfg
}

pub fn book() -> &'static OptionBook {
    static BOOK: OnceLock<OptionBook> = OnceLock::new();
    BOOK.get_or_init(|| config().build_book().expect("reference book"))
}

pub fn trader() -> TraderConfig {
    config().trader_config(book())
}

pub fn params() -> StochVolParams {
    config().params
}

/// Reference dynamics with the historical drift replaced by the pricing drift.
pub fn equal_drift_params() -> StochVolParams {
    let p = params();
    StochVolParams {
        drift_p: MeanReversion::new(p.drift_q.kappa, p.drift_q.theta),
        ..p
    }
}
