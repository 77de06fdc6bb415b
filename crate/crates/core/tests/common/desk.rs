//! A one-option desk on which the vega correction is clearly nonzero.

use std::sync::OnceLock;

use optmm::correction::{PhiConfig, PhiState, TableGrid, VegaDeviationField};
use optmm::hjb::{solve_with, OptionBook, SolveOptions, SolverGrid, TraderConfig, ValueFunction};
use optmm::quoting::IntensityCurve;

const DEEP_ITM: usize = 0;

pub struct Desk {
    pub book: OptionBook,
    pub trader: TraderConfig,
    pub vf: ValueFunction,
    pub field: VegaDeviationField,
}

/// One deep in-the-money option over five trading days.
pub fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let mut book = super::book().subset(&[DEEP_ITM]);
        // a quiet option: inventories persist over the horizon
        for c in book.curves[0].iter_mut() {
            if let IntensityCurve::Logistic { lambda_max, .. } = c {
                *lambda_max /= 10.0;
            }
        }
        let levels = 30;
        let trader = TraderConfig {
            horizon: 0.02,
            vega_limit: levels as f64 * book.jump(0),
            ..super::trader()
        };
        let grid = SolverGrid {
            n_time: 400,
            n_vega: 2 * levels + 1,
            ..super::config().grid
        };
        let options = SolveOptions {
            auto_refine: true,
            ..Default::default()
        };
        let vf = solve_with(&super::params(), &book, &trader, &grid, options).unwrap();
        let field = VegaDeviationField::build(
            &book,
            &super::params(),
            &super::config().initial,
            trader.horizon,
            TableGrid {
                n_t: 3,
                n_spot: 33,
                n_nu: 25,
            },
            super::config().book.vega_bump,
        )
        .unwrap();
        Desk {
            book,
            trader,
            vf,
            field,
        }
    })
}

pub fn start() -> PhiState {
    PhiState {
        time: 0.0,
        spot: 10.0,
        variance: 0.0225,
        inventory: vec![8.0 * desk().book.sizes[0].z],
    }
}

pub fn phi_config(n_paths: usize) -> PhiConfig {
    PhiConfig {
        n_paths,
        n_steps: 1000,
        seed: 17,
        tolerance: f64::INFINITY,
    }
}
