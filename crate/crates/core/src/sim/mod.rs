//! Event-driven simulation of the market maker.
//!
//! Client requests for each option and side arrive as a dominating Poisson
//! stream of rate `lambda_max`; a request at quote `delta` becomes a trade with
//! probability `Lambda(delta) / lambda_max`, unless the trade would push the
//! portfolio vega outside the risk limit. Between time steps the underlying
//! and its variance diffuse under the historical measure, options are marked
//! with the characteristic-function pricer and the spot exposure is re-hedged.

mod engine;
mod quoters;
mod report;

use serde::{Deserialize, Serialize};

pub use engine::{simulate_episode, EpisodeConfig, Simulator};
pub use quoters::{ConstantQuotes, MyopicPolicy, NoQuotes};
pub use report::{
    compare_objectives, evaluate_objective, write_batch_csv, HedgeRecord, ObjectiveEstimate,
    PortfolioState, Sample, SimReport, StreamCounts, TradeRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HedgeMode {
    /// Hold `-Delta` shares.
    Delta,
    /// Also offset the spot-correlated part of the vega exposure.
    Optimal,
}
