use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::mean_stderr;
use crate::quoting::Side;

/// Holdings of the market maker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioState {
    /// Contracts held per option.
    pub inventories: Vec<f64>,
    /// Shares of the underlying.
    pub underlying_position: f64,
    pub cash: f64,
    /// Years since the start of the episode.
    pub time: f64,
}

/// State of the episode at a time-step boundary, after re-hedging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time: f64,
    pub spot: f64,
    /// Truncated variance used for pricing.
    pub variance: f64,
    pub cash: f64,
    pub shares: f64,
    pub vega: f64,
    pub delta: f64,
    pub mtm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub time: f64,
    pub option: usize,
    pub side: Side,
    /// Contracts traded, always positive.
    pub size: f64,
    pub quote: f64,
    /// Model price the quote is applied to.
    pub price: f64,
    pub cash: f64,
    pub vega: f64,
    pub mtm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeRecord {
    pub time: f64,
    /// Shares bought (negative when sold).
    pub traded: f64,
    pub spot: f64,
    pub position: f64,
    pub cash: f64,
}

/// Requests seen on one side of one option.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamCounts {
    /// Candidate arrivals of the dominating stream.
    pub candidates: u64,
    /// Candidates that found a quote.
    pub quoted: u64,
    /// Accepted by the client but refused by the risk limit.
    pub blocked: u64,
    pub filled: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub initial_mtm: f64,
    pub terminal_mtm: f64,
    /// `(gamma xi^2 / 8) int (V^pi)^2 dt`.
    pub penalty_integral: f64,
    /// The same penalty with `xi^2` replaced by `(1 - rho^2) xi^2`.
    pub penalty_scaled: f64,
    pub samples: Vec<Sample>,
    pub trades: Vec<TradeRecord>,
    pub hedges: Vec<HedgeRecord>,
    /// `[bid, ask]` counts per option.
    pub counts: Vec<[StreamCounts; 2]>,
    pub final_state: PortfolioState,
    /// More than a 1% chance of two candidates of one stream in a single step.
    pub coarse_step: bool,
}

impl SimReport {
    pub fn pnl(&self) -> f64 {
        self.terminal_mtm - self.initial_mtm
    }

    pub fn objective(&self) -> f64 {
        self.pnl() - self.penalty_integral
    }

    /// Writes samples, trades and hedges ordered by time.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "time,event_type,option_id,side,size,quote,cash,vega_portfolio,mtm"
        )?;
        let mut rows: Vec<(f64, u8, String)> = Vec::new();
        for s in &self.samples {
            rows.push((
                s.time,
                1,
                format!(
                    "{:e},sample,,,,,{:e},{:e},{:e}",
                    s.time, s.cash, s.vega, s.mtm
                ),
            ));
        }
        for h in &self.hedges {
            rows.push((
                h.time,
                0,
                format!("{:e},hedge,,,{:e},,{:e},,", h.time, h.traded, h.cash),
            ));
        }
        for t in &self.trades {
            rows.push((
                t.time,
                2,
                format!(
                    "{:e},trade,{},{},{:e},{:e},{:e},{:e},{:e}",
                    t.time,
                    t.option,
                    t.side.name(),
                    t.size,
                    t.quote,
                    t.cash,
                    t.vega,
                    t.mtm
                ),
            ));
        }
        // hedges precede the sample taken at the same step boundary
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, _, row) in rows {
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}

/// One row per episode.
pub fn write_batch_csv<W: Write>(reports: &[SimReport], mut out: W) -> Result<()> {
    writeln!(
        out,
        "episode,pnl,penalty,penalty_scaled,objective,trades,terminal_vega,coarse_step"
    )?;
    for (k, r) in reports.iter().enumerate() {
        let vega = r.samples.last().map_or(0.0, |s| s.vega);
        writeln!(
            out,
            "{k},{:e},{:e},{:e},{:e},{},{:e},{}",
            r.pnl(),
            r.penalty_integral,
            r.penalty_scaled,
            r.objective(),
            r.trades.len(),
            vega,
            r.coarse_step
        )?;
    }
    Ok(())
}

/// Sample means and standard errors of the risk-adjusted objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveEstimate {
    pub n_episodes: usize,
    pub mean_pnl: f64,
    pub pnl_stderr: f64,
    pub mean_penalty: f64,
    pub penalty_stderr: f64,
    pub mean_penalty_scaled: f64,
    pub objective: f64,
    pub objective_stderr: f64,
}

/// `mean(PnL) - mean(penalty)`; the standard error uses the per-episode differences.
pub fn evaluate_objective(reports: &[SimReport]) -> ObjectiveEstimate {
    let pnl: Vec<f64> = reports.iter().map(SimReport::pnl).collect();
    let pen: Vec<f64> = reports.iter().map(|r| r.penalty_integral).collect();
    let scaled: Vec<f64> = reports.iter().map(|r| r.penalty_scaled).collect();
    let obj: Vec<f64> = reports.iter().map(SimReport::objective).collect();
    let (mean_pnl, pnl_stderr) = mean_stderr(&pnl);
    let (mean_penalty, penalty_stderr) = mean_stderr(&pen);
    let (objective, objective_stderr) = mean_stderr(&obj);
    ObjectiveEstimate {
        n_episodes: reports.len(),
        mean_pnl,
        pnl_stderr,
        mean_penalty,
        penalty_stderr,
        mean_penalty_scaled: mean_stderr(&scaled).0,
        objective,
        objective_stderr,
    }
}

/// Mean and standard error of the episode-wise objective difference `a - b`.
///
/// Both batches must come from the same seeds so that the episodes pair up.
pub fn compare_objectives(a: &[SimReport], b: &[SimReport]) -> (f64, f64) {
    assert_eq!(a.len(), b.len(), "batches must pair up");
    let diff: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x.objective() - y.objective())
        .collect();
    mean_stderr(&diff)
}
