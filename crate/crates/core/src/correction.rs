//! First-order correction for vegas that drift away from their time-0 values.
//!
//! With `eps W(t, S, nu, q) = sum_i q^i (dO^i/dsqrt(nu)(t, S, nu) - V^i)`, the
//! correction is
//!
//! ```text
//! phi(t, S, nu, q) = E[ int_t^T ( (a_P - a_Q)/(2 sqrt(nu_s)) - (gamma xi^2 / 4) V^pi_s ) eps W_s ds ]
//! ```
//!
//! where `(S, nu)` follow the historical dynamics and each inventory jumps
//! with intensity `-H'(p)` of the constant-vega value function. Inventories
//! are unconstrained here; the value function is clamped outside its grid.

use std::io::Write;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hjb::{OptionBook, TraderConfig, ValueFunction};
use crate::model::{
    self, diffusion_step, draw_pair, mean_stderr, MarketState, StochVolParams, VegaMethod,
};
use crate::quoting::{optimal_quote, Side};
use crate::rng::stream_rng;

/// Two-sided quantile covering 99.9% of the paths of a Brownian motion over the horizon.
const PATH_QUANTILE: f64 = 3.48;

/// Node counts of the vega tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableGrid {
    pub n_t: usize,
    pub n_spot: usize,
    pub n_nu: usize,
}

/// Per-option vega tables on a `(t, log S, nu)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VegaDeviationField {
    horizon: f64,
    log_spot: (f64, f64),
    nu: (f64, f64),
    grid: TableGrid,
    base: Vec<f64>,
    /// `[option][t][spot][nu]`
    tables: Vec<Vec<f64>>,
}

#[inline]
fn locate(x: f64, lo: f64, hi: f64, n: usize) -> (usize, f64) {
    if n == 1 || hi <= lo {
        return (0, 0.0);
    }
    let pos = ((x - lo) / (hi - lo)).clamp(0.0, 1.0) * (n - 1) as f64;
    let k = (pos.floor() as usize).min(n - 2);
    (k, pos - k as f64)
}

fn nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Variance and log-spot ranges reached over `horizon` with probability 99.9%.
///
/// Both ranges are centred on the initial state unless the variance range
/// would reach below `floor`.
pub fn reachable_ranges(
    params: &StochVolParams,
    initial: &MarketState,
    horizon: f64,
    floor: f64,
) -> ((f64, f64), (f64, f64)) {
    let nu0 = initial.variance;
    let drift = params.drift_p.drift(nu0).abs() * horizon;
    let mut half = PATH_QUANTILE * params.xi * (nu0 * horizon).sqrt() + drift;
    // the diffusion coefficient grows with nu; widen once with the upper level
    half = PATH_QUANTILE * params.xi * ((nu0 + half) * horizon).sqrt() + drift;
    let nu = (nu0 - half).max(floor).min(nu0);
    let nu_range = (nu, nu0 + half);
    let width = PATH_QUANTILE * (nu_range.1 * horizon).sqrt()
        + (params.mu.abs() + 0.5 * nu_range.1) * horizon;
    let ls = initial.spot.ln();
    (nu_range, (ls - width, ls + width))
}

impl VegaDeviationField {
    pub fn build(
        book: &OptionBook,
        params: &StochVolParams,
        initial: &MarketState,
        horizon: f64,
        grid: TableGrid,
        bump: f64,
    ) -> Result<Self> {
        if grid.n_t == 0 || grid.n_spot == 0 || grid.n_nu == 0 || !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "invalid vega table grid {grid:?} over {horizon}"
            )));
        }
        let (nu, log_spot) = reachable_ranges(params, initial, horizon, (2.0 * bump).powi(2));
        let ts = if grid.n_t == 1 {
            vec![0.0]
        } else {
            nodes(0.0, horizon, grid.n_t)
        };
        let ss = nodes(log_spot.0, log_spot.1, grid.n_spot);
        let ns = nodes(nu.0, nu.1, grid.n_nu);
        let states: Vec<MarketState> = ts
            .iter()
            .flat_map(|&t| {
                let ns = &ns;
                ss.iter().flat_map(move |&ls| {
                    ns.iter().map(move |&n| MarketState {
                        spot: ls.exp(),
                        variance: n,
                        time: initial.time + t,
                    })
                })
            })
            .collect();
        let tables = book
            .options
            .iter()
            .map(|o| {
                states
                    .par_iter()
                    .map(|s| {
                        model::vega(o, s, params, bump, VegaMethod::ClosedForm).map(|v| v.value)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            horizon,
            log_spot,
            nu,
            grid,
            base: book.vegas.clone(),
            tables,
        })
    }

    /// A field whose tables equal the frozen vegas everywhere.
    pub fn constant(book: &OptionBook) -> Self {
        Self {
            horizon: 1.0,
            log_spot: (0.0, 1.0),
            nu: (0.0, 1.0),
            grid: TableGrid {
                n_t: 1,
                n_spot: 1,
                n_nu: 1,
            },
            base: book.vegas.clone(),
            tables: book.vegas.iter().map(|&v| vec![v]).collect(),
        }
    }

    /// Multiplies every deviation from the frozen vegas by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let tables = self
            .tables
            .iter()
            .zip(&self.base)
            .map(|(t, &b)| t.iter().map(|&x| b + c * (x - b)).collect())
            .collect();
        Self {
            tables,
            ..self.clone()
        }
    }

    pub fn grid(&self) -> TableGrid {
        self.grid
    }

    pub fn variance_range(&self) -> (f64, f64) {
        self.nu
    }

    pub fn spot_range(&self) -> (f64, f64) {
        (self.log_spot.0.exp(), self.log_spot.1.exp())
    }

    /// Node coordinates `(times, spots, variances)`.
    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let g = self.grid;
        let ts = if g.n_t == 1 {
            vec![0.0]
        } else {
            nodes(0.0, self.horizon, g.n_t)
        };
        let ss = nodes(self.log_spot.0, self.log_spot.1, g.n_spot)
            .into_iter()
            .map(f64::exp)
            .collect();
        (ts, ss, nodes(self.nu.0, self.nu.1, g.n_nu))
    }

    /// Raw table of one option, row-major over `[t][spot][nu]`.
    pub fn table(&self, option: usize) -> &[f64] {
        &self.tables[option]
    }

    #[inline]
    fn node(&self, option: usize, t: usize, s: usize, n: usize) -> f64 {
        self.tables[option][(t * self.grid.n_spot + s) * self.grid.n_nu + n]
    }

    /// Trilinear interpolation in `(t, log S, nu)`, clamped to the table.
    pub fn vega(&self, option: usize, t: f64, spot: f64, nu: f64) -> f64 {
        let g = self.grid;
        let (kt, wt) = locate(t, 0.0, self.horizon, g.n_t);
        let (ks, ws) = locate(spot.ln(), self.log_spot.0, self.log_spot.1, g.n_spot);
        let (kn, wn) = locate(nu, self.nu.0, self.nu.1, g.n_nu);
        let mut out = 0.0;
        for (dt, ft) in [(0, 1.0 - wt), (1, wt)] {
            for (ds, fs) in [(0, 1.0 - ws), (1, ws)] {
                for (dn, f_n) in [(0, 1.0 - wn), (1, wn)] {
                    let w = ft * fs * f_n;
                    if w != 0.0 {
                        out += w * self.node(option, kt + dt, ks + ds, kn + dn);
                    }
                }
            }
        }
        out
    }

    /// `eps W = sum_i q^i (vega_i(t, S, nu) - V^i)`.
    pub fn deviation(&self, t: f64, spot: f64, nu: f64, inventory: &[f64]) -> f64 {
        inventory
            .iter()
            .enumerate()
            .filter(|(_, &q)| q != 0.0)
            .map(|(i, &q)| q * (self.vega(i, t, spot, nu) - self.base[i]))
            .sum()
    }
}

/// Monte Carlo settings of the correction estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiConfig {
    pub n_paths: usize,
    /// Steps over the remaining horizon.
    pub n_steps: usize,
    pub seed: u64,
    /// Standard errors above this are flagged.
    pub tolerance: f64,
}

/// Point at which the correction is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiState {
    /// Years since the start of the horizon.
    pub time: f64,
    pub spot: f64,
    pub variance: f64,
    /// Contracts per option.
    pub inventory: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Standard error above the requested tolerance.
    pub flagged: bool,
    /// Smallest and largest tilted intensity met along the paths.
    pub intensity_range: (f64, f64),
}

/// Everything the estimator reads.
#[derive(Debug, Clone, Copy)]
pub struct CorrectionProblem<'a> {
    pub vf: &'a ValueFunction,
    pub field: &'a VegaDeviationField,
    pub params: &'a StochVolParams,
    pub book: &'a OptionBook,
    pub trader: &'a TraderConfig,
}

struct PathOutcome {
    integral: f64,
    min_rate: f64,
    max_rate: f64,
}

impl CorrectionProblem<'_> {
    /// `-H'(p) = Lambda(delta*(p))` for option `i` on `side`, clipped at 0.
    pub fn tilted_intensity(
        &self,
        option: usize,
        side: Side,
        t: f64,
        nu: f64,
        vega: f64,
    ) -> Result<f64> {
        let z = self.book.sizes[option].z;
        let target = vega - side.psi() * self.book.jump(option);
        let p = (self.vf.value_at(t, nu, vega) - self.vf.value_at(t, nu, target)) / z;
        let curve = self.book.curve(option, side);
        let delta = optimal_quote(curve, p, self.trader.delta_floor)?;
        Ok(curve.intensity(delta).max(0.0))
    }

    fn path(&self, state: &PhiState, cfg: &PhiConfig, path: u64) -> Result<PathOutcome> {
        let (p, book) = (self.params, self.book);
        let horizon = self.vf.horizon();
        let dt = (horizon - state.time) / cfg.n_steps as f64;
        let penalty = self.trader.gamma * p.xi * p.xi / 4.0;
        let mut rng = stream_rng(cfg.seed, path);
        let streams: Vec<(usize, Side, f64)> = (0..book.len())
            .flat_map(|i| {
                Side::BOTH.map(|s| {
                    (
                        i,
                        s,
                        book.curve(i, s).dominating_rate(self.trader.delta_floor),
                    )
                })
            })
            .collect();
        let mut next: Vec<f64> = streams
            .iter()
            .map(|&(_, _, rate)| state.time + rng.sample::<f64, _>(Exp1) / rate)
            .collect();
        let mut q = state.inventory.clone();
        let mut vega: f64 = q.iter().zip(&book.vegas).map(|(a, b)| a * b).sum();
        let (mut spot, mut v) = (state.spot, state.variance);
        let mut out = PathOutcome {
            integral: 0.0,
            min_rate: f64::INFINITY,
            max_rate: f64::NEG_INFINITY,
        };
        for k in 0..cfg.n_steps {
            let t = state.time + k as f64 * dt;
            let nu = v.max(0.0);
            let w = self.field.deviation(t, spot, nu, &q);
            if w != 0.0 {
                let gap = p.drift_gap(nu);
                let carry = if gap == 0.0 {
                    0.0
                } else {
                    gap / (2.0 * nu.max(1e-12).sqrt())
                };
                out.integral += (carry - penalty * vega) * w * dt;
            }
            let t_end = t + dt;
            loop {
                let (slot, &time) = next
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .expect("at least one stream");
                if time > t_end {
                    break;
                }
                let (i, side, rate) = streams[slot];
                next[slot] = time + rng.sample::<f64, _>(Exp1) / rate;
                let u: f64 = rng.random();
                let intensity = self.tilted_intensity(i, side, time, nu, vega)?;
                out.min_rate = out.min_rate.min(intensity);
                out.max_rate = out.max_rate.max(intensity);
                if u * rate < intensity {
                    let z = book.sizes[i].z;
                    q[i] -= side.psi() * z;
                    vega -= side.psi() * z * book.vegas[i];
                }
            }
            let (z_spot, z_perp) = draw_pair(&mut rng);
            let d = p.drift_p;
            (spot, v) = diffusion_step(
                spot, v, dt, p.mu, d.kappa, d.theta, p.xi, p.rho, z_spot, z_perp,
            );
        }
        Ok(out)
    }

    pub fn phi(&self, state: &PhiState, cfg: &PhiConfig) -> Result<PhiEstimate> {
        let horizon = self.vf.horizon();
        if state.inventory.len() != self.book.len() {
            return Err(Error::InvalidParameter(format!(
                "inventory has {} entries for {} options",
                state.inventory.len(),
                self.book.len()
            )));
        }
        if !(state.time >= 0.0 && state.time < horizon) || cfg.n_steps == 0 || cfg.n_paths == 0 {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= t < {horizon}, n_steps >= 1 and n_paths >= 1 (t = {})",
                state.time
            )));
        }
        MarketState::new(state.spot, state.variance, 0.0)?;
        let outcomes = (0..cfg.n_paths as u64)
            .into_par_iter()
            .map(|k| self.path(state, cfg, k))
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<f64> = outcomes.iter().map(|o| o.integral).collect();
        let (value, stderr) = mean_stderr(&values);
        let flagged = !(stderr <= cfg.tolerance);
        if flagged {
            log::warn!(
                "correction standard error {stderr:e} exceeds tolerance {:e}",
                cfg.tolerance
            );
        }
        let intensity_range = outcomes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| {
                (lo.min(o.min_rate), hi.max(o.max_rate))
            });
        Ok(PhiEstimate {
            value,
            stderr,
            flagged,
            intensity_range,
        })
    }

    /// Penalty `p` of a request corrected by the finite difference of `phi`
    /// across the trade; both `phi` values share the seed.
    pub fn corrected_penalty(
        &self,
        state: &PhiState,
        option: usize,
        side: Side,
        cfg: &PhiConfig,
    ) -> Result<f64> {
        let z = self.book.sizes[option].z;
        let vega: f64 = state
            .inventory
            .iter()
            .zip(&self.book.vegas)
            .map(|(a, b)| a * b)
            .sum();
        let target = vega - side.psi() * self.book.jump(option);
        let base = (self.vf.value_at(state.time, state.variance, vega)
            - self.vf.value_at(state.time, state.variance, target))
            / z;
        let mut after = state.clone();
        after.inventory[option] -= side.psi() * z;
        let here = self.phi(state, cfg)?.value;
        let there = self.phi(&after, cfg)?.value;
        Ok(base + (here - there) / z)
    }
}

/// Writes `time,spot,variance,inventory,phi,stderr,flagged` rows, inventories joined by `;`.
pub fn write_phi_csv<W: Write>(rows: &[(PhiState, PhiEstimate)], mut out: W) -> Result<()> {
    writeln!(out, "time,spot,variance,inventory,phi,stderr,flagged")?;
    for (s, e) in rows {
        let inv: Vec<String> = s.inventory.iter().map(|q| format!("{q:e}")).collect();
        writeln!(
            out,
            "{:e},{:e},{:e},{},{:e},{:e},{}",
            s.time,
            s.spot,
            s.variance,
            inv.join(";"),
            e.value,
            e.stderr,
            e.flagged
        )?;
    }
    Ok(())
}
