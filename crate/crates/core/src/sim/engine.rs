use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use super::report::{HedgeRecord, PortfolioState, Sample, SimReport, StreamCounts, TradeRecord};
use super::HedgeMode;
use crate::error::{Error, Result};
use crate::hjb::{OptionBook, QuoteSource, TraderConfig};
use crate::model::{diffusion_step, draw_pair, CfSlice, CfValues, MarketState, StochVolParams};
use crate::quoting::Side;
use crate::rng::{derive_seed, stream_rng, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub n_steps: usize,
    pub hedge: HedgeMode,
    /// Keep a sample every `sample_every` steps; 0 keeps the first and last only.
    pub sample_every: usize,
    /// Contracts held at the start; empty means flat.
    pub initial_inventory: Vec<f64>,
    pub log_hedges: bool,
}

impl EpisodeConfig {
    pub fn new(n_steps: usize, hedge: HedgeMode) -> Self {
        Self {
            n_steps,
            hedge,
            sample_every: 0,
            initial_inventory: Vec::new(),
            log_hedges: false,
        }
    }
}

/// Shared, immutable set-up for a batch of episodes.
pub struct Simulator<'a> {
    params: &'a StochVolParams,
    book: &'a OptionBook,
    trader: &'a TraderConfig,
    initial: MarketState,
    config: EpisodeConfig,
    dt: f64,
    n_maturities: usize,
    maturity_index: Vec<usize>,
    /// `[step][maturity]`
    slices: Vec<CfSlice>,
    dominating: Vec<[f64; 2]>,
    coarse: bool,
}

struct Candidate {
    time: f64,
    uniform: f64,
    rate: f64,
    rng: StreamRng,
}

impl Candidate {
    fn new(rng: StreamRng, rate: f64) -> Self {
        let mut c = Self {
            time: 0.0,
            uniform: 0.0,
            rate,
            rng,
        };
        c.advance();
        c
    }

    fn advance(&mut self) {
        let gap: f64 = self.rng.sample(Exp1);
        self.time += gap / self.rate;
        self.uniform = self.rng.random();
    }
}

impl<'a> Simulator<'a> {
    pub fn new(
        params: &'a StochVolParams,
        book: &'a OptionBook,
        trader: &'a TraderConfig,
        initial: MarketState,
        config: EpisodeConfig,
    ) -> Result<Self> {
        params.validate()?;
        book.validate()?;
        trader.validate(book)?;
        MarketState::new(initial.spot, initial.variance, initial.time)?;
        if config.n_steps == 0 {
            return Err(Error::InvalidParameter(
                "an episode needs at least one step".into(),
            ));
        }
        if !config.initial_inventory.is_empty() {
            if config.initial_inventory.len() != book.len() {
                return Err(Error::InvalidParameter(format!(
                    "initial inventory has {} entries for {} options",
                    config.initial_inventory.len(),
                    book.len()
                )));
            }
            let vega: f64 = config
                .initial_inventory
                .iter()
                .zip(&book.vegas)
                .map(|(q, v)| q * v)
                .sum();
            if !trader.admissible(vega) {
                return Err(Error::InvalidParameter(format!(
                    "initial portfolio vega {vega} breaches the limit"
                )));
            }
        }
        let mut maturities: Vec<f64> = book.options.iter().map(|o| o.maturity).collect();
        maturities.sort_by(f64::total_cmp);
        maturities.dedup();
        if maturities[0] - initial.time - trader.horizon <= 0.0 {
            return Err(Error::InvalidParameter(
                "an option expires before the end of the episode".into(),
            ));
        }
        let maturity_index = book
            .options
            .iter()
            .map(|o| {
                maturities
                    .iter()
                    .position(|&m| m == o.maturity)
                    .expect("listed maturity")
            })
            .collect();
        let dt = trader.horizon / config.n_steps as f64;
        let slices = (0..=config.n_steps)
            .into_par_iter()
            .flat_map_iter(|k| {
                let t = initial.time + k as f64 * dt;
                maturities.iter().map(move |&m| CfSlice::new(params, m - t))
            })
            .collect();
        let dominating: Vec<[f64; 2]> = (0..book.len())
            .map(|i| Side::BOTH.map(|s| book.curve(i, s).dominating_rate(trader.delta_floor)))
            .collect();
        let x = dominating.iter().flatten().fold(0.0f64, |m, &r| m.max(r)) * dt;
        let coarse = 1.0 - (-x).exp() * (1.0 + x) > 0.01;
        if coarse {
            log::warn!("time step {dt:e} allows more than one candidate request per stream with probability above 1%");
        }
        Ok(Self {
            params,
            book,
            trader,
            initial,
            config,
            dt,
            n_maturities: maturities.len(),
            maturity_index,
            slices,
            dominating,
            coarse,
        })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn time_step(&self) -> f64 {
        self.dt
    }

    pub fn is_coarse(&self) -> bool {
        self.coarse
    }

    pub fn run_batch(
        &self,
        quoter: &dyn QuoteSource,
        n_episodes: usize,
        seed: u64,
    ) -> Result<Vec<SimReport>> {
        (0..n_episodes)
            .into_par_iter()
            .map(|e| self.run_episode(quoter, derive_seed(seed, e as u64)))
            .collect()
    }

    pub fn run_episode(&self, quoter: &dyn QuoteSource, seed: u64) -> Result<SimReport> {
        let (book, trader, p) = (self.book, self.trader, self.params);
        let n = book.len();
        let dt = self.dt;
        let n_steps = self.config.n_steps;
        let mut diffusion = stream_rng(seed, 0);
        let mut streams: Vec<Candidate> = (0..n)
            .flat_map(|i| Side::BOTH.map(|s| (i, s)))
            .map(|(i, s)| {
                Candidate::new(
                    stream_rng(seed, 1 + 2 * i as u64 + s.index() as u64),
                    self.dominating[i][s.index()],
                )
            })
            .collect();

        let mut inventory = if self.config.initial_inventory.is_empty() {
            vec![0.0; n]
        } else {
            self.config.initial_inventory.clone()
        };
        let mut vega: f64 = inventory.iter().zip(&book.vegas).map(|(q, v)| q * v).sum();
        let (mut cash, mut shares) = (0.0, 0.0);
        let (mut spot, mut v) = (self.initial.spot, self.initial.variance);
        let mut counts = vec![[StreamCounts::default(); 2]; n];
        let mut samples = Vec::new();
        let mut trades = Vec::new();
        let mut hedges = Vec::new();
        let mut vega_sq_time = 0.0;
        let mut initial_mtm = 0.0;
        let mut terminal_mtm = 0.0;
        let mut prices = vec![f64::NAN; n];

        for k in 0..=n_steps {
            let t = k as f64 * dt;
            let nu = v.max(0.0);
            let slices = &self.slices[k * self.n_maturities..(k + 1) * self.n_maturities];
            let mut cf: Vec<Option<CfValues>> = vec![None; self.n_maturities];
            prices.fill(f64::NAN);
            let (mut delta, mut held) = (0.0, 0.0);
            for i in 0..n {
                if inventory[i] != 0.0 {
                    let m = self.maturity_index[i];
                    let values = cf[m].get_or_insert_with(|| slices[m].at_variance(nu));
                    let o = &book.options[i];
                    let (price, d) = values.price_and_delta(o.kind, spot, o.strike);
                    prices[i] = price;
                    delta += inventory[i] * d;
                    held += inventory[i] * price;
                }
            }
            if k < n_steps {
                let mut target = -delta;
                if self.config.hedge == HedgeMode::Optimal && nu > 0.0 {
                    target -= p.rho * p.xi * vega / (2.0 * nu.sqrt() * spot);
                }
                let traded = target - shares;
                cash -= traded * spot;
                shares = target;
                if self.config.log_hedges {
                    hedges.push(HedgeRecord {
                        time: t,
                        traded,
                        spot,
                        position: shares,
                        cash,
                    });
                }
            }
            let mut mtm = cash + shares * spot + held;
            if k == 0 {
                initial_mtm = mtm;
            }
            let every = self.config.sample_every;
            if k == 0 || k == n_steps || (every > 0 && k % every == 0) {
                samples.push(Sample {
                    time: t,
                    spot,
                    variance: nu,
                    cash,
                    shares,
                    vega,
                    delta,
                    mtm,
                });
            }
            if k == n_steps {
                terminal_mtm = mtm;
                break;
            }

            let t_end = (k + 1) as f64 * dt;
            let mut last = t;
            loop {
                let (slot, c) = streams
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.time.total_cmp(&b.1.time))
                    .expect("at least one stream");
                if c.time > t_end {
                    break;
                }
                let (time, uniform) = (c.time, c.uniform);
                streams[slot].advance();
                let (i, side) = (slot / 2, Side::BOTH[slot % 2]);
                let count = &mut counts[i][side.index()];
                count.candidates += 1;
                vega_sq_time += vega * vega * (time - last);
                last = time;
                let Some(quote) = quoter.quote(i, side, time, nu, vega)? else {
                    continue;
                };
                count.quoted += 1;
                let probability =
                    book.curve(i, side).intensity(quote) / self.dominating[i][side.index()];
                if !(probability <= 1.0 + 1e-12) {
                    return Err(Error::InvalidParameter(format!(
                        "quote {quote} on option {i} is below the floor {}",
                        trader.delta_floor
                    )));
                }
                if uniform >= probability {
                    continue;
                }
                let z = book.sizes[i].z;
                let after = vega - side.psi() * z * book.vegas[i];
                if !trader.admissible(after) {
                    count.blocked += 1;
                    continue;
                }
                count.filled += 1;
                if prices[i].is_nan() {
                    let m = self.maturity_index[i];
                    let values = cf[m].get_or_insert_with(|| slices[m].at_variance(nu));
                    prices[i] = values.price(book.options[i].kind, spot, book.options[i].strike);
                }
                inventory[i] -= side.psi() * z;
                cash += side.psi() * z * prices[i] + z * quote;
                vega = after;
                mtm += z * quote;
                trades.push(TradeRecord {
                    time,
                    option: i,
                    side,
                    size: z,
                    quote,
                    price: prices[i],
                    cash,
                    vega,
                    mtm,
                });
            }
            vega_sq_time += vega * vega * (t_end - last);

            let (z_spot, z_perp) = draw_pair(&mut diffusion);
            let drift = p.drift_p;
            (spot, v) = diffusion_step(
                spot,
                v,
                dt,
                p.mu,
                drift.kappa,
                drift.theta,
                p.xi,
                p.rho,
                z_spot,
                z_perp,
            );
        }

        let penalty_integral = trader.gamma * p.xi * p.xi / 8.0 * vega_sq_time;
        Ok(SimReport {
            initial_mtm,
            terminal_mtm,
            penalty_integral,
            penalty_scaled: (1.0 - p.rho * p.rho) * penalty_integral,
            samples,
            trades,
            hedges,
            counts,
            final_state: PortfolioState {
                inventories: inventory,
                underlying_position: shares,
                cash,
                time: trader.horizon,
            },
            coarse_step: self.coarse,
        })
    }
}

/// Runs a single episode from scratch.
#[allow(clippy::too_many_arguments)]
pub fn simulate_episode(
    quoter: &dyn QuoteSource,
    params: &StochVolParams,
    book: &OptionBook,
    trader: &TraderConfig,
    initial: MarketState,
    config: EpisodeConfig,
    seed: u64,
) -> Result<SimReport> {
    Simulator::new(params, book, trader, initial, config)?.run_episode(quoter, seed)
}
