//! Monte Carlo simulation of the spot/variance diffusion.
//!
//! Spot uses a log-Euler step, variance a full-truncation Euler step. Each
//! path draws from its own counter-based stream `(seed, path_index)`, so a
//! path's trajectory does not depend on how paths are split across threads.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::{MarketState, Measure, OptionSpec, StochVolParams};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamRng};

const CHUNK: usize = 512;

/// Monte Carlo sizes for pricing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self {
            n_paths,
            n_steps,
            seed,
        }
    }
}

/// Simulated trajectories, stored path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    spot: Vec<f64>,
    variance: Vec<f64>,
    n_paths: usize,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_samples(&self) -> usize {
        self.times.len()
    }

    pub fn spot(&self, path: usize) -> &[f64] {
        let n = self.n_samples();
        &self.spot[path * n..(path + 1) * n]
    }

    pub fn variance(&self, path: usize) -> &[f64] {
        let n = self.n_samples();
        &self.variance[path * n..(path + 1) * n]
    }

    pub fn terminal_spots(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_paths).map(|p| *self.spot(p).last().expect("at least one sample"))
    }

    pub fn terminal_variances(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_paths).map(|p| *self.variance(p).last().expect("at least one sample"))
    }
}

/// One diffusion step. `v` is the untruncated Euler state; the returned
/// variance may be negative and must be floored at 0 before use.
#[inline]
pub fn diffusion_step(
    spot: f64,
    v: f64,
    dt: f64,
    mu: f64,
    kappa: f64,
    theta: f64,
    xi: f64,
    rho: f64,
    z_spot: f64,
    z_perp: f64,
) -> (f64, f64) {
    let vp = v.max(0.0);
    let sd = (vp * dt).sqrt();
    let z_var = rho * z_spot + (1.0 - rho * rho).sqrt() * z_perp;
    let s = spot * ((mu - 0.5 * vp) * dt + sd * z_spot).exp();
    let v = v + kappa * (theta - vp) * dt + xi * sd * z_var;
    (s, v)
}

/// Draws the two independent standard normals driving one step.
#[inline]
pub fn draw_pair(rng: &mut StreamRng) -> (f64, f64) {
    (rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn check_sizes(horizon: f64, n_steps: usize, n_paths: usize) -> Result<()> {
    if !(horizon > 0.0) || n_steps == 0 || n_paths == 0 {
        return Err(Error::InvalidParameter(format!(
            "need horizon > 0, n_steps >= 1, n_paths >= 1 (horizon = {horizon}, n_steps = {n_steps}, n_paths = {n_paths})"
        )));
    }
    Ok(())
}

fn spot_drift(params: &StochVolParams, measure: Measure) -> f64 {
    match measure {
        Measure::P => params.mu,
        Measure::Q => 0.0,
    }
}

/// Simulates `n_paths` trajectories with `n_steps + 1` samples each.
///
/// Stored variances are the truncated values `max(v, 0)`.
pub fn simulate_paths(
    params: &StochVolParams,
    measure: Measure,
    initial: &MarketState,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    check_sizes(horizon, n_steps, n_paths)?;
    let dt = horizon / n_steps as f64;
    let drift = params.drift(measure);
    let mu = spot_drift(params, measure);
    let n = n_steps + 1;
    let mut spot = vec![0.0; n_paths * n];
    let mut variance = vec![0.0; n_paths * n];
    spot.par_chunks_mut(n)
        .zip(variance.par_chunks_mut(n))
        .enumerate()
        .for_each(|(p, (sp, va))| {
            let mut rng = stream_rng(seed, p as u64);
            let (mut s, mut v) = (initial.spot, initial.variance);
            sp[0] = s;
            va[0] = v;
            for k in 1..n {
                let (z1, z2) = draw_pair(&mut rng);
                (s, v) = diffusion_step(
                    s,
                    v,
                    dt,
                    mu,
                    drift.kappa,
                    drift.theta,
                    params.xi,
                    params.rho,
                    z1,
                    z2,
                );
                sp[k] = s;
                va[k] = v.max(0.0);
            }
        });
    Ok(PathEnsemble {
        times: (0..n).map(|k| initial.time + k as f64 * dt).collect(),
        spot,
        variance,
        n_paths,
    })
}

/// Terminal spots only, without storing trajectories.
pub fn simulate_terminal_spots(
    params: &StochVolParams,
    measure: Measure,
    initial: &MarketState,
    horizon: f64,
    mc: &McConfig,
) -> Result<Vec<f64>> {
    check_sizes(horizon, mc.n_steps, mc.n_paths)?;
    let dt = horizon / mc.n_steps as f64;
    let drift = params.drift(measure);
    let mu = spot_drift(params, measure);
    let mut out = vec![0.0; mc.n_paths];
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| {
            for (j, slot) in chunk.iter_mut().enumerate() {
                let mut rng = stream_rng(mc.seed, (c * CHUNK + j) as u64);
                let (mut s, mut v) = (initial.spot, initial.variance);
                for _ in 0..mc.n_steps {
                    let (z1, z2) = draw_pair(&mut rng);
                    (s, v) = diffusion_step(
                        s,
                        v,
                        dt,
                        mu,
                        drift.kappa,
                        drift.theta,
                        params.xi,
                        params.rho,
                        z1,
                        z2,
                    );
                }
                *slot = s;
            }
        });
    Ok(out)
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo price under the pricing measure, with its standard error.
pub fn price_option(
    option: &OptionSpec,
    initial: &MarketState,
    params: &StochVolParams,
    mc: &McConfig,
) -> Result<(f64, f64)> {
    let tau = option.time_to_maturity(initial.time);
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "option maturity must exceed current time (tau = {tau})"
        )));
    }
    let terminal = simulate_terminal_spots(params, Measure::Q, initial, tau, mc)?;
    let payoffs: Vec<f64> = terminal.iter().map(|&s| option.payoff(s)).collect();
    Ok(mean_stderr(&payoffs))
}

/// Prices several options, sharing one simulation per distinct maturity.
///
/// Each option gets exactly the estimate [`price_option`] would return.
pub fn price_options(
    options: &[OptionSpec],
    initial: &MarketState,
    params: &StochVolParams,
    mc: &McConfig,
) -> Result<Vec<(f64, f64)>> {
    let mut out = vec![(0.0, 0.0); options.len()];
    let mut done = vec![false; options.len()];
    for i in 0..options.len() {
        if done[i] {
            continue;
        }
        let tau = options[i].time_to_maturity(initial.time);
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "option maturity must exceed current time (tau = {tau})"
            )));
        }
        let terminal = simulate_terminal_spots(params, Measure::Q, initial, tau, mc)?;
        for j in i..options.len() {
            if !done[j] && options[j].maturity == options[i].maturity {
                let payoffs: Vec<f64> = terminal.iter().map(|&s| options[j].payoff(s)).collect();
                out[j] = mean_stderr(&payoffs);
                done[j] = true;
            }
        }
    }
    Ok(out)
}
