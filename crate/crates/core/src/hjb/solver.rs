use rayon::prelude::*;

use super::value::ValueFunction;
use super::{OptionBook, SolverGrid, TraderConfig};
use crate::error::{Error, Result};
use crate::model::StochVolParams;
use crate::quoting::{hamiltonian, Side};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Double `n_time` instead of failing when the monotonicity bound is violated.
    pub auto_refine: bool,
    pub max_refinements: usize,
    /// Terminal slice `[nu][vega]`; zero when absent.
    pub terminal: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            auto_refine: false,
            max_refinements: 8,
            terminal: None,
        }
    }
}

/// `dt * max_n (|a_P(nu_n)| / dnu + nu_n xi^2 / dnu^2)`: the diffusion part of
/// the explicit scheme's monotonicity bound. Must not exceed 1.
pub fn cfl_number(params: &StochVolParams, grid: &SolverGrid, horizon: f64) -> f64 {
    let dt = horizon / grid.n_time as f64;
    let dnu = (grid.nu_max - grid.nu_min) / (grid.n_nu - 1) as f64;
    grid.nu_nodes()
        .iter()
        .map(|&nu| params.drift_p.drift(nu).abs() / dnu + nu * params.xi * params.xi / (dnu * dnu))
        .fold(0.0, f64::max)
        * dt
}

#[derive(Debug, Clone, Copy)]
struct Jump {
    option: usize,
    side: Side,
    /// left interpolation node and weight of the post-trade vega
    k: usize,
    w: f64,
}

pub fn solve(
    params: &StochVolParams,
    book: &OptionBook,
    trader: &TraderConfig,
    grid: &SolverGrid,
) -> Result<ValueFunction> {
    solve_with(params, book, trader, grid, SolveOptions::default())
}

pub fn solve_with(
    params: &StochVolParams,
    book: &OptionBook,
    trader: &TraderConfig,
    grid: &SolverGrid,
    options: SolveOptions,
) -> Result<ValueFunction> {
    params.validate()?;
    book.validate()?;
    trader.validate(book)?;
    grid.validate()?;
    book.check_tradable(trader.vega_limit)?;
    if let Some(t) = &options.terminal {
        if t.len() != grid.n_nu * grid.n_vega {
            return Err(Error::InvalidParameter(format!(
                "terminal slice has {} values, grid needs {}",
                t.len(),
                grid.n_nu * grid.n_vega
            )));
        }
    }
    let mut grid = *grid;
    let mut attempts = 0;
    loop {
        match march(params, book, trader, &grid, options.terminal.as_deref()) {
            Err(Error::Cfl { detail })
                if options.auto_refine && attempts < options.max_refinements =>
            {
                log::info!("{detail}; refining to {} time steps", 2 * grid.n_time);
                grid.n_time *= 2;
                attempts += 1;
            }
            other => return other,
        }
    }
}

fn march(
    params: &StochVolParams,
    book: &OptionBook,
    trader: &TraderConfig,
    grid: &SolverGrid,
    terminal: Option<&[f64]>,
) -> Result<ValueFunction> {
    let cfl = cfl_number(params, grid, trader.horizon);
    if cfl > 1.0 {
        return Err(Error::Cfl {
            detail: format!(
                "diffusion CFL number {cfl:.4} > 1 with {} time steps",
                grid.n_time
            ),
        });
    }
    let (n_nu, n_vega) = (grid.n_nu, grid.n_vega);
    let dt = trader.horizon / grid.n_time as f64;
    let nu = grid.nu_nodes();
    let dnu = (grid.nu_max - grid.nu_min) / (n_nu - 1) as f64;
    let vega = grid.vega_nodes(trader.vega_limit);
    let dvega = vega[1] - vega[0];
    let xi2 = params.xi * params.xi;
    let penalty = trader.gamma * xi2 / 8.0;

    let jumps: Vec<Vec<Jump>> = vega
        .iter()
        .map(|&v| {
            let mut out = Vec::new();
            for i in 0..book.len() {
                for side in Side::BOTH {
                    let target = v - side.psi() * book.jump(i);
                    if !trader.admissible(target) {
                        continue;
                    }
                    let pos = ((target - vega[0]) / dvega).clamp(0.0, (n_vega - 1) as f64);
                    let k = (pos.floor() as usize).min(n_vega - 2);
                    out.push(Jump {
                        option: i,
                        side,
                        k,
                        w: pos - k as f64,
                    });
                }
            }
            out
        })
        .collect();

    let source: Vec<f64> = nu
        .iter()
        .flat_map(|&n| {
            let carry = params.drift_gap(n) / (2.0 * n.sqrt());
            vega.iter().map(move |&v| v * carry - penalty * v * v)
        })
        .collect();

    let slice_len = n_nu * n_vega;
    let mut values = vec![0.0; (grid.n_time + 1) * slice_len];
    if let Some(t) = terminal {
        values[grid.n_time * slice_len..].copy_from_slice(t);
    }
    for step in (0..grid.n_time).rev() {
        let (head, tail) = values.split_at_mut((step + 1) * slice_len);
        let old = &tail[..slice_len];
        let new = &mut head[step * slice_len..];
        new.par_chunks_mut(n_vega).enumerate().try_for_each(|(n, row)| -> Result<()> {
            let a = params.drift_p.drift(nu[n]);
            let diff = 0.5 * nu[n] * xi2 / (dnu * dnu);
            let here = &old[n * n_vega..(n + 1) * n_vega];
            // first-order Neumann ghost nodes: v[-1] = v[0], v[N] = v[N-1]
            let below = &old[n.saturating_sub(1) * n_vega..][..n_vega];
            let above = &old[(n + 1).min(n_nu - 1) * n_vega..][..n_vega];
            let pde_rate = a.abs() / dnu + 2.0 * diff;
            for (m, out) in row.iter_mut().enumerate() {
                let v = here[m];
                let upwind = if a >= 0.0 { above[m] - v } else { v - below[m] };
                let mut rate = a * upwind / dnu + diff * (above[m] - 2.0 * v + below[m]) + source[n * n_vega + m];
                let mut outflow = 0.0;
                for j in &jumps[m] {
                    let z = book.sizes[j.option].z;
                    let shifted = here[j.k] * (1.0 - j.w) + here[j.k + 1] * j.w;
                    let curve = book.curve(j.option, j.side);
                    let (h, delta) = hamiltonian(curve, (v - shifted) / z, trader.delta_floor)?;
                    rate += z * h;
                    outflow += curve.intensity(delta);
                }
                let diag = 1.0 - dt * (pde_rate + outflow);
                if diag < -1e-12 {
                    return Err(Error::Cfl {
                        detail: format!(
                            "explicit step not monotone at t-step {step}, nu {}, vega {}: 1 - dt*(pde + fills) = {diag:.4}",
                            nu[n], vega[m]
                        ),
                    });
                }
                *out = v + dt * rate;
            }
            Ok(())
        })?;
    }
    Ok(ValueFunction::from_parts(
        trader.horizon,
        grid.n_time + 1,
        grid.nu_min,
        grid.nu_max,
        n_nu,
        vega[0],
        vega[n_vega - 1],
        n_vega,
        values,
    ))
}
