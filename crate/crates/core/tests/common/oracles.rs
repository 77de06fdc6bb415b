//! Reference solutions built without the library's numerical routines.

use optmm::hjb::{OptionBook, TraderConfig, ValueFunction};
use optmm::model::{mean_stderr, vega, MarketState, McConfig, StochVolParams, VegaMethod};
use optmm::quoting::{IntensityCurve, Side};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

/// `sup_{delta >= floor} Lambda(delta)(delta - p)` by golden-section search.
pub fn golden_hamiltonian(curve: &IntensityCurve, p: f64, floor: f64) -> f64 {
    golden_search(curve, p, floor).0
}

/// Maximum and maximizer of `Lambda(delta)(delta - p)` over `delta >= floor`.
pub fn golden_search(curve: &IntensityCurve, p: f64, floor: f64) -> (f64, f64) {
    let f = |d: f64| curve.intensity(d) * (d - p);
    let mut a = p.max(floor);
    let mut b = a + 100.0 * curve.quote_scale();
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let (mid, edge) = (0.5 * (a + b), p.max(floor));
    if f(mid) >= f(edge) {
        (f(mid), mid)
    } else {
        (f(edge), edge)
    }
}

/// Single-option value at time 0 on inventory levels `-levels..=levels`,
/// integrating the backward ODE system with classical RK4.
///
/// `jump` is the portfolio-vega change of one trade, `z` the trade size,
/// `penalty` the coefficient of `vega^2` in the running cost.
pub fn single_option_ode(
    bid: &IntensityCurve,
    ask: &IntensityCurve,
    z: f64,
    jump: f64,
    penalty: f64,
    floor: f64,
    levels: i64,
    horizon: f64,
    steps: usize,
) -> Vec<f64> {
    let n = (2 * levels + 1) as usize;
    let rhs = |w: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let q = k as i64 - levels;
                let vega = q as f64 * jump;
                let mut r = -penalty * vega * vega;
                // ask: vega falls by one jump; bid: rises by one jump
                if q - 1 >= -levels {
                    r += z * golden_hamiltonian(ask, (w[k] - w[k - 1]) / z, floor);
                }
                if q + 1 <= levels {
                    r += z * golden_hamiltonian(bid, (w[k] - w[k + 1]) / z, floor);
                }
                r
            })
            .collect()
    };
    let h = horizon / steps as f64;
    let mut w = vec![0.0; n];
    for _ in 0..steps {
        let k1 = rhs(&w);
        let w2: Vec<f64> = w.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
        let k2 = rhs(&w2);
        let w3: Vec<f64> = w.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
        let k3 = rhs(&w3);
        let w4: Vec<f64> = w.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
        let k4 = rhs(&w4);
        for i in 0..n {
            w[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    w
}

/// Kolmogorov-Smirnov distance between the sample and `Exp(rate)`.
pub fn ks_exponential(samples: &[f64], rate: f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = 1.0 - (-rate * x).exp();
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Settings of [`nested_value_gap`].
pub struct NestedSettings {
    pub n_outer: usize,
    pub n_steps: usize,
    /// Inner evaluations per outer path, at uniformly drawn times.
    pub per_path: usize,
    pub inner_paths: usize,
    pub inner_steps_per_year: f64,
    pub bump: f64,
    pub seed: u64,
    /// Contracts held at the start.
    pub inventory: Vec<f64>,
}

/// First-order gap `u - v` between the value functions with moving and frozen
/// vegas, from a two-level simulation.
///
/// Outer level: Euler paths of `(S, nu)` under the historical measure with
/// inventories jumping at the fill rates of the frozen-vega optimal quotes
/// (Bernoulli per step, maximizer by golden section). The time integral of
/// the first-order integrand is estimated at uniformly drawn times. Inner
/// level: at each drawn state, the vega deviation of every held option is a
/// Monte Carlo vega minus the Monte Carlo vega at the start state, both on the
/// same random numbers. Returns the mean and its standard error.
#[allow(clippy::too_many_arguments)]
pub fn nested_value_gap(
    vf: &ValueFunction,
    params: &StochVolParams,
    book: &OptionBook,
    trader: &TraderConfig,
    start: &MarketState,
    s: &NestedSettings,
) -> (f64, f64) {
    let horizon = vf.horizon();
    let dt = horizon / s.n_steps as f64;
    let mut rng = rand::rngs::StdRng::seed_from_u64(s.seed);
    let penalty = trader.gamma * params.xi * params.xi / 4.0;
    let mut estimates = Vec::with_capacity(s.n_outer);
    for outer in 0..s.n_outer {
        let draws: Vec<f64> = (0..s.per_path)
            .map(|_| rng.random::<f64>() * horizon)
            .collect();
        let mut path = Vec::with_capacity(s.n_steps);
        let (mut spot, mut nu) = (start.spot, start.variance);
        let mut q = s.inventory.clone();
        for k in 0..s.n_steps {
            let t = k as f64 * dt;
            let nup = nu.max(0.0);
            path.push((spot, nup, q.clone()));
            let vega_pi: f64 = q.iter().zip(&book.vegas).map(|(a, b)| a * b).sum();
            for i in 0..book.len() {
                for side in Side::BOTH {
                    let z = book.sizes[i].z;
                    let after = vega_pi - side.psi() * z * book.vegas[i];
                    let p = (vf.value_at(t, nup, vega_pi) - vf.value_at(t, nup, after)) / z;
                    let curve = book.curve(i, side);
                    let (_, delta) = golden_search(curve, p, trader.delta_floor);
                    if rng.random::<f64>() < 1.0 - (-curve.intensity(delta) * dt).exp() {
                        q[i] -= side.psi() * z;
                    }
                }
            }
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let zn = params.rho * z1 + (1.0 - params.rho * params.rho).sqrt() * z2;
            let sd = (nup * dt).sqrt();
            spot *= ((params.mu - 0.5 * nup) * dt + sd * z1).exp();
            nu += params.drift_p.kappa * (params.drift_p.theta - nup) * dt + params.xi * sd * zn;
        }
        let mut total = 0.0;
        for (j, &u) in draws.iter().enumerate() {
            let k = ((u / dt) as usize).min(s.n_steps - 1);
            let (spot, nu, q) = &path[k];
            let vega_pi: f64 = q.iter().zip(&book.vegas).map(|(a, b)| a * b).sum();
            let mut w = 0.0;
            for (i, o) in book.options.iter().enumerate() {
                if q[i] == 0.0 {
                    continue;
                }
                let seed = (s.seed ^ 0x5eed) + (outer * s.per_path + j) as u64;
                let steps =
                    (((o.maturity - start.time) * s.inner_steps_per_year).ceil() as usize).max(1);
                let mc = VegaMethod::MonteCarlo(McConfig::new(s.inner_paths, steps, seed));
                let state = MarketState::new(*spot, *nu, start.time + k as f64 * dt).unwrap();
                let here = vega(o, &state, params, s.bump, mc).unwrap().value;
                let base = vega(o, start, params, s.bump, mc).unwrap().value;
                w += q[i] * (here - base);
            }
            let gap = params.drift_gap(*nu);
            let carry = if gap == 0.0 {
                0.0
            } else {
                gap / (2.0 * nu.max(1e-12).sqrt())
            };
            total += (carry - penalty * vega_pi) * w;
        }
        estimates.push(horizon * total / s.per_path as f64);
    }
    mean_stderr(&estimates)
}
