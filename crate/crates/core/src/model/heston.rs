//! Semi-analytic Heston pricing under the pricing measure.
//!
//! Calls are priced with the Lewis single-integral representation
//!
//! ```text
//! C = S - sqrt(S K) / pi * int_0^inf Re[e^{i u x} phi(u - i/2)] / (u^2 + 1/4) du,   x = ln(S/K)
//! ```
//!
//! where `phi` is the characteristic function of `ln(S_T / S_t)` in the
//! "little trap" form. Puts follow from parity (rates are zero).
//!
//! Two evaluation paths share the characteristic function:
//! [`heston_closed_form`] integrates adaptively with an absolute price
//! tolerance of 1e-6 (the integrator targets 1e-12); [`CfSlice`] caches the
//! characteristic-function exponents on a fixed Gauss-Legendre rule for one
//! time-to-maturity, so repeated prices at varying spot and variance cost a
//! few hundred flops.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::params::{MarketState, OptionKind, OptionSpec, StochVolParams};
use super::quadrature::{composite_rule, integrate_half_line};
use crate::error::{Error, Result};

/// Absolute price tolerance guaranteed by [`heston_closed_form`].
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-6;

/// `ln(1 + y) / y`, accurate for small `|y|`.
fn log1p_over(y: Complex64) -> Complex64 {
    if y.norm() < 1e-4 {
        Complex64::new(1.0, 0.0) - y * 0.5 + y * y / 3.0 - y * y * y * 0.25
    } else {
        (Complex64::new(1.0, 0.0) + y).ln() / y
    }
}

/// Exponents `(C, D)` with `phi(u - i/2) = exp(C + D * nu)` for time-to-maturity `tau`.
///
/// Written so that `xi -> 0` does not lose precision: `beta - d` is
/// evaluated as `-xi^2 (u^2 + 1/4) / (beta + d)`.
pub fn cf_exponents(
    u: f64,
    tau: f64,
    kappa: f64,
    theta: f64,
    xi: f64,
    rho: f64,
) -> (Complex64, Complex64) {
    // with w = u - i/2: i w + w^2 = u^2 + 1/4
    let s = u * u + 0.25;
    let beta = Complex64::new(kappa - 0.5 * rho * xi, -rho * xi * u);
    let d = (beta * beta + xi * xi * s).sqrt();
    let bpd = beta + d;
    let m = -s / bpd; // (beta - d) / xi^2
    let g = m * xi * xi / bpd;
    let e = (-d * tau).exp();
    let one = Complex64::new(1.0, 0.0);
    let dd = m * (one - e) / (one - g * e);
    // (2 / xi^2) ln(1 + xi^2 r) with r = m (1 - e) / ((beta + d)(1 - g))
    let r = m * (one - e) / (bpd * (one - g));
    let log_term = 2.0 * r * log1p_over(xi * xi * r);
    let cc = kappa * theta * (m * tau - log_term);
    (cc, dd)
}

fn call_from_integral(spot: f64, strike: f64, integral: f64) -> f64 {
    spot - (spot * strike).sqrt() / PI * integral
}

fn finish(kind: OptionKind, spot: f64, strike: f64, call: f64) -> f64 {
    let call = call.max((spot - strike).max(0.0)).min(spot);
    match kind {
        OptionKind::Call => call,
        OptionKind::Put => (call - spot + strike).max(0.0),
    }
}

/// Reference price of a European option under the pricing-measure Heston dynamics.
pub fn heston_closed_form(
    option: &OptionSpec,
    state: &MarketState,
    params: &StochVolParams,
) -> Result<f64> {
    let tau = option.time_to_maturity(state.time);
    price_with_tau(
        option.kind,
        option.strike,
        tau,
        state.spot,
        state.variance,
        params,
    )
}

pub(crate) fn price_with_tau(
    kind: OptionKind,
    strike: f64,
    tau: f64,
    spot: f64,
    variance: f64,
    params: &StochVolParams,
) -> Result<f64> {
    if tau < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "option already expired (tau = {tau})"
        )));
    }
    if tau == 0.0 {
        let intrinsic = match kind {
            OptionKind::Call => (spot - strike).max(0.0),
            OptionKind::Put => (strike - spot).max(0.0),
        };
        return Ok(intrinsic);
    }
    if strike <= 0.0 {
        return Ok(finish(kind, spot, 0.0, spot));
    }
    let q = params.drift_q;
    let x = (spot / strike).ln();
    let scale = (spot * strike).sqrt() / PI;
    let tol = 1e-6 * CLOSED_FORM_TOLERANCE / scale;
    let integral = integrate_half_line(
        |u| {
            let (c, d) = cf_exponents(u, tau, q.kappa, q.theta, params.xi, params.rho);
            let phi = (c + d * variance).exp();
            let rot = Complex64::from_polar(1.0, u * x);
            (rot * phi).re / (u * u + 0.25)
        },
        tol,
        4000,
    )?;
    Ok(finish(
        kind,
        spot,
        strike,
        call_from_integral(spot, strike, integral),
    ))
}

/// Panels of width at most 8 up to the point where `exp(Re C) / (u^2 + 1/4)`
/// falls below 1e-16; beyond it the integrand is negligible for every `nu >= 0`.
fn fast_rule(params: &StochVolParams, tau: f64) -> Vec<(f64, f64)> {
    let q = params.drift_q;
    let mut u_max = 8.0;
    while u_max < 4000.0 {
        let (c, d) = cf_exponents(u_max, tau, q.kappa, q.theta, params.xi, params.rho);
        if d.re <= 0.0 && c.re.exp() / (u_max * u_max + 0.25) < 1e-16 {
            break;
        }
        u_max += 8.0;
    }
    let mut breaks = vec![0.0, 1.0, 3.0];
    let mut b = 8.0;
    while b <= u_max {
        breaks.push(b);
        b += 8.0;
    }
    composite_rule(&breaks, 16)
}

#[derive(Debug, Clone, Copy)]
struct CfNode {
    u: f64,
    /// quadrature weight divided by `u^2 + 1/4`
    weight: f64,
    c: Complex64,
    d: Complex64,
    /// `sin_cos(u ln(1 +- DELTA_BUMP))`, rotations for the bumped spots
    up: (f64, f64),
    down: (f64, f64),
}

/// Relative spot bump of the finite-difference delta.
pub const DELTA_BUMP: f64 = 1e-3;

/// Characteristic-function cache for one time-to-maturity.
#[derive(Debug, Clone)]
pub struct CfSlice {
    tau: f64,
    nodes: Vec<CfNode>,
}

impl CfSlice {
    pub fn new(params: &StochVolParams, tau: f64) -> Self {
        let q = params.drift_q;
        let mut nodes: Vec<CfNode> = fast_rule(params, tau)
            .into_iter()
            .map(|(u, w)| {
                let (c, d) = cf_exponents(u, tau, q.kappa, q.theta, params.xi, params.rho);
                CfNode {
                    u,
                    weight: w / (u * u + 0.25),
                    c,
                    d,
                    up: (u * DELTA_BUMP.ln_1p()).sin_cos(),
                    down: (u * (-DELTA_BUMP).ln_1p()).sin_cos(),
                }
            })
            .collect();
        // |exp(C + D nu)| <= exp(Re C) whenever Re D <= 0, so negligible tails can go
        while let Some(last) = nodes.last() {
            if last.d.re <= 0.0 && last.c.re.exp() * last.weight < 1e-17 {
                nodes.pop();
            } else {
                break;
            }
        }
        Self { tau, nodes }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Evaluates `exp(C + D nu)` once for a variance level; reuse it across strikes.
    pub fn at_variance(&self, variance: f64) -> CfValues<'_> {
        let values = self
            .nodes
            .iter()
            .map(|n| (n.c + n.d * variance).exp() * n.weight)
            .collect();
        CfValues {
            slice: self,
            values,
        }
    }

    pub fn price(&self, kind: OptionKind, spot: f64, strike: f64, variance: f64) -> f64 {
        self.at_variance(variance).price(kind, spot, strike)
    }
}

/// Characteristic-function values for one `(tau, nu)` pair.
#[derive(Debug, Clone)]
pub struct CfValues<'a> {
    slice: &'a CfSlice,
    values: Vec<Complex64>,
}

impl CfValues<'_> {
    fn integral(&self, x: f64) -> f64 {
        self.slice
            .nodes
            .iter()
            .zip(&self.values)
            .map(|(n, v)| {
                let (s, c) = (n.u * x).sin_cos();
                c * v.re - s * v.im
            })
            .sum()
    }

    pub fn price(&self, kind: OptionKind, spot: f64, strike: f64) -> f64 {
        if self.slice.tau <= 0.0 {
            return match kind {
                OptionKind::Call => (spot - strike).max(0.0),
                OptionKind::Put => (strike - spot).max(0.0),
            };
        }
        if strike <= 0.0 {
            return finish(kind, spot, 0.0, spot);
        }
        let integral = self.integral((spot / strike).ln());
        finish(
            kind,
            spot,
            strike,
            call_from_integral(spot, strike, integral),
        )
    }

    /// Price and central finite-difference delta with spot bump `DELTA_BUMP * spot`.
    pub fn price_and_delta(&self, kind: OptionKind, spot: f64, strike: f64) -> (f64, f64) {
        let h = DELTA_BUMP * spot;
        if self.slice.tau <= 0.0 || strike <= 0.0 {
            let up = self.price(kind, spot + h, strike);
            let down = self.price(kind, spot - h, strike);
            return (self.price(kind, spot, strike), (up - down) / (2.0 * h));
        }
        let x = (spot / strike).ln();
        let (mut mid, mut up, mut down) = (0.0, 0.0, 0.0);
        for (n, v) in self.slice.nodes.iter().zip(&self.values) {
            let (s, c) = (n.u * x).sin_cos();
            mid += c * v.re - s * v.im;
            let (su, cu) = n.up;
            up += (c * cu - s * su) * v.re - (s * cu + c * su) * v.im;
            let (sd, cd) = n.down;
            down += (c * cd - s * sd) * v.re - (s * cd + c * sd) * v.im;
        }
        let price = |s: f64, integral: f64| {
            finish(kind, s, strike, call_from_integral(s, strike, integral))
        };
        let p_up = price(spot + h, up);
        let p_down = price(spot - h, down);
        (price(spot, mid), (p_up - p_down) / (2.0 * h))
    }
}
