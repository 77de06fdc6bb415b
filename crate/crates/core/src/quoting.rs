//! Fill-intensity curves and the Hamiltonians they induce.
//!
//! Quotes are absolute currency offsets from the model price, per contract.
//! For a curve `Lambda` and a shifted inventory penalty `p`,
//!
//! ```text
//! H(p) = sup_{delta >= delta_floor} Lambda(delta) (delta - p)
//! ```
//!
//! The maximizer solves `(delta - p) h(delta) = 1` where `h = -Lambda'/Lambda`
//! is the hazard of the curve. Both supported families have a nondecreasing
//! hazard, so the root is unique and bracketed by `[p, p + 1/h(p)]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `(delta - p) h(delta) - 1`, i.e. on the first-order
/// condition `Lambda'(delta)(delta - p) + Lambda(delta)` relative to `Lambda(delta)`.
pub const FOC_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Bid, Side::Ask];

    /// +1 for the ask, -1 for the bid.
    #[inline]
    pub fn psi(self) -> f64 {
        match self {
            Side::Bid => -1.0,
            Side::Ask => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Bid => 0,
            Side::Ask => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Bid => "bid",
            Side::Ask => "ask",
        }
    }
}

/// Point-mass trade size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeSizeLaw {
    pub z: f64,
}

impl TradeSizeLaw {
    pub fn new(z: f64) -> Result<Self> {
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "trade size must be positive, got {z}"
            )));
        }
        Ok(Self { z })
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intensity of client requests as a function of the quote, in arrivals per year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum IntensityCurve {
    /// `lambda_max / (1 + exp(alpha + slope * delta))`.
    Logistic {
        lambda_max: f64,
        alpha: f64,
        slope: f64,
    },
    /// `scale * exp(-decay * delta)`.
    Exponential { scale: f64, decay: f64 },
}

impl IntensityCurve {
    /// Logistic curve with slope `beta / vega`.
    pub fn logistic(lambda_max: f64, alpha: f64, beta: f64, vega: f64) -> Result<Self> {
        let curve = IntensityCurve::Logistic {
            lambda_max,
            alpha,
            slope: beta / vega,
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn exponential(scale: f64, decay: f64) -> Result<Self> {
        let curve = IntensityCurve::Exponential { scale, decay };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            IntensityCurve::Logistic {
                lambda_max,
                alpha,
                slope,
            } => {
                lambda_max > 0.0
                    && lambda_max.is_finite()
                    && alpha.is_finite()
                    && slope > 0.0
                    && slope.is_finite()
            }
            IntensityCurve::Exponential { scale, decay } => {
                scale > 0.0 && scale.is_finite() && decay > 0.0 && decay.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid intensity curve {self:?}"
            )))
        }
    }

    #[inline]
    pub fn intensity(&self, delta: f64) -> f64 {
        match *self {
            IntensityCurve::Logistic {
                lambda_max,
                alpha,
                slope,
            } => lambda_max * sigmoid(-(alpha + slope * delta)),
            IntensityCurve::Exponential { scale, decay } => scale * (-decay * delta).exp(),
        }
    }

    /// `Lambda'(delta)`.
    pub fn derivative(&self, delta: f64) -> f64 {
        -self.intensity(delta) * self.hazard(delta)
    }

    /// `Lambda''(delta)`.
    pub fn second_derivative(&self, delta: f64) -> f64 {
        match *self {
            IntensityCurve::Logistic { alpha, slope, .. } => {
                let x = alpha + slope * delta;
                // Lambda'' = Lambda s^2 sigma(x) (2 sigma(x) - 1)
                let s = sigmoid(x);
                self.intensity(delta) * slope * slope * s * (2.0 * s - 1.0)
            }
            IntensityCurve::Exponential { decay, .. } => decay * decay * self.intensity(delta),
        }
    }

    /// `-Lambda'/Lambda`, nondecreasing in `delta`.
    #[inline]
    pub fn hazard(&self, delta: f64) -> f64 {
        match *self {
            IntensityCurve::Logistic { alpha, slope, .. } => slope * sigmoid(alpha + slope * delta),
            IntensityCurve::Exponential { decay, .. } => decay,
        }
    }

    #[inline]
    fn hazard_derivative(&self, delta: f64) -> f64 {
        match *self {
            IntensityCurve::Logistic { alpha, slope, .. } => {
                let s = sigmoid(alpha + slope * delta);
                slope * slope * s * (1.0 - s)
            }
            IntensityCurve::Exponential { .. } => 0.0,
        }
    }

    /// `Lambda^{-1}(lambda)` for `lambda` in the range of the curve.
    pub fn inverse(&self, lambda: f64) -> Result<f64> {
        match *self {
            IntensityCurve::Logistic {
                lambda_max,
                alpha,
                slope,
            } => {
                if !(lambda > 0.0 && lambda < lambda_max) {
                    return Err(Error::InvalidParameter(format!(
                        "intensity {lambda} outside (0, {lambda_max})"
                    )));
                }
                Ok(((lambda_max / lambda - 1.0).ln() - alpha) / slope)
            }
            IntensityCurve::Exponential { scale, decay } => {
                if !(lambda > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "intensity {lambda} must be positive"
                    )));
                }
                Ok((scale / lambda).ln() / decay)
            }
        }
    }

    /// Typical quote width of the curve, `1/slope` or `1/decay`.
    pub fn quote_scale(&self) -> f64 {
        match *self {
            IntensityCurve::Logistic { slope, .. } => 1.0 / slope,
            IntensityCurve::Exponential { decay, .. } => 1.0 / decay,
        }
    }

    /// Upper bound of the intensity over quotes `>= delta_floor`.
    pub fn dominating_rate(&self, delta_floor: f64) -> f64 {
        match *self {
            IntensityCurve::Logistic { lambda_max, .. } => lambda_max,
            IntensityCurve::Exponential { .. } => self.intensity(delta_floor),
        }
    }

    /// `Lambda Lambda'' / Lambda'^2`, which must stay below 2.
    pub fn hypothesis_ratio(&self, delta: f64) -> f64 {
        match *self {
            IntensityCurve::Logistic { alpha, slope, .. } => {
                // (2 sigma(x) - 1) / sigma(x) = 1 - exp(-x)
                let s = sigmoid(alpha + slope * delta);
                (2.0 * s - 1.0) / s
            }
            IntensityCurve::Exponential { .. } => 1.0,
        }
    }

    /// Numerical check of the regularity hypotheses on `[delta_floor, delta_floor + span * quote_scale]`.
    pub fn audit(&self, delta_floor: f64, span: f64) -> Result<()> {
        let width = span * self.quote_scale();
        let n = 2000;
        for k in 0..=n {
            let d = delta_floor + width * k as f64 / n as f64;
            let l = self.intensity(d);
            let ratio = self.hypothesis_ratio(d);
            // far in the tail the intensity may underflow to exactly 0
            let positive = l > 0.0 || (l == 0.0 && k > 0);
            // strict decrease via the derivative: the value itself saturates near lambda_max
            let decreasing = self.derivative(d) < 0.0 || l == 0.0;
            if !positive || !decreasing || !(ratio < 2.0) {
                return Err(Error::InvalidParameter(format!(
                    "intensity hypotheses fail at delta = {d}: Lambda = {l}, ratio = {ratio}"
                )));
            }
        }
        Ok(())
    }
}

/// Maximizer of `Lambda(delta)(delta - p)` over all real `delta`.
fn unconstrained_argmax(curve: &IntensityCurve, p: f64) -> Result<f64> {
    if let IntensityCurve::Exponential { decay, .. } = *curve {
        return Ok(p + 1.0 / decay);
    }
    let residual = |d: f64| (d - p) * curve.hazard(d) - 1.0;
    let mut lo = p;
    let h0 = curve.hazard(p);
    // 1/h(p) overflows when p sits deep in the saturated region
    let mut hi = if h0 * curve.quote_scale() > 1e-12 {
        p + 1.0 / h0
    } else {
        p + curve.quote_scale()
    };
    let mut expand = 0;
    while residual(hi) < 0.0 {
        hi = p + 2.0 * (hi - p);
        expand += 1;
        if expand > 200 {
            return Err(Error::Hamiltonian {
                p,
                residual: residual(hi),
            });
        }
    }
    let mut d = hi;
    let mut last_step = hi - lo;
    for _ in 0..200 {
        let r = residual(d);
        if r.abs() <= FOC_TOLERANCE {
            return Ok(d);
        }
        if r < 0.0 {
            lo = d;
        } else {
            hi = d;
        }
        let slope = curve.hazard(d) + (d - p) * curve.hazard_derivative(d);
        let newton = d - r / slope;
        let next =
            if newton > lo && newton < hi && slope > 0.0 && (newton - d).abs() < 0.5 * last_step {
                newton
            } else {
                0.5 * (lo + hi)
            };
        last_step = (next - d).abs();
        d = next;
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
    }
    let r = residual(d);
    if r.abs() <= FOC_TOLERANCE {
        Ok(d)
    } else {
        Err(Error::Hamiltonian { p, residual: r })
    }
}

/// Value and maximizer of the Hamiltonian, with the maximizer clipped at `delta_floor`.
pub fn hamiltonian(curve: &IntensityCurve, p: f64, delta_floor: f64) -> Result<(f64, f64)> {
    let delta = unconstrained_argmax(curve, p)?.max(delta_floor);
    Ok((curve.intensity(delta) * (delta - p), delta))
}

/// `H'(p) = -Lambda(delta*(p))`.
pub fn hamiltonian_prime(curve: &IntensityCurve, p: f64, delta_floor: f64) -> Result<f64> {
    let delta = unconstrained_argmax(curve, p)?.max(delta_floor);
    Ok(-curve.intensity(delta))
}

pub fn optimal_quote(curve: &IntensityCurve, p: f64, delta_floor: f64) -> Result<f64> {
    Ok(unconstrained_argmax(curve, p)?.max(delta_floor))
}
