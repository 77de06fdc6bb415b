//! Zero-rate Black-Scholes formulas and implied-volatility inversion.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::params::{OptionKind, OptionSpec};
use crate::error::{Error, Result};

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn bs_price(kind: OptionKind, spot: f64, strike: f64, tau: f64, sigma: f64) -> f64 {
    let call = if strike <= 0.0 {
        spot
    } else {
        let sd = sigma * tau.max(0.0).sqrt();
        if sd <= 0.0 {
            (spot - strike).max(0.0)
        } else {
            let d1 = (spot / strike).ln() / sd + 0.5 * sd;
            let d2 = d1 - sd;
            spot * norm_cdf(d1) - strike * norm_cdf(d2)
        }
    };
    match kind {
        OptionKind::Call => call,
        OptionKind::Put => call - spot + strike,
    }
}

/// `dPrice / dSigma`, identical for calls and puts.
pub fn bs_vega(spot: f64, strike: f64, tau: f64, sigma: f64) -> f64 {
    if strike <= 0.0 || tau <= 0.0 || sigma <= 0.0 {
        return 0.0;
    }
    let sd = sigma * tau.sqrt();
    let d1 = (spot / strike).ln() / sd + 0.5 * sd;
    spot * norm_pdf(d1) * tau.sqrt()
}

/// No-arbitrage band `(lower, upper)` for an option price under zero rates.
pub fn price_band(kind: OptionKind, spot: f64, strike: f64) -> (f64, f64) {
    match kind {
        OptionKind::Call => ((spot - strike).max(0.0), spot),
        OptionKind::Put => ((strike - spot).max(0.0), strike),
    }
}

/// Implied volatility of `price` for `option` seen at time 0 with the given spot.
pub fn implied_vol(price: f64, option: &OptionSpec, spot: f64) -> Result<f64> {
    implied_vol_tau(price, option.kind, spot, option.strike, option.maturity)
}

/// Bisection-safeguarded Newton inversion of the Black-Scholes formula.
///
/// The returned volatility reprices `price` to within 1e-8.
pub fn implied_vol_tau(
    price: f64,
    kind: OptionKind,
    spot: f64,
    strike: f64,
    tau: f64,
) -> Result<f64> {
    let (lower, upper) = price_band(kind, spot, strike);
    if !(price > lower && price < upper) || tau <= 0.0 {
        return Err(Error::OutOfBand {
            price,
            lower,
            upper,
        });
    }
    let f = |s: f64| bs_price(kind, spot, strike, tau, s) - price;

    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::ImpliedVolNoConvergence { residual: f(hi) });
        }
    }
    // initial guess from the Brenner-Subrahmanyam approximation, kept in the bracket
    let mut sigma = ((2.0 * PI / tau).sqrt() * price / spot).clamp(lo + 0.01 * (hi - lo), hi);
    for _ in 0..200 {
        let r = f(sigma);
        if r == 0.0 {
            break;
        }
        if r > 0.0 {
            hi = sigma;
        } else {
            lo = sigma;
        }
        let v = bs_vega(spot, strike, tau, sigma);
        let newton = sigma - r / v;
        let next = if v > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - sigma).abs() <= 1e-15 * sigma.max(1e-300) || hi - lo <= 1e-16 {
            sigma = next;
            break;
        }
        sigma = next;
    }
    let residual = f(sigma);
    if residual.abs() > 1e-8 {
        return Err(Error::ImpliedVolNoConvergence { residual });
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_over_vol_levels() {
        let option = OptionSpec::call(10.0, 1.0).unwrap();
        for sigma in [0.05, 0.1, 0.2, 0.5, 1.0] {
            let price = bs_price(OptionKind::Call, 10.0, 10.0, 1.0, sigma);
            let iv = implied_vol(price, &option, 10.0).unwrap();
            assert!((iv - sigma).abs() < 1e-8, "sigma {sigma} -> {iv}");
        }
    }

    #[test]
    fn round_trip_puts_and_wings() {
        for (strike, tau) in [(8.0, 1.0), (12.0, 3.0), (12.0, 1.0), (8.0, 2.0)] {
            for kind in [OptionKind::Call, OptionKind::Put] {
                let price = bs_price(kind, 10.0, strike, tau, 0.2);
                let iv = implied_vol_tau(price, kind, 10.0, strike, tau).unwrap();
                assert!((iv - 0.2).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn near_intrinsic_price_does_not_diverge() {
        let option = OptionSpec::call(8.0, 1.0).unwrap();
        let iv = implied_vol(2.0 + 1e-12, &option, 10.0).unwrap();
        assert!(iv.is_finite() && (0.0..0.05).contains(&iv));
        let atm = OptionSpec::call(10.0, 1.0).unwrap();
        let iv = implied_vol(1e-12, &atm, 10.0).unwrap();
        assert!(iv.is_finite() && iv < 1e-6);
    }

    #[test]
    fn out_of_band_prices_are_rejected() {
        let option = OptionSpec::call(8.0, 1.0).unwrap();
        assert!(matches!(
            implied_vol(1.9, &option, 10.0),
            Err(Error::OutOfBand { .. })
        ));
        assert!(matches!(
            implied_vol(10.0, &option, 10.0),
            Err(Error::OutOfBand { .. })
        ));
    }

    #[test]
    fn parity_and_vega_consistency() {
        let c = bs_price(OptionKind::Call, 10.0, 11.0, 1.5, 0.25);
        let p = bs_price(OptionKind::Put, 10.0, 11.0, 1.5, 0.25);
        assert!((c - p - (10.0 - 11.0)).abs() < 1e-13);
        let h = 1e-5;
        let fd = (bs_price(OptionKind::Call, 10.0, 11.0, 1.5, 0.25 + h)
            - bs_price(OptionKind::Call, 10.0, 11.0, 1.5, 0.25 - h))
            / (2.0 * h);
        assert!((fd - bs_vega(10.0, 11.0, 1.5, 0.25)).abs() < 1e-7);
    }
}
