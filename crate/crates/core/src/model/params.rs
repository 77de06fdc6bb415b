use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine mean-reverting drift `a(t, nu) = kappa * (theta - nu)` of the variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanReversion {
    pub kappa: f64,
    pub theta: f64,
}

impl MeanReversion {
    pub const fn new(kappa: f64, theta: f64) -> Self {
        Self { kappa, theta }
    }

    #[inline]
    pub fn drift(&self, nu: f64) -> f64 {
        self.kappa * (self.theta - nu)
    }
}

/// Which measure a simulation runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Historical measure: spot drift `mu`, variance drift `drift_p`.
    P,
    /// Pricing measure: zero spot drift (zero rates), variance drift `drift_q`.
    Q,
}

/// One-factor stochastic volatility dynamics under both measures.
///
/// Fields are public so that degenerate limits (for instance `xi = 0`) can be
/// built directly for testing; [`StochVolParams::new`] and
/// [`StochVolParams::validate`] enforce the invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StochVolParams {
    /// Spot drift under P (1/year).
    pub mu: f64,
    /// Volatility of variance (1/year).
    pub xi: f64,
    /// Spot/variance correlation.
    pub rho: f64,
    pub drift_p: MeanReversion,
    pub drift_q: MeanReversion,
}

impl StochVolParams {
    pub fn new(
        mu: f64,
        xi: f64,
        rho: f64,
        drift_p: MeanReversion,
        drift_q: MeanReversion,
    ) -> Result<Self> {
        let params = Self {
            mu,
            xi,
            rho,
            drift_p,
            drift_q,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rho must lie strictly inside (-1, 1), got {}",
                self.rho
            )));
        }
        if !(self.xi > 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "xi must be positive and mu finite (xi = {}, mu = {})",
                self.xi, self.mu
            )));
        }
        for (name, d) in [("P", self.drift_p), ("Q", self.drift_q)] {
            if !(d.kappa > 0.0 && d.theta > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "kappa and theta must be positive under {name} (kappa = {}, theta = {})",
                    d.kappa, d.theta
                )));
            }
            let lhs = 2.0 * d.kappa * d.theta;
            let rhs = self.xi * self.xi;
            if lhs <= rhs {
                return Err(Error::FellerViolation {
                    measure: name,
                    lhs,
                    rhs,
                });
            }
        }
        Ok(())
    }

    pub fn drift(&self, measure: Measure) -> MeanReversion {
        match measure {
            Measure::P => self.drift_p,
            Measure::Q => self.drift_q,
        }
    }

    /// `a_P(nu) - a_Q(nu)`; exactly zero when both drift specs coincide.
    #[inline]
    pub fn drift_gap(&self, nu: f64) -> f64 {
        self.drift_p.drift(nu) - self.drift_q.drift(nu)
    }

    /// Copy with `a_P` replaced by `a_Q`.
    pub fn with_equal_drifts(&self) -> Self {
        Self {
            drift_p: self.drift_q,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

/// A European option on the single underlying.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub strike: f64,
    /// Maturity in years from time 0.
    pub maturity: f64,
    pub kind: OptionKind,
}

impl OptionSpec {
    pub fn new(strike: f64, maturity: f64, kind: OptionKind) -> Result<Self> {
        if !(strike >= 0.0) || !(maturity > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "option needs strike >= 0 and maturity > 0 (strike = {strike}, maturity = {maturity})"
            )));
        }
        Ok(Self {
            strike,
            maturity,
            kind,
        })
    }

    pub fn call(strike: f64, maturity: f64) -> Result<Self> {
        Self::new(strike, maturity, OptionKind::Call)
    }

    pub fn put(strike: f64, maturity: f64) -> Result<Self> {
        Self::new(strike, maturity, OptionKind::Put)
    }

    #[inline]
    pub fn payoff(&self, spot: f64) -> f64 {
        match self.kind {
            OptionKind::Call => (spot - self.strike).max(0.0),
            OptionKind::Put => (self.strike - spot).max(0.0),
        }
    }

    pub fn time_to_maturity(&self, t: f64) -> f64 {
        self.maturity - t
    }
}

/// Spot, instantaneous variance, and calendar time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub spot: f64,
    pub variance: f64,
    pub time: f64,
}

impl MarketState {
    pub fn new(spot: f64, variance: f64, time: f64) -> Result<Self> {
        if !(spot > 0.0) || !(variance > 0.0) || !time.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "market state needs spot > 0 and variance > 0 (spot = {spot}, variance = {variance})"
            )));
        }
        Ok(Self {
            spot,
            variance,
            time,
        })
    }
}
