use super::value::ValueFunction;
use super::{OptionBook, TraderConfig};
use crate::error::Result;
use crate::quoting::{optimal_quote, Side};

/// Anything that answers a request for option `i` on `side` in state `(t, nu, vega)`.
///
/// `None` means no quote is shown.
pub trait QuoteSource: Sync {
    fn quote(&self, option: usize, side: Side, t: f64, nu: f64, vega: f64) -> Result<Option<f64>>;
}

/// Optimal quotes read off a solved value function.
#[derive(Debug, Clone, Copy)]
pub struct QuotePolicy<'a> {
    pub vf: &'a ValueFunction,
    pub book: &'a OptionBook,
    pub trader: &'a TraderConfig,
}

impl<'a> QuotePolicy<'a> {
    pub fn new(vf: &'a ValueFunction, book: &'a OptionBook, trader: &'a TraderConfig) -> Self {
        Self { vf, book, trader }
    }

    /// `(v(t, nu, V) - v(t, nu, V - psi z V^i)) / z`.
    pub fn penalty(&self, option: usize, side: Side, t: f64, nu: f64, vega: f64) -> f64 {
        let z = self.book.sizes[option].z;
        let target = vega - side.psi() * self.book.jump(option);
        (self.vf.value_at(t, nu, vega) - self.vf.value_at(t, nu, target)) / z
    }
}

impl QuoteSource for QuotePolicy<'_> {
    fn quote(&self, option: usize, side: Side, t: f64, nu: f64, vega: f64) -> Result<Option<f64>> {
        let target = vega - side.psi() * self.book.jump(option);
        if !self.trader.admissible(target) {
            return Ok(None);
        }
        let p = self.penalty(option, side, t, nu, vega);
        optimal_quote(self.book.curve(option, side), p, self.trader.delta_floor).map(Some)
    }
}
