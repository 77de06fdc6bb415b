use crate::error::Result;
use crate::hjb::{OptionBook, QuoteSource};
use crate::quoting::{optimal_quote, Side};

/// Never shows a quote.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoQuotes;

impl QuoteSource for NoQuotes {
    fn quote(&self, _: usize, _: Side, _: f64, _: f64, _: f64) -> Result<Option<f64>> {
        Ok(None)
    }
}

/// Fixed `[bid, ask]` quotes per option.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantQuotes {
    pub quotes: Vec<[Option<f64>; 2]>,
}

impl ConstantQuotes {
    pub fn uniform(n_options: usize, delta: f64) -> Self {
        Self {
            quotes: vec![[Some(delta); 2]; n_options],
        }
    }

    /// Quotes `delta` on both sides of one option and nothing elsewhere.
    pub fn single(n_options: usize, option: usize, delta: f64) -> Self {
        let mut quotes = vec![[None; 2]; n_options];
        quotes[option] = [Some(delta); 2];
        Self { quotes }
    }
}

impl QuoteSource for ConstantQuotes {
    fn quote(&self, option: usize, side: Side, _: f64, _: f64, _: f64) -> Result<Option<f64>> {
        Ok(self.quotes[option][side.index()])
    }
}

/// Maximizes the expected spread `delta Lambda(delta)` of each request, ignoring inventory.
#[derive(Debug, Clone, Copy)]
pub struct MyopicPolicy<'a> {
    pub book: &'a OptionBook,
    pub delta_floor: f64,
}

impl<'a> MyopicPolicy<'a> {
    pub fn new(book: &'a OptionBook, delta_floor: f64) -> Self {
        Self { book, delta_floor }
    }
}

impl QuoteSource for MyopicPolicy<'_> {
    fn quote(&self, option: usize, side: Side, _: f64, _: f64, _: f64) -> Result<Option<f64>> {
        optimal_quote(self.book.curve(option, side), 0.0, self.delta_floor).map(Some)
    }
}
