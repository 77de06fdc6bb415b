use std::sync::atomic::{AtomicBool, Ordering};

use super::uniform;

/// Solved value function on a `(t, nu, vega)` grid, stored row-major `[t][nu][vega]`.
#[derive(Debug)]
pub struct ValueFunction {
    pub(crate) horizon: f64,
    pub(crate) n_slices: usize,
    pub(crate) nu_min: f64,
    pub(crate) nu_max: f64,
    pub(crate) n_nu: usize,
    pub(crate) vega_min: f64,
    pub(crate) vega_max: f64,
    pub(crate) n_vega: usize,
    pub(crate) values: Vec<f64>,
    clamp_warned: AtomicBool,
}

impl Clone for ValueFunction {
    fn clone(&self) -> Self {
        Self {
            values: self.values.clone(),
            clamp_warned: AtomicBool::new(self.clamp_warned.load(Ordering::Relaxed)),
            ..*self
        }
    }
}

impl PartialEq for ValueFunction {
    fn eq(&self, other: &Self) -> bool {
        self.horizon == other.horizon
            && self.n_slices == other.n_slices
            && self.nu_min == other.nu_min
            && self.nu_max == other.nu_max
            && self.n_nu == other.n_nu
            && self.vega_min == other.vega_min
            && self.vega_max == other.vega_max
            && self.n_vega == other.n_vega
            && self.values == other.values
    }
}

#[inline]
fn locate(x: f64, lo: f64, hi: f64, n: usize) -> (usize, f64) {
    let mut pos = (x - lo) / (hi - lo) * (n - 1) as f64;
    if (pos - pos.round()).abs() < 1e-9 {
        pos = pos.round();
    }
    let k = (pos.floor().max(0.0) as usize).min(n - 2);
    (k, (pos - k as f64).clamp(0.0, 1.0))
}

impl ValueFunction {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        horizon: f64,
        n_slices: usize,
        nu_min: f64,
        nu_max: f64,
        n_nu: usize,
        vega_min: f64,
        vega_max: f64,
        n_vega: usize,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(values.len(), n_slices * n_nu * n_vega);
        Self {
            horizon,
            n_slices,
            nu_min,
            nu_max,
            n_nu,
            vega_min,
            vega_max,
            n_vega,
            values,
            clamp_warned: AtomicBool::new(false),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    pub fn times(&self) -> Vec<f64> {
        uniform(0.0, self.horizon, self.n_slices)
    }

    pub fn nu_nodes(&self) -> Vec<f64> {
        uniform(self.nu_min, self.nu_max, self.n_nu)
    }

    pub fn vega_nodes(&self) -> Vec<f64> {
        uniform(self.vega_min, self.vega_max, self.n_vega)
    }

    pub fn vega_range(&self) -> (f64, f64) {
        (self.vega_min, self.vega_max)
    }

    pub fn nu_range(&self) -> (f64, f64) {
        (self.nu_min, self.nu_max)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn node(&self, t_index: usize, nu_index: usize, vega_index: usize) -> f64 {
        self.values[(t_index * self.n_nu + nu_index) * self.n_vega + vega_index]
    }

    /// One `[nu][vega]` slice.
    pub fn slice(&self, t_index: usize) -> &[f64] {
        let len = self.n_nu * self.n_vega;
        &self.values[t_index * len..(t_index + 1) * len]
    }

    /// Linear in `t`, bilinear in `(nu, vega)`; arguments outside the grid are clamped.
    pub fn value_at(&self, t: f64, nu: f64, vega: f64) -> f64 {
        if (nu < self.nu_min || nu > self.nu_max)
            && !self.clamp_warned.swap(true, Ordering::Relaxed)
        {
            log::warn!(
                "variance {nu} outside the solver grid [{}, {}]; clamping (reported once)",
                self.nu_min,
                self.nu_max
            );
        }
        let (kt, wt) = locate(t.clamp(0.0, self.horizon), 0.0, self.horizon, self.n_slices);
        let (kn, wn) = locate(
            nu.clamp(self.nu_min, self.nu_max),
            self.nu_min,
            self.nu_max,
            self.n_nu,
        );
        let (kv, wv) = locate(
            vega.clamp(self.vega_min, self.vega_max),
            self.vega_min,
            self.vega_max,
            self.n_vega,
        );
        let plane = |it: usize| {
            let a = self.node(it, kn, kv) * (1.0 - wv) + self.node(it, kn, kv + 1) * wv;
            let b = self.node(it, kn + 1, kv) * (1.0 - wv) + self.node(it, kn + 1, kv + 1) * wv;
            a * (1.0 - wn) + b * wn
        };
        // exact at nodes: skip the second plane when its weight is zero
        let lo = plane(kt);
        if wt == 0.0 {
            lo
        } else {
            lo * (1.0 - wt) + plane(kt + 1) * wt
        }
    }
}
