//! Value-function artifact: a 16-byte magic, a version byte, grid dimensions
//! `(n_slices, n_nu, n_vega)` as little-endian u64, the axis bounds
//! `(horizon, nu_min, nu_max, vega_min, vega_max)` as little-endian f64, then
//! the values row-major over `[t][nu][vega]`.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::value::ValueFunction;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 16] = b"OPTMM-VALUEFN\0\0\0";
pub const VERSION: u8 = 1;
const HEADER: usize = 16 + 1 + 3 * 8 + 5 * 8;

impl ValueFunction {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        for d in [self.n_slices, self.n_nu, self.n_vega] {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for x in [
            self.horizon,
            self.nu_min,
            self.nu_max,
            self.vega_min,
            self.vega_max,
        ] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for x in &self.values {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER || &bytes[..16] != MAGIC {
            return Err(Error::Artifact("missing magic header".into()));
        }
        if bytes[16] != VERSION {
            return Err(Error::Artifact(format!(
                "unsupported version {}",
                bytes[16]
            )));
        }
        let word =
            |k: usize| -> [u8; 8] { bytes[17 + 8 * k..25 + 8 * k].try_into().expect("8 bytes") };
        let dims: Vec<usize> = (0..3)
            .map(|k| u64::from_le_bytes(word(k)) as usize)
            .collect();
        let axes: Vec<f64> = (3..8).map(|k| f64::from_le_bytes(word(k))).collect();
        let (n_slices, n_nu, n_vega) = (dims[0], dims[1], dims[2]);
        if n_slices < 1 || n_nu < 2 || n_vega < 2 {
            return Err(Error::Artifact(format!("degenerate dimensions {dims:?}")));
        }
        let count = n_slices
            .checked_mul(n_nu)
            .and_then(|x| x.checked_mul(n_vega))
            .ok_or_else(|| Error::Artifact("dimension overflow".into()))?;
        if bytes.len() != HEADER + 8 * count {
            return Err(Error::Artifact(format!(
                "expected {} bytes of values, found {}",
                8 * count,
                bytes.len() - HEADER
            )));
        }
        let values = bytes[HEADER..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self::from_parts(
            axes[0], n_slices, axes[1], axes[2], n_nu, axes[3], axes[4], n_vega, values,
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Writes `t_index,nu_index,vega_index,value` rows, optionally for one time slice only.
    pub fn write_csv<W: Write>(&self, mut out: W, only_slice: Option<usize>) -> Result<()> {
        writeln!(out, "t_index,nu_index,vega_index,value")?;
        let slices: Vec<usize> = match only_slice {
            Some(s) => vec![s],
            None => (0..self.n_slices).collect(),
        };
        for t in slices {
            for n in 0..self.n_nu {
                for m in 0..self.n_vega {
                    writeln!(out, "{t},{n},{m},{:e}", self.node(t, n, m))?;
                }
            }
        }
        Ok(())
    }
}
