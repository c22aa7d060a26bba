//! Uniform periodic grid on the 3-torus of period 2π per axis.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Period of each axis.
pub const PERIOD: f64 = std::f64::consts::TAU;
/// Volume of the periodic cell (2π)³.
pub const VOLUME: f64 = PERIOD * PERIOD * PERIOD;

/// How nonlinear products are dealiased.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DealiasMode {
    /// Truncate to |k| ≤ n/3 on the original grid (exact for quadratic products).
    TwoThirds,
    /// Evaluate products on a 3/2-padded grid, then truncate.
    Pad32,
    /// Evaluate products on a 2x-padded grid; exact for quadratic products
    /// of full-band inputs, used for bit-exact identity audits.
    Pad2x,
}

impl Default for DealiasMode {
    fn default() -> Self {
        DealiasMode::Pad32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    #[serde(default)]
    pub dealias: DealiasMode,
}

impl Grid {
    pub fn new(n1: usize, n2: usize, n3: usize, dealias: DealiasMode) -> Result<Grid> {
        for n in [n1, n2, n3] {
            if n < 8 || n % 2 != 0 {
                return Err(Error::BadGrid(n1, n2, n3));
            }
        }
        Ok(Grid { n1, n2, n3, dealias })
    }

    pub fn cubic(n: usize) -> Result<Grid> {
        Grid::new(n, n, n, DealiasMode::default())
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2 * self.n3
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index, y₁-fastest ordering.
    #[inline]
    pub fn idx(&self, i1: usize, i2: usize, i3: usize) -> usize {
        i1 + self.n1 * (i2 + self.n2 * i3)
    }

    /// Physical coordinate of grid point i along an axis with n points.
    #[inline]
    pub fn coord(i: usize, n: usize) -> f64 {
        PERIOD * i as f64 / n as f64
    }

    /// Cell volume (2π)³ / (n1 n2 n3).
    pub fn cell_volume(&self) -> f64 {
        VOLUME / self.len() as f64
    }

    /// Integer wavenumber of spectral index i along an axis with n points,
    /// in [-n/2, n/2 - 1].
    #[inline]
    pub fn wavenumber(i: usize, n: usize) -> i64 {
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Spectral index of an integer wavenumber; caller guarantees |k| ≤ n/2.
    #[inline]
    pub fn spectral_index(k: i64, n: usize) -> usize {
        if k >= 0 {
            k as usize
        } else {
            (k + n as i64) as usize
        }
    }

    /// Wavevector at a flat spectral index.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [i64; 3] {
        let i1 = idx % self.n1;
        let i2 = (idx / self.n1) % self.n2;
        let i3 = idx / (self.n1 * self.n2);
        [
            Grid::wavenumber(i1, self.n1),
            Grid::wavenumber(i2, self.n2),
            Grid::wavenumber(i3, self.n3),
        ]
    }

    /// Grid on which products are evaluated for the given dealias mode.
    pub fn fine_grid(&self, mode: DealiasMode) -> Grid {
        let scale = |n: usize| -> usize {
            match mode {
                DealiasMode::TwoThirds => n,
                DealiasMode::Pad32 => {
                    let m = (3 * n + 1) / 2;
                    m + m % 2
                }
                DealiasMode::Pad2x => 2 * n,
            }
        };
        Grid {
            n1: scale(self.n1),
            n2: scale(self.n2),
            n3: scale(self.n3),
            dealias: mode,
        }
    }
}
