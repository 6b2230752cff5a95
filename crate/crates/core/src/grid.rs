use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Periodic cube `[-L, L)^3` sampled at `n` points per axis.
///
/// Sample `j` along an axis sits at `x_j = -L + j * 2L/n`, so `x = 0` is the
/// index `n/2`. Wavenumbers are `k = (pi/L) m` with `m` in `[-n/2, n/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
}

impl Grid {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n = {n} must be a power of two and at least 8")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("L = {half_width} must be positive and finite")));
        }
        Ok(Self { n, half_width })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(3)
    }

    /// Number of real samples, `n^3`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Length of the last axis in the half-complex spectral layout.
    pub fn nh(&self) -> usize {
        self.n / 2 + 1
    }

    pub fn spectral_len(&self) -> usize {
        self.n * self.n * self.nh()
    }

    pub fn coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.coord(j)).collect()
    }

    /// Position of the flat sample index.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.unflatten(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    pub fn flat(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn unflatten(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    /// Signed integer mode of an FFT index.
    pub fn mode(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Mode of an index along the half-complex last axis (`n/2` is the Nyquist mode `-n/2`).
    pub fn mode_half(&self, j: usize) -> i64 {
        self.mode(j)
    }

    pub fn base_wavenumber(&self) -> f64 {
        PI / self.half_width
    }

    pub fn wavenumber(&self, m: i64) -> f64 {
        self.base_wavenumber() * m as f64
    }

    /// Largest wavenumber modulus along one axis.
    pub fn nyquist(&self) -> f64 {
        self.base_wavenumber() * (self.n / 2) as f64
    }

    pub fn is_nyquist(&self, m: i64) -> bool {
        m == -(self.n as i64) / 2
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "(n = {}, L = {}) vs (n = {}, L = {})",
                self.n, self.half_width, other.n, other.half_width
            )));
        }
        Ok(())
    }
}
