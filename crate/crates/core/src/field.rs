use crate::error::{Error, Result};
use crate::fft;
use crate::grid::Grid;
use crate::reduce;
use num_complex::Complex64;
use rayon::prelude::*;

/// Real samples on the grid, row-major `(i1 * n + i2) * n + i3`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    data: Vec<f64>,
}

/// Three components sharing one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub comps: [ScalarField; 3],
}

/// Half-complex Fourier coefficients, layout `(i1 * n + i2) * (n/2 + 1) + i3`.
///
/// Coefficients are normalized so that `u(x) = sum_k c_k exp(i k.x)`; hence
/// `||u||_2^2 = (2L)^3 sum_k |c_k|^2` over the full spectrum and `c_0` is the mean.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

/// Wavenumber data handed to per-mode closures.
#[derive(Clone, Copy, Debug)]
pub struct Mode {
    pub m: [i64; 3],
    /// True wavenumber `(pi/L) m`.
    pub k: [f64; 3],
    /// Wavenumber with Nyquist components set to zero; used for odd symbols.
    pub kd: [f64; 3],
    pub k2: f64,
}

impl ScalarField {
    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidArgument(format!("expected {} samples, got {}", grid.len(), data.len())));
        }
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, data })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, data: vec![c; grid.len()] }
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64 + Sync) -> Self {
        let xs = grid.coords();
        let n = grid.n;
        let mut data = vec![0.0; grid.len()];
        data.par_chunks_mut(n).enumerate().for_each(|(line, out)| {
            let (x1, x2) = (xs[line / n], xs[line % n]);
            for (o, &x3) in out.iter_mut().zip(&xs) {
                *o = f([x1, x2, x3]);
            }
        });
        Self { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        let data = self.data.par_iter().map(|&x| f(x)).collect();
        Self { grid: self.grid, data }
    }

    /// `f(x, u(x))` at every point.
    pub fn map_with_point(&self, f: impl Fn([f64; 3], f64) -> f64 + Sync) -> Self {
        let g = self.grid;
        let xs = g.coords();
        let n = g.n;
        let mut data = self.data.clone();
        data.par_chunks_mut(n).enumerate().for_each(|(line, out)| {
            let (x1, x2) = (xs[line / n], xs[line % n]);
            for (o, &x3) in out.iter_mut().zip(&xs) {
                *o = f([x1, x2, x3], *o);
            }
        });
        Self { grid: g, data }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let data = self.data.par_iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, data }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        assert_eq!(self.grid, x.grid, "grid mismatch");
        self.data.par_iter_mut().zip(&x.data).for_each(|(y, &v)| *y += a * v);
    }

    /// `x_axis * u`, with `axis` in `0..3`.
    pub fn mul_coord(&self, axis: usize) -> Self {
        self.map_with_point(|x, u| x[axis] * u)
    }

    pub fn max_abs(&self) -> f64 {
        reduce::max_abs(&self.data)
    }

    pub fn max(&self) -> f64 {
        self.data.par_iter().cloned().reduce(|| f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.par_iter().cloned().reduce(|| f64::INFINITY, f64::min)
    }

    /// Riemann sum of `u` with cell-volume weights.
    pub fn integral(&self) -> f64 {
        reduce::sum_map(&self.data, |x| x) * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        reduce::sum_map(&self.data, |x| x) / self.grid.len() as f64
    }

    /// `int u w dx` by Riemann sum.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let o = &other.data;
        reduce::sum_indexed(&self.data, |i, x| x * o[i]) * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.lebesgue_norm(2.0)
    }

    /// `(int |u|^p)^(1/p)` by Riemann sum; `p = inf` gives the max of `|u|`.
    pub fn lebesgue_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "lebesgue exponent must be at least 1");
        let peak = self.max_abs();
        if p.is_infinite() || peak == 0.0 {
            return peak;
        }
        let dv = self.grid.cell_volume();
        if p == 2.0 {
            return (reduce::sum_map(&self.data, |x| x * x) * dv).sqrt();
        }
        let inv = 1.0 / peak;
        let s = reduce::sum_map(&self.data, |x| (x.abs() * inv).powf(p));
        peak * (s * dv).powf(1.0 / p)
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|x| !x.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn to_spectral(&self) -> Result<SpectralField> {
        self.check_finite()?;
        Ok(self.fft())
    }

    /// Forward transform without the finiteness scan.
    pub fn fft(&self) -> SpectralField {
        SpectralField { grid: self.grid, coeffs: fft::forward(self.grid.n, &self.data) }
    }
}

impl VectorField {
    pub fn new(comps: [ScalarField; 3]) -> Result<Self> {
        comps[0].grid().check_same(comps[1].grid())?;
        comps[0].grid().check_same(comps[2].grid())?;
        Ok(Self { comps })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { comps: [ScalarField::zeros(grid), ScalarField::zeros(grid), ScalarField::zeros(grid)] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> [f64; 3] + Sync) -> Self {
        Self {
            comps: [
                ScalarField::from_fn(grid, |x| f(x)[0]),
                ScalarField::from_fn(grid, |x| f(x)[1]),
                ScalarField::from_fn(grid, |x| f(x)[2]),
            ],
        }
    }

    pub fn grid(&self) -> &Grid {
        self.comps[0].grid()
    }

    pub fn map_comps(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self { comps: [f(&self.comps[0]), f(&self.comps[1]), f(&self.comps[2])] }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { comps: std::array::from_fn(|i| self.comps[i].add(&other.comps[i])) }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { comps: std::array::from_fn(|i| self.comps[i].sub(&other.comps[i])) }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_comps(|u| u.scale(c))
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let [a, b, c] = &self.comps;
        let data = (0..self.grid().len())
            .into_par_iter()
            .map(|i| (a.data[i] * a.data[i] + b.data[i] * b.data[i] + c.data[i] * c.data[i]).sqrt())
            .collect();
        ScalarField::from_vec_unchecked(*self.grid(), data)
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude().max_abs()
    }

    pub fn l2_norm(&self) -> f64 {
        self.comps.iter().map(|c| c.l2_norm().powi(2)).sum::<f64>().sqrt()
    }

    /// Pointwise `self . w`.
    pub fn dot(&self, w: &VectorField) -> ScalarField {
        let mut out = self.comps[0].mul(&w.comps[0]);
        out.axpy(1.0, &self.comps[1].mul(&w.comps[1]));
        out.axpy(1.0, &self.comps[2].mul(&w.comps[2]));
        out
    }

    pub fn check_finite(&self) -> Result<()> {
        self.comps.iter().try_for_each(|c| c.check_finite())
    }

    pub fn to_spectral(&self) -> Result<SpectralVector> {
        Ok(SpectralVector {
            comps: [self.comps[0].to_spectral()?, self.comps[1].to_spectral()?, self.comps[2].to_spectral()?],
        })
    }

    pub fn fft(&self) -> SpectralVector {
        SpectralVector { comps: [self.comps[0].fft(), self.comps[1].fft(), self.comps[2].fft()] }
    }
}

/// Per-axis wavenumber tables.
struct Tables {
    k: Vec<f64>,
    kd: Vec<f64>,
    m: Vec<i64>,
}

fn tables(g: &Grid) -> Tables {
    let m: Vec<i64> = (0..g.n).map(|j| g.mode(j)).collect();
    let k = m.iter().map(|&m| g.wavenumber(m)).collect();
    let kd = m.iter().map(|&m| if g.is_nyquist(m) { 0.0 } else { g.wavenumber(m) }).collect();
    Tables { k, kd, m }
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, coeffs: vec![Complex64::default(); grid.spectral_len()] }
    }

    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.spectral_len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                grid.spectral_len(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Storage index of mode `m`, if it lies in the stored half (`m3 >= 0` or Nyquist).
    pub fn index_of(&self, m: [i64; 3]) -> Option<usize> {
        let n = self.grid.n as i64;
        let wrap = |v: i64| -> Option<usize> {
            if v < -n / 2 || v >= n / 2 {
                None
            } else {
                Some(v.rem_euclid(n) as usize)
            }
        };
        let (i1, i2, i3) = (wrap(m[0])?, wrap(m[1])?, wrap(m[2])?);
        if i3 > self.grid.n / 2 {
            return None;
        }
        Some((i1 * self.grid.n + i2) * self.grid.nh() + i3)
    }

    /// Coefficient of mode `m` of the real field, using Hermitian symmetry for `m3 < 0`.
    pub fn coeff(&self, m: [i64; 3]) -> Complex64 {
        if let Some(i) = self.index_of(m) {
            return self.coeffs[i];
        }
        let n = self.grid.n as i64;
        let neg = |v: i64| if v == -n / 2 { v } else { -v };
        self.index_of([neg(m[0]), neg(m[1]), neg(m[2])]).map(|i| self.coeffs[i].conj()).unwrap_or_default()
    }

    /// Visits every stored mode in parallel.
    pub fn for_each_mode_mut(&mut self, f: impl Fn(&Mode, &mut Complex64) + Sync) {
        let g = self.grid;
        let t = tables(&g);
        let (n, nh) = (g.n, g.nh());
        self.coeffs.par_chunks_mut(nh).enumerate().for_each(|(line, c)| {
            let (i1, i2) = (line / n, line % n);
            for (i3, v) in c.iter_mut().enumerate() {
                let k = [t.k[i1], t.k[i2], t.k[i3]];
                let mode = Mode {
                    m: [t.m[i1], t.m[i2], t.m[i3]],
                    k,
                    kd: [t.kd[i1], t.kd[i2], t.kd[i3]],
                    k2: k[0] * k[0] + k[1] * k[1] + k[2] * k[2],
                };
                f(&mode, v);
            }
        });
    }

    /// Coefficientwise product with a symbol given as a function of the mode.
    pub fn map_modes(&self, f: impl Fn(&Mode, Complex64) -> Complex64 + Sync) -> Self {
        let mut out = self.clone();
        out.for_each_mode_mut(|m, c| *c = f(m, *c));
        out
    }

    /// Multiplies by `symbol(k)`; rejects symbols that are not finite on the grid.
    pub fn apply_multiplier(&self, symbol: impl Fn([f64; 3]) -> Complex64 + Sync) -> Result<Self> {
        let out = self.map_modes(|m, c| {
            let s = symbol(m.k);
            if s.re.is_finite() && s.im.is_finite() {
                c * s
            } else {
                Complex64::new(f64::NAN, 0.0)
            }
        });
        if let Some(bad) = out.coeffs.iter().position(|c| c.re.is_nan()) {
            let t = tables(&self.grid);
            let (n, nh) = (self.grid.n, self.grid.nh());
            let (line, i3) = (bad / nh, bad % nh);
            return Err(Error::NonFiniteSymbol { k: [t.k[line / n], t.k[line % n], t.k[i3]] });
        }
        Ok(out)
    }

    /// Real multiplier of a mode, applied in place.
    pub fn scale_modes(&mut self, f: impl Fn(&Mode) -> f64 + Sync) {
        self.for_each_mode_mut(|m, c| *c *= f(m));
    }

    pub fn to_physical(&self) -> ScalarField {
        ScalarField::from_vec_unchecked(self.grid, fft::inverse(self.grid.n, &self.coeffs))
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// `sum_k f(mode, c_k)` over the full spectrum, counting each stored mode
    /// with its conjugate partner.
    pub fn spectral_sum(&self, f: impl Fn(&Mode, Complex64) -> f64 + Sync) -> f64 {
        let g = self.grid;
        let t = tables(&g);
        let (n, nh) = (g.n, g.nh());
        let partials: Vec<f64> = self
            .coeffs
            .par_chunks(nh)
            .enumerate()
            .map(|(line, c)| {
                let (i1, i2) = (line / n, line % n);
                reduce::compensated_sum(c.iter().enumerate().map(|(i3, &v)| {
                    let k = [t.k[i1], t.k[i2], t.k[i3]];
                    let mode = Mode {
                        m: [t.m[i1], t.m[i2], t.m[i3]],
                        k,
                        kd: [t.kd[i1], t.kd[i2], t.kd[i3]],
                        k2: k[0] * k[0] + k[1] * k[1] + k[2] * k[2],
                    };
                    let w = if i3 == 0 || i3 == nh - 1 { 1.0 } else { 2.0 };
                    w * f(&mode, v)
                }))
            })
            .collect();
        reduce::compensated_sum(partials)
    }

    /// `sum_k f(mode, a_k, b_k)` over the full spectrum of two fields on one grid.
    pub fn spectral_pair_sum(&self, other: &Self, f: impl Fn(&Mode, Complex64, Complex64) -> f64 + Sync) -> f64 {
        let g = self.grid;
        let t = tables(&g);
        let (n, nh) = (g.n, g.nh());
        let partials: Vec<f64> = self
            .coeffs
            .par_chunks(nh)
            .zip(other.coeffs.par_chunks(nh))
            .enumerate()
            .map(|(line, (a, b))| {
                let (i1, i2) = (line / n, line % n);
                reduce::compensated_sum(a.iter().zip(b).enumerate().map(|(i3, (&x, &y))| {
                    let k = [t.k[i1], t.k[i2], t.k[i3]];
                    let mode = Mode {
                        m: [t.m[i1], t.m[i2], t.m[i3]],
                        k,
                        kd: [t.kd[i1], t.kd[i2], t.kd[i3]],
                        k2: k[0] * k[0] + k[1] * k[1] + k[2] * k[2],
                    };
                    let w = if i3 == 0 || i3 == nh - 1 { 1.0 } else { 2.0 };
                    w * f(&mode, x, y)
                }))
            })
            .collect();
        reduce::compensated_sum(partials)
    }

    /// `||u||_2^2` from coefficients.
    pub fn energy(&self) -> f64 {
        self.grid.volume() * self.spectral_sum(|_, c| c.norm_sqr())
    }

    /// `int u w dx` from coefficients.
    pub fn inner(&self, other: &Self) -> f64 {
        let nh = self.grid.nh();
        let partials: Vec<f64> = self
            .coeffs
            .par_chunks(nh)
            .zip(other.coeffs.par_chunks(nh))
            .map(|(a, b)| {
                reduce::compensated_sum(a.iter().zip(b).enumerate().map(|(i3, (x, y))| {
                    let w = if i3 == 0 || i3 == nh - 1 { 1.0 } else { 2.0 };
                    w * (x.conj() * y).re
                }))
            })
            .collect();
        self.grid.volume() * reduce::compensated_sum(partials)
    }

    /// Max violation of conjugate symmetry within the self-paired planes.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n;
        let nh = self.grid.nh();
        let mut worst = 0.0f64;
        for i3 in [0, nh - 1] {
            for i1 in 0..n {
                for i2 in 0..n {
                    let (j1, j2) = ((n - i1) % n, (n - i2) % n);
                    let a = self.coeffs[(i1 * n + i2) * nh + i3];
                    let b = self.coeffs[(j1 * n + j2) * nh + i3];
                    worst = worst.max((a - b.conj()).norm());
                }
            }
        }
        worst
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn add(&self, o: &Self) -> Self {
        let coeffs = self.coeffs.par_iter().zip(&o.coeffs).map(|(a, b)| a + b).collect();
        Self { grid: self.grid, coeffs }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let coeffs = self.coeffs.par_iter().zip(&o.coeffs).map(|(a, b)| a - b).collect();
        Self { grid: self.grid, coeffs }
    }

    pub fn scale(&self, s: f64) -> Self {
        let coeffs = self.coeffs.par_iter().map(|a| a * s).collect();
        Self { grid: self.grid, coeffs }
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        self.coeffs.par_iter_mut().zip(&x.coeffs).for_each(|(y, v)| *y += a * v);
    }
}

/// Three spectral components on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVector {
    pub comps: [SpectralField; 3],
}

impl SpectralVector {
    pub fn zeros(grid: Grid) -> Self {
        Self { comps: [SpectralField::zeros(grid), SpectralField::zeros(grid), SpectralField::zeros(grid)] }
    }

    pub fn grid(&self) -> &Grid {
        self.comps[0].grid()
    }

    pub fn to_physical(&self) -> VectorField {
        VectorField { comps: std::array::from_fn(|i| self.comps[i].to_physical()) }
    }

    pub fn energy(&self) -> f64 {
        self.comps.iter().map(|c| c.energy()).sum()
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { comps: std::array::from_fn(|i| self.comps[i].add(&o.comps[i])) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { comps: std::array::from_fn(|i| self.comps[i].sub(&o.comps[i])) }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { comps: std::array::from_fn(|i| self.comps[i].scale(s)) }
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for i in 0..3 {
            self.comps[i].axpy(a, &x.comps[i]);
        }
    }
}
