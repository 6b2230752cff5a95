//! Fourier-multiplier operators on the periodic grid.
//!
//! Odd symbols (first derivatives, curl, divergence, Leray) use the wavenumber
//! with Nyquist components zeroed so that real fields stay real. Even symbols
//! (Laplacian and its inverse, diagonal Riesz transforms) use the true `k`.

use crate::error::{Error, Result};
use crate::field::{Mode, ScalarField, SpectralField, SpectralVector, VectorField};
use crate::grid::Grid;
use num_complex::Complex64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn check_axis(a: usize) -> Result<()> {
    if a < 3 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("axis index {a} outside 0..3")))
    }
}

/// `d/dx_axis`.
pub fn derivative(u: &SpectralField, axis: usize) -> SpectralField {
    u.map_modes(|m, c| I * m.kd[axis] * c)
}

pub fn gradient_spectral(u: &SpectralField) -> SpectralVector {
    SpectralVector { comps: std::array::from_fn(|a| derivative(u, a)) }
}

pub fn gradient(u: &ScalarField) -> VectorField {
    gradient_spectral(&u.fft()).to_physical()
}

pub fn divergence(v: &SpectralVector) -> SpectralField {
    let mut out = derivative(&v.comps[0], 0);
    out.axpy(1.0, &derivative(&v.comps[1], 1));
    out.axpy(1.0, &derivative(&v.comps[2], 2));
    out
}

pub fn curl(v: &SpectralVector) -> SpectralVector {
    let d = |c: usize, a: usize| derivative(&v.comps[c], a);
    SpectralVector { comps: [d(2, 1).sub(&d(1, 2)), d(0, 2).sub(&d(2, 0)), d(1, 0).sub(&d(0, 1))] }
}

pub fn laplacian(u: &SpectralField) -> SpectralField {
    u.map_modes(|m, c| -m.k2 * c)
}

/// Symbol `-1/|k|^2`, zero mode sent to zero.
pub fn inverse_laplacian(u: &SpectralField) -> SpectralField {
    u.map_modes(|m, c| if m.k2 == 0.0 { Complex64::default() } else { -c / m.k2 })
}

fn riesz_symbol(m: &Mode, i: usize, j: usize) -> f64 {
    if m.k2 == 0.0 {
        0.0
    } else if i == j {
        m.k[i] * m.k[i] / m.k2
    } else {
        m.kd[i] * m.kd[j] / m.k2
    }
}

/// `R_ij = d_i d_j Delta^-1`, symbol `k_i k_j / |k|^2`, axes in `0..3`.
pub fn riesz(u: &SpectralField, i: usize, j: usize) -> Result<SpectralField> {
    check_axis(i)?;
    check_axis(j)?;
    Ok(u.map_modes(|m, c| riesz_symbol(m, i, j) * c))
}

/// Projection onto divergence-free fields; the mean is kept.
pub fn leray_project(v: &SpectralVector) -> SpectralVector {
    let mut out = v.clone();
    let [a, b, c] = &mut out.comps;
    let g = *a.grid();
    let nh = g.nh();
    let n = g.n;
    let k1: Vec<f64> = (0..n).map(|j| kd_axis(&g, j)).collect();
    let (a, b, c) = (a.coeffs_mut(), b.coeffs_mut(), c.coeffs_mut());
    use rayon::prelude::*;
    a.par_chunks_mut(nh)
        .zip(b.par_chunks_mut(nh))
        .zip(c.par_chunks_mut(nh))
        .enumerate()
        .for_each(|(line, ((a, b), c))| {
            let (x, y) = (k1[line / n], k1[line % n]);
            for i3 in 0..nh {
                let z = k1[i3];
                let kk = x * x + y * y + z * z;
                if kk == 0.0 {
                    continue;
                }
                let d = (x * a[i3] + y * b[i3] + z * c[i3]) / kk;
                a[i3] -= x * d;
                b[i3] -= y * d;
                c[i3] -= z * d;
            }
        });
    out
}

fn kd_axis(g: &Grid, j: usize) -> f64 {
    let m = g.mode(j);
    if g.is_nyquist(m) {
        0.0
    } else {
        g.wavenumber(m)
    }
}

pub fn leray_project_field(v: &VectorField) -> Result<VectorField> {
    Ok(leray_project(&v.to_spectral()?).to_physical())
}

/// Whether mode `m` survives the 2/3 truncation.
pub fn in_dealias_band(g: &Grid, m: &[i64; 3]) -> bool {
    let n = g.n as i64;
    m.iter().all(|&mi| 3 * mi.abs() < n)
}

pub fn dealias(u: &SpectralField) -> SpectralField {
    let g = *u.grid();
    let mut out = u.clone();
    dealias_in_place(&mut out, &g);
    out
}

pub(crate) fn dealias_in_place(u: &mut SpectralField, g: &Grid) {
    let g = *g;
    u.for_each_mode_mut(|m, c| {
        if !in_dealias_band(&g, &m.m) {
            *c = Complex64::default();
        }
    });
}

/// Product of two fields formed from their 2/3-truncated spectra and truncated again.
pub fn dealiased_product(a: &SpectralField, b: &SpectralField) -> SpectralField {
    let pa = dealias(a).to_physical();
    let pb = dealias(b).to_physical();
    dealias(&pa.mul(&pb).fft())
}

/// Physical-space version of [`dealiased_product`].
pub fn dealiased_mul(a: &ScalarField, b: &ScalarField) -> ScalarField {
    dealiased_product(&a.fft(), &b.fft()).to_physical()
}

pub fn lebesgue_norm(u: &ScalarField, p: f64) -> f64 {
    u.lebesgue_norm(p)
}

/// Periodic convolution `int u(y) w(x - y) dy`, so a unit-mass kernel preserves means.
pub fn convolve(u: &ScalarField, w: &ScalarField) -> Result<ScalarField> {
    u.grid().check_same(w.grid())?;
    let vol = u.grid().volume();
    let uh = u.to_spectral()?;
    let wh = w.to_spectral()?;
    let mut out = uh;
    out.coeffs_mut().iter_mut().zip(wh.coeffs()).for_each(|(a, b)| *a *= b * vol);
    Ok(out.to_physical())
}

/// Discrete unit mass at the origin.
pub fn discrete_delta(g: Grid) -> ScalarField {
    let mut d = ScalarField::zeros(g);
    let c = g.n / 2;
    d.data_mut()[g.flat(c, c, c)] = 1.0 / g.cell_volume();
    d
}

/// `(sum_k (1 + |k|^2)^s |c_k|^2 (2L)^3)^(1/2)`.
pub fn sobolev_norm(u: &SpectralField, s: f64) -> f64 {
    (u.grid().volume() * u.spectral_sum(|m, c| (1.0 + m.k2).powf(s) * c.norm_sqr())).sqrt()
}

/// `||grad u||_2^2` from the spectrum.
pub fn gradient_energy(u: &SpectralField) -> f64 {
    u.grid().volume() * u.spectral_sum(|m, c| (m.kd[0].powi(2) + m.kd[1].powi(2) + m.kd[2].powi(2)) * c.norm_sqr())
}
