//! Axisymmetric fields without swirl and the operators acting on them.
//!
//! Quantities carrying `1/r` or `1/r^2` are evaluated off the axis only; on
//! the axis column an even quantity takes the value `(4 a_1 - a_2) / 3` from
//! the four-point ring averages `a_1`, `a_2` at `r = dx` and `r = 2 dx`
//! (quadratic extrapolation in `r`), and an odd quantity is set to zero.

use crate::error::{Error, Result};
use crate::field::{ScalarField, SpectralField, VectorField};
use crate::grid::Grid;
use crate::spectral;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Relative size of a profile allowed outside the ball `r^2 + z^2 < (3L/4)^2`.
pub const MARGIN_TOL: f64 = 1e-6;
/// Relative swirl `max|v.e_theta| / max|v|` tolerated by operators that assume none.
pub const SWIRL_TOL: f64 = 1e-2;
/// Relative defect under the grid's 90-degree rotation and diagonal mirror.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Smooth Gaussian ring, even in `r`:
/// `amp * (exp(-((r - r0)^2 + (z - z0)^2) / w^2) + exp(-((r + r0)^2 + (z - z0)^2) / w^2))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub amp: f64,
    pub r0: f64,
    pub z0: f64,
    pub width: f64,
}

impl Ring {
    pub fn eval(&self, r: f64, z: f64) -> f64 {
        let w2 = self.width * self.width;
        let dz = z - self.z0;
        let a = (r - self.r0).powi(2) + dz * dz;
        let b = (r + self.r0).powi(2) + dz * dz;
        self.amp * ((-a / w2).exp() + (-b / w2).exp())
    }
}

type Eval = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// A function of `(r, z)`.
#[derive(Clone)]
pub struct AxisymProfile {
    f: Arc<Eval>,
    pub label: String,
}

impl std::fmt::Debug for AxisymProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AxisymProfile").field("label", &self.label).finish()
    }
}

impl AxisymProfile {
    pub fn new(label: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), label: label.into() }
    }

    pub fn zero() -> Self {
        Self::new("zero", |_, _| 0.0)
    }

    pub fn eval(&self, r: f64, z: f64) -> f64 {
        (self.f)(r, z)
    }

    /// `exp(-(r^2 + z^2) / w^2)` scaled by `amp`.
    pub fn gaussian(amp: f64, width: f64) -> Self {
        Self::new(format!("gaussian(amp={amp}, width={width})"), move |r, z| {
            amp * (-(r * r + z * z) / (width * width)).exp()
        })
    }

    /// `Delta exp(-a |x|^2) = (4 a^2 s - 6 a) exp(-a s)` with `s = r^2 + z^2`.
    /// Its Newtonian potential is the Gaussian itself, so torus solves carry no far field.
    pub fn gaussian_laplacian(a: f64) -> Self {
        Self::new(format!("laplacian_gaussian(a={a})"), move |r, z| {
            let s = r * r + z * z;
            (4.0 * a * a * s - 6.0 * a) * (-a * s).exp()
        })
    }

    /// `Delta^2 exp(-a |x|^2) = (16 a^4 s^2 - 80 a^3 s + 60 a^2) exp(-a s)`.
    pub fn gaussian_bilaplacian(a: f64) -> Self {
        Self::new(format!("bilaplacian_gaussian(a={a})"), move |r, z| {
            let s = r * r + z * z;
            (16.0 * a.powi(4) * s * s - 80.0 * a.powi(3) * s + 60.0 * a * a) * (-a * s).exp()
        })
    }

    /// `(|x|^2 + a^2)^(-3/4)` times a smooth cutoff equal to 1 on `|x| <= radius - width`
    /// and 0 on `|x| >= radius`. Barely fails to be in `L^2` without the cutoff.
    pub fn critical_tail(a: f64, radius: f64, width: f64) -> Self {
        Self::new(format!("critical_tail(a={a}, radius={radius}, width={width})"), move |r, z| {
            let s = r * r + z * z;
            let t = (s.sqrt() - (radius - width)) / width;
            let cut = if t <= 0.0 {
                1.0
            } else if t >= 1.0 {
                0.0
            } else {
                let g = |x: f64| (-1.0 / x).exp();
                g(1.0 - t) / (g(1.0 - t) + g(t))
            };
            cut * (s + a * a).powf(-0.75)
        })
    }

    pub fn rings(rings: &[Ring]) -> Self {
        let rs = rings.to_vec();
        Self::new(format!("rings({})", rings.len()), move |r, z| rs.iter().map(|g| g.eval(r, z)).sum())
    }

    /// `r * p(r, z)`: turns an even profile into an admissible `omega_theta`.
    pub fn times_r(&self) -> Self {
        let f = self.f.clone();
        Self::new(format!("r*{}", self.label), move |r, z| r * f(r, z))
    }
}

fn cyl(x: [f64; 3]) -> (f64, f64) {
    ((x[0] * x[0] + x[1] * x[1]).sqrt(), x[2])
}

/// Max of `|p|` over grid points outside the ball of radius `3L/4`, relative to the overall max.
pub fn margin_defect(p: &AxisymProfile, g: &Grid) -> f64 {
    let rad2 = (0.75 * g.half_width).powi(2);
    let xs = g.coords();
    let (mut inside, mut outside) = (0.0f64, 0.0f64);
    for &x1 in &xs {
        for &x2 in &xs {
            let r = (x1 * x1 + x2 * x2).sqrt();
            for &z in &xs {
                let v = p.eval(r, z).abs();
                if x1 * x1 + x2 * x2 + z * z >= rad2 {
                    outside = outside.max(v);
                } else {
                    inside = inside.max(v);
                }
            }
        }
    }
    let top = inside.max(outside);
    if top == 0.0 {
        0.0
    } else {
        outside / top
    }
}

pub fn check_margin(p: &AxisymProfile, g: &Grid) -> Result<()> {
    let d = margin_defect(p, g);
    if d > MARGIN_TOL {
        return Err(Error::Precondition(format!(
            "profile {} reaches {d:.3e} of its maximum outside r^2 + z^2 < (3L/4)^2 (L = {})",
            p.label, g.half_width
        )));
    }
    Ok(())
}

/// Samples `p(|x_h|, x_3)`.
pub fn make_axisym_scalar(p: &AxisymProfile, g: Grid) -> Result<ScalarField> {
    check_margin(p, &g)?;
    Ok(ScalarField::from_fn(g, |x| {
        let (r, z) = cyl(x);
        p.eval(r, z)
    }))
}

/// Velocity with vorticity `omega_theta e_theta`: `v = P(-Delta^-1 curl omega)`.
pub fn make_noswirl_velocity(omega_theta: &AxisymProfile, g: Grid) -> Result<VectorField> {
    check_margin(omega_theta, &g)?;
    let scale = (0..=16)
        .map(|i| omega_theta.eval(i as f64 * g.half_width / 16.0, 0.0).abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for j in 0..g.n {
        let z = g.coord(j);
        let a = omega_theta.eval(0.0, z).abs();
        if a > 1e-12 * scale.max(a) && a > 1e-300 {
            return Err(Error::Precondition(format!(
                "omega_theta(0, {z:.4}) = {a:.3e} does not vanish on the axis"
            )));
        }
    }
    let omega = vorticity_from_theta(omega_theta, g);
    velocity_from_vorticity(&omega)
}

/// Cartesian vorticity `omega_theta (-x2, x1, 0) / r`.
pub fn vorticity_from_theta(omega_theta: &AxisymProfile, g: Grid) -> VectorField {
    let w = |x: [f64; 3]| {
        let (r, z) = cyl(x);
        if r == 0.0 {
            0.0
        } else {
            omega_theta.eval(r, z) / r
        }
    };
    VectorField::from_fn(g, |x| {
        let s = w(x);
        [-x[1] * s, x[0] * s, 0.0]
    })
}

/// `v = P(-Delta^-1 curl omega)`.
pub fn velocity_from_vorticity(omega: &VectorField) -> Result<VectorField> {
    let wh = omega.to_spectral()?;
    let c = spectral::curl(&wh);
    let mut v = crate::field::SpectralVector { comps: std::array::from_fn(|i| spectral::inverse_laplacian(&c.comps[i]).scale(-1.0)) };
    v = spectral::leray_project(&v);
    Ok(v.to_physical())
}

/// `max |v . e_theta| / max |v|`.
pub fn swirl_defect(v: &VectorField) -> f64 {
    let g = *v.grid();
    let top = v.max_magnitude();
    if top == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    let (a, b) = (v.comps[0].data(), v.comps[1].data());
    for idx in 0..g.len() {
        let x = g.point(idx);
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r > 0.0 {
            worst = worst.max(((-x[1] * a[idx] + x[0] * b[idx]) / r).abs());
        }
    }
    worst / top
}

pub fn check_no_swirl(v: &VectorField) -> Result<()> {
    let d = swirl_defect(v);
    if d > SWIRL_TOL {
        return Err(Error::Precondition(format!("swirl {d:.3e} of max|v| exceeds {SWIRL_TOL:.0e}")));
    }
    Ok(())
}

/// Index of the point obtained by `(x1, x2) -> (x2, -x1)`.
fn rot_index(g: &Grid, idx: usize) -> usize {
    let n = g.n;
    let [i, j, k] = g.unflatten(idx);
    g.flat(j, (n - i) % n, k)
}

fn mirror_index(g: &Grid, idx: usize) -> usize {
    let [i, j, k] = g.unflatten(idx);
    g.flat(j, i, k)
}

/// Defect of a scalar under the 90-degree rotation and the `x1 <-> x2` mirror, relative to `max|u|`.
pub fn symmetry_defect_scalar(u: &ScalarField) -> f64 {
    let g = *u.grid();
    let top = u.max_abs();
    if top == 0.0 {
        return 0.0;
    }
    let d = u.data();
    let mut worst = 0.0f64;
    for idx in 0..g.len() {
        worst = worst.max((d[rot_index(&g, idx)] - d[idx]).abs());
        worst = worst.max((d[mirror_index(&g, idx)] - d[idx]).abs());
    }
    worst / top
}

/// Vector version: `(Q v)(x) = Q v(Q^-1 x)` for the rotation and the mirror.
pub fn symmetry_defect_vector(v: &VectorField) -> f64 {
    let g = *v.grid();
    let top = v.max_magnitude();
    if top == 0.0 {
        return 0.0;
    }
    let [a, b, c] = [v.comps[0].data(), v.comps[1].data(), v.comps[2].data()];
    let mut worst = 0.0f64;
    for idx in 0..g.len() {
        // u'(x) = Q u(Q^-1 x) with Q(a, b) = (-b, a) and Q^-1 x = (x2, -x1): source index is rot_index
        let s = rot_index(&g, idx);
        worst = worst.max((-b[s] - a[idx]).abs()).max((a[s] - b[idx]).abs()).max((c[s] - c[idx]).abs());
        let m = mirror_index(&g, idx);
        worst = worst.max((b[m] - a[idx]).abs()).max((a[m] - b[idx]).abs()).max((c[m] - c[idx]).abs());
    }
    worst / top
}

pub fn check_axisymmetric(u: &ScalarField) -> Result<()> {
    let d = symmetry_defect_scalar(u);
    if d > SYMMETRY_TOL {
        return Err(Error::Precondition(format!("rotational symmetry defect {d:.3e} exceeds {SYMMETRY_TOL:.0e}")));
    }
    Ok(())
}

/// Replaces the axis column by the quadratic extrapolation of ring averages.
pub fn fill_axis_even(u: &mut ScalarField) {
    let g = *u.grid();
    let c = g.n / 2;
    let n = g.n;
    let data = u.data_mut();
    for k in 0..n {
        let ring = |d: usize| {
            (data[g.flat(c + d, c, k)] + data[g.flat(c - d, c, k)] + data[g.flat(c, c + d, k)] + data[g.flat(c, c - d, k)])
                / 4.0
        };
        let (a1, a2) = (ring(1), ring(2));
        data[g.flat(c, c, k)] = (4.0 * a1 - a2) / 3.0;
    }
}

fn zero_axis(u: &mut ScalarField) {
    let g = *u.grid();
    let c = g.n / 2;
    for k in 0..g.n {
        u.data_mut()[g.flat(c, c, k)] = 0.0;
    }
}

/// `omega = curl v` in physical space.
pub fn vorticity(v: &VectorField) -> Result<VectorField> {
    Ok(spectral::curl(&v.to_spectral()?).to_physical())
}

/// `(x1 w2 - x2 w1) / r^power` off the axis.
fn angular(w: &VectorField, power: i32) -> ScalarField {
    let g = *w.grid();
    let (a, b) = (w.comps[0].data(), w.comps[1].data());
    let data = (0..g.len())
        .map(|idx| {
            let x = g.point(idx);
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 == 0.0 {
                0.0
            } else {
                let num = x[0] * b[idx] - x[1] * a[idx];
                if power == 1 {
                    num / r2.sqrt()
                } else {
                    num / r2
                }
            }
        })
        .collect();
    ScalarField::from_vec_unchecked(g, data)
}

/// `omega_theta = (x1 omega_2 - x2 omega_1) / r`, zero on the axis.
pub fn theta_vorticity(v: &VectorField) -> Result<ScalarField> {
    check_no_swirl(v)?;
    let mut out = angular(&vorticity(v)?, 1);
    zero_axis(&mut out);
    Ok(out)
}

/// `zeta = omega_theta / r = (x1 omega_2 - x2 omega_1) / r^2`, axis filled by extrapolation.
pub fn zeta(v: &VectorField) -> Result<ScalarField> {
    check_no_swirl(v)?;
    Ok(zeta_unchecked(v))
}

pub(crate) fn zeta_unchecked(v: &VectorField) -> ScalarField {
    let w = spectral::curl(&v.fft()).to_physical();
    let mut z = angular(&w, 2);
    fill_axis_even(&mut z);
    z
}

/// Coefficients `(a11, a22, a12) = (x2^2, x1^2, -2 x1 x2) / r^2`.
pub fn riesz_coefficients(x: [f64; 3]) -> Option<(f64, f64, f64)> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2 == 0.0 {
        None
    } else {
        Some((x[1] * x[1] / r2, x[0] * x[0] / r2, -2.0 * x[0] * x[1] / r2))
    }
}

/// `(d_r / r) Delta^-1 u` by the Riesz form; requires `u` axisymmetric.
pub fn dr_over_r_inv_laplacian(u: &ScalarField) -> Result<ScalarField> {
    check_axisymmetric(u)?;
    Ok(dr_over_r_riesz(&u.to_spectral()?))
}

pub(crate) fn dr_over_r_riesz(uh: &SpectralField) -> ScalarField {
    let r11 = spectral::riesz(uh, 0, 0).expect("axis").to_physical();
    let r22 = spectral::riesz(uh, 1, 1).expect("axis").to_physical();
    let r12 = spectral::riesz(uh, 0, 1).expect("axis").to_physical();
    let g = *uh.grid();
    let (d11, d22, d12) = (r11.data(), r22.data(), r12.data());
    let data = (0..g.len())
        .map(|idx| match riesz_coefficients(g.point(idx)) {
            Some((a11, a22, a12)) => a11 * d11[idx] + a22 * d22[idx] + a12 * d12[idx],
            None => 0.5 * (d11[idx] + d22[idx]),
        })
        .collect();
    ScalarField::from_vec_unchecked(g, data)
}

/// `(x1 d_1 + x2 d_2) Delta^-1 u / r^2`, the direct evaluator.
pub fn dr_over_r_direct(u: &ScalarField) -> Result<ScalarField> {
    let uh = u.to_spectral()?;
    let f = spectral::inverse_laplacian(&uh);
    let d1 = spectral::derivative(&f, 0).to_physical();
    let d2 = spectral::derivative(&f, 1).to_physical();
    let r11 = spectral::riesz(&uh, 0, 0)?.to_physical();
    let r22 = spectral::riesz(&uh, 1, 1)?.to_physical();
    let g = *u.grid();
    let data = (0..g.len())
        .map(|idx| {
            let x = g.point(idx);
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 == 0.0 {
                0.5 * (r11.data()[idx] + r22.data()[idx])
            } else {
                (x[0] * d1.data()[idx] + x[1] * d2.data()[idx]) / r2
            }
        })
        .collect();
    Ok(ScalarField::from_vec_unchecked(g, data))
}

/// Region over which residuals are measured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Width of the excluded boundary shell of the cube.
    pub shell: f64,
    /// Points with `r < r_min` are excluded.
    pub r_min: f64,
}

impl Region {
    pub fn full() -> Self {
        Self { shell: 0.0, r_min: 0.0 }
    }

    /// Cube minus a boundary shell of width `L/8`.
    pub fn interior(g: &Grid) -> Self {
        Self { shell: g.half_width / 8.0, r_min: 0.0 }
    }

    pub fn contains(&self, g: &Grid, x: [f64; 3]) -> bool {
        let lim = g.half_width - self.shell;
        let inside = self.shell == 0.0 || x.iter().all(|c| c.abs() <= lim);
        inside && (self.r_min == 0.0 || x[0] * x[0] + x[1] * x[1] >= self.r_min * self.r_min * (1.0 - 1e-12))
    }

    /// `int_region u^2`.
    pub fn l2_sq(&self, u: &ScalarField) -> f64 {
        let g = *u.grid();
        crate::reduce::sum_indexed(u.data(), |i, v| if self.contains(&g, g.point(i)) { v * v } else { 0.0 })
            * g.cell_volume()
    }

    pub fn describe(&self) -> String {
        match (self.shell > 0.0, self.r_min > 0.0) {
            (false, false) => "full box".into(),
            (true, false) => format!("cube minus shell {:.4}", self.shell),
            (false, true) => format!("r >= {:.4}", self.r_min),
            (true, true) => format!("cube minus shell {:.4}, r >= {:.4}", self.shell, self.r_min),
        }
    }
}

/// `||a - b|| / max(||a||, ||b||)` over a region; zero when both vanish.
pub fn relative_residual(a: &ScalarField, b: &ScalarField, region: &Region) -> f64 {
    let num = region.l2_sq(&a.sub(b)).sqrt();
    let den = region.l2_sq(a).sqrt().max(region.l2_sq(b).sqrt());
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub identity: String,
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub region: String,
    pub interior: f64,
    pub full: f64,
}

impl ResidualReport {
    fn new(identity: &str, g: &Grid, region: &Region, a: &ScalarField, b: &ScalarField) -> Self {
        Self {
            identity: identity.to_string(),
            n: g.n,
            half_width: g.half_width,
            region: region.describe(),
            interior: relative_residual(a, b, region),
            full: relative_residual(a, b, &Region::full()),
        }
    }
}

fn check_axes(ax: &[usize]) -> Result<()> {
    if ax.iter().any(|&a| a > 2) {
        return Err(Error::InvalidArgument(format!("axis indices {ax:?} must lie in 0..3")));
    }
    Ok(())
}

/// Support margin of a sampled field: max over `|x|_inf >= 3L/4` relative to `max|f|`.
pub fn field_margin_defect(f: &ScalarField) -> f64 {
    let g = *f.grid();
    let top = f.max_abs();
    if top == 0.0 {
        return 0.0;
    }
    let lim = 0.75 * g.half_width;
    let d = f.data();
    let out = (0..g.len())
        .filter(|&i| g.point(i).iter().any(|c| c.abs() >= lim))
        .fold(0.0f64, |m, i| m.max(d[i].abs()));
    out / top
}

fn check_field_margin(f: &ScalarField) -> Result<()> {
    let d = field_margin_defect(f);
    if d > MARGIN_TOL {
        return Err(Error::Precondition(format!("field reaches {d:.3e} of its maximum within L/4 of the boundary")));
    }
    Ok(())
}

/// `L_ij f = -2 R_ij Delta^-1 f`.
pub fn moment_correction(fh: &SpectralField, i: usize, j: usize) -> Result<SpectralField> {
    Ok(spectral::riesz(&spectral::inverse_laplacian(fh), i, j)?.scale(-2.0))
}

/// Residual of `Delta^-1 (x_i d_j f) = x_i d_j Delta^-1 f + L_ij f`.
pub fn check_moment_inv_laplacian(f: &ScalarField, i: usize, j: usize) -> Result<ResidualReport> {
    check_axes(&[i, j])?;
    check_field_margin(f)?;
    let g = *f.grid();
    let fh = f.to_spectral()?;
    let xi_dj_f = spectral::derivative(&fh, j).to_physical().mul_coord(i);
    let lhs = spectral::inverse_laplacian(&xi_dj_f.fft()).to_physical();
    let rhs = spectral::derivative(&spectral::inverse_laplacian(&fh), j)
        .to_physical()
        .mul_coord(i)
        .add(&moment_correction(&fh, i, j)?.to_physical());
    Ok(ResidualReport::new(&format!("moment_inv_laplacian({},{})", i + 1, j + 1), &g, &Region::interior(&g), &lhs, &rhs))
}

/// `L^k_ij f = -2 d_k Delta^-1 R_ij f + delta_ik d_j Delta^-1 f + delta_jk d_i Delta^-1 f`.
pub fn riesz_moment_correction(fh: &SpectralField, i: usize, j: usize, k: usize) -> Result<SpectralField> {
    let inv = spectral::inverse_laplacian(fh);
    let mut out = spectral::derivative(&spectral::riesz(&inv, i, j)?, k).scale(-2.0);
    if i == k {
        out.axpy(1.0, &spectral::derivative(&inv, j));
    }
    if j == k {
        out.axpy(1.0, &spectral::derivative(&inv, i));
    }
    Ok(out)
}

/// Residual of `R_ij (x_k f) = x_k R_ij f + L^k_ij f` on the interior.
pub fn check_riesz_moment(f: &ScalarField, i: usize, j: usize, k: usize) -> Result<ResidualReport> {
    check_axes(&[i, j, k])?;
    check_field_margin(f)?;
    let g = *f.grid();
    let fh = f.to_spectral()?;
    let lhs = spectral::riesz(&f.mul_coord(k).fft(), i, j)?.to_physical();
    let rhs = spectral::riesz(&fh, i, j)?
        .to_physical()
        .mul_coord(k)
        .add(&riesz_moment_correction(&fh, i, j, k)?.to_physical());
    Ok(ResidualReport::new(
        &format!("riesz_moment({},{},{})", i + 1, j + 1, k + 1),
        &g,
        &Region::interior(&g),
        &lhs,
        &rhs,
    ))
}

/// Residuals of the axisymmetric Biot-Savart identities for `v^1`, `v^2` and `-v^3`.
pub fn check_biot_savart_identities(v: &VectorField) -> Result<Vec<ResidualReport>> {
    let z = zeta(v)?;
    let g = *v.grid();
    let zh = z.to_spectral()?;
    let inv = spectral::inverse_laplacian(&zh);
    let inv2 = spectral::inverse_laplacian(&inv);
    let d3 = spectral::derivative(&inv, 2).to_physical();
    let region = Region::interior(&g);
    let mut out = Vec::new();
    for (a, name) in [(0usize, "biot_savart_v1"), (1, "biot_savart_v2")] {
        let rhs = d3
            .mul_coord(a)
            .add(&spectral::derivative(&spectral::derivative(&inv2, a), 2).to_physical().scale(-2.0));
        out.push(ResidualReport::new(name, &g, &region, &v.comps[a], &rhs));
    }
    let x_grad = spectral::derivative(&inv, 0)
        .to_physical()
        .mul_coord(0)
        .add(&spectral::derivative(&inv, 1).to_physical().mul_coord(1));
    let rhs = x_grad.add(&spectral::riesz(&inv, 2, 2)?.to_physical().scale(2.0));
    out.push(ResidualReport::new("biot_savart_v3", &g, &region, &v.comps[2].scale(-1.0), &rhs));
    Ok(out)
}

/// `v^r / r = (x1 v1 + x2 v2) / r^2`, axis filled by extrapolation.
pub fn radial_velocity_over_r(v: &VectorField) -> ScalarField {
    let g = *v.grid();
    let (a, b) = (v.comps[0].data(), v.comps[1].data());
    let data = (0..g.len())
        .map(|idx| {
            let x = g.point(idx);
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 == 0.0 {
                0.0
            } else {
                (x[0] * a[idx] + x[1] * b[idx]) / r2
            }
        })
        .collect();
    let mut out = ScalarField::from_vec_unchecked(g, data);
    fill_axis_even(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring_profile() -> AxisymProfile {
        AxisymProfile::rings(&[Ring { amp: 1.0, r0: 1.0, z0: 0.0, width: 0.5 }])
    }

    fn ring_potential_data(g: Grid) -> ScalarField {
        let h = make_axisym_scalar(&ring_profile(), g).unwrap();
        spectral::laplacian(&h.fft()).to_physical()
    }

    #[test]
    fn zero_profile_gives_zero_fields() {
        let g = Grid::new(16, 4.0).unwrap();
        let u = make_axisym_scalar(&AxisymProfile::zero(), g).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        let v = make_noswirl_velocity(&AxisymProfile::zero(), g).unwrap();
        assert_eq!(v.max_magnitude(), 0.0);
        assert_eq!(zeta(&v).unwrap().max_abs(), 0.0);
        for rep in check_biot_savart_identities(&v).unwrap() {
            assert_eq!(rep.interior, 0.0);
        }
        assert_eq!(dr_over_r_inv_laplacian(&u).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn sampled_ring_is_rotation_invariant() {
        let g = Grid::new(32, 4.0).unwrap();
        let p = AxisymProfile::new("ring", |r, z| (-((r - 1.0).powi(2) + z * z) / 0.1).exp());
        let u = make_axisym_scalar(&p, g).unwrap();
        let d = u.data();
        for idx in 0..g.len() {
            assert!((d[rot_index(&g, idx)] - d[idx]).abs() <= 1e-12);
        }
        let c = g.n / 2;
        for i in 0..g.n {
            let x1 = g.coord(i);
            assert!((d[g.flat(i, c, c)] - p.eval(x1.abs(), 0.0)).abs() <= 1e-12);
        }
    }

    #[test]
    fn margin_and_axis_preconditions() {
        let g = Grid::new(16, 2.0).unwrap();
        let wide = AxisymProfile::gaussian(1.0, 2.0);
        assert!(matches!(make_axisym_scalar(&wide, g), Err(Error::Precondition(_))));
        let g = Grid::new(16, 8.0).unwrap();
        let on_axis = AxisymProfile::gaussian(1.0, 1.0);
        assert!(matches!(make_noswirl_velocity(&on_axis, g), Err(Error::Precondition(_))));
        assert!(make_noswirl_velocity(&on_axis.times_r(), g).is_ok());
    }

    #[test]
    fn curl_round_trip_and_zeta_oracle() {
        let g = Grid::new(64, 8.0).unwrap();
        let gp = AxisymProfile::gaussian(1.0, 1.0);
        let wt = gp.times_r();
        let v = make_noswirl_velocity(&wt, g).unwrap();
        let w = vorticity(&v).unwrap();
        let target = vorticity_from_theta(&wt, g);
        let err = w.sub(&target).l2_norm() / target.l2_norm();
        assert!(err <= 1e-6, "{err}");

        let div = spectral::divergence(&v.to_spectral().unwrap()).to_physical().max_abs();
        assert!(div <= 1e-10 * v.max_magnitude() * g.nyquist(), "{div}");

        let z = zeta(&v).unwrap();
        let exact = make_axisym_scalar(&gp, g).unwrap();
        let far = Region { shell: 0.0, r_min: 4.0 * g.spacing() };
        let e = relative_residual(&z, &exact, &far);
        assert!(e <= 1e-6, "{e}");

        let wt_field = theta_vorticity(&v).unwrap();
        let exact = make_axisym_scalar(&wt, g).unwrap();
        assert!(relative_residual(&wt_field, &exact, &far) <= 1e-6);
    }

    #[test]
    fn zeta_stays_bounded_near_axis() {
        let g = Grid::new(64, 8.0).unwrap();
        let v = make_noswirl_velocity(&ring_profile().times_r(), g).unwrap();
        let z = zeta(&v).unwrap();
        let far = Region { shell: 0.0, r_min: 4.0 * g.spacing() };
        let (mut near_max, mut far_max) = (0.0f64, 0.0f64);
        for i in 0..g.len() {
            let a = z.data()[i].abs();
            if far.contains(&g, g.point(i)) {
                far_max = far_max.max(a);
            } else {
                near_max = near_max.max(a);
            }
        }
        assert!(near_max.is_finite() && near_max <= 2.0 * far_max, "{near_max} {far_max}");
    }

    #[test]
    fn centered_velocity_has_no_swirl_and_is_symmetric() {
        let g = Grid::new(64, 8.0).unwrap();
        let v = make_noswirl_velocity(&AxisymProfile::gaussian_bilaplacian(1.0).times_r(), g).unwrap();
        assert!(swirl_defect(&v) <= 1e-10);
        assert!(symmetry_defect_vector(&v) <= 1e-12);
    }

    #[test]
    fn swirling_field_is_rejected() {
        let g = Grid::new(16, 8.0).unwrap();
        let v = VectorField::from_fn(g, |x| {
            let e = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp();
            [-x[1] * e, x[0] * e, 0.0]
        });
        assert!(matches!(zeta(&v), Err(Error::Precondition(_))));
        assert!(matches!(check_biot_savart_identities(&v), Err(Error::Precondition(_))));
    }

    #[test]
    fn non_axisymmetric_input_is_rejected() {
        let g = Grid::new(16, 8.0).unwrap();
        let u = ScalarField::from_fn(g, |x| (-(x[0] - 0.5).powi(2) - x[1] * x[1] - x[2] * x[2]).exp());
        assert!(matches!(dr_over_r_inv_laplacian(&u), Err(Error::Precondition(_))));
    }

    #[test]
    fn riesz_and_direct_forms_agree_and_converge() {
        let region = |g: &Grid| Region { shell: 0.0, r_min: 4.0 * g.spacing() };
        let mut errs = Vec::new();
        for n in [32, 64] {
            let g = Grid::new(n, 4.0).unwrap();
            let u = ring_potential_data(g);
            let a = dr_over_r_inv_laplacian(&u).unwrap();
            let b = dr_over_r_direct(&u).unwrap();
            errs.push(relative_residual(&a, &b, &region(&g)));
        }
        assert!(errs[1] <= errs[0], "{errs:?}");
        assert!(errs[1] <= 1e-3, "{errs:?}");
    }

    #[test]
    fn lemma_identities_hold_for_potential_data() {
        let g = Grid::new(64, 8.0).unwrap();
        let f = make_axisym_scalar(&AxisymProfile::gaussian_laplacian(0.5), g).unwrap();
        let r1 = check_moment_inv_laplacian(&f, 0, 2).unwrap();
        let r2 = check_riesz_moment(&f, 0, 1, 2).unwrap();
        assert!(r1.interior <= 1e-10, "{r1:?}");
        assert!(r2.interior <= 1e-10, "{r2:?}");
        assert!(r1.full <= 1e-10 && r2.full <= 1e-10);
    }

    #[test]
    fn lemma_checks_reject_bad_input() {
        let g = Grid::new(16, 2.0).unwrap();
        let f = ScalarField::constant(g, 1.0);
        assert!(matches!(check_moment_inv_laplacian(&f, 0, 2), Err(Error::Precondition(_))));
        let f = ScalarField::zeros(g);
        assert!(matches!(check_riesz_moment(&f, 0, 1, 3), Err(Error::InvalidArgument(_))));
        let r = check_moment_inv_laplacian(&f, 0, 2).unwrap();
        assert_eq!(r.interior, 0.0);
    }

    #[test]
    fn kronecker_terms_vanish_for_distinct_indices() {
        let g = Grid::new(16, 8.0).unwrap();
        let f = make_axisym_scalar(&AxisymProfile::gaussian_laplacian(1.0), g).unwrap().fft();
        let full = riesz_moment_correction(&f, 0, 1, 2).unwrap().to_physical();
        let reduced = spectral::derivative(&spectral::riesz(&spectral::inverse_laplacian(&f), 0, 1).unwrap(), 2)
            .scale(-2.0)
            .to_physical();
        assert!(full.sub(&reduced).max_abs() <= 1e-12 * reduced.max_abs().max(1e-300));
    }

    #[test]
    fn biot_savart_identities_for_potential_vorticity() {
        let g = Grid::new(64, 8.0).unwrap();
        let v = make_noswirl_velocity(&AxisymProfile::gaussian_bilaplacian(1.0).times_r(), g).unwrap();
        let reps = check_biot_savart_identities(&v).unwrap();
        assert_eq!(reps.len(), 3);
        for r in reps {
            assert!(r.interior <= 1e-2, "{r:?}");
        }
    }

    #[test]
    fn radial_multipliers_commute_with_rotation() {
        let g = Grid::new(16, 4.0).unwrap();
        let u = ScalarField::from_fn(g, |x| (-(x[0] - 0.7).powi(2) - 2.0 * x[1] * x[1] - x[2] * x[2]).exp());
        let ops = |w: &ScalarField| spectral::inverse_laplacian(&w.fft()).to_physical();
        let rotated = ScalarField::from_vec_unchecked(g, (0..g.len()).map(|i| u.data()[rot_index(&g, i)]).collect());
        let a = ops(&rotated);
        let b = ops(&u);
        let top = b.max_abs();
        for i in 0..g.len() {
            assert!((a.data()[i] - b.data()[rot_index(&g, i)]).abs() <= 1e-12 * top);
        }
    }

    proptest! {
        #[test]
        fn riesz_coefficients_are_a_convex_split(x1 in -5.0f64..5.0, x2 in -5.0f64..5.0, x3 in -5.0f64..5.0) {
            prop_assume!(x1 * x1 + x2 * x2 > 1e-12);
            let (a11, a22, a12) = riesz_coefficients([x1, x2, x3]).unwrap();
            prop_assert!((a11 + a22 - 1.0).abs() <= 1e-14);
            prop_assert!(a11.abs() <= 1.0 && a22.abs() <= 1.0 && a12.abs() <= 1.0 + 1e-15);
        }
    }
}
