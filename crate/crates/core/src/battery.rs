//! The identity battery: partition, reconstruction, cylindrical, moment,
//! Biot-Savart and Lorentz identities evaluated on one grid.
//!
//! Test data is defined at a reference box half-width of 8 and scaled with `L`;
//! the identities are scale covariant, so residuals depend on `n` only. The
//! Biot-Savart identities and the moment-commutator slope are limited by
//! resolution rather than by the identity and are evaluated on the refined
//! grid `(2n, 2L)`; their reports carry that grid.

use crate::axisym::{
    check_biot_savart_identities, check_moment_inv_laplacian, check_riesz_moment, dr_over_r_direct, dr_over_r_inv_laplacian,
    make_axisym_scalar, make_noswirl_velocity, relative_residual, AxisymProfile, Region, Ring,
};
use crate::dyadic::{chi, phi, square_function, DyadicPartition};
use crate::error::{Error, Result};
use crate::field::{ScalarField, SpectralField};
use crate::grid::Grid;
use crate::lorentz::lorentz_norm;
use crate::reduce::linear_fit;
use crate::{commutator, spectral};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub identity: String,
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub region: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl IdentityCheck {
    fn new(identity: &str, g: &Grid, region: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            identity: identity.into(),
            n: g.n,
            half_width: g.half_width,
            region: region.into(),
            residual,
            tolerance,
            passed: residual.is_finite() && residual <= tolerance,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionDefects {
    /// `max |chi + sum_q phi_q - 1|`.
    pub sum_defect: f64,
    /// Range of `chi^2 + sum_q phi_q^2`.
    pub square_min: f64,
    pub square_max: f64,
}

/// Partition sums at every wavenumber of the grid lattice, with the untruncated ladder.
pub fn partition_defects(g: &Grid) -> PartitionDefects {
    let n = g.n;
    let r_max = 3f64.sqrt() * g.nyquist();
    let top = r_max.log2().ceil() as i32 + 2;
    let rows: Vec<PartitionDefects> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = PartitionDefects { sum_defect: 0.0, square_min: f64::INFINITY, square_max: 0.0 };
            for j in 0..n {
                for k in 0..n {
                    let m = [g.mode(i), g.mode(j), g.mode(k)];
                    let r = m.iter().map(|&x| g.wavenumber(x).powi(2)).sum::<f64>().sqrt();
                    let mut s = chi(r);
                    let mut s2 = s * s;
                    for q in 0..=top {
                        let p = phi(r * 0.5f64.powi(q));
                        s += p;
                        s2 += p * p;
                    }
                    acc.sum_defect = acc.sum_defect.max((s - 1.0).abs());
                    acc.square_min = acc.square_min.min(s2);
                    acc.square_max = acc.square_max.max(s2);
                }
            }
            acc
        })
        .collect();
    rows.into_iter().fold(
        PartitionDefects { sum_defect: 0.0, square_min: f64::INFINITY, square_max: 0.0 },
        |a, b| PartitionDefects {
            sum_defect: a.sum_defect.max(b.sum_defect),
            square_min: a.square_min.min(b.square_min),
            square_max: a.square_max.max(b.square_max),
        },
    )
}

pub fn random_field(g: Grid, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::from_vec_unchecked(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    /// Max relative L2 residual of `sum_q Delta_q u - u`.
    pub residual: f64,
    /// Range of `||(sum_q |Delta_q u|^2)^(1/2)||_2 / ||u||_2`.
    pub ratio_min: f64,
    pub ratio_max: f64,
}

pub fn reconstruction(part: &DyadicPartition, count: usize, seed: u64) -> Result<Reconstruction> {
    let g = *part.grid();
    let mut out = Reconstruction { residual: 0.0, ratio_min: f64::INFINITY, ratio_max: 0.0 };
    for i in 0..count {
        let u = random_field(g, seed.wrapping_add(i as u64));
        let uh = u.to_spectral()?;
        let mut sum = ScalarField::zeros(g);
        for b in part.decompose(&uh) {
            sum.axpy(1.0, &b);
        }
        let norm = u.l2_norm();
        out.residual = out.residual.max(sum.sub(&u).l2_norm() / norm);
        let ratio = square_function(part, &u)?.l2_norm() / norm;
        out.ratio_min = out.ratio_min.min(ratio);
        out.ratio_max = out.ratio_max.max(ratio);
    }
    Ok(out)
}

/// Ring with `r0 = 1`, width `0.5` at reference scale, passed through the Laplacian.
pub fn ring_potential(g: Grid) -> Result<ScalarField> {
    let s = g.half_width / 8.0;
    let h = make_axisym_scalar(&AxisymProfile::rings(&[Ring { amp: 1.0, r0: s, z0: 0.0, width: 0.5 * s }]), g)?;
    Ok(spectral::laplacian(&h.fft()).to_physical())
}

/// Relative distance between the Riesz and direct forms of `(d_r / r) Delta^-1 u` on `r >= 4 dx`.
pub fn cylindrical_form_residual(u: &ScalarField) -> Result<(f64, Region)> {
    let g = *u.grid();
    let region = Region { shell: 0.0, r_min: 4.0 * g.spacing() };
    let a = dr_over_r_inv_laplacian(u)?;
    let b = dr_over_r_direct(u)?;
    Ok((relative_residual(&a, &b, &region), region))
}

/// `rho_hat = |k|^{-3/2}` on the dealias band, zero mean.
pub fn scale_invariant_field(g: Grid) -> SpectralField {
    let mut u = SpectralField::zeros(g);
    u.for_each_mode_mut(|m, c| {
        if m.k2 > 0.0 && spectral::in_dealias_band(&g, &m.m) {
            *c = Complex64::new(m.k2.powf(-0.75), 0.0);
        }
    });
    u
}

/// Fitted slope of `log2 ||[Delta_q, x_1] rho||_2` against `q` over `blocks`.
pub fn moment_commutator_slope(part: &DyadicPartition, blocks: &[i32]) -> Result<f64> {
    if blocks.len() < 2 {
        return Err(Error::InvalidArgument("slope needs at least two blocks".into()));
    }
    if let Some(q) = blocks.iter().find(|&&q| q < 0 || q >= part.q_max()) {
        return Err(Error::InvalidArgument(format!("block {q} outside [0, {})", part.q_max())));
    }
    let sweep = commutator::moment_commutator_sweep(part, &scale_invariant_field(*part.grid()), 0, blocks);
    let xs: Vec<f64> = sweep.iter().map(|s| s.0 as f64).collect();
    let ys: Vec<f64> = sweep.iter().map(|s| s.1.log2()).collect();
    Ok(linear_fit(&xs, &ys).1)
}

/// Max over `p in {2, 3, 6}` of `| ||u||_{L^{p,p}} / ||u||_{L^p} - 1 |`.
pub fn lorentz_diagonal_defect(u: &ScalarField) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in [2.0, 3.0, 6.0] {
        let a = lorentz_norm(u, p, p)?;
        let b = u.lebesgue_norm(p);
        worst = worst.max((a / b - 1.0).abs());
    }
    Ok(worst)
}

/// Runs every identity on `g`; tolerances are multiplied by `tolerance_scale`.
pub fn identity_battery(g: Grid, tolerance_scale: f64) -> Result<Vec<IdentityCheck>> {
    if !(tolerance_scale > 0.0 && tolerance_scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance scale {tolerance_scale} must be positive")));
    }
    let part = DyadicPartition::new(g)?;
    let s = g.half_width / 8.0;
    let tol = |t: f64| t * tolerance_scale;
    let mut out = Vec::new();

    let pd = partition_defects(&g);
    out.push(IdentityCheck::new("partition_of_unity", &g, "lattice", pd.sum_defect, tol(1e-12)));
    let sq = (1.0 / 3.0 - pd.square_min).max(pd.square_max - 1.0).max(0.0);
    out.push(IdentityCheck::new("partition_square_bound", &g, "lattice", sq, tol(1e-12)));

    let rec = reconstruction(&part, 10, 0)?;
    out.push(IdentityCheck::new("dyadic_reconstruction", &g, "full box", rec.residual, tol(1e-12)));
    let ratio = (0.5 - rec.ratio_min).max(rec.ratio_max - 1.01).max(0.0);
    out.push(IdentityCheck::new("square_function_equivalence", &g, "full box", ratio, tol(1e-12)));

    let (res, region) = cylindrical_form_residual(&ring_potential(g)?)?;
    out.push(IdentityCheck::new("riesz_vs_direct_dr_over_r", &g, &region.describe(), res, tol(1e-3)));

    let f = make_axisym_scalar(&AxisymProfile::gaussian_laplacian(0.5 / (s * s)), g)?;
    for (i, j) in [(0, 2), (1, 2)] {
        let r = check_moment_inv_laplacian(&f, i, j)?;
        out.push(IdentityCheck::new(&r.identity, &g, &r.region, r.interior, tol(1e-3)));
    }
    for (i, j, k) in [(0, 1, 2), (0, 0, 2)] {
        let r = check_riesz_moment(&f, i, j, k)?;
        out.push(IdentityCheck::new(&r.identity, &g, &r.region, r.interior, tol(1e-3)));
    }

    let fine = Grid::new(2 * g.n, 2.0 * g.half_width)?;
    let v = make_noswirl_velocity(&AxisymProfile::gaussian_bilaplacian(1.0 / (4.0 * s * s)).times_r(), fine)?;
    for r in check_biot_savart_identities(&v)? {
        out.push(IdentityCheck::new(&r.identity, &fine, &r.region, r.interior, tol(1e-3)));
    }

    let fine_part = DyadicPartition::new(fine)?;
    let blocks: Vec<i32> = (1..fine_part.q_max()).collect();
    let slope = moment_commutator_slope(&fine_part, &blocks)?;
    out.push(IdentityCheck::new("moment_commutator_slope", &fine, "spectrum", (slope + 1.0).abs(), tol(0.1)));

    let u = make_axisym_scalar(&AxisymProfile::gaussian(1.0, s), g)?;
    out.push(IdentityCheck::new("lorentz_diagonal", &g, "full box", lorentz_diagonal_defect(&u)?, tol(1e-10)));
    Ok(out)
}
