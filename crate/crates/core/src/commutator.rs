//! Commutators of transport and multiplication with Fourier multipliers, and
//! randomized probes of the bounds they satisfy.
//!
//! Every product is formed with 2/3 dealiasing, so each commutator is exact
//! multiplier-versus-product algebra on the truncated spectrum.

use crate::axisym::{self, AxisymProfile, Ring};
use crate::dyadic::{self, DyadicPartition};
use crate::error::{Error, Result};
use crate::field::{ScalarField, SpectralField, VectorField};
use crate::grid::Grid;
use crate::lorentz::lorentz_norm;
use crate::spectral;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative divergence `max|div v| / (max|v| k_nyquist)` tolerated for transport fields.
pub const DIV_TOL: f64 = 1e-10;

/// Samples whose right-hand side falls below this are skipped and counted.
pub const DEGENERATE_RHS: f64 = 1e-14;

/// `u -> P(sum_i P v_i P d_i u)` with `P` the 2/3 truncation.
pub struct Transport {
    comps: [ScalarField; 3],
}

impl Transport {
    pub fn new(v: &VectorField) -> Result<Self> {
        let vh = v.to_spectral()?;
        Ok(Self { comps: std::array::from_fn(|i| spectral::dealias(&vh.comps[i]).to_physical()) })
    }

    pub fn grid(&self) -> &Grid {
        self.comps[0].grid()
    }

    pub fn apply(&self, u: &SpectralField) -> SpectralField {
        let g = *self.grid();
        let ud = spectral::dealias(u);
        let mut acc = ScalarField::zeros(g);
        for (i, vi) in self.comps.iter().enumerate() {
            let d = spectral::derivative(&ud, i).to_physical();
            acc.data_mut().par_iter_mut().zip(vi.data().par_iter().zip(d.data())).for_each(|(a, (x, y))| *a += x * y);
        }
        spectral::dealias(&acc.fft())
    }
}

/// `max|div v| / (max|v| k_nyquist)`.
pub fn divergence_defect(v: &VectorField) -> Result<f64> {
    let top = v.max_magnitude();
    if top == 0.0 {
        return Ok(0.0);
    }
    let div = spectral::divergence(&v.to_spectral()?).to_physical().max_abs();
    Ok(div / (top * v.grid().nyquist()))
}

fn check_transport_field(v: &VectorField) -> Result<()> {
    let d = divergence_defect(v)?;
    if d > DIV_TOL {
        return Err(Error::Precondition(format!("velocity divergence {d:.3e} exceeds {DIV_TOL:.0e}")));
    }
    Ok(())
}

fn check_density(v: &VectorField, rho: &ScalarField) -> Result<()> {
    v.grid().check_same(rho.grid())?;
    rho.check_finite()?;
    axisym::check_axisymmetric(rho)?;
    let m = axisym::field_margin_defect(rho);
    if m > axisym::MARGIN_TOL {
        return Err(Error::Precondition(format!("density reaches {m:.3e} of its maximum within L/4 of the boundary")));
    }
    Ok(())
}

/// `(d_r/r) Delta^-1 (v . grad rho) - v . grad ((d_r/r) Delta^-1 rho)`.
pub fn advection_commutator(v: &VectorField, rho: &ScalarField) -> Result<ScalarField> {
    check_transport_field(v)?;
    axisym::check_no_swirl(v)?;
    check_density(v, rho)?;
    let t = Transport::new(v)?;
    Ok(advection_commutator_with(&t, &rho.fft()))
}

fn advection_commutator_with(t: &Transport, rh: &SpectralField) -> ScalarField {
    let a = axisym::dr_over_r_riesz(&t.apply(rh));
    let b = t.apply(&axisym::dr_over_r_riesz(rh).fft()).to_physical();
    a.sub(&b)
}

/// `x_h rho` as the pair `(x_1 rho, x_2 rho)`.
fn horizontal_moments(rho: &ScalarField) -> [ScalarField; 2] {
    [rho.mul_coord(0), rho.mul_coord(1)]
}

/// `||zeta||_{L^{3,1}} (max(||x_h rho||_{B^0_{inf,1}}, ||x_h rho||_{L^2}) + ||rho||_{B^{1/2}_{2,1}})`,
/// the norm of the pair `x_h rho` being the sum over its two components.
pub fn thm31_bound(part: &DyadicPartition, v: &VectorField, rho: &ScalarField) -> Result<f64> {
    let z = axisym::zeta(v)?;
    commutator_bound_with(part, &z, rho)
}

fn commutator_bound_with(part: &DyadicPartition, zeta: &ScalarField, rho: &ScalarField) -> Result<f64> {
    let lz = lorentz_norm(zeta, 3.0, 1.0)?;
    let mut besov = 0.0;
    let mut l2 = 0.0;
    for m in horizontal_moments(rho) {
        besov += dyadic::besov_norm(part, &m, 0.0, f64::INFINITY, 1.0)?;
        l2 += m.l2_norm();
    }
    let half = dyadic::besov_norm(part, rho, 0.5, 2.0, 1.0)?;
    Ok(lz * (besov.max(l2) + half))
}

/// `Delta_q (v . grad rho) - v . grad (Delta_q rho)`.
pub fn dyadic_advection_commutator(
    part: &DyadicPartition,
    v: &VectorField,
    rho: &ScalarField,
    q: i32,
) -> Result<ScalarField> {
    check_transport_field(v)?;
    v.grid().check_same(rho.grid())?;
    part.grid().check_same(rho.grid())?;
    let t = Transport::new(v)?;
    dyadic_advection_commutator_with(part, &t, &rho.to_spectral()?, q)
}

fn dyadic_advection_commutator_with(
    part: &DyadicPartition,
    t: &Transport,
    rh: &SpectralField,
    q: i32,
) -> Result<ScalarField> {
    let a = part.delta_q(&t.apply(rh), q)?;
    let b = t.apply(&part.delta_q(rh, q)?);
    Ok(a.sub(&b).to_physical())
}

/// `h(D)(f g) - f h(D) g` with dealiased products.
pub fn smoothed_commutator(
    h: impl Fn([f64; 3]) -> Complex64 + Sync,
    f: &ScalarField,
    g: &ScalarField,
) -> Result<ScalarField> {
    f.grid().check_same(g.grid())?;
    let fh = f.to_spectral()?;
    let gh = g.to_spectral()?;
    let a = spectral::dealiased_product(&fh, &gh).apply_multiplier(&h)?;
    let b = spectral::dealiased_product(&fh, &gh.apply_multiplier(&h)?);
    Ok(a.sub(&b).to_physical())
}

/// `|| |x| K ||_{L^r}` for the kernel `K` of the multiplier `h`, i.e. `h(D) u = K * u`.
/// The symbol must be Hermitian (`h(-k) = conj h(k)`) so that `K` is real.
pub fn kernel_moment_norm(h: impl Fn([f64; 3]) -> Complex64 + Sync, grid: Grid, r: f64) -> Result<f64> {
    let vol = grid.volume();
    let mut kh = SpectralField::zeros(grid);
    kh.for_each_mode_mut(|m, c| *c = Complex64::new(1.0 / vol, 0.0) * h(m.k));
    if kh.coeffs().iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::InvalidArgument("multiplier is not finite on the grid".into()));
    }
    let k = kh.to_physical();
    let weighted = k.map_with_point(|x, v| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() * v);
    Ok(weighted.lebesgue_norm(r))
}

/// Direct and convolution forms of `[Delta_q, x_i] rho`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCommutator {
    pub q: i32,
    pub axis: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    /// `||Delta_q(x_i rho) - x_i Delta_q rho||_2`.
    pub direct_l2: f64,
    /// `||-i d_{xi_i}[sigma_q](D) rho||_2`.
    pub convolution_l2: f64,
    /// Relative L2 distance between the two forms.
    pub residual: f64,
}

/// Compares `Delta_q(x_i rho) - x_i Delta_q rho` with the multiplier `-i d_{xi_i}[sigma_q(xi)]`
/// applied to `rho`, where `sigma_q` is the symbol of `Delta_q`.
pub fn check_delta_q_moment(part: &DyadicPartition, rho: &ScalarField, q: i32, axis: usize) -> Result<MomentCommutator> {
    if axis > 1 {
        return Err(Error::InvalidArgument(format!("moment axis {axis} must be 0 or 1")));
    }
    if q < 0 || q > part.q_max() {
        return Err(Error::InvalidArgument(format!("block {q} outside [0, {}]", part.q_max())));
    }
    part.grid().check_same(rho.grid())?;
    let m = axisym::field_margin_defect(rho);
    if m > axisym::MARGIN_TOL {
        return Err(Error::Precondition(format!("field reaches {m:.3e} of its maximum within L/4 of the boundary")));
    }
    let g = *rho.grid();
    let rh = rho.to_spectral()?;
    let direct = part
        .delta_q(&rho.mul_coord(axis).to_spectral()?, q)?
        .to_physical()
        .sub(&part.delta_q(&rh, q)?.to_physical().mul_coord(axis));
    let conv = moment_commutator_spectral(part, &rh, q, axis).to_physical();
    let direct_l2 = direct.l2_norm();
    let convolution_l2 = conv.l2_norm();
    let den = direct_l2.max(convolution_l2);
    let diff = direct.sub(&conv).l2_norm();
    Ok(MomentCommutator {
        q,
        axis,
        n: g.n,
        half_width: g.half_width,
        direct_l2,
        convolution_l2,
        residual: if den == 0.0 { diff } else { diff / den },
    })
}

/// `-i d_{xi_i}[sigma_q(xi)] u_hat`, the multiplier form of `[Delta_q, x_i] u`.
pub fn moment_commutator_spectral(part: &DyadicPartition, u: &SpectralField, q: i32, axis: usize) -> SpectralField {
    u.map_modes(|md, c| {
        let r = md.k2.sqrt();
        if r == 0.0 {
            return Complex64::default();
        }
        -I * (md.kd[axis] / r) * part.block_symbol_prime(q, r) * c
    })
}

/// `(q, ||[Delta_q, x_i] u||_2)` for each requested block, from the multiplier form.
pub fn moment_commutator_sweep(part: &DyadicPartition, u: &SpectralField, axis: usize, blocks: &[i32]) -> Vec<(i32, f64)> {
    blocks.iter().map(|&q| (q, moment_commutator_spectral(part, u, q, axis).energy().sqrt())).collect()
}

/// One ensemble member's left and right sides.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub id: String,
    pub inequality: String,
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub ensemble: usize,
    pub skipped: usize,
    pub samples: Vec<ProbeSample>,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSuite {
    pub seed: u64,
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub ensemble: usize,
    pub reports: Vec<ProbeReport>,
}

impl ProbeSuite {
    pub fn report(&self, id: &str) -> Option<&ProbeReport> {
        self.reports.iter().find(|r| r.id == id)
    }
}

/// Probe identifiers and the inequality each one records.
pub const PROBES: [(&str, &str); 11] = [
    ("dr_over_r_commutator", "||[(d_r/r)Delta^-1, v.grad] rho||_{L^{3,1}} <= C ||zeta||_{L^{3,1}} (||x_h rho||_{B^0_{inf,1} cap L^2} + ||rho||_{B^{1/2}_{2,1}})"),
    ("block_transport_commutator", "max_q ||[Delta_q, v.grad] rho||_{L^2} <= C ||zeta||_{L^{3,1}} (||x_h rho||_{L^6} + ||rho||_{L^2})"),
    ("multiplier_commutator", "max_{q >= 0} ||[h_q(D), f] g||_{L^2} <= C || |x| F^-1 h_q ||_{L^1} ||grad f||_{L^inf} ||g||_{L^2}, h_q = 2^q phi(2^-q xi)"),
    ("gradient_block_commutator", "max_q ||grad [Delta_q, f] g||_{L^2} <= C ||grad f||_{L^inf} ||g||_{L^2}"),
    ("product_lorentz", "||u w||_{L^{3,1}} <= C ||u||_{L^inf} ||w||_{L^{3,1}}"),
    ("paraproduct_lorentz", "||T_u w||_{L^{3,1}} <= C ||u||_{L^inf} ||w||_{L^{3,1}}"),
    ("riesz_lorentz", "max_{i,j in {1,2}} ||R_ij u||_{L^{3,1}} <= C ||u||_{L^{3,1}}"),
    ("gradient_inv_laplacian", "||grad Delta^-1 f||_{L^inf} <= C ||f||_{L^{3,1}}"),
    ("radial_velocity_bound", "||v^r / r||_{L^inf} <= C ||zeta||_{L^{3,1}}"),
    ("dr_over_r_lorentz", "||(d_r/r) Delta^-1 u||_{L^{3,1}} <= C ||u||_{L^{3,1}}"),
    ("moment_gradient_bound", "max_{(i,j) in {(1,3),(2,3)}} ||grad L_ij f||_{L^inf} <= C ||f||_{L^{3,1}}"),
];

/// Random ring sums: 1-4 rings with `r0 in [0.5, 2]`, `z0 in [-L/4, L/4]`,
/// width in `[0.2, 0.8]`, amplitude in `[-1, 1]`.
pub fn random_rings(rng: &mut impl Rng, half_width: f64) -> Vec<Ring> {
    let count = rng.gen_range(1..=4);
    (0..count)
        .map(|_| Ring {
            amp: rng.gen_range(-1.0..=1.0),
            r0: rng.gen_range(0.5..=2.0),
            z0: rng.gen_range(-0.25 * half_width..=0.25 * half_width),
            width: rng.gen_range(0.2..=0.8),
        })
        .collect()
}

/// Profiles of one ensemble member: the density rings and the `omega_theta / r` rings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub density: Vec<Ring>,
    pub vorticity: Vec<Ring>,
}

/// The ensemble for `seed`; depends on the grid only through `L`.
pub fn ensemble(seed: u64, size: usize, half_width: f64) -> Vec<EnsembleMember> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size)
        .map(|_| {
            let density = random_rings(&mut rng, half_width);
            let vorticity = random_rings(&mut rng, half_width);
            EnsembleMember { density, vorticity }
        })
        .collect()
}

fn ratio_pair(lhs: f64, rhs: f64) -> Option<(f64, f64)> {
    (rhs >= DEGENERATE_RHS && lhs.is_finite() && rhs.is_finite()).then_some((lhs, rhs))
}

fn best(pairs: impl IntoIterator<Item = (f64, f64)>) -> Option<(f64, f64)> {
    pairs
        .into_iter()
        .filter_map(|(l, r)| ratio_pair(l, r))
        .fold(None, |acc: Option<(f64, f64)>, (l, r)| match acc {
            Some((al, ar)) if al / ar >= l / r => Some((al, ar)),
            _ => Some((l, r)),
        })
}

fn grad_max(u: &SpectralField) -> f64 {
    spectral::gradient_spectral(u).to_physical().max_magnitude()
}

/// All probe values for one member, in the order of [`PROBES`].
fn evaluate_member(part: &DyadicPartition, member: &EnsembleMember) -> Result<Vec<Option<(f64, f64)>>> {
    let g = *part.grid();
    let rho = axisym::make_axisym_scalar(&AxisymProfile::rings(&member.density), g)?;
    let f = axisym::make_axisym_scalar(&AxisymProfile::rings(&member.vorticity), g)?;
    let v = axisym::make_noswirl_velocity(&AxisymProfile::rings(&member.vorticity).times_r(), g)?;
    let rh = rho.to_spectral()?;
    let fh = f.to_spectral()?;
    let t = Transport::new(&v)?;
    // omega_theta / r is the sampled vorticity profile itself
    let zeta = &f;
    let zeta31 = lorentz_norm(zeta, 3.0, 1.0)?;
    let rho31 = lorentz_norm(&rho, 3.0, 1.0)?;
    let rho2 = rho.l2_norm();
    let mut out = Vec::with_capacity(PROBES.len());

    // dr_over_r_commutator
    let lhs = lorentz_norm(&advection_commutator_with(&t, &rh), 3.0, 1.0)?;
    out.push(ratio_pair(lhs, commutator_bound_with(part, zeta, &rho)?));

    // block_transport_commutator
    let moments6: f64 = horizontal_moments(&rho).iter().map(|m| m.lebesgue_norm(6.0)).sum();
    let rhs = zeta31 * (moments6 + rho2);
    let mut pairs = Vec::new();
    for q in part.blocks() {
        pairs.push((dyadic_advection_commutator_with(part, &t, &rh, q)?.l2_norm(), rhs));
    }
    out.push(best(pairs));

    // multiplier_commutator and gradient_block_commutator
    let gf = grad_max(&fh);
    let mut p27 = Vec::new();
    for q in 0..part.q_max() {
        let h = |k: [f64; 3]| {
            let r = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            Complex64::new(2f64.powi(q) * dyadic::phi(r * 0.5f64.powi(q)), 0.0)
        };
        let lhs = smoothed_commutator(h, &f, &rho)?.l2_norm();
        p27.push((lhs, kernel_moment_norm(h, g, 1.0)? * gf * rho2));
    }
    out.push(best(p27));
    let fd = spectral::dealias(&fh);
    let mut p28 = Vec::new();
    for q in part.blocks() {
        let a = part.delta_q(&spectral::dealiased_product(&fd, &rh), q)?;
        let b = spectral::dealiased_product(&fd, &part.delta_q(&rh, q)?);
        let c = a.sub(&b);
        p28.push((spectral::gradient_energy(&c).sqrt(), gf * rho2));
    }
    out.push(best(p28));

    // Lorentz-scale bounds with u = f (bounded) and w = rho
    let finf = f.max_abs();
    out.push(ratio_pair(lorentz_norm(&f.mul(&rho), 3.0, 1.0)?, finf * rho31));
    let bony = dyadic::bony_decompose(part, &f, &rho)?;
    out.push(ratio_pair(lorentz_norm(&bony.t_u_w, 3.0, 1.0)?, finf * rho31));
    let mut p253 = Vec::new();
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        p253.push((lorentz_norm(&spectral::riesz(&rh, i, j)?.to_physical(), 3.0, 1.0)?, rho31));
    }
    out.push(best(p253));

    let inv = spectral::inverse_laplacian(&rh);
    out.push(ratio_pair(grad_max(&inv), rho31));
    out.push(ratio_pair(axisym::radial_velocity_over_r(&v).max_abs(), zeta31));
    out.push(ratio_pair(lorentz_norm(&axisym::dr_over_r_riesz(&rh), 3.0, 1.0)?, rho31));
    let mut p24 = Vec::new();
    for i in 0..2 {
        p24.push((grad_max(&axisym::moment_correction(&rh, i, 2)?), rho31));
    }
    out.push(best(p24));
    Ok(out)
}

/// Evaluates every probe of [`PROBES`] over a seeded ensemble; deterministic given the seed.
pub fn run_probe_suite(seed: u64, size: usize, grid: Grid) -> Result<ProbeSuite> {
    let part = DyadicPartition::new(grid)?;
    let members = ensemble(seed, size, grid.half_width);
    let values: Vec<Vec<Option<(f64, f64)>>> =
        members.par_iter().map(|m| evaluate_member(&part, m)).collect::<Result<_>>()?;
    let reports = PROBES
        .iter()
        .enumerate()
        .map(|(p, (id, text))| {
            let samples: Vec<ProbeSample> = values
                .iter()
                .enumerate()
                .filter_map(|(index, v)| v[p].map(|(lhs, rhs)| ProbeSample { index, lhs, rhs, ratio: lhs / rhs }))
                .collect();
            let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
            ProbeReport {
                id: id.to_string(),
                inequality: text.to_string(),
                n: grid.n,
                half_width: grid.half_width,
                ensemble: size,
                skipped: size - samples.len(),
                samples,
                max_ratio,
            }
        })
        .collect();
    Ok(ProbeSuite { seed, n: grid.n, half_width: grid.half_width, ensemble: size, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring_pair(g: Grid) -> (VectorField, ScalarField) {
        let vort = [Ring { amp: 1.0, r0: 1.5, z0: 0.5, width: 0.6 }];
        let dens = [Ring { amp: 0.8, r0: 1.0, z0: -0.5, width: 0.5 }, Ring { amp: -0.3, r0: 2.0, z0: 1.0, width: 0.7 }];
        let v = axisym::make_noswirl_velocity(&AxisymProfile::rings(&vort).times_r(), g).unwrap();
        let rho = axisym::make_axisym_scalar(&AxisymProfile::rings(&dens), g).unwrap();
        (v, rho)
    }

    #[test]
    fn trivial_inputs_give_zero_commutators() {
        let g = Grid::new(32, 8.0).unwrap();
        let (v, rho) = ring_pair(g);
        let zero_v = VectorField::zeros(g);
        assert_eq!(advection_commutator(&zero_v, &rho).unwrap().max_abs(), 0.0);
        let t = Transport::new(&v).unwrap();
        let c = advection_commutator_with(&t, &ScalarField::constant(g, 2.5).fft());
        assert!(c.max_abs() <= 1e-13, "{}", c.max_abs());
        let part = DyadicPartition::new(g).unwrap();
        assert_eq!(thm31_bound(&part, &v, &ScalarField::zeros(g)).unwrap(), 0.0);
        for q in part.blocks() {
            assert_eq!(dyadic_advection_commutator(&part, &zero_v, &rho, q).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn rejects_invalid_transport_inputs() {
        let g = Grid::new(16, 8.0).unwrap();
        let rho = ScalarField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        let compressible = VectorField::from_fn(g, |x| {
            let e = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp();
            [x[0] * e, x[1] * e, 0.0]
        });
        assert!(matches!(advection_commutator(&compressible, &rho), Err(Error::Precondition(_))));
        let off_axis = ScalarField::from_fn(g, |x| (-(x[0] - 1.0).powi(2) - x[1] * x[1] - x[2] * x[2]).exp());
        assert!(matches!(advection_commutator(&VectorField::zeros(g), &off_axis), Err(Error::Precondition(_))));
    }

    #[test]
    fn commutator_bound_is_homogeneous_and_matches_primitives() {
        let g = Grid::new(32, 8.0).unwrap();
        let part = DyadicPartition::new(g).unwrap();
        let (v, rho) = ring_pair(g);
        let b = thm31_bound(&part, &v, &rho).unwrap();
        assert_eq!(thm31_bound(&part, &v, &rho.scale(2.0)).unwrap(), 2.0 * b);

        let z = axisym::zeta(&v).unwrap();
        let lz = lorentz_norm(&z, 3.0, 1.0).unwrap();
        let rh = rho.to_spectral().unwrap();
        let mut bes = 0.0;
        let mut l2 = 0.0;
        for axis in 0..2 {
            let m = rho.mul_coord(axis);
            let mh = m.to_spectral().unwrap();
            bes += part.blocks().map(|q| part.delta_q(&mh, q).unwrap().to_physical().max_abs()).sum::<f64>();
            l2 += m.l2_norm();
        }
        let half: f64 = part.blocks().map(|q| 2f64.powf(0.5 * q as f64) * part.block_l2(&rh, q)).sum();
        let want = lz * (bes.max(l2) + half);
        assert!((b - want).abs() <= 1e-12 * want, "{b} vs {want}");
    }

    #[test]
    fn constant_velocity_commutes_with_blocks() {
        let g = Grid::new(32, 8.0).unwrap();
        let part = DyadicPartition::new(g).unwrap();
        let (_, rho) = ring_pair(g);
        let v = VectorField::from_fn(g, |_| [0.3, -1.2, 0.7]);
        for q in part.blocks() {
            let c = dyadic_advection_commutator(&part, &v, &rho, q).unwrap();
            assert!(c.max_abs() <= 1e-12, "{q}: {}", c.max_abs());
        }
    }

    #[test]
    fn block_commutators_sum_to_zero() {
        let g = Grid::new(32, 8.0).unwrap();
        let part = DyadicPartition::new(g).unwrap();
        let (v, rho) = ring_pair(g);
        let mut acc = ScalarField::zeros(g);
        let mut scale = 0.0f64;
        for q in part.blocks() {
            let c = dyadic_advection_commutator(&part, &v, &rho, q).unwrap();
            scale = scale.max(c.max_abs());
            acc.axpy(1.0, &c);
        }
        assert!(acc.max_abs() <= 1e-10 * scale, "{} vs {scale}", acc.max_abs());
    }

    #[test]
    fn smoothed_commutator_trivial_cases() {
        let g = Grid::new(16, 8.0).unwrap();
        let (_, rho) = ring_pair(g);
        let h = |k: [f64; 3]| Complex64::new((-(k[0] * k[0] + k[1] * k[1] + k[2] * k[2])).exp(), 0.0);
        let c = smoothed_commutator(h, &ScalarField::constant(g, 3.0), &rho).unwrap();
        assert!(c.max_abs() <= 1e-13);
        let c = smoothed_commutator(|_| Complex64::new(2.0, 0.0), &rho.map(f64::sin), &rho).unwrap();
        assert!(c.max_abs() <= 1e-13);
    }

    #[test]
    fn gaussian_kernel_first_moment() {
        // kernel of exp(-s^2 |k|^2 / 2) is the normal density with variance s^2, whose
        // first absolute moment in three dimensions is 2 s sqrt(2 / pi); the kink of |x|
        // at the origin limits the Riemann sum
        let g = Grid::new(64, 8.0).unwrap();
        let s = 0.8;
        let h = |k: [f64; 3]| Complex64::new((-0.5 * s * s * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2])).exp(), 0.0);
        let got = kernel_moment_norm(h, g, 1.0).unwrap();
        let want = 2.0 * s * (2.0 / std::f64::consts::PI).sqrt();
        assert!((got - want).abs() <= 1e-3 * want, "{got} vs {want}");
        assert!(kernel_moment_norm(|_| Complex64::new(1.0, 0.0), g, 1.0).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn moment_commutator_forms() {
        let g = Grid::new(32, 8.0).unwrap();
        let part = DyadicPartition::new(g).unwrap();
        let z = check_delta_q_moment(&part, &ScalarField::zeros(g), 0, 0).unwrap();
        assert_eq!(z.residual, 0.0);
        assert!(check_delta_q_moment(&part, &ScalarField::zeros(g), -1, 0).is_err());
        assert!(check_delta_q_moment(&part, &ScalarField::zeros(g), 0, 2).is_err());
        assert!(check_delta_q_moment(&part, &ScalarField::constant(g, 1.0), 0, 0).is_err());
    }

    #[test]
    fn moment_commutator_periodization_shrinks_with_box() {
        let gauss = |x: [f64; 3]| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp();
        let mut res = Vec::new();
        for (n, l) in [(32, 8.0), (64, 16.0)] {
            let g = Grid::new(n, l).unwrap();
            let part = DyadicPartition::new(g).unwrap();
            res.push(check_delta_q_moment(&part, &ScalarField::from_fn(g, gauss), 1, 0).unwrap().residual);
        }
        assert!(res[1] < 0.2 * res[0], "{res:?}");
    }

    #[test]
    fn moment_commutator_scales_like_inverse_frequency() {
        let g = Grid::new(128, 8.0).unwrap();
        let part = DyadicPartition::new(g).unwrap();
        let mut u = SpectralField::zeros(g);
        u.for_each_mode_mut(|m, c| {
            if m.k2 > 0.0 && spectral::in_dealias_band(&g, &m.m) {
                *c = Complex64::new(m.k2.powf(-0.75), 0.0);
            }
        });
        let sweep = moment_commutator_sweep(&part, &u, 0, &[1, 2]);
        let slope = (sweep[1].1 / sweep[0].1).log2();
        assert!((slope + 1.0).abs() <= 0.1, "{slope}");
    }

    #[test]
    fn probe_suite_is_deterministic_and_product_bound_is_sharp() {
        let g = Grid::new(32, 8.0).unwrap();
        let a = run_probe_suite(11, 3, g).unwrap();
        let b = run_probe_suite(11, 3, g).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.reports.len(), PROBES.len());
        for r in &a.reports {
            assert!(r.max_ratio.is_finite() && r.max_ratio > 0.0, "{}", r.id);
            assert_eq!(r.samples.len() + r.skipped, 3);
        }
        // |u w| <= ||u||_inf |w| pointwise and the rearrangement functional is monotone
        assert!(a.report("product_lorentz").unwrap().max_ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn ensemble_respects_documented_ranges() {
        let e = ensemble(5, 20, 8.0);
        assert_eq!(e, ensemble(5, 20, 8.0));
        for m in &e {
            for r in m.density.iter().chain(&m.vorticity) {
                assert!((0.5..=2.0).contains(&r.r0) && (0.2..=0.8).contains(&r.width));
                assert!(r.z0.abs() <= 2.0 && r.amp.abs() <= 1.0);
            }
            assert!((1..=4).contains(&m.density.len()));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn advection_commutator_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let g = Grid::new(16, 8.0).unwrap();
            let v = axisym::make_noswirl_velocity(&AxisymProfile::gaussian(1.0, 1.2).times_r(), g).unwrap();
            let r1 = axisym::make_axisym_scalar(&AxisymProfile::gaussian(1.0, 1.0), g).unwrap();
            let r2 = axisym::make_axisym_scalar(&AxisymProfile::rings(&[Ring { amp: 1.0, r0: 1.0, z0: 0.0, width: 0.7 }]), g).unwrap();
            let mut mix = r1.scale(a);
            mix.axpy(b, &r2);
            let lhs = advection_commutator(&v, &mix).unwrap();
            let mut rhs = advection_commutator(&v, &r1).unwrap().scale(a);
            rhs.axpy(b, &advection_commutator(&v, &r2).unwrap());
            let scale = rhs.max_abs().max(lhs.max_abs()).max(1e-300);
            prop_assert!(lhs.sub(&rhs).max_abs() <= 1e-12 * scale);
        }
    }
}
