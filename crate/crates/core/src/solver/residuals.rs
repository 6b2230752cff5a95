//! Residuals of the vorticity, `zeta`, `Gamma` and moment equations along a
//! trajectory, with the time derivative taken by centered differences of three
//! equally spaced states.

use super::SimState;
use crate::axisym::{relative_residual, Region};
use crate::error::{Error, Result};
use crate::field::{ScalarField, SpectralField, VectorField};
use crate::spectral;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationResidual {
    pub equation: String,
    /// `||lhs - rhs|| / max(||lhs||, ||rhs||)` on the region.
    pub relative: f64,
    /// `||lhs - rhs||` on the region.
    pub absolute: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSet {
    pub time: f64,
    pub spacing: f64,
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub region: String,
    pub entries: Vec<EquationResidual>,
}

impl ResidualSet {
    pub fn get(&self, equation: &str) -> Option<&EquationResidual> {
        self.entries.iter().find(|e| e.equation == equation)
    }
}

/// Smooth-off-axis coefficient `c(x)` and its gradient.
type Coef = fn([f64; 3]) -> (f64, [f64; 3]);

fn r2(x: [f64; 3]) -> f64 {
    x[0] * x[0] + x[1] * x[1]
}

fn guard(x: [f64; 3], f: impl Fn(f64) -> (f64, [f64; 3])) -> (f64, [f64; 3]) {
    let s = r2(x);
    if s == 0.0 {
        (0.0, [0.0; 3])
    } else {
        f(s)
    }
}

/// `-x2 / r`
fn neg_x2_over_r(x: [f64; 3]) -> (f64, [f64; 3]) {
    guard(x, |s| {
        let r3 = s * s.sqrt();
        (-x[1] / s.sqrt(), [x[0] * x[1] / r3, -x[0] * x[0] / r3, 0.0])
    })
}

/// `x1 / r`
fn x1_over_r(x: [f64; 3]) -> (f64, [f64; 3]) {
    guard(x, |s| {
        let r3 = s * s.sqrt();
        (x[0] / s.sqrt(), [x[1] * x[1] / r3, -x[0] * x[1] / r3, 0.0])
    })
}

/// `-x2 / r^2`
fn neg_x2_over_r2(x: [f64; 3]) -> (f64, [f64; 3]) {
    guard(x, |s| {
        let s2 = s * s;
        (-x[1] / s, [2.0 * x[0] * x[1] / s2, (x[1] * x[1] - x[0] * x[0]) / s2, 0.0])
    })
}

/// `x1 / r^2`
fn x1_over_r2(x: [f64; 3]) -> (f64, [f64; 3]) {
    guard(x, |s| {
        let s2 = s * s;
        (x[0] / s, [(x[1] * x[1] - x[0] * x[0]) / s2, -2.0 * x[0] * x[1] / s2, 0.0])
    })
}

/// `x2 / r^2`
fn x2_over_r2(x: [f64; 3]) -> (f64, [f64; 3]) {
    guard(x, |s| {
        let s2 = s * s;
        (x[1] / s, [-2.0 * x[0] * x[1] / s2, (x[0] * x[0] - x[1] * x[1]) / s2, 0.0])
    })
}

/// `A = sum_i c_i w_i` with analytic `c_i` and spectrally smooth `w_i`.
struct Combination(Vec<(Coef, SpectralField)>);

impl Combination {
    fn value(&self) -> ScalarField {
        let g = *self.0[0].1.grid();
        let mut acc = ScalarField::zeros(g);
        for (c, w) in &self.0 {
            let wp = w.to_physical();
            acc = acc.add(&wp.map_with_point(|x, v| c(x).0 * v));
        }
        acc
    }

    /// `v.grad A = sum_i c_i (v.grad w_i) + (v.grad c_i) w_i`.
    fn advected(&self, v: &VectorField) -> ScalarField {
        let g = *v.grid();
        let mut acc = ScalarField::zeros(g);
        for (c, w) in &self.0 {
            let vw = advect(v, w);
            let wp = w.to_physical();
            let vd = v.comps.iter().map(|c| c.data()).collect::<Vec<_>>();
            let data: Vec<f64> = (0..g.len())
                .map(|i| {
                    let (cv, cg) = c(g.point(i));
                    let vgc = vd[0][i] * cg[0] + vd[1][i] * cg[1] + vd[2][i] * cg[2];
                    cv * vw.data()[i] + vgc * wp.data()[i]
                })
                .collect();
            acc = acc.add(&ScalarField::new(g, data).expect("grid length"));
        }
        acc
    }
}

/// `v.grad w` with spectral derivatives and a pointwise product.
fn advect(v: &VectorField, w: &SpectralField) -> ScalarField {
    let mut acc = ScalarField::zeros(*v.grid());
    for a in 0..3 {
        acc = acc.add(&v.comps[a].mul(&spectral::derivative(w, a).to_physical()));
    }
    acc
}

fn theta_form(s: &SimState) -> Combination {
    let w = spectral::curl(&s.v);
    let [w1, w2, _] = w.comps;
    Combination(vec![(neg_x2_over_r as Coef, w1), (x1_over_r as Coef, w2)])
}

fn zeta_form(s: &SimState) -> Combination {
    let w = spectral::curl(&s.v);
    let [w1, w2, _] = w.comps;
    Combination(vec![(neg_x2_over_r2 as Coef, w1), (x1_over_r2 as Coef, w2)])
}

/// `(d_r / r) Delta^-1 u = (x1 d_1 + x2 d_2) Delta^-1 u / r^2`.
fn radial_form(u: &SpectralField) -> Combination {
    let psi = spectral::inverse_laplacian(u);
    Combination(vec![(x1_over_r2 as Coef, spectral::derivative(&psi, 0)), (x2_over_r2 as Coef, spectral::derivative(&psi, 1))])
}

fn gamma_form(s: &SimState) -> Combination {
    let mut parts = zeta_form(s).0;
    parts.extend(radial_form(&s.rho).0);
    Combination(parts)
}

fn moment(rho: &SpectralField, weight: impl Fn([f64; 3]) -> f64 + Sync) -> SpectralField {
    rho.to_physical().map_with_point(|x, v| weight(x) * v).fft()
}

fn central(a: &ScalarField, b: &ScalarField, dt: f64) -> ScalarField {
    b.sub(a).scale(0.5 / dt)
}

fn residual(name: &str, lhs: &[ScalarField], rhs: &[ScalarField], region: &Region) -> EquationResidual {
    let diff: f64 = lhs.iter().zip(rhs).map(|(a, b)| region.l2_sq(&a.sub(b))).sum();
    let la: f64 = lhs.iter().map(|a| region.l2_sq(a)).sum();
    let lb: f64 = rhs.iter().map(|b| region.l2_sq(b)).sum();
    let den = la.sqrt().max(lb.sqrt());
    let relative = if lhs.len() == 1 {
        relative_residual(&lhs[0], &rhs[0], region)
    } else if den == 0.0 {
        diff.sqrt()
    } else {
        diff.sqrt() / den
    };
    EquationResidual { equation: name.into(), relative, absolute: diff.sqrt() }
}

/// Residuals at the middle of three equally spaced states.
///
/// Region: the cube minus a boundary shell of width `L/8`, restricted to `r >= 4 dx`.
/// `gamma_unforced` drops the commutator source of the `Gamma` equation.
pub fn equation_residuals(history: &[SimState]) -> Result<ResidualSet> {
    let [s0, s1, s2] = history else {
        return Err(Error::InvalidArgument(format!("need three checkpoints, got {}", history.len())));
    };
    let g = *s1.grid();
    g.check_same(s0.grid())?;
    g.check_same(s2.grid())?;
    let (d0, d1) = (s1.time - s0.time, s2.time - s1.time);
    if !(d0 > 0.0 && d1 > 0.0) || (d1 - d0).abs() > 1e-9 * (d0 + d1) {
        return Err(Error::InvalidArgument(format!("checkpoint spacings {d0:.6e} and {d1:.6e} are not uniform")));
    }
    let dt = 0.5 * (d0 + d1);
    let region = Region { shell: g.half_width / 8.0, r_min: 4.0 * g.spacing() };
    let v = s1.velocity();
    let rho = s1.density();
    let grad_rho: Vec<ScalarField> = (0..3).map(|a| spectral::derivative(&s1.rho, a).to_physical()).collect();
    let radial = |w: f64| {
        let (a, b) = (grad_rho[0].data(), grad_rho[1].data());
        let data = (0..g.len())
            .map(|i| {
                let x = g.point(i);
                let s = r2(x);
                if s == 0.0 {
                    0.0
                } else {
                    (x[0] * a[i] + x[1] * b[i]) / s.powf(w)
                }
            })
            .collect();
        ScalarField::new(g, data).expect("grid length")
    };
    let dr_rho = radial(0.5);
    let dr_rho_over_r = radial(1.0);
    let mut entries = Vec::new();

    let (f0, f1, f2) = (theta_form(s0), theta_form(s1), theta_form(s2));
    let omega_theta = f1.value();
    let lhs = central(&f0.value(), &f2.value(), dt).add(&f1.advected(&v));
    let vr_over_r = v.comps[0].map_with_point(|x, a| a * x[0]).add(&v.comps[1].map_with_point(|x, b| b * x[1]));
    let vr_over_r = vr_over_r.map_with_point(|x, u| if r2(x) == 0.0 { 0.0 } else { u / r2(x) });
    let rhs = vr_over_r.mul(&omega_theta).sub(&dr_rho);
    entries.push(residual("vorticity", &[lhs], &[rhs], &region));

    let (f0, f1, f2) = (zeta_form(s0), zeta_form(s1), zeta_form(s2));
    let lhs = central(&f0.value(), &f2.value(), dt).add(&f1.advected(&v));
    entries.push(residual("zeta", &[lhs], &[dr_rho_over_r.scale(-1.0)], &region));

    let (f0, f1, f2) = (gamma_form(s0), gamma_form(s1), gamma_form(s2));
    let lhs = central(&f0.value(), &f2.value(), dt).add(&f1.advected(&v));
    let v_grad_rho = advect(&v, &s1.rho);
    let commutator = radial_form(&v_grad_rho.fft()).value().sub(&radial_form(&s1.rho).advected(&v));
    entries.push(residual("gamma", &[lhs.clone()], &[commutator.scale(-1.0)], &region));
    entries.push(residual("gamma_unforced", &[lhs], &[ScalarField::zeros(g)], &region));

    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for h in 0..2 {
        let w = move |x: [f64; 3]| x[h];
        let m1 = moment(&s1.rho, w);
        let l = central(&moment(&s0.rho, w).to_physical(), &moment(&s2.rho, w).to_physical(), dt)
            .add(&advect(&v, &m1))
            .sub(&spectral::laplacian(&m1).to_physical());
        lhs.push(l);
        rhs.push(v.comps[h].mul(&rho).sub(&grad_rho[h].scale(2.0)));
    }
    entries.push(residual("first_moment", &lhs, &rhs, &region));

    let w = |x: [f64; 3]| r2(x);
    let m1 = moment(&s1.rho, w);
    let lhs = central(&moment(&s0.rho, w).to_physical(), &moment(&s2.rho, w).to_physical(), dt)
        .add(&advect(&v, &m1))
        .sub(&spectral::laplacian(&m1).to_physical());
    let xv = v.comps[0].map_with_point(|x, a| a * x[0]).add(&v.comps[1].map_with_point(|x, b| b * x[1]));
    let xg = grad_rho[0].map_with_point(|x, a| a * x[0]).add(&grad_rho[1].map_with_point(|x, b| b * x[1]));
    let rhs = xv.mul(&rho).scale(2.0).sub(&xg.scale(4.0)).sub(&rho.scale(4.0));
    entries.push(residual("second_moment", &[lhs], &[rhs], &region));

    Ok(ResidualSet { time: s1.time, spacing: dt, n: g.n, half_width: g.half_width, region: region.describe(), entries })
}
