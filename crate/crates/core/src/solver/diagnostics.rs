use super::{SimConfig, SimMode, SimState};
use crate::axisym;
use crate::dyadic::{besov_norm, DyadicPartition};
use crate::error::{Error, Result};
use crate::field::{ScalarField, SpectralField, VectorField};
use crate::lorentz::lorentz_norm;
use crate::reduce::linear_fit;
use crate::spectral;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    VL2,
    VLinf,
    RhoL2,
    RhoL6,
    RhoLm,
    RhoLinf,
    /// `2 int_0^t ||grad rho||_2^2`.
    GradRhoIntegral,
    OmegaLinf,
    GradVLinf,
    ZetaL31,
    ZetaL3,
    GammaL31,
    XhRhoL2,
    XhRhoLinf,
    Xh2RhoL2,
    Xh2RhoL6,
    RhoBesov,
    XhRhoBesov,
    VHs,
    SymmetryDefect,
}

pub const ALL_QUANTITIES: [Quantity; 20] = [
    Quantity::VL2,
    Quantity::VLinf,
    Quantity::RhoL2,
    Quantity::RhoL6,
    Quantity::RhoLm,
    Quantity::RhoLinf,
    Quantity::GradRhoIntegral,
    Quantity::OmegaLinf,
    Quantity::GradVLinf,
    Quantity::ZetaL31,
    Quantity::ZetaL3,
    Quantity::GammaL31,
    Quantity::XhRhoL2,
    Quantity::XhRhoLinf,
    Quantity::Xh2RhoL2,
    Quantity::Xh2RhoL6,
    Quantity::RhoBesov,
    Quantity::XhRhoBesov,
    Quantity::VHs,
    Quantity::SymmetryDefect,
];

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::VL2 => "v_l2",
            Quantity::VLinf => "v_linf",
            Quantity::RhoL2 => "rho_l2",
            Quantity::RhoL6 => "rho_l6",
            Quantity::RhoLm => "rho_lm",
            Quantity::RhoLinf => "rho_linf",
            Quantity::GradRhoIntegral => "grad_rho_integral",
            Quantity::OmegaLinf => "omega_linf",
            Quantity::GradVLinf => "grad_v_linf",
            Quantity::ZetaL31 => "zeta_l31",
            Quantity::ZetaL3 => "zeta_l3",
            Quantity::GammaL31 => "gamma_l31",
            Quantity::XhRhoL2 => "xh_rho_l2",
            Quantity::XhRhoLinf => "xh_rho_linf",
            Quantity::Xh2RhoL2 => "xh2_rho_l2",
            Quantity::Xh2RhoL6 => "xh2_rho_l6",
            Quantity::RhoBesov => "rho_b_half_2_1",
            Quantity::XhRhoBesov => "xh_rho_b0_inf_1",
            Quantity::VHs => "v_hs",
            Quantity::SymmetryDefect => "symmetry_defect",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ALL_QUANTITIES.iter().copied().find(|q| q.name() == s)
    }

    fn needs_partition(self) -> bool {
        matches!(self, Quantity::RhoBesov | Quantity::XhRhoBesov)
    }
}

/// One row per sample time, one column per selected quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsSeries {
    pub columns: Vec<Quantity>,
    pub times: Vec<f64>,
    pub steps: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

impl DiagnosticsSeries {
    pub fn new(columns: &[Quantity]) -> Self {
        Self { columns: columns.to_vec(), times: Vec::new(), steps: Vec::new(), rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Appends a row; times must increase strictly and values be finite.
    pub fn push(&mut self, time: f64, step: usize, values: Vec<f64>) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::InvalidArgument(format!("{} values for {} columns", values.len(), self.columns.len())));
        }
        if let Some(&last) = self.times.last() {
            if time <= last {
                return Err(Error::InvalidArgument(format!("sample time {time} does not follow {last}")));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Aborted {
                time,
                step,
                reason: format!("diagnostic {} is not finite", self.columns[i].name()),
            });
        }
        self.times.push(time);
        self.steps.push(step);
        self.rows.push(values);
        Ok(())
    }

    pub fn column(&self, q: Quantity) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|&c| c == q)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,step");
        for c in &self.columns {
            out.push(',');
            out.push_str(c.name());
        }
        out.push('\n');
        for ((t, s), row) in self.times.iter().zip(&self.steps).zip(&self.rows) {
            out.push_str(&format!("{t:e},{s}"));
            for v in row {
                out.push_str(&format!(",{v:e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Computes the selected quantities for a state.
pub(super) struct Tracker {
    columns: Vec<Quantity>,
    partition: Option<DyadicPartition>,
    sobolev_s: f64,
    lebesgue_m: f64,
}

fn weighted(u: &ScalarField, f: impl Fn([f64; 3]) -> f64 + Sync) -> ScalarField {
    u.map_with_point(|x, v| f(x) * v)
}

impl Tracker {
    pub(super) fn new(config: &SimConfig, _init: &SimState) -> Result<Self> {
        let partition = if config.diagnostics.iter().any(|q| q.needs_partition()) {
            Some(DyadicPartition::new(config.grid)?)
        } else {
            None
        };
        Ok(Self { columns: config.diagnostics.clone(), partition, sobolev_s: config.sobolev_s, lebesgue_m: config.lebesgue_m })
    }

    pub(super) fn record(&self, state: &SimState, dissipation: f64) -> Result<Vec<f64>> {
        let rho = state.density();
        let mut v: Option<VectorField> = None;
        let mut omega: Option<VectorField> = None;
        let mut zeta: Option<ScalarField> = None;
        let velocity = |v: &mut Option<VectorField>| v.get_or_insert_with(|| state.velocity()).clone();
        let mut out = Vec::with_capacity(self.columns.len());
        for &q in &self.columns {
            let value = match q {
                Quantity::VL2 => state.v.energy().sqrt(),
                Quantity::VLinf => velocity(&mut v).max_magnitude(),
                Quantity::RhoL2 => state.rho.energy().sqrt(),
                Quantity::RhoL6 => rho.lebesgue_norm(6.0),
                Quantity::RhoLm => rho.lebesgue_norm(self.lebesgue_m),
                Quantity::RhoLinf => rho.max_abs(),
                Quantity::GradRhoIntegral => dissipation,
                Quantity::OmegaLinf => {
                    omega.get_or_insert_with(|| spectral::curl(&state.v).to_physical()).max_magnitude()
                }
                Quantity::GradVLinf => grad_linf(&state.v.comps),
                Quantity::ZetaL31 | Quantity::ZetaL3 => {
                    let z = zeta.get_or_insert_with(|| axisym::zeta_unchecked(&velocity(&mut v)));
                    if q == Quantity::ZetaL3 {
                        z.lebesgue_norm(3.0)
                    } else {
                        lorentz_norm(z, 3.0, 1.0)?
                    }
                }
                Quantity::GammaL31 => {
                    let z = zeta.get_or_insert_with(|| axisym::zeta_unchecked(&velocity(&mut v)));
                    lorentz_norm(&z.add(&axisym::dr_over_r_riesz(&state.rho)), 3.0, 1.0)?
                }
                Quantity::XhRhoL2 => weighted(&rho, |x| (x[0] * x[0] + x[1] * x[1]).sqrt()).l2_norm(),
                Quantity::XhRhoLinf => weighted(&rho, |x| (x[0] * x[0] + x[1] * x[1]).sqrt()).max_abs(),
                Quantity::Xh2RhoL2 => weighted(&rho, |x| x[0] * x[0] + x[1] * x[1]).l2_norm(),
                Quantity::Xh2RhoL6 => weighted(&rho, |x| x[0] * x[0] + x[1] * x[1]).lebesgue_norm(6.0),
                Quantity::RhoBesov => besov_norm(self.partition.as_ref().expect("partition"), &rho, 0.5, 2.0, 1.0)?,
                Quantity::XhRhoBesov => {
                    let part = self.partition.as_ref().expect("partition");
                    besov_norm(part, &rho.mul_coord(0), 0.0, f64::INFINITY, 1.0)?
                        + besov_norm(part, &rho.mul_coord(1), 0.0, f64::INFINITY, 1.0)?
                }
                Quantity::VHs => {
                    let s = self.sobolev_s;
                    state.v.comps.iter().map(|c| spectral::sobolev_norm(c, s).powi(2)).sum::<f64>().sqrt()
                }
                Quantity::SymmetryDefect => {
                    axisym::symmetry_defect_vector(&velocity(&mut v)).max(axisym::symmetry_defect_scalar(&rho))
                }
            };
            out.push(value);
        }
        Ok(out)
    }
}

/// `max_x |grad v|` with the Frobenius norm of the Jacobian.
fn grad_linf(v: &[SpectralField; 3]) -> f64 {
    let g = *v[0].grid();
    let mut acc = ScalarField::zeros(g);
    for c in v {
        for a in 0..3 {
            let d = spectral::derivative(c, a).to_physical();
            acc = acc.zip_map(&d, |s, x| s + x * x);
        }
    }
    acc.max().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: SimMode,
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub samples: usize,
    pub final_time: f64,
    pub aborted: Option<String>,
    pub checks: Vec<Check>,
    pub fits: BTreeMap<String, f64>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.aborted.is_none() && self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Diffusion length `4 sqrt(t)` reaches the support margin `3L/4`.
pub fn saturation_time(half_width: f64) -> f64 {
    (3.0 * half_width / 16.0).powi(2)
}

/// Largest relative increase between consecutive samples.
fn worst_increase(xs: &[f64]) -> f64 {
    xs.windows(2)
        .map(|w| if w[0] > 0.0 { (w[1] - w[0]) / w[0] } else { w[1] - w[0] })
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0)
}

/// Slope of `log y` against `log t` over samples with `t` in `[lo, hi]`.
pub fn decay_exponent(times: &[f64], ys: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let (xs, zs): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(ys)
        .filter(|(&t, &y)| t >= lo * (1.0 - 1e-9) && t <= hi * (1.0 + 1e-9) && y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .unzip();
    if xs.len() < 3 {
        None
    } else {
        Some(linear_fit(&xs, &zs).1)
    }
}

pub(super) fn summarize(config: &SimConfig, series: &DiagnosticsSeries, abort: Option<&Error>) -> RunSummary {
    let mut checks = Vec::new();
    let mut fits = BTreeMap::new();
    let t = &series.times;
    let col = |q| series.column(q);
    let conservative = config.forcing.is_none() && config.mode != SimMode::Euler;
    let add = |checks: &mut Vec<Check>, name: &str, value: f64, threshold: f64, detail: String| {
        checks.push(Check { name: name.into(), passed: value <= threshold, value, threshold, detail });
    };

    if let (true, Some(r2), Some(diss)) = (conservative, col(Quantity::RhoL2), col(Quantity::GradRhoIntegral)) {
        let e0 = r2[0] * r2[0];
        if e0 > 0.0 {
            let worst = r2.iter().zip(&diss).map(|(r, d)| (r * r + d - e0).abs() / e0).fold(0.0, f64::max);
            fits.insert("energy_balance_defect".into(), worst);
            add(&mut checks, "energy_balance", worst, 1e-6, "max |‖ρ‖² + 2∫‖∇ρ‖² - ‖ρ₀‖²| / ‖ρ₀‖²".into());
        }
    }
    if config.mode == SimMode::Boussinesq {
        if let (Some(vl), Some(r2)) = (col(Quantity::VL2), col(Quantity::RhoL2)) {
            let worst = vl.iter().zip(t).map(|(v, s)| v - (vl[0] + s * r2[0])).fold(f64::NEG_INFINITY, f64::max);
            add(&mut checks, "velocity_growth", worst, 1e-6, "max_t ‖v(t)‖ - ‖v₀‖ - t‖ρ₀‖".into());
        }
    }
    if conservative {
        for (q, name) in [(Quantity::RhoL2, "rho_l2_monotone"), (Quantity::RhoL6, "rho_l6_monotone"), (Quantity::RhoLinf, "rho_linf_monotone")] {
            if let Some(xs) = col(q) {
                add(&mut checks, name, worst_increase(&xs), 1e-8, format!("largest relative increase of {}", q.name()));
            }
        }
    }
    if config.mode == SimMode::Euler {
        if let Some(z) = col(Quantity::ZetaL3) {
            if z[0] > 0.0 {
                let drift = z.iter().map(|x| (x / z[0] - 1.0).abs()).fold(0.0, f64::max);
                fits.insert("zeta_l3_drift".into(), drift);
                add(&mut checks, "zeta_l3_drift", drift, 5e-3, "max_t |‖ζ(t)‖₃ / ‖ζ₀‖₃ - 1|".into());
            }
        }
    }
    if config.mode == SimMode::Heat && config.forcing.is_none() {
        let still = col(Quantity::VL2).map_or(false, |v| v[0] == 0.0);
        if let (true, Some(m)) = (still, col(Quantity::RhoLinf)) {
            let hi = saturation_time(config.grid.half_width);
            if let Some(slope) = decay_exponent(t, &m, hi / 10.0, hi) {
                fits.insert("heat_decay_exponent".into(), slope);
                checks.push(Check {
                    name: "heat_decay_exponent".into(),
                    passed: (-0.85..=-0.65).contains(&slope),
                    value: slope,
                    threshold: -0.75,
                    detail: format!("slope over [{:.4}, {hi:.4}], accepted range [-0.85, -0.65]", hi / 10.0),
                });
            }
        }
    }
    if let Some(s) = col(Quantity::SymmetryDefect) {
        add(&mut checks, "axisymmetry", s.iter().copied().fold(0.0, f64::max), 1e-8, "max rotation/mirror defect".into());
    }
    for (q, name, p) in [(Quantity::XhRhoL2, "moment1", 1.25), (Quantity::Xh2RhoL2, "moment2", 2.5)] {
        if let Some(xs) = col(q) {
            let c0 = xs.iter().zip(t).map(|(x, s)| x / (1.0 + s.powf(p))).fold(0.0, f64::max);
            fits.insert(format!("{name}_envelope_c0"), c0);
            let (ls, lx): (Vec<f64>, Vec<f64>) =
                t.iter().zip(&xs).filter(|(_, &x)| x > 0.0).map(|(s, x)| ((1.0 + s).ln(), x.ln())).unzip();
            if ls.len() >= 3 {
                fits.insert(format!("{name}_exponent"), linear_fit(&ls, &lx).1);
            }
        }
    }
    if let (Some(gv), Some(vl), Some(om), Some(hs)) =
        (col(Quantity::GradVLinf), col(Quantity::VL2), col(Quantity::OmegaLinf), col(Quantity::VHs))
    {
        let c = (0..gv.len())
            .map(|i| {
                let den = vl[i] + om[i] * (std::f64::consts::E + hs[i]).ln();
                if den > 0.0 {
                    gv[i] / den
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        fits.insert("log_lipschitz_c".into(), c);
    }
    RunSummary {
        mode: config.mode,
        n: config.grid.n,
        half_width: config.grid.half_width,
        samples: series.len(),
        final_time: t.last().copied().unwrap_or(0.0),
        aborted: abort.map(|e| e.to_string()),
        checks,
        fits,
    }
}
