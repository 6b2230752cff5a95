//! Pseudo-spectral integration of the inviscid Boussinesq system
//! `d_t v + v.grad v + grad p = rho e_z`, `d_t rho + v.grad rho - Delta rho = 0`
//! with pure-Euler and pure-heat variants.
//!
//! The pressure is removed by Leray projection. Time stepping is classical RK4
//! in the integrating-factor frame of the heat semigroup (Lawson), so diffusion
//! of `rho` is exact per stage.

mod diagnostics;
mod residuals;

pub use diagnostics::{saturation_time, Check, DiagnosticsSeries, Quantity, RunSummary, ALL_QUANTITIES};
pub use residuals::{equation_residuals, EquationResidual, ResidualSet};

use crate::axisym;
use crate::error::{Error, Result};
use crate::field::{ScalarField, SpectralField, SpectralVector, VectorField};
use crate::grid::Grid;
use crate::snapshot::{self, FieldKind, Snapshot};
use crate::spectral;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// `||div v||_2 <= DIV_TOL ||v||_2` for a valid state.
pub const DIV_TOL: f64 = 1e-10;

/// Largest `dt max(1, |v|_inf) / dx` accepted by [`Stepper::step`] when no CFL number is set.
pub const HARD_CFL: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    Boussinesq,
    /// `rho` is identically zero.
    Euler,
    /// `v` is frozen (possibly zero); only `rho` evolves.
    Heat,
}

impl SimMode {
    pub fn name(self) -> &'static str {
        match self {
            SimMode::Boussinesq => "boussinesq",
            SimMode::Euler => "euler",
            SimMode::Heat => "heat",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub time: f64,
    pub steps: usize,
    pub v: SpectralVector,
    pub rho: SpectralField,
}

fn all_finite(u: &SpectralField) -> bool {
    u.coeffs().par_iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

impl SimState {
    /// Checks finiteness and `||div v||_2 <= DIV_TOL ||v||_2`.
    pub fn new(v: &VectorField, rho: &ScalarField) -> Result<Self> {
        v.grid().check_same(rho.grid())?;
        let state = Self { time: 0.0, steps: 0, v: v.to_spectral()?, rho: rho.to_spectral()? };
        state.validate()?;
        Ok(state)
    }

    pub fn zero(grid: Grid) -> Self {
        Self { time: 0.0, steps: 0, v: SpectralVector::zeros(grid), rho: SpectralField::zeros(grid) }
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    pub fn velocity(&self) -> VectorField {
        self.v.to_physical()
    }

    pub fn density(&self) -> ScalarField {
        self.rho.to_physical()
    }

    /// `||div v||_2 / ||v||_2`, zero for `v = 0`.
    pub fn divergence_ratio(&self) -> f64 {
        let e = self.v.energy();
        if e == 0.0 {
            0.0
        } else {
            (spectral::divergence(&self.v).energy() / e).sqrt()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in self.v.comps.iter().chain(std::iter::once(&self.rho)) {
            if !all_finite(c) {
                return Err(Error::Aborted {
                    time: self.time,
                    step: self.steps,
                    reason: "non-finite coefficient".into(),
                });
            }
        }
        let d = self.divergence_ratio();
        if d > DIV_TOL {
            return Err(Error::Precondition(format!("||div v|| / ||v|| = {d:.3e} exceeds {DIV_TOL:.0e}")));
        }
        Ok(())
    }
}

/// `e^{t Delta} u`.
pub fn heat_semigroup(u: &SpectralField, t: f64) -> SpectralField {
    u.map_modes(|m, c| c * (-m.k2 * t).exp())
}

fn is_zero(v: &SpectralVector) -> bool {
    v.comps.iter().all(|c| c.max_abs_coeff() == 0.0)
}

fn mean_free(u: &SpectralField) -> SpectralField {
    let mut out = u.clone();
    out.coeffs_mut()[0] = Complex64::default();
    out
}

/// Right-hand side evaluator and RK4 stepper for one mode of operation.
#[derive(Clone, Debug)]
pub struct Stepper {
    pub mode: SimMode,
    pub dealias: bool,
    /// Enforced `dt max(1, |v|_inf) / dx` limit.
    pub cfl_limit: f64,
    /// Constant source added to `d_t rho` (heat mode only).
    pub forcing: Option<SpectralField>,
}

impl Stepper {
    pub fn new(mode: SimMode) -> Self {
        Self { mode, dealias: true, cfl_limit: HARD_CFL, forcing: None }
    }

    fn truncate(&self, u: &SpectralField) -> SpectralField {
        if self.dealias {
            spectral::dealias(u)
        } else {
            u.clone()
        }
    }

    fn velocity_samples(&self, v: &SpectralVector) -> [ScalarField; 3] {
        std::array::from_fn(|i| self.truncate(&v.comps[i]).to_physical())
    }

    /// `P(sum_i v_i d_i P u)` with `v` given by (truncated) samples.
    fn advect(&self, vs: &[ScalarField; 3], u: &SpectralField) -> SpectralField {
        let g = *u.grid();
        let ut = self.truncate(u);
        let mut acc = ScalarField::zeros(g);
        for (i, vi) in vs.iter().enumerate() {
            let d = spectral::derivative(&ut, i).to_physical();
            acc.data_mut().par_iter_mut().zip(vi.data().par_iter().zip(d.data())).for_each(|(a, (x, y))| *a += x * y);
        }
        self.truncate(&acc.fft())
    }

    fn tendency_inner(&self, v: &SpectralVector, rho: &SpectralField, vs: Option<&[ScalarField; 3]>) -> (SpectralVector, SpectralField) {
        let g = *rho.grid();
        let moving = !is_zero(v);
        let owned;
        let vs = match vs {
            Some(s) => s,
            None => {
                owned = if moving { self.velocity_samples(v) } else { std::array::from_fn(|_| ScalarField::zeros(g)) };
                &owned
            }
        };
        let dv = match self.mode {
            SimMode::Heat => SpectralVector::zeros(g),
            SimMode::Euler | SimMode::Boussinesq => {
                let mut acc = SpectralVector::zeros(g);
                if moving {
                    for i in 0..3 {
                        acc.comps[i] = self.advect(vs, &v.comps[i]).scale(-1.0);
                    }
                }
                if self.mode == SimMode::Boussinesq {
                    acc.comps[2].axpy(1.0, &mean_free(rho));
                }
                spectral::leray_project(&acc)
            }
        };
        let mut drho = match self.mode {
            SimMode::Euler => SpectralField::zeros(g),
            _ if moving => self.advect(vs, rho).scale(-1.0),
            _ => SpectralField::zeros(g),
        };
        if let (SimMode::Heat, Some(f)) = (self.mode, &self.forcing) {
            drho.axpy(1.0, f);
        }
        (dv, drho)
    }

    /// `(d_t v, d_t rho)` without the diffusion of `rho`.
    pub fn tendency(&self, state: &SimState) -> Result<(SpectralVector, SpectralField)> {
        let (dv, drho) = self.tendency_inner(&state.v, &state.rho, None);
        let bad = dv.comps.iter().chain(std::iter::once(&drho)).any(|c| !all_finite(c));
        if bad {
            return Err(Error::Aborted { time: state.time, step: state.steps, reason: "non-finite tendency".into() });
        }
        Ok((dv, drho))
    }

    /// Largest `|v|` over the grid, from the truncated samples the stepper uses.
    pub fn max_speed(&self, v: &SpectralVector) -> f64 {
        if is_zero(v) {
            return 0.0;
        }
        VectorField { comps: self.velocity_samples(v) }.max_magnitude()
    }

    /// One Lawson RK4 step. Rejects `dt` beyond the CFL limit and non-finite results.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState> {
        self.step_full(state, dt).map(|(s, _)| s)
    }

    /// Step plus the first-stage tendency `d_t rho` at the initial state.
    fn step_full(&self, state: &SimState, dt: f64) -> Result<(SimState, SpectralField)> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
        }
        let g = *state.grid();
        let moving = !is_zero(&state.v);
        let vs = if moving { Some(self.velocity_samples(&state.v)) } else { None };
        let vmax = vs.as_ref().map_or(0.0, |s| VectorField { comps: s.clone() }.max_magnitude());
        let courant = dt * vmax.max(1.0) / g.spacing();
        if courant > self.cfl_limit * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!(
                "dt = {dt:.4e} gives Courant number {courant:.3} above {}",
                self.cfl_limit
            )));
        }
        let h = dt;
        let diffuse = self.mode != SimMode::Euler;
        let semigroup = |u: &SpectralField, t: f64| if diffuse { heat_semigroup(u, t) } else { u.clone() };
        let eh = |u: &SpectralField| semigroup(u, 0.5 * h);
        let ef = |u: &SpectralField| semigroup(u, h);
        let comb = |a: &SpectralVector, c: f64, b: &SpectralVector| {
            let mut out = a.clone();
            out.axpy(c, b);
            out
        };
        let (k1v, k1r) = self.tendency_inner(&state.v, &state.rho, vs.as_ref());
        let v2 = comb(&state.v, 0.5 * h, &k1v);
        let mut r2 = state.rho.clone();
        r2.axpy(0.5 * h, &k1r);
        let r2 = eh(&r2);
        let (k2v, k2r) = self.tendency_inner(&v2, &r2, None);
        let v3 = comb(&state.v, 0.5 * h, &k2v);
        let mut r3 = eh(&state.rho);
        r3.axpy(0.5 * h, &k2r);
        let (k3v, k3r) = self.tendency_inner(&v3, &r3, None);
        let v4 = comb(&state.v, h, &k3v);
        let mut r4 = ef(&state.rho);
        r4.axpy(h, &eh(&k3r));
        let (k4v, k4r) = self.tendency_inner(&v4, &r4, None);

        let mut v = state.v.clone();
        v.axpy(h / 6.0, &k1v);
        v.axpy(h / 3.0, &k2v);
        v.axpy(h / 3.0, &k3v);
        v.axpy(h / 6.0, &k4v);
        let v = if self.mode == SimMode::Heat { state.v.clone() } else { spectral::leray_project(&v) };
        let mut mid = k2r.clone();
        mid.axpy(1.0, &k3r);
        let mut rho = ef(&state.rho);
        rho.axpy(h / 6.0, &ef(&k1r));
        rho.axpy(h / 3.0, &eh(&mid));
        rho.axpy(h / 6.0, &k4r);
        let next = SimState { time: state.time + h, steps: state.steps + 1, v, rho };
        for c in next.v.comps.iter().chain(std::iter::once(&next.rho)) {
            if !all_finite(c) {
                return Err(Error::Aborted { time: next.time, step: next.steps, reason: "non-finite state".into() });
            }
        }
        Ok((next, k1r))
    }
}

/// Boussinesq tendency with dealiasing.
pub fn tendency(state: &SimState) -> Result<(SpectralVector, SpectralField)> {
    Stepper::new(SimMode::Boussinesq).tendency(state)
}

/// Boussinesq RK4 step.
pub fn step(state: &SimState, dt: f64) -> Result<SimState> {
    Stepper::new(SimMode::Boussinesq).step(state, dt)
}

/// `-(v.grad) v` in advective and divergence form, both projected and dealiased.
pub fn advective_forms(v: &SpectralVector) -> (SpectralVector, SpectralVector) {
    let st = Stepper::new(SimMode::Euler);
    let vs = st.velocity_samples(v);
    let adv = SpectralVector { comps: std::array::from_fn(|i| st.advect(&vs, &v.comps[i]).scale(-1.0)) };
    let g = *v.grid();
    let mut div = SpectralVector::zeros(g);
    for i in 0..3 {
        for j in 0..3 {
            let prod = spectral::dealias(&vs[i].mul(&vs[j]).fft());
            div.comps[i].axpy(-1.0, &spectral::derivative(&prod, j));
        }
    }
    (spectral::leray_project(&adv), spectral::leray_project(&div))
}

/// `Gamma = zeta + (d_r / r) Delta^-1 rho` for an axisymmetric state without swirl.
pub fn gamma(state: &SimState) -> Result<ScalarField> {
    let z = axisym::zeta(&state.velocity())?;
    let rho = state.density();
    Ok(z.add(&axisym::dr_over_r_inv_laplacian(&rho)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeStep {
    Fixed(f64),
    /// `dt = c dx / max(1, |v|_inf)`, recomputed every step.
    Cfl(f64),
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub grid: Grid,
    pub time_step: TimeStep,
    pub t_end: f64,
    pub mode: SimMode,
    /// Diagnostics every `cadence` steps (and at the final time).
    pub cadence: usize,
    pub diagnostics: Vec<Quantity>,
    pub dealias: bool,
    /// Sobolev exponent of the `||v||_{H^s}` diagnostic.
    pub sobolev_s: f64,
    /// Extra Lebesgue exponent `m` for `||rho||_{L^m}`.
    pub lebesgue_m: f64,
    /// Abort when `|v|_inf` exceeds this.
    pub ceiling: f64,
    /// Snapshots of `rho` and `v` at every diagnostic sample.
    pub checkpoint_dir: Option<PathBuf>,
    pub forcing: Option<SpectralField>,
}

impl SimConfig {
    pub fn new(grid: Grid, mode: SimMode, t_end: f64) -> Self {
        Self {
            grid,
            time_step: TimeStep::Cfl(0.5),
            t_end,
            mode,
            cadence: 10,
            diagnostics: ALL_QUANTITIES.to_vec(),
            dealias: true,
            sobolev_s: 2.6,
            lebesgue_m: 4.0,
            ceiling: 1e3,
            checkpoint_dir: None,
            forcing: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self.time_step {
            TimeStep::Fixed(dt) if !(dt > 0.0 && dt.is_finite()) => return bad(format!("dt = {dt} must be positive")),
            TimeStep::Cfl(c) if !(c > 0.0 && c <= HARD_CFL) => return bad(format!("cfl = {c} must lie in (0, {HARD_CFL}]")),
            _ => {}
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("end time {} must be finite and nonnegative", self.t_end));
        }
        if self.cadence == 0 {
            return bad("cadence must be at least 1".into());
        }
        if !(self.sobolev_s > 2.5) {
            return bad(format!("Sobolev exponent {} must exceed 5/2", self.sobolev_s));
        }
        if !(self.lebesgue_m >= 1.0) {
            return bad(format!("Lebesgue exponent {} must be at least 1", self.lebesgue_m));
        }
        if self.forcing.is_some() && self.mode != SimMode::Heat {
            return bad("a density source is only supported in heat mode".into());
        }
        Ok(())
    }

    pub fn stepper(&self) -> Stepper {
        let cfl_limit = match self.time_step {
            TimeStep::Fixed(_) => HARD_CFL,
            TimeStep::Cfl(c) => c,
        };
        Stepper { mode: self.mode, dealias: self.dealias, cfl_limit, forcing: self.forcing.clone() }
    }
}

/// Stepping loop with diagnostics, dissipation accounting and checkpoints.
pub struct Simulation {
    pub config: SimConfig,
    stepper: Stepper,
    state: SimState,
    series: DiagnosticsSeries,
    dissipation: f64,
    /// Non-diffusive `d_t rho` at the current state, if known.
    rate: Option<SpectralField>,
    checkpoints: Vec<PathBuf>,
    tracker: diagnostics::Tracker,
}

/// `psi(x) / x^3`, `psi'(x) / x^2` and `Psi(x) / x^4` for
/// `psi(x) = e^-x - 1 + x - x^2/2` and `Psi` its antiderivative vanishing at 0.
fn fitted_basis(x: f64) -> (f64, f64, f64) {
    if x < 0.5 {
        let (mut b, mut bp, mut i) = (0.0, 0.0, 0.0);
        let mut c = -1.0 / 6.0;
        for j in 3..24 {
            b += c * x.powi(j - 3);
            c *= -1.0 / (j + 1) as f64;
        }
        let mut c = -1.0 / 2.0;
        for j in 2..24 {
            bp += c * x.powi(j - 2);
            c *= -1.0 / (j + 1) as f64;
        }
        let mut c = -1.0 / 24.0;
        for j in 4..24 {
            i += c * x.powi(j - 4);
            c *= -1.0 / (j + 1) as f64;
        }
        (b, bp, i)
    } else {
        let e = (-x).exp();
        let psi = e - 1.0 + x - 0.5 * x * x;
        let dpsi = -e + 1.0 - x;
        let ipsi = 1.0 - e - x + 0.5 * x * x - x * x * x / 6.0;
        (psi / x.powi(3), dpsi / (x * x), ipsi / x.powi(4))
    }
}

/// `int_0^h f` from end values and slopes, exact on `{1, s, s^2, e^{-lam s}}`.
fn fitted_hermite(f0: f64, d0: f64, f1: f64, d1: f64, lam: f64, h: f64) -> f64 {
    let (b, bp, i3) = fitted_basis(lam * h);
    let c1 = h * d0;
    let r1 = f1 - f0 - c1;
    let r2 = h * d1 - c1;
    let c3 = (r2 - 2.0 * r1) / (bp - 2.0 * b);
    h * (f0 + 0.5 * c1 + r1 / 3.0 + c3 * (i3 - b / 3.0))
}

/// `int_t^{t+h} ||grad rho||^2` from the end states and their non-diffusive tendencies,
/// mode by mode with decay rate `2|k|^2`.
fn dissipation_step(r0: &SpectralField, n0: &SpectralField, r1: &SpectralField, n1: &SpectralField, h: f64) -> f64 {
    let g = *r0.grid();
    let k2 = r0.map_modes(|m, _| Complex64::new(m.k2, 0.0));
    let nh = g.nh();
    let (a0, b0, a1, b1, kk) = (r0.coeffs(), n0.coeffs(), r1.coeffs(), n1.coeffs(), k2.coeffs());
    let partials: Vec<f64> = (0..a0.len() / nh)
        .into_par_iter()
        .map(|line| {
            crate::reduce::compensated_sum((0..nh).map(|i3| {
                let i = line * nh + i3;
                let k = kk[i].re;
                if k == 0.0 {
                    return 0.0;
                }
                let w = if i3 == 0 || i3 == nh - 1 { 1.0 } else { 2.0 };
                let f0 = a0[i].norm_sqr();
                let f1 = a1[i].norm_sqr();
                let d0 = 2.0 * (a0[i].conj() * (b0[i] - a0[i] * k)).re;
                let d1 = 2.0 * (a1[i].conj() * (b1[i] - a1[i] * k)).re;
                w * k * fitted_hermite(f0, d0, f1, d1, 2.0 * k, h)
            }))
        })
        .collect();
    g.volume() * crate::reduce::compensated_sum(partials)
}

impl Simulation {
    pub fn new(config: SimConfig, init: SimState) -> Result<Self> {
        config.validate()?;
        config.grid.check_same(init.grid())?;
        init.validate()?;
        let mut init = init;
        match config.mode {
            SimMode::Euler => init.rho = SpectralField::zeros(config.grid),
            SimMode::Heat | SimMode::Boussinesq => {}
        }
        let stepper = config.stepper();
        let tracker = diagnostics::Tracker::new(&config, &init)?;
        let series = DiagnosticsSeries::new(&config.diagnostics);
        let mut sim = Self { config, stepper, state: init, series, dissipation: 0.0, rate: None, checkpoints: Vec::new(), tracker };
        sim.sample()?;
        Ok(sim)
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn series(&self) -> &DiagnosticsSeries {
        &self.series
    }

    pub fn checkpoints(&self) -> &[PathBuf] {
        &self.checkpoints
    }

    /// `2 int_0^t ||grad rho||^2` accumulated so far.
    pub fn dissipation(&self) -> f64 {
        2.0 * self.dissipation
    }

    fn next_dt(&self) -> f64 {
        let left = self.config.t_end - self.state.time;
        let dt = match self.config.time_step {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Cfl(c) => c * self.config.grid.spacing() / self.stepper.max_speed(&self.state.v).max(1.0),
        };
        if left <= dt * (1.0 + 1e-9) {
            left
        } else {
            dt
        }
    }

    /// Advances one step of size `dt` and accumulates `int ||grad rho||^2`.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        let (next, k1) = self.stepper.step_full(&self.state, dt)?;
        if self.config.mode != SimMode::Euler {
            let start = self.rate.take().unwrap_or(k1);
            let (_, end) = self.stepper.tendency(&next)?;
            self.dissipation += dissipation_step(&self.state.rho, &start, &next.rho, &end, dt);
            self.rate = Some(end);
        }
        self.state = next;
        let vmax = self.stepper.max_speed(&self.state.v);
        if vmax > self.config.ceiling {
            return Err(Error::Aborted {
                time: self.state.time,
                step: self.state.steps,
                reason: format!("|v|_inf = {vmax:.3e} exceeds ceiling {:.3e}", self.config.ceiling),
            });
        }
        if self.state.steps % self.config.cadence == 0 || self.done() {
            self.sample()?;
        }
        Ok(())
    }

    pub fn done(&self) -> bool {
        self.state.time >= self.config.t_end * (1.0 - 1e-12)
    }

    fn sample(&mut self) -> Result<()> {
        let values = self.tracker.record(&self.state, 2.0 * self.dissipation)?;
        self.series.push(self.state.time, self.state.steps, values)?;
        if let Some(dir) = &self.config.checkpoint_dir {
            let paths = write_checkpoint(dir, &self.state, self.config.mode)?;
            self.checkpoints.extend(paths);
        }
        Ok(())
    }

    /// Steps to the end time. An abort keeps the partial series.
    pub fn run(&mut self) -> std::result::Result<(), Error> {
        while !self.done() {
            let dt = self.next_dt();
            self.advance(dt)?;
        }
        Ok(())
    }

    pub fn summary(&self, abort: Option<&Error>) -> RunSummary {
        diagnostics::summarize(&self.config, &self.series, abort)
    }
}

/// Writes `rho_<step>.axbl` and `v_<step>.axbl`.
pub fn write_checkpoint(dir: &Path, state: &SimState, mode: SimMode) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let tag = format!("solver:{}", mode.name());
    let rp = dir.join(format!("rho_{:06}.axbl", state.steps));
    snapshot::write(&rp, &Snapshot::scalar(&state.density(), FieldKind::Density, state.time, &tag))?;
    let vp = dir.join(format!("v_{:06}.axbl", state.steps));
    snapshot::write(&vp, &Snapshot::vector(&state.velocity(), FieldKind::Velocity, state.time, &tag))?;
    Ok(vec![rp, vp])
}

/// Result of [`run`]: the (possibly partial) series, its summary and the abort, if any.
pub struct RunOutput {
    pub series: DiagnosticsSeries,
    pub summary: RunSummary,
    pub checkpoints: Vec<PathBuf>,
    pub abort: Option<Error>,
    pub final_state: SimState,
}

pub fn run(config: SimConfig, init: SimState) -> Result<RunOutput> {
    let mut sim = Simulation::new(config, init)?;
    let abort = sim.run().err();
    if let Some(e) = &abort {
        if !matches!(e, Error::Aborted { .. }) {
            return Err(abort.unwrap());
        }
    }
    let summary = sim.summary(abort.as_ref());
    Ok(RunOutput {
        series: sim.series.clone(),
        summary,
        checkpoints: sim.checkpoints.clone(),
        abort,
        final_state: sim.state.clone(),
    })
}

#[cfg(test)]
mod tests;
