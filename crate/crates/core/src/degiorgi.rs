//! Level-set (De Giorgi) certification of sup bounds for traces of
//! `d_t f + u.grad f - Delta f = div F + G`.
//!
//! For a candidate bound `M` the ladder `M_k = M (1 - 1/(k+1))` is walked and the
//! energies `U_k = sup_t ||(f - M_k)_+||_2^2 + int ||grad (f - M_k)_+||_2^2` are
//! measured on the trace. `M` is certified when some `U_k`, `k <= 40`, falls below
//! the floor `max(1e-14 U_0, 1e-30)`. Both `f` and `-f` are certified, so the result
//! bounds `|f|`. The recursion inequality of the iteration is audited on the
//! measured `U_k`, never assumed.

use crate::error::{Error, Result};
use crate::field::{ScalarField, SpectralField, VectorField};
use crate::grid::Grid;
use crate::reduce::linear_fit;
use crate::snapshot::{self, FieldKind};
use crate::solver::{SimMode, SimState, Stepper};
use crate::spectral;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Space-time exponents: `F` in `L^p_t L^q_x`, `G` in `L^{p1}_t L^{q1}_x`, `f_0` in `L^r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    pub p1: f64,
    pub q1: f64,
    pub r: f64,
}

impl Default for Exponents {
    fn default() -> Self {
        Self { p: f64::INFINITY, q: 6.0, p1: f64::INFINITY, q1: 3.0, r: 2.0 }
    }
}

fn inv(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

impl Exponents {
    /// `2/p + 3/q`.
    pub fn flux_index(&self) -> f64 {
        2.0 * inv(self.p) + 3.0 * inv(self.q)
    }

    /// `2/p1 + 3/q1`.
    pub fn source_index(&self) -> f64 {
        2.0 * inv(self.p1) + 3.0 * inv(self.q1)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("p", self.p), ("q", self.q), ("p1", self.p1), ("q1", self.q1), ("r", self.r)] {
            if !(x >= 1.0) {
                return Err(Error::InvalidArgument(format!("exponent {name} = {x} must be at least 1")));
            }
        }
        if !(self.flux_index() < 1.0) {
            return Err(Error::Precondition(format!("2/p + 3/q = {} must be below 1", self.flux_index())));
        }
        if !(self.source_index() < 2.0) {
            return Err(Error::Precondition(format!("2/p1 + 3/q1 = {} must be below 2", self.source_index())));
        }
        Ok(())
    }
}

/// Uniformly spaced snapshots of `f` with optional flux `F` and source `G`.
#[derive(Clone, Debug)]
pub struct SolutionTrace {
    pub times: Vec<f64>,
    pub f: Vec<ScalarField>,
    pub flux: Option<Vec<VectorField>>,
    pub source: Option<Vec<ScalarField>>,
    pub exponents: Exponents,
}

impl SolutionTrace {
    pub fn new(
        times: Vec<f64>,
        f: Vec<ScalarField>,
        flux: Option<Vec<VectorField>>,
        source: Option<Vec<ScalarField>>,
        exponents: Exponents,
    ) -> Result<Self> {
        exponents.validate()?;
        if f.len() < 2 || times.len() != f.len() {
            return Err(Error::InvalidArgument(format!("{} times for {} snapshots; need at least 2", times.len(), f.len())));
        }
        let g = *f[0].grid();
        for u in &f {
            g.check_same(u.grid())?;
            u.check_finite()?;
        }
        let h = times[1] - times[0];
        if !(h > 0.0) {
            return Err(Error::InvalidArgument("snapshot times must increase".into()));
        }
        for (i, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(times[times.len() - 1].abs()) {
                return Err(Error::InvalidArgument(format!("snapshot spacing is not uniform at index {}", i + 1)));
            }
        }
        if let Some(fl) = &flux {
            if fl.len() != f.len() {
                return Err(Error::InvalidArgument(format!("{} flux snapshots for {} times", fl.len(), f.len())));
            }
            for v in fl {
                g.check_same(v.grid())?;
            }
        }
        if let Some(src) = &source {
            if src.len() != f.len() {
                return Err(Error::InvalidArgument(format!("{} source snapshots for {} times", src.len(), f.len())));
            }
            for s in src {
                g.check_same(s.grid())?;
            }
        }
        Ok(Self { times, f, flux, source, exponents })
    }

    /// Loads `f` from density snapshots (or scalar files named `f_*`), `F` from
    /// `F_*` and `G` from `G_*`; other files (e.g. velocity checkpoints) are ignored.
    pub fn load(dir: &Path, exponents: Exponents) -> Result<Self> {
        let mut entries: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map_or(false, |x| x == "axbl"))
            .collect();
        entries.sort();
        let mut f = Vec::new();
        let mut flux = Vec::new();
        let mut source = Vec::new();
        for path in entries {
            let name = path.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let snap = snapshot::read(&path)?;
            let t = snap.meta.time;
            if name.starts_with("F_") {
                flux.push((t, snap.into_vector()?));
            } else if name.starts_with("G_") {
                source.push((t, snap.into_scalar()?));
            } else if snap.meta.kind == FieldKind::Density || (name.starts_with("f_") && snap.meta.kind == FieldKind::Scalar) {
                f.push((t, snap.into_scalar()?));
            }
        }
        if f.is_empty() {
            return Err(Error::InvalidArgument(format!("no density snapshots in {}", dir.display())));
        }
        let by_time = |a: &(f64, _), b: &(f64, _)| a.0.total_cmp(&b.0);
        f.sort_by(by_time);
        flux.sort_by(|a, b| a.0.total_cmp(&b.0));
        source.sort_by(by_time);
        let times: Vec<f64> = f.iter().map(|x| x.0).collect();
        let matches = |ts: Vec<f64>| ts.len() == times.len() && ts.iter().zip(&times).all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
        if !flux.is_empty() && !matches(flux.iter().map(|x| x.0).collect()) {
            return Err(Error::InvalidArgument("flux snapshot times differ from density times".into()));
        }
        if !source.is_empty() && !matches(source.iter().map(|x| x.0).collect()) {
            return Err(Error::InvalidArgument("source snapshot times differ from density times".into()));
        }
        let flux = (!flux.is_empty()).then(|| flux.into_iter().map(|x| x.1).collect());
        let source = (!source.is_empty()).then(|| source.into_iter().map(|x| x.1).collect());
        Self::new(times, f.into_iter().map(|x| x.1).collect(), flux, source, exponents)
    }

    pub fn grid(&self) -> &Grid {
        self.f[0].grid()
    }

    pub fn spacing(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// `max |f|` over snapshots with `t >= start`.
    pub fn measured_sup(&self, start: f64) -> f64 {
        self.times.iter().zip(&self.f).filter(|(t, _)| **t >= start - 1e-12).map(|(_, u)| u.max_abs()).fold(0.0, f64::max)
    }

    pub fn negated(&self) -> Self {
        Self {
            times: self.times.clone(),
            f: self.f.iter().map(|u| u.scale(-1.0)).collect(),
            flux: self.flux.as_ref().map(|fl| fl.iter().map(|v| v.scale(-1.0)).collect()),
            source: self.source.as_ref().map(|s| s.iter().map(|u| u.scale(-1.0)).collect()),
            exponents: self.exponents,
        }
    }

    /// Every other snapshot, starting with the first.
    pub fn coarsened(&self) -> Option<Self> {
        if self.times.len() < 3 {
            return None;
        }
        let pick = |i: usize| i % 2 == 0;
        let sel = |n: usize| (0..n).filter(|&i| pick(i));
        Some(Self {
            times: sel(self.times.len()).map(|i| self.times[i]).collect(),
            f: sel(self.f.len()).map(|i| self.f[i].clone()).collect(),
            flux: self.flux.as_ref().map(|fl| sel(fl.len()).map(|i| fl[i].clone()).collect()),
            source: self.source.as_ref().map(|s| sel(s.len()).map(|i| s[i].clone()).collect()),
            exponents: self.exponents,
        })
    }
}

fn positive_part_energies(u: &ScalarField, level: f64) -> (f64, f64) {
    if u.max() <= level {
        return (0.0, 0.0);
    }
    let w = u.map(|x| (x - level).max(0.0));
    let l2 = w.data().iter().map(|x| x * x).sum::<f64>() * u.grid().cell_volume();
    let grad = spectral::gradient_energy(&w.fft());
    (l2, grad)
}

/// `sup_{t_j >= s} ||(f - level)_+||^2 + int_s^T ||grad (f - level)_+||^2`, the
/// supremum over snapshots and the integral by the trapezoid rule over snapshots in the window.
pub fn level_energy(trace: &SolutionTrace, level: f64, start: f64) -> f64 {
    let idx: Vec<usize> = (0..trace.times.len()).filter(|&i| trace.times[i] >= start - 1e-12).collect();
    let parts: Vec<(f64, f64)> = idx.par_iter().map(|&i| positive_part_energies(&trace.f[i], level)).collect();
    let sup = parts.iter().map(|p| p.0).fold(0.0, f64::max);
    let h = trace.spacing();
    let mut integral = 0.0;
    for w in parts.windows(2) {
        integral += 0.5 * h * (w[0].1 + w[1].1);
    }
    sup + integral
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Zero initial data driven by `F`, `G`: window `[0, T]`.
    Source,
    /// Initial-data branch: shrinking windows `[T_k, T]`, `T_k = t1 (1 - 1/(k+1))`, `t1 = T/2`.
    Initial,
    /// Whole trace, window `[0, T]`.
    Full,
}

impl Branch {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "source" => Some(Branch::Source),
            "initial" => Some(Branch::Initial),
            "full" => Some(Branch::Full),
            _ => None,
        }
    }

    /// Start of the window on which the certified bound holds.
    pub fn certified_from(self, t_end: f64) -> f64 {
        match self {
            Branch::Initial => 0.5 * t_end,
            Branch::Source | Branch::Full => 0.0,
        }
    }

    fn window(self, k: usize, t_end: f64) -> f64 {
        match self {
            Branch::Initial => 0.5 * t_end * (1.0 - 1.0 / (k + 1) as f64),
            Branch::Source | Branch::Full => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    /// Smallest candidate bound.
    pub floor: f64,
    /// Largest candidate bound.
    pub ceiling: f64,
    /// Bisection stops when `hi / lo <= resolution`.
    pub resolution: f64,
    pub max_k: usize,
    /// Also certify on every other snapshot and report the relative change.
    pub spacing_sensitivity: bool,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self { floor: 1e-12, ceiling: 1e12, resolution: 1.01, max_k: 40, spacing_sensitivity: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub k: usize,
    pub level: f64,
    pub window_start: f64,
    pub energy: f64,
}

/// One walk of the ladder for a candidate `M` on one sign of `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelIteration {
    pub level: f64,
    /// `+1` for `f`, `-1` for `-f`.
    pub sign: i8,
    pub rungs: Vec<Rung>,
    pub energy_floor: f64,
    pub certified: bool,
}

pub fn run_ladder(trace: &SolutionTrace, m: f64, branch: Branch, max_k: usize, sign: i8) -> LevelIteration {
    let t_end = trace.end_time();
    let mut rungs = Vec::new();
    let mut floor = 1e-30;
    let mut certified = false;
    for k in 0..=max_k {
        let level = m * (1.0 - 1.0 / (k + 1) as f64);
        let start = branch.window(k, t_end);
        let energy = level_energy(trace, level, start);
        if k == 0 {
            floor = (1e-14 * energy).max(1e-30);
        }
        rungs.push(Rung { k, level, window_start: start, energy });
        if energy <= floor {
            certified = true;
            break;
        }
    }
    LevelIteration { level: m, sign, rungs, energy_floor: floor, certified }
}

/// Audit of `U_k <= A (k+1)^2 ((k+1)^2 / M)^{4/3} U_{k-1}^{4/3}` on measured energies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionAudit {
    /// Smallest `A` for which every audited step holds.
    pub constant: f64,
    pub steps: usize,
    /// Fitted `gamma` in `U_k ~ U_{k-1}^gamma`, if at least three steps are available.
    pub exponent: Option<f64>,
    /// True when the fitted exponent is at most 1.
    pub flagged: bool,
}

pub fn audit_recursion(it: &LevelIteration) -> RecursionAudit {
    let m = it.level;
    let mut constant = 0.0f64;
    let mut steps = 0;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for w in it.rungs.windows(2) {
        let (prev, cur) = (w[0].energy, w[1].energy);
        if prev <= it.energy_floor || cur <= it.energy_floor {
            continue;
        }
        let k1 = (w[1].k + 1) as f64;
        let bound = k1 * k1 * (k1 * k1 / m).powf(4.0 / 3.0) * prev.powf(4.0 / 3.0);
        constant = constant.max(cur / bound);
        steps += 1;
        xs.push(prev.ln());
        ys.push(cur.ln());
    }
    let exponent = (xs.len() >= 3).then(|| linear_fit(&xs, &ys).1);
    RecursionAudit { constant, steps, exponent, flagged: exponent.map_or(false, |g| g <= 1.0) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub candidate: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub branch: Branch,
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    /// Certified bound on `|f|` over `[window_start, T]`, `None` when no candidate up to the ceiling certifies.
    pub bound: Option<f64>,
    pub verdict: String,
    pub window_start: f64,
    pub measured_sup: f64,
    pub sound: bool,
    pub bisection: Vec<BisectionStep>,
    /// Ladders at the certified bound, for `f` and `-f`.
    pub transcript: Vec<LevelIteration>,
    pub audit: Vec<RecursionAudit>,
    /// `|M(every other snapshot) / M - 1|`.
    pub spacing_sensitivity: Option<f64>,
}

fn certifies(trace: &SolutionTrace, neg: &SolutionTrace, m: f64, branch: Branch, max_k: usize) -> bool {
    run_ladder(trace, m, branch, max_k, 1).certified && run_ladder(neg, m, branch, max_k, -1).certified
}

/// Geometric bisection between `cfg.floor` and `cfg.ceiling`; `None` if the ceiling fails.
fn bisect(trace: &SolutionTrace, branch: Branch, cfg: &CertifyConfig, log: &mut Vec<BisectionStep>) -> Option<f64> {
    let neg = trace.negated();
    let mut test = |m: f64| {
        let ok = certifies(trace, &neg, m, branch, cfg.max_k);
        log.push(BisectionStep { candidate: m, certified: ok });
        ok
    };
    if test(cfg.floor) {
        return Some(cfg.floor);
    }
    if !test(cfg.ceiling) {
        return None;
    }
    let (mut lo, mut hi) = (cfg.floor, cfg.ceiling);
    while hi / lo > cfg.resolution {
        let mid = (lo * hi).sqrt();
        if test(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

pub fn certify_sup_bound(trace: &SolutionTrace, branch: Branch, cfg: &CertifyConfig) -> Result<Certificate> {
    if !(cfg.floor > 0.0 && cfg.ceiling > cfg.floor && cfg.resolution > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < floor < ceiling and resolution > 1, got {} / {} / {}",
            cfg.floor, cfg.ceiling, cfg.resolution
        )));
    }
    let g = *trace.grid();
    let start = branch.certified_from(trace.end_time());
    let measured = trace.measured_sup(start);
    let mut log = Vec::new();
    let bound = bisect(trace, branch, cfg, &mut log);
    let (transcript, audit) = match bound {
        Some(m) => {
            let its = vec![run_ladder(trace, m, branch, cfg.max_k, 1), run_ladder(&trace.negated(), m, branch, cfg.max_k, -1)];
            let audit = its.iter().map(audit_recursion).collect();
            (its, audit)
        }
        None => (Vec::new(), Vec::new()),
    };
    let spacing_sensitivity = match (bound, cfg.spacing_sensitivity, trace.coarsened()) {
        (Some(m), true, Some(coarse)) => {
            let mut scratch = Vec::new();
            bisect(&coarse, branch, &CertifyConfig { spacing_sensitivity: false, ..*cfg }, &mut scratch).map(|mc| (mc / m - 1.0).abs())
        }
        _ => None,
    };
    let sound = bound.map_or(true, |m| m >= measured);
    let verdict = match bound {
        Some(m) => format!("certified |f| <= {m:.6e} on [{start}, {}]", trace.end_time()),
        None => format!("no bound up to {:.3e} certifies", cfg.ceiling),
    };
    Ok(Certificate {
        branch,
        n: g.n,
        half_width: g.half_width,
        bound,
        verdict,
        window_start: start,
        measured_sup: measured,
        sound,
        bisection: log,
        transcript,
        audit,
        spacing_sensitivity,
    })
}

/// `||X||_{L^p_t L^q_x}` over the trace for per-snapshot values `||X(t_j)||_{L^q}`.
fn time_norm(values: &[f64], p: f64, h: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().copied().fold(0.0, f64::max);
    }
    let mut s = 0.0;
    for w in values.windows(2) {
        s += 0.5 * h * (w[0].powf(p) + w[1].powf(p));
    }
    s.powf(1.0 / p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSample {
    pub time: f64,
    pub sup: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Right side of the sup estimate in the unit-time normalization:
/// `(1 + s^{-3/(2r)}) T^{-3/(2r)} ||f_0||_r + K_F + K_G` with `s = t/T`,
/// `K_F = sqrt(T)^{1 - (2/p + 3/q)} ||F||_{L^p_T L^q}` and
/// `K_G = sqrt(T)^{2 - (2/p1 + 3/q1)} ||G||_{L^p1_T L^q1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub t_end: f64,
    pub initial_norm: f64,
    pub flux_term: f64,
    pub source_term: f64,
    pub samples: Vec<EstimateSample>,
    pub max_ratio: f64,
    /// Slope of `log sup|f|` against `log t` over `[t_end/10, t_end]`.
    pub decay_exponent: Option<f64>,
}

pub fn check_estimate(trace: &SolutionTrace) -> Estimate {
    let e = trace.exponents;
    let t_end = trace.end_time() - trace.times[0];
    let h = trace.spacing();
    let r = e.r;
    let initial_norm = trace.f[0].lebesgue_norm(r);
    let flux_term = trace.flux.as_ref().map_or(0.0, |fl| {
        let vals: Vec<f64> = fl.iter().map(|v| v.magnitude().lebesgue_norm(e.q)).collect();
        t_end.sqrt().powf(1.0 - e.flux_index()) * time_norm(&vals, e.p, h)
    });
    let source_term = trace.source.as_ref().map_or(0.0, |src| {
        let vals: Vec<f64> = src.iter().map(|u| u.lebesgue_norm(e.q1)).collect();
        t_end.sqrt().powf(2.0 - e.source_index()) * time_norm(&vals, e.p1, h)
    });
    let a = 3.0 / (2.0 * r);
    let samples: Vec<EstimateSample> = trace
        .times
        .iter()
        .zip(&trace.f)
        .skip(1)
        .map(|(&t, u)| {
            let s = (t - trace.times[0]) / t_end;
            let rhs = (1.0 + s.powf(-a)) * t_end.powf(-a) * initial_norm + flux_term + source_term;
            let sup = u.max_abs();
            EstimateSample { time: t, sup, rhs, ratio: if rhs > 0.0 { sup / rhs } else { 0.0 } }
        })
        .collect();
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let (xs, ys): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .filter(|s| s.time - trace.times[0] >= 0.1 * t_end * (1.0 - 1e-9) && s.sup > 0.0)
        .map(|s| ((s.time - trace.times[0]).ln(), s.sup.ln()))
        .unzip();
    let decay_exponent = (xs.len() >= 3).then(|| linear_fit(&xs, &ys).1);
    let g = trace.grid();
    Estimate { n: g.n, half_width: g.half_width, t_end, initial_norm, flux_term, source_term, samples, max_ratio, decay_exponent }
}

/// Largest relative difference between the ratio curves of two estimates at matching normalized times.
pub fn overlay_defect(a: &Estimate, b: &Estimate) -> Result<f64> {
    if a.samples.len() != b.samples.len() {
        return Err(Error::InvalidArgument(format!("{} vs {} samples", a.samples.len(), b.samples.len())));
    }
    let mut worst = 0.0f64;
    for (x, y) in a.samples.iter().zip(&b.samples) {
        let (sx, sy) = (x.time / a.t_end, y.time / b.t_end);
        if (sx - sy).abs() > 1e-9 {
            return Err(Error::InvalidArgument("normalized sample times differ".into()));
        }
        let den = x.ratio.abs().max(y.ratio.abs());
        if den > 0.0 {
            worst = worst.max((x.ratio - y.ratio).abs() / den);
        }
    }
    Ok(worst)
}

/// Inputs of a scalar transport trace `d_t f + u.grad f - Delta f = div F + G` with frozen `u`, `F`, `G`.
#[derive(Clone, Debug)]
pub struct TransportProblem {
    pub f0: ScalarField,
    pub velocity: Option<VectorField>,
    pub flux: Option<VectorField>,
    pub source: Option<ScalarField>,
    pub t_end: f64,
    /// Number of intervals between snapshots.
    pub intervals: usize,
    /// Steps per interval.
    pub substeps: usize,
    pub exponents: Exponents,
}

impl TransportProblem {
    /// Same solution seen at scale `lambda`: box `lambda L`, times `lambda^2 t`,
    /// `u / lambda`, `F / lambda`, `G / lambda^2`, identical samples of `f_0`.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        let g = *self.f0.grid();
        let g2 = Grid::new(g.n, lambda * g.half_width)?;
        let re = |u: &ScalarField, c: f64| ScalarField::new(g2, u.data().iter().map(|x| c * x).collect());
        let rev = |v: &VectorField, c: f64| -> Result<VectorField> {
            VectorField::new([re(&v.comps[0], c)?, re(&v.comps[1], c)?, re(&v.comps[2], c)?])
        };
        Ok(Self {
            f0: re(&self.f0, 1.0)?,
            velocity: self.velocity.as_ref().map(|v| rev(v, 1.0 / lambda)).transpose()?,
            flux: self.flux.as_ref().map(|v| rev(v, 1.0 / lambda)).transpose()?,
            source: self.source.as_ref().map(|u| re(u, 1.0 / (lambda * lambda))).transpose()?,
            t_end: lambda * lambda * self.t_end,
            intervals: self.intervals,
            substeps: self.substeps,
            exponents: self.exponents,
        })
    }

    /// Integrates with the heat-mode Lawson RK4 stepper and records snapshots.
    pub fn solve(&self) -> Result<SolutionTrace> {
        let g = *self.f0.grid();
        if self.intervals == 0 || self.substeps == 0 || !(self.t_end > 0.0) {
            return Err(Error::InvalidArgument("need positive end time, intervals and substeps".into()));
        }
        let v = self.velocity.clone().unwrap_or_else(|| VectorField::zeros(g));
        let mut state = SimState::new(&v, &self.f0)?;
        let mut forcing = SpectralField::zeros(g);
        if let Some(fl) = &self.flux {
            forcing.axpy(1.0, &spectral::divergence(&fl.to_spectral()?));
        }
        if let Some(src) = &self.source {
            forcing.axpy(1.0, &src.to_spectral()?);
        }
        let mut stepper = Stepper::new(SimMode::Heat);
        stepper.forcing = Some(forcing);
        let dt = self.t_end / (self.intervals * self.substeps) as f64;
        let mut times = vec![0.0];
        let mut f = vec![self.f0.clone()];
        for i in 1..=self.intervals {
            for _ in 0..self.substeps {
                state = stepper.step(&state, dt)?;
            }
            times.push(self.t_end * i as f64 / self.intervals as f64);
            f.push(state.density());
        }
        let count = f.len();
        let flux = self.flux.as_ref().map(|fl| vec![fl.clone(); count]);
        let source = self.source.as_ref().map(|s| vec![s.clone(); count]);
        SolutionTrace::new(times, f, flux, source, self.exponents)
    }
}
