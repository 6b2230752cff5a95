//! TOML run configuration for `simulate`. The schema is documented in `configs/SCHEMA.md`.

use axbl::axisym::{make_axisym_scalar, make_noswirl_velocity, AxisymProfile, Ring};
use axbl::solver::{Quantity, SimConfig, SimMode, SimState, TimeStep};
use axbl::{Grid, ScalarField, VectorField};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: String,
    pub grid: GridSection,
    pub time: TimeSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub solver: SolverSection,
    /// Quantity names; all quantities when absent.
    pub diagnostics: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: Option<f64>,
    pub cfl: Option<f64>,
}

/// One axisymmetric profile component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Ring { amp: f64, r0: f64, z0: f64, width: f64 },
    Gaussian { amp: f64, width: f64 },
    Tail { amp: f64, a: f64, radius: f64, width: f64 },
}

impl Shape {
    fn profile(&self) -> AxisymProfile {
        match *self {
            Shape::Ring { amp, r0, z0, width } => AxisymProfile::rings(&[Ring { amp, r0, z0, width }]),
            Shape::Gaussian { amp, width } => AxisymProfile::gaussian(amp, width),
            Shape::Tail { amp, a, radius, width } => {
                let p = AxisymProfile::critical_tail(a, radius, width);
                AxisymProfile::new(format!("{amp}*tail"), move |r, z| amp * p.eval(r, z))
            }
        }
    }
}

fn sum_profile(shapes: &[Shape]) -> AxisymProfile {
    let parts: Vec<AxisymProfile> = shapes.iter().map(Shape::profile).collect();
    AxisymProfile::new(format!("sum({})", parts.len()), move |r, z| parts.iter().map(|p| p.eval(r, z)).sum())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    /// Components of `omega_theta / r`.
    #[serde(default)]
    pub vorticity: Vec<Shape>,
    #[serde(default)]
    pub density: Vec<Shape>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default)]
    pub checkpoints: bool,
}

fn default_cadence() -> usize {
    10
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: None, cadence: default_cadence(), checkpoints: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dealias: Option<bool>,
    pub ceiling: Option<f64>,
    pub sobolev_s: Option<f64>,
    pub lebesgue_m: Option<f64>,
}

/// Configuration problems, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn parse_mode(s: &str) -> Result<SimMode, ConfigError> {
    match s {
        "boussinesq" => Ok(SimMode::Boussinesq),
        "euler" => Ok(SimMode::Euler),
        "heat" => Ok(SimMode::Heat),
        _ => Err(ConfigError(format!("unknown mode {s:?}; expected boussinesq, euler or heat"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        parse_mode(&cfg.mode)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.grid.n, self.grid.half_width).map_err(|e| ConfigError(format!("[grid]: {e}")))
    }

    pub fn sim_config(&self) -> Result<SimConfig, ConfigError> {
        let grid = self.grid()?;
        let mut c = SimConfig::new(grid, parse_mode(&self.mode)?, self.time.t_end);
        c.time_step = match (self.time.dt, self.time.cfl) {
            (Some(dt), None) => TimeStep::Fixed(dt),
            (None, Some(cfl)) => TimeStep::Cfl(cfl),
            _ => return Err(ConfigError("[time]: exactly one of dt and cfl is required".into())),
        };
        c.cadence = self.output.cadence;
        if let Some(names) = &self.diagnostics {
            c.diagnostics = names
                .iter()
                .map(|s| Quantity::parse(s).ok_or_else(|| ConfigError(format!("diagnostics: unknown quantity {s:?}"))))
                .collect::<Result<_, _>>()?;
        }
        let s = &self.solver;
        c.dealias = s.dealias.unwrap_or(c.dealias);
        c.ceiling = s.ceiling.unwrap_or(c.ceiling);
        c.sobolev_s = s.sobolev_s.unwrap_or(c.sobolev_s);
        c.lebesgue_m = s.lebesgue_m.unwrap_or(c.lebesgue_m);
        c.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(c)
    }

    pub fn initial_state(&self) -> Result<SimState, ConfigError> {
        let grid = self.grid()?;
        let wrap = |what: &str, e: axbl::Error| ConfigError(format!("[init] {what}: {e}"));
        let v = if self.init.vorticity.is_empty() {
            VectorField::zeros(grid)
        } else {
            make_noswirl_velocity(&sum_profile(&self.init.vorticity).times_r(), grid).map_err(|e| wrap("vorticity", e))?
        };
        let rho = if self.init.density.is_empty() {
            ScalarField::zeros(grid)
        } else {
            make_axisym_scalar(&sum_profile(&self.init.density), grid).map_err(|e| wrap("density", e))?
        };
        SimState::new(&v, &rho).map_err(|e| wrap("state", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mode = "heat"
[grid]
n = 16
L = 4.0
[time]
T = 0.1
dt = 0.01
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        let s = c.sim_config().unwrap();
        assert_eq!(s.cadence, 10);
        assert_eq!(s.time_step, TimeStep::Fixed(0.01));
        assert_eq!(s.diagnostics.len(), axbl::solver::ALL_QUANTITIES.len());
        assert_eq!(c.initial_state().unwrap().density().max_abs(), 0.0);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_location() {
        let err = RunConfig::parse(&format!("{MINIMAL}\nbogus = 1\n")).unwrap_err();
        assert!(err.0.contains("bogus"), "{err}");
        let err = RunConfig::parse("mode = \"heat\"\n[grid]\nn = 16\nL = 4.0\nsize = 3\n").unwrap_err();
        assert!(err.0.contains("line"), "{err}");
    }

    #[test]
    fn empty_and_inconsistent_configs_fail() {
        assert!(RunConfig::parse("").is_err());
        assert!(RunConfig::parse(&MINIMAL.replace("heat", "stokes")).is_err());
        let both = MINIMAL.replace("dt = 0.01", "dt = 0.01\ncfl = 0.5");
        assert!(RunConfig::parse(&both).unwrap().sim_config().is_err());
        let bad = format!("diagnostics = [\"nope\"]\n{MINIMAL}");
        assert!(RunConfig::parse(&bad).unwrap().sim_config().is_err());
    }

    #[test]
    fn shapes_build_profiles() {
        let text = format!(
            "{MINIMAL}\n[init]\ndensity = [{{ kind = \"gaussian\", amp = 2.0, width = 0.5 }}]\nvorticity = [{{ kind = \"ring\", amp = 1.0, r0 = 1.0, z0 = 0.0, width = 0.3 }}]\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        let s = c.initial_state().unwrap();
        assert!((s.density().max_abs() - 2.0).abs() < 1e-12);
        assert!(s.velocity().max_magnitude() > 0.0);
        let tail = Shape::Tail { amp: 2.0, a: 0.5, radius: 1.5, width: 0.5 }.profile();
        assert!((tail.eval(0.0, 0.0) - 2.0 * 0.25f64.powf(-0.75)).abs() < 1e-12);
        let bad = text.replace("width = 0.5", "width = 0.5, depth = 1.0");
        assert!(RunConfig::parse(&bad).is_err());
    }
}
