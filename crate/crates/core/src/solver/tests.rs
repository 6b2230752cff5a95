use super::diagnostics::{decay_exponent, saturation_time};
use super::*;
use crate::axisym::{make_axisym_scalar, make_noswirl_velocity, AxisymProfile, Ring};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ring_state(g: Grid, amp_v: f64, amp_r: f64) -> SimState {
    let l = g.half_width;
    let w = AxisymProfile::rings(&[Ring { amp: amp_v, r0: 0.19 * l, z0: 0.0, width: 0.1 * l }]).times_r();
    let v = make_noswirl_velocity(&w, g).unwrap();
    let rho = AxisymProfile::rings(&[Ring { amp: amp_r, r0: 0.15 * l, z0: 0.05 * l, width: 0.1 * l }]);
    let rho = make_axisym_scalar(&rho, g).unwrap();
    SimState::new(&v, &rho).unwrap()
}

fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
    let d = a.sub(b).energy().sqrt();
    let s = a.energy().sqrt().max(b.energy().sqrt());
    if s == 0.0 {
        d
    } else {
        d / s
    }
}

fn vec_rel(a: &SpectralVector, b: &SpectralVector) -> f64 {
    (a.sub(b).energy() / a.energy().max(b.energy())).sqrt()
}

#[test]
fn zero_state_is_a_fixed_point() {
    let g = Grid::new(16, 4.0).unwrap();
    let s = SimState::zero(g);
    let (dv, dr) = tendency(&s).unwrap();
    assert_eq!(dv.energy(), 0.0);
    assert_eq!(dr.energy(), 0.0);
    let next = step(&s, 0.1).unwrap();
    assert_eq!(next.v, s.v);
    assert_eq!(next.rho, s.rho);
    assert_eq!(next.steps, 1);
}

#[test]
fn vertical_gradient_buoyancy_projects_out() {
    let g = Grid::new(16, 4.0).unwrap();
    let k = std::f64::consts::PI / g.half_width;
    let rho = ScalarField::from_fn(g, |x| (k * x[2]).cos());
    let s = SimState::new(&VectorField::zeros(g), &rho).unwrap();
    let (dv, dr) = tendency(&s).unwrap();
    assert!(dv.energy().sqrt() < 1e-14, "{}", dv.energy().sqrt());
    assert_eq!(dr.energy(), 0.0);
}

#[test]
fn advective_and_divergence_forms_agree() {
    let g = Grid::new(32, 8.0).unwrap();
    let s = ring_state(g, 1.0, 0.0);
    let (a, b) = advective_forms(&s.v);
    assert!(vec_rel(&a, &b) < 1e-10, "{}", vec_rel(&a, &b));
}

/// Closed-form solution with `v0 = 0`, `rho0 = cos(k x1)`.
fn linear_buoyancy(g: Grid, t: f64) -> (ScalarField, ScalarField) {
    let k = std::f64::consts::PI / g.half_width;
    let rho = ScalarField::from_fn(g, |x| (k * x[0]).cos() * (-k * k * t).exp());
    let v3 = ScalarField::from_fn(g, |x| (k * x[0]).cos() * (1.0 - (-k * k * t).exp()) / (k * k));
    (rho, v3)
}

fn linear_error(g: Grid, dt: f64, steps: usize) -> f64 {
    let (rho0, _) = linear_buoyancy(g, 0.0);
    let mut s = SimState::new(&VectorField::zeros(g), &rho0).unwrap();
    for _ in 0..steps {
        s = step(&s, dt).unwrap();
    }
    let (rho, v3) = linear_buoyancy(g, s.time);
    let e = s.velocity().comps[2].sub(&v3).max_abs();
    e.max(s.density().sub(&rho).max_abs())
}

#[test]
fn linear_buoyancy_local_error_is_fifth_order() {
    let g = Grid::new(16, 1.0).unwrap();
    let (e1, e2) = (linear_error(g, 0.04, 1), linear_error(g, 0.02, 1));
    assert!((e1 / e2).log2() > 4.5, "local order {}", (e1 / e2).log2());
}

#[test]
fn linear_buoyancy_global_order_is_four() {
    let g = Grid::new(16, 1.0).unwrap();
    let errs: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&dt| linear_error(g, dt, (0.5f64 / dt).round() as usize)).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 3.8, "order {order} from {errs:?}");
    }
}

#[test]
fn nonlinear_richardson_order() {
    let g = Grid::new(16, 4.0).unwrap();
    let init = ring_state(g, 2.0, 1.0);
    let finals: Vec<SimState> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&dt| {
            let mut s = init.clone();
            for _ in 0..(0.4f64 / dt).round() as usize {
                s = step(&s, dt).unwrap();
            }
            s
        })
        .collect();
    let d1 = finals[0].v.sub(&finals[1].v).energy().sqrt() + finals[0].rho.sub(&finals[1].rho).energy().sqrt();
    let d2 = finals[1].v.sub(&finals[2].v).energy().sqrt() + finals[1].rho.sub(&finals[2].rho).energy().sqrt();
    let order = (d1 / d2).log2();
    assert!(order >= 3.8, "observed order {order}");
}

#[test]
fn step_rejects_cfl_violations_and_bad_steps() {
    let g = Grid::new(16, 4.0).unwrap();
    let s = ring_state(g, 1.0, 1.0);
    let mut st = Stepper::new(SimMode::Boussinesq);
    st.cfl_limit = 0.5;
    assert!(matches!(st.step(&s, 10.0), Err(Error::Precondition(_))));
    assert!(st.step(&s, 0.1).is_ok());
    assert!(st.step(&s, 0.0).is_err());
    assert!(st.step(&s, f64::NAN).is_err());
}

#[test]
fn non_finite_state_aborts_with_context() {
    let g = Grid::new(16, 4.0).unwrap();
    let mut s = ring_state(g, 1.0, 1.0);
    s.time = 0.7;
    s.steps = 7;
    s.rho.coeffs_mut()[5] = Complex64::new(f64::NAN, 0.0);
    match step(&s, 0.01) {
        Err(Error::Aborted { step, time, .. }) => {
            assert_eq!(step, 8);
            assert!((time - 0.71).abs() < 1e-12);
        }
        other => panic!("expected abort, got {other:?}"),
    }
    assert!(matches!(s.validate(), Err(Error::Aborted { .. })));
}

#[test]
fn divergent_velocity_is_rejected() {
    let g = Grid::new(16, 4.0).unwrap();
    let v = VectorField::from_fn(g, |x| [(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp(), 0.0, 0.0]);
    assert!(matches!(SimState::new(&v, &ScalarField::zeros(g)), Err(Error::Precondition(_))));
}

#[test]
fn euler_mode_keeps_density_zero_and_heat_mode_freezes_velocity() {
    let g = Grid::new(16, 4.0).unwrap();
    let s = ring_state(g, 1.0, 1.0);
    let mut cfg = SimConfig::new(g, SimMode::Euler, 0.2);
    cfg.diagnostics = vec![Quantity::VL2, Quantity::RhoL2];
    let out = run(cfg, s.clone()).unwrap();
    assert_eq!(out.final_state.rho.energy(), 0.0);
    let cfg = SimConfig::new(g, SimMode::Heat, 0.2);
    let out = run(cfg, s.clone()).unwrap();
    assert_eq!(out.final_state.v, s.v);
    assert!(out.final_state.rho.energy() < s.rho.energy());
}

#[test]
fn heat_mode_without_flow_is_the_exact_semigroup() {
    let g = Grid::new(16, 4.0).unwrap();
    let rho = make_axisym_scalar(&AxisymProfile::gaussian(1.0, 0.7), g).unwrap();
    let s0 = SimState::new(&VectorField::zeros(g), &rho).unwrap();
    let st = Stepper::new(SimMode::Heat);
    let mut s = s0.clone();
    for _ in 0..5 {
        s = st.step(&s, 0.07).unwrap();
    }
    let exact = heat_semigroup(&s0.rho, s.time);
    assert!(rel(&s.rho, &exact) < 1e-13);
}

#[test]
fn gamma_reduces_to_its_parts() {
    let g = Grid::new(32, 8.0).unwrap();
    let s = ring_state(g, 1.0, 0.0);
    let z = crate::axisym::zeta(&s.velocity()).unwrap();
    assert_eq!(gamma(&s).unwrap().sub(&z).max_abs(), 0.0);
    let s = ring_state(g, 0.0, 1.0);
    let r = crate::axisym::dr_over_r_inv_laplacian(&s.density()).unwrap();
    assert_eq!(gamma(&s).unwrap().sub(&r).max_abs(), 0.0);
}

#[test]
fn residuals_vanish_for_the_zero_state_and_check_spacing() {
    let g = Grid::new(16, 4.0).unwrap();
    let states: Vec<SimState> = (0..3).map(|i| SimState { time: 0.1 * i as f64, ..SimState::zero(g) }).collect();
    let r = equation_residuals(&states).unwrap();
    assert_eq!(r.entries.len(), 6);
    assert!(r.entries.iter().all(|e| e.relative == 0.0 && e.absolute == 0.0));
    let mut bad = states.clone();
    bad[2].time = 0.25;
    assert!(equation_residuals(&bad).is_err());
    assert!(equation_residuals(&states[..2]).is_err());
}

#[test]
fn fitted_hermite_is_exact_on_its_basis() {
    for lam in [0.0, 1e-3, 0.3, 0.49, 0.51, 2.0, 10.0, 80.0] {
        let h = 0.5;
        let (a, b, c, d) = (0.3, -1.2, 0.7, 2.5);
        let f = |s: f64| a + b * s + c * s * s + d * (-lam * s).exp();
        let df = |s: f64| b + 2.0 * c * s - lam * d * (-lam * s).exp();
        let exact = a * h + b * h * h / 2.0 + c * h * h * h / 3.0
            + if lam == 0.0 { d * h } else { d * (1.0 - (-lam * h).exp()) / lam };
        let got = fitted_hermite(f(0.0), df(0.0), f(h), df(h), lam, h);
        assert!((got - exact).abs() < 1e-12 * exact.abs().max(1.0), "lam {lam}: {got} vs {exact}");
    }
    let (lo, hi) = (fitted_basis(0.5 - 1e-12), fitted_basis(0.5 + 1e-12));
    assert!((lo.0 - hi.0).abs() < 1e-12 && (lo.1 - hi.1).abs() < 1e-12 && (lo.2 - hi.2).abs() < 1e-12);
}

#[test]
fn small_boussinesq_run_satisfies_energy_laws() {
    let g = Grid::new(32, 8.0).unwrap();
    let mut cfg = SimConfig::new(g, SimMode::Boussinesq, 0.5);
    cfg.time_step = TimeStep::Fixed(0.025);
    cfg.cadence = 4;
    cfg.diagnostics = vec![
        Quantity::VL2,
        Quantity::RhoL2,
        Quantity::RhoL6,
        Quantity::RhoLinf,
        Quantity::GradRhoIntegral,
        Quantity::SymmetryDefect,
    ];
    let out = run(cfg, ring_state(g, 1.0, 1.0)).unwrap();
    assert!(out.abort.is_none());
    for name in ["energy_balance", "velocity_growth", "rho_l2_monotone", "rho_l6_monotone", "rho_linf_monotone", "axisymmetry"] {
        let c = out.summary.check(name).unwrap_or_else(|| panic!("missing {name}"));
        assert!(c.passed, "{c:?}");
    }
    assert_eq!(out.series.len(), 6);
    assert!((out.summary.final_time - 0.5).abs() < 1e-12);
}

#[test]
fn diagnostics_without_flow_match_direct_norms() {
    let g = Grid::new(32, 8.0).unwrap();
    let s = ring_state(g, 1.0, 1.0);
    let mut cfg = SimConfig::new(g, SimMode::Boussinesq, 0.0);
    cfg.diagnostics = ALL_QUANTITIES.to_vec();
    let out = run(cfg, s.clone()).unwrap();
    assert_eq!(out.series.len(), 1);
    let row = &out.series.rows[0];
    let get = |q: Quantity| row[ALL_QUANTITIES.iter().position(|&c| c == q).unwrap()];
    let rho = s.density();
    assert!((get(Quantity::RhoL2) - rho.l2_norm()).abs() < 1e-12 * rho.l2_norm());
    assert_eq!(get(Quantity::RhoLinf), rho.max_abs());
    assert_eq!(get(Quantity::GradRhoIntegral), 0.0);
    let z = crate::axisym::zeta(&s.velocity()).unwrap();
    assert!((get(Quantity::ZetaL3) - z.lebesgue_norm(3.0)).abs() < 1e-12 * z.lebesgue_norm(3.0));
    let xh = rho.map_with_point(|x, v| (x[0] * x[0] + x[1] * x[1]) * v);
    assert!((get(Quantity::Xh2RhoL2) - xh.l2_norm()).abs() < 1e-12 * xh.l2_norm());
    assert!(out.summary.fits.contains_key("log_lipschitz_c"));
}

#[test]
fn ceiling_aborts_cleanly_with_partial_series() {
    let g = Grid::new(16, 4.0).unwrap();
    let mut cfg = SimConfig::new(g, SimMode::Boussinesq, 1.0);
    cfg.ceiling = 1e-3;
    cfg.cadence = 1;
    cfg.diagnostics = vec![Quantity::VL2];
    let out = run(cfg, ring_state(g, 1.0, 1.0)).unwrap();
    assert!(matches!(out.abort, Some(Error::Aborted { step: 1, .. })));
    assert_eq!(out.series.len(), 1);
    assert!(out.summary.aborted.is_some());
    assert!(!out.summary.passed());
}

#[test]
fn checkpoints_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::new(16, 4.0).unwrap();
    let mut cfg = SimConfig::new(g, SimMode::Boussinesq, 0.2);
    cfg.time_step = TimeStep::Fixed(0.1);
    cfg.cadence = 1;
    cfg.diagnostics = vec![Quantity::VL2];
    cfg.checkpoint_dir = Some(dir.path().to_path_buf());
    let out = run(cfg, ring_state(g, 1.0, 1.0)).unwrap();
    assert_eq!(out.checkpoints.len(), 6);
    let snap = crate::snapshot::read(&dir.path().join("rho_000002.axbl")).unwrap();
    assert!((snap.meta.time - 0.2).abs() < 1e-12);
    assert_eq!(snap.into_scalar().unwrap(), out.final_state.density());
}

#[test]
fn series_rejects_bad_rows_and_writes_csv() {
    let mut s = DiagnosticsSeries::new(&[Quantity::VL2, Quantity::RhoLinf]);
    s.push(0.0, 0, vec![1.0, 2.0]).unwrap();
    assert!(s.push(0.0, 1, vec![1.0, 2.0]).is_err());
    assert!(s.push(0.1, 1, vec![1.0]).is_err());
    assert!(s.push(0.1, 1, vec![1.0, f64::NAN]).is_err());
    s.push(0.5, 5, vec![3.0, 4.0]).unwrap();
    let csv = s.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "time,step,v_l2,rho_linf");
    assert_eq!(lines.len(), 3);
    assert_eq!(Quantity::parse("zeta_l3"), Some(Quantity::ZetaL3));
    assert_eq!(Quantity::parse("nope"), None);
}

#[test]
fn decay_fit_recovers_power_law() {
    let t: Vec<f64> = (1..=40).map(|i| 0.1 * i as f64).collect();
    let y: Vec<f64> = t.iter().map(|s| 3.0 * s.powf(-0.75)).collect();
    let hi = saturation_time(8.0);
    assert!((hi - 2.25).abs() < 1e-15);
    let slope = decay_exponent(&t, &y, hi / 10.0, hi).unwrap();
    assert!((slope + 0.75).abs() < 1e-12);
    assert!(decay_exponent(&t, &y, 10.0, 20.0).is_none());
}

#[test]
fn config_validation() {
    let g = Grid::new(16, 4.0).unwrap();
    let ok = SimConfig::new(g, SimMode::Heat, 1.0);
    assert!(ok.validate().is_ok());
    let mut c = ok.clone();
    c.time_step = TimeStep::Fixed(-1.0);
    assert!(c.validate().is_err());
    let mut c = ok.clone();
    c.cadence = 0;
    assert!(c.validate().is_err());
    let mut c = ok.clone();
    c.sobolev_s = 2.5;
    assert!(c.validate().is_err());
    let mut c = ok.clone();
    c.mode = SimMode::Euler;
    c.forcing = Some(SpectralField::zeros(g));
    assert!(c.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]
    #[test]
    fn heat_steps_compose_like_the_semigroup(seed in 0u64..1000, dt in 0.01f64..0.5) {
        let g = Grid::new(8, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = ScalarField::new(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let s0 = SimState::new(&VectorField::zeros(g), &rho).unwrap();
        let st = Stepper::new(SimMode::Heat);
        let two = st.step(&st.step(&s0, dt).unwrap(), dt).unwrap();
        let exact = heat_semigroup(&s0.rho, 2.0 * dt);
        prop_assert!(rel(&two.rho, &exact) < 1e-13);
    }

    #[test]
    fn rotation_symmetry_is_preserved(amp in 0.5f64..2.0) {
        let g = Grid::new(16, 4.0).unwrap();
        let mut s = ring_state(g, amp, 1.0);
        for _ in 0..3 {
            s = step(&s, 0.05).unwrap();
        }
        let d = crate::axisym::symmetry_defect_vector(&s.velocity()).max(crate::axisym::symmetry_defect_scalar(&s.density()));
        prop_assert!(d < 1e-12, "{}", d);
    }
}
