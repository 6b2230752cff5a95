use axbl::battery::identity_battery;
use axbl::snapshot::{self, FieldKind, Snapshot};
use axbl::{Grid, ScalarField, VectorField};
use proptest::prelude::*;

#[test]
fn default_grid_battery_passes() {
    let checks = identity_battery(Grid::new(64, 4.0).unwrap(), 1.0).unwrap();
    assert!(checks.len() >= 10);
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).map(|c| (&c.identity, c.residual)).collect();
    assert!(failed.is_empty(), "{failed:?}");
    assert!(checks.iter().all(|c| c.residual.is_finite() && c.residual >= 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn snapshots_round_trip_bitwise(seed in any::<u64>(), time in 0.0f64..10.0, vector in any::<bool>()) {
        let g = Grid::new(8, 1.5).unwrap();
        let field = |shift: u64| ScalarField::from_fn(g, |x| ((x[0] * 3.1 + x[1] * 1.7 - x[2]) * (seed.wrapping_add(shift) % 97) as f64).sin());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.axbl");
        if vector {
            let v = VectorField::new([field(0), field(1), field(2)]).unwrap();
            snapshot::write(&path, &Snapshot::vector(&v, FieldKind::Velocity, time, "test")).unwrap();
            let back = snapshot::read(&path).unwrap();
            prop_assert_eq!(back.meta.time, time);
            let back = back.into_vector().unwrap();
            for a in 0..3 {
                prop_assert_eq!(back.comps[a].data(), v.comps[a].data());
            }
        } else {
            let u = field(0);
            snapshot::write(&path, &Snapshot::scalar(&u, FieldKind::Density, time, "test")).unwrap();
            let back = snapshot::read(&path).unwrap().into_scalar().unwrap();
            prop_assert_eq!(back.data(), u.data());
        }
    }
}
