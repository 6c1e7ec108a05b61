mod common;

use common::{rng, unit_grid};
use lipselect::bartle_graves::sphere_directions;
use lipselect::lipschitz::{
    cantor_function, global_lipschitz_upgrade_check, open_closed_consistency, plip_profile, plip_profiles,
    BallKind, MAX_CANTOR_DEPTH,
};
use lipselect::{PointId, SampledMetricSpace, SphereTable};
use proptest::prelude::*;
use rand::Rng;

fn line(count: usize) -> (SampledMetricSpace, Vec<f64>) {
    let xs = unit_grid(count);
    (SampledMetricSpace::from_line(&xs).unwrap(), xs)
}

fn cantor(x: f64) -> f64 {
    cantor_function(x, MAX_CANTOR_DEPTH).unwrap()
}

#[test]
fn linear_maps_have_their_slope_everywhere() {
    let (space, xs) = line(201);
    let values: Vec<Vec<f64>> = xs.iter().map(|x| vec![3.0 * x, -4.0 * x]).collect();
    let points: Vec<PointId> = space.ids().collect();
    for p in plip_profiles(&space, &values, &points, None, 3).unwrap() {
        assert!((p.estimate - 5.0).abs() < 1e-9, "{}: {}", p.point, p.estimate);
    }
}

#[test]
fn cantor_values_at_ternary_points() {
    assert_eq!(cantor(0.0), 0.0);
    assert_eq!(cantor(1.0), 1.0);
    for (x, want) in [
        (0.25, 1.0 / 3.0),
        (0.75, 2.0 / 3.0),
        (1.0 / 9.0, 0.25),
        (0.5, 0.5),
    ] {
        assert!((cantor(x) - want).abs() <= 1e-11, "C({x}) = {}", cantor(x));
    }
    assert!(cantor_function(1.5, 10).is_err());
}

#[test]
fn cantor_is_flat_on_removed_thirds() {
    let mut r = rng(2);
    for (a, b, level) in [
        (1.0 / 3.0, 2.0 / 3.0, 0.5),
        (1.0 / 9.0, 2.0 / 9.0, 0.25),
        (7.0 / 9.0, 8.0 / 9.0, 0.75),
    ] {
        for _ in 0..20 {
            let x = r.random_range(a + 1e-9..b - 1e-9);
            assert_eq!(cantor(x), level);
        }
    }
}

#[test]
fn cantor_upgrade_fails_at_the_finest_ternary_scale() {
    let xs: Vec<f64> = (0..=243).map(|i| i as f64 / 243.0).collect();
    let values: Vec<Vec<f64>> = xs.iter().map(|&x| vec![cantor(x)]).collect();
    let rep = global_lipschitz_upgrade_check(&xs, &values, 7.0, 2.0 / 243.0, 0.0).unwrap();
    assert!(!rep.passed);
    assert_eq!((rep.worst.i, rep.worst.j), (0, 1));
    assert!((rep.worst.ratio - 1.5f64.powi(5)).abs() < 1e-9);
    let relaxed = global_lipschitz_upgrade_check(&xs, &values, 8.0, 2.0 / 243.0, 0.0).unwrap();
    assert!(relaxed.passed && relaxed.local_hypothesis);
}

#[test]
fn open_and_closed_agree_away_from_grid_radii() {
    let (space, xs) = line(401);
    let values: Vec<Vec<f64>> = xs.iter().map(|x| vec![x.sin()]).collect();
    let radii = [0.0513, 0.0257, 0.0129, 0.0066];
    let c = open_closed_consistency(&space, &values, PointId(200), &radii, 3, 0.05).unwrap();
    assert!(c.consistent, "{c:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ball_supremum_grows_with_the_radius(seed in any::<u64>(), b in 0usize..100) {
        let (space, _) = line(100);
        let mut r = rng(seed);
        let values: Vec<Vec<f64>> = (0..100).map(|_| vec![r.random_range(-1.0..1.0)]).collect();
        let radii: Vec<f64> = (0..8).map(|j| 0.4 * 0.6f64.powi(j)).collect();
        for ball in [BallKind::Open, BallKind::Closed] {
            let p = lipselect::lipschitz::plip_profile_with(&space, &values, PointId(b), &radii, 3, ball).unwrap();
            for w in p.rows.windows(2) {
                prop_assert!(w[0].ratio * w[0].r >= w[1].ratio * w[1].r - 1e-15);
                prop_assert!(w[0].neighbors >= w[1].neighbors);
            }
        }
    }

    #[test]
    fn estimates_scale_with_the_map(seed in any::<u64>(), c in -5.0f64..5.0, b in 0usize..60) {
        let (space, _) = line(60);
        let mut r = rng(seed);
        let values: Vec<Vec<f64>> = (0..60).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
        let scaled: Vec<Vec<f64>> = values.iter().map(|v| v.iter().map(|x| c * x).collect()).collect();
        let radii = [0.2, 0.1, 0.05];
        let e = plip_profile(&space, &values, PointId(b), &radii).unwrap().estimate;
        let es = plip_profile(&space, &scaled, PointId(b), &radii).unwrap().estimate;
        prop_assert!((es - c.abs() * e).abs() <= 1e-12 * (1.0 + es));
    }

    #[test]
    fn homogeneous_extension_commutes_with_positive_scaling(
        seed in any::<u64>(),
        m in 1usize..4,
        lambda in 0.01f64..100.0,
        z in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let dirs = sphere_directions(m, 24, seed).unwrap();
        let mut r = rng(seed);
        let values: Vec<Vec<f64>> = dirs.iter().map(|_| (0..2).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
        let table = SphereTable::new(dirs, values).unwrap();
        let z = &z[..m];
        let tz = table.extend(z).unwrap();
        let scaled: Vec<f64> = z.iter().map(|v| lambda * v).collect();
        let tl = table.extend(&scaled).unwrap();
        for (a, b) in tl.iter().zip(&tz) {
            prop_assert!((a - lambda * b).abs() <= 1e-12 * (1.0 + (lambda * b).abs()));
        }
        prop_assert_eq!(table.extend(&vec![0.0; m]).unwrap(), vec![0.0; 2]);
    }

    #[test]
    fn cantor_is_monotone_and_half_holder(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(cantor(lo) <= cantor(hi));
        // Hoelder exponent log 2 / log 3 with constant 2
        prop_assert!(cantor(hi) - cantor(lo) <= 2.0 * (hi - lo).powf(2f64.ln() / 3f64.ln()) + 1e-11);
    }
}
