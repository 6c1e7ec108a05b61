mod common;

use common::{dist, rng, sigma_min_oracle, singular_values_2x2};
use lipselect::bartle_graves::{evaluate_right_inverse, openness_constant, sphere_directions, VerifyOptions};
use lipselect::{build_right_inverse, verify_right_inverse, BartleGravesConfig, LinearSurjection};
use proptest::prelude::*;
use rand::Rng;

fn seeded_matrix(seed: u64, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..rows)
        .map(|_| (0..cols).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect()
}

#[test]
fn openness_constant_of_named_matrices() {
    let ones = LinearSurjection::from_rows(&[vec![1.0, 1.0]]).unwrap();
    assert!((openness_constant(&ones) - 2f64.sqrt()).abs() < 1e-12);
    assert!((openness_constant(&LinearSurjection::identity(3)) - 1.0).abs() < 1e-12);
    let m = [[2.0, 1.0], [0.5, 3.0]];
    let t = LinearSurjection::from_rows(&[m[0].to_vec(), m[1].to_vec()]).unwrap();
    let (big, small) = singular_values_2x2(m);
    assert!((t.sigma_min() - small).abs() < 1e-12);
    assert!((t.sigma_max() - big).abs() < 1e-12);
}

#[test]
fn sphere_samples_are_unit_and_distinct() {
    for m in 1..5 {
        let dirs = sphere_directions(m, 40, 9).unwrap();
        for (i, u) in dirs.iter().enumerate() {
            assert!((u.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
            for v in &dirs[i + 1..] {
                assert!(dist(u, v) > 1e-6);
            }
        }
    }
    assert_eq!(
        sphere_directions(3, 20, 4).unwrap(),
        sphere_directions(3, 20, 4).unwrap()
    );
}

#[test]
fn seeded_wide_matrix_pipeline() {
    let rows = seeded_matrix(21, 2, 4);
    let t = LinearSurjection::from_rows(&rows).unwrap();
    let gamma = sigma_min_oracle(&rows);
    assert!((openness_constant(&t) - gamma).abs() < 1e-10);
    let ri = build_right_inverse(&t, &BartleGravesConfig::new(1.0 / gamma + 0.5, 4, 48, 1)).unwrap();
    let report = verify_right_inverse(&ri, &VerifyOptions::default()).unwrap();
    assert!(report.passed, "{report:?}");
    let dirs = ri.table.directions();
    for y in [[0.3f64, -2.0], [5.0, 1.0], [-0.01, 0.02]] {
        let len = (y[0] * y[0] + y[1] * y[1]).sqrt();
        let u = [y[0] / len, y[1] / len];
        let chord = dirs.iter().map(|d| dist(d, &u)).fold(f64::INFINITY, f64::min);
        let residual = dist(&t.apply(&evaluate_right_inverse(&ri, &y).unwrap()).unwrap(), &y);
        assert!(
            (residual - len * chord).abs() < 1e-9 * (1.0 + len),
            "{residual} vs {}",
            len * chord
        );
    }
    assert_eq!(evaluate_right_inverse(&ri, &[0.0, 0.0]).unwrap(), vec![0.0; 4]);
}

#[test]
fn beta_must_exceed_the_inverse_openness_constant() {
    let t = LinearSurjection::from_rows(&[vec![1.0, 1.0]]).unwrap();
    let err = build_right_inverse(&t, &BartleGravesConfig::new(0.5, 3, 2, 0)).unwrap_err();
    assert!(
        matches!(err, lipselect::Error::Parameter { name: "beta", .. }),
        "{err:?}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smallest_singular_value_matches_the_gram_oracle(seed in any::<u64>(), rows in 1usize..3, cols in 2usize..6) {
        let rows = rows.min(cols);
        let m = seeded_matrix(seed, rows, cols);
        let oracle = sigma_min_oracle(&m);
        prop_assume!(oracle > 1e-3);
        let t = LinearSurjection::from_rows(&m).unwrap();
        prop_assert!((t.sigma_min() - oracle).abs() <= 1e-10);
    }

    #[test]
    fn minimum_norm_solutions_solve_and_are_orthogonal_to_the_kernel(seed in any::<u64>(), y in prop::collection::vec(-3.0f64..3.0, 2)) {
        let m = seeded_matrix(seed, 2, 4);
        prop_assume!(sigma_min_oracle(&m) > 1e-3);
        let t = LinearSurjection::from_rows(&m).unwrap();
        let x = t.min_norm_solution(&y).unwrap();
        prop_assert!(dist(&t.apply(&x).unwrap(), &y) <= 1e-9 * (1.0 + y[0].abs() + y[1].abs()) / sigma_min_oracle(&m));
        for k in t.kernel_basis() {
            let along: f64 = k.iter().zip(&x).map(|(a, b)| a * b).sum();
            prop_assert!(along.abs() <= 1e-9 / sigma_min_oracle(&m));
        }
    }
}
