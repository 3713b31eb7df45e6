use std::f64::consts::PI;

use proptest::prelude::*;
use winding_core::gauss_algebra::{quadrant_expectation, quadrant_expectation_series, QuadrantCorr};
use winding_core::pathgen::{io, GridSpec, SamplePath};
use winding_core::stats::{ks_test, normal_cdf};
use winding_core::winding::count_xy;

/// Planar polyline from a start angle and per-step turns below π.
fn polyline(start: f64, turns: &[f64], radii: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut theta = start;
    let mut x1 = vec![radii[0] * theta.cos()];
    let mut x2 = vec![radii[0] * theta.sin()];
    for (d, r) in turns.iter().zip(&radii[1..]) {
        theta += d;
        x1.push(r * theta.cos());
        x2.push(r * theta.sin());
    }
    (x1, x2)
}

fn path_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..200).prop_flat_map(|n| {
        (
            -PI..PI,
            prop::collection::vec(-2.5f64..2.5, n - 1),
            prop::collection::vec(0.05f64..4.0, n),
        )
            .prop_map(|(s, t, r)| polyline(s, &t, &r))
    })
}

/// Normalized rows of a random Gram matrix.
fn corr_strategy(max_rho34: f64) -> impl Strategy<Value = QuadrantCorr> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), 4)
        .prop_filter("non-degenerate rows", |rows| {
            rows.iter().all(|r| r.iter().map(|x| x * x).sum::<f64>() > 1e-2)
        })
        .prop_map(|rows| {
            let norm: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                    r.iter().map(|x| x / n).collect()
                })
                .collect();
            let d = |i: usize, j: usize| norm[i].iter().zip(&norm[j]).map(|(a, b)| a * b).sum::<f64>();
            QuadrantCorr {
                rho12: d(0, 1),
                rho13: d(0, 2),
                rho14: d(0, 3),
                rho23: d(1, 2),
                rho24: d(1, 3),
                rho34: d(2, 3),
            }
        })
        .prop_filter("|rho34| bounded", move |c| c.rho34.abs() <= max_rho34)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn increment_and_count_agree((x1, x2) in path_strategy()) {
        let r = count_xy(&x1, &x2).unwrap();
        prop_assert!((r.delta_arg / (2.0 * PI) - r.n_w as f64).abs() < 1.0);
        prop_assert!(r.agreement);
        prop_assert_eq!(r.n_up as i64 - r.n_down as i64, r.n_w);
    }

    #[test]
    fn reflection_negates_winding((x1, x2) in path_strategy()) {
        let r = count_xy(&x1, &x2).unwrap();
        let neg: Vec<f64> = x2.iter().map(|v| -v).collect();
        let m = count_xy(&x1, &neg).unwrap();
        prop_assert_eq!(m.n_w, -r.n_w);
        prop_assert!((m.delta_arg + r.delta_arg).abs() < 1e-9);
    }

    #[test]
    fn reversal_negates_winding((x1, x2) in path_strategy()) {
        let r = count_xy(&x1, &x2).unwrap();
        let rx1: Vec<f64> = x1.iter().rev().copied().collect();
        let rx2: Vec<f64> = x2.iter().rev().copied().collect();
        prop_assert_eq!(count_xy(&rx1, &rx2).unwrap().n_w, -r.n_w);
    }

    #[test]
    fn power_of_two_scaling_is_exact((x1, x2) in path_strategy(), k in -20i32..20) {
        let c = 2f64.powi(k);
        let r = count_xy(&x1, &x2).unwrap();
        let s1: Vec<f64> = x1.iter().map(|v| v * c).collect();
        let s2: Vec<f64> = x2.iter().map(|v| v * c).collect();
        let s = count_xy(&s1, &s2).unwrap();
        prop_assert_eq!(s.n_w, r.n_w);
        prop_assert_eq!(s.delta_arg, r.delta_arg);
    }

    #[test]
    fn closed_form_matches_series(c in corr_strategy(0.6)) {
        let a = quadrant_expectation(&c).unwrap();
        let b = quadrant_expectation_series(&c, 200).unwrap();
        prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn closed_form_symmetries(c in corr_strategy(0.95)) {
        let e = quadrant_expectation(&c).unwrap();
        let swap12 = QuadrantCorr { rho13: c.rho23, rho23: c.rho13, rho14: c.rho24, rho24: c.rho14, ..c };
        let swap34 = QuadrantCorr { rho13: c.rho14, rho14: c.rho13, rho23: c.rho24, rho24: c.rho23, ..c };
        prop_assert!((quadrant_expectation(&swap12).unwrap() - e).abs() < 1e-14);
        prop_assert!((quadrant_expectation(&swap34).unwrap() - e).abs() < 1e-14);
        // flipping X1 flips the sign
        let flip1 = QuadrantCorr { rho12: -c.rho12, rho13: -c.rho13, rho14: -c.rho14, ..c };
        prop_assert!((quadrant_expectation(&flip1).unwrap() + e).abs() < 1e-14);
        // Cauchy-Schwarz with P(X3>0, X4>0) <= 1/2
        prop_assert!(e.abs() <= 0.5 + 1e-12);
    }

    #[test]
    fn csv_and_binary_round_trip(x in prop::collection::vec(-5.0f64..5.0, 2..50), seed in any::<u64>()) {
        let n = x.len();
        let x2: Vec<f64> = x.iter().map(|v| v * 0.5 - 1.0).collect();
        let path = SamplePath::from_data(GridSpec::new(1.0, n).unwrap(), x.clone(), x2)
            .unwrap();
        let path = SamplePath { seed, ..path };
        let mut buf = Vec::new();
        io::write_binary(&path, None, &mut buf).unwrap();
        let back = io::read_binary(buf.as_slice()).unwrap();
        prop_assert_eq!(&back.x1, &path.x1);
        prop_assert_eq!(&back.x2, &path.x2);
        prop_assert_eq!(back.seed, seed);
        let mut csv = Vec::new();
        io::write_csv(&path, None, &mut csv).unwrap();
        let back = io::read_csv(csv.as_slice()).unwrap();
        prop_assert_eq!(&back.x1, &path.x1);
        prop_assert_eq!(&back.x2, &path.x2);
    }

    #[test]
    fn ks_statistic_in_unit_interval(data in prop::collection::vec(-4.0f64..4.0, 1..100)) {
        let r = ks_test(&data, normal_cdf(0.0, 1.0));
        prop_assert!((0.0..=1.0).contains(&r.statistic));
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }
}
