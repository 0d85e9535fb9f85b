#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;

use gaplab_core::potential::Potential1D;
use gaplab_core::sturm_liouville::{gap_lower_bounds, solve_1d, OneDimComparison};
use proptest::prelude::*;

fn s_grid() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

/// `(s^2 - a^2)^2` for `|s| >= a`, zero inside: the convex envelope of a double well.
fn convexified_double_well(a: f64, half: f64) -> Potential1D {
    Potential1D::tabulate_even(
        half,
        513,
        move |s| if s.abs() <= a { 0.0 } else { (s * s - a * a).powi(2) },
        move |s| if s.abs() <= a { 0.0 } else { 4.0 * s * (s * s - a * a) },
    )
}

fn families(d: f64) -> Vec<(&'static str, Potential1D)> {
    let half = 0.5 * d;
    vec![
        ("constant", Potential1D::Constant { value: 3.5 }),
        ("quadratic", Potential1D::PolynomialEven { coefficients: vec![0.0, 20.0] }),
        ("quartic", Potential1D::PolynomialEven { coefficients: vec![1.0, 0.0, 150.0] }),
        ("double-well", convexified_double_well(0.2, half)),
        ("tabulated", Potential1D::tabulate_even(half, 33, |s| 8.0 * s.abs().powi(3), |s| 24.0 * s * s.abs())),
    ]
}

fn shape_defects(c: &OneDimComparison) -> Vec<String> {
    let mut out = Vec::new();
    if !(c.lambda1 < c.lambda2) {
        out.push(format!("eigenvalues not ordered: {} {}", c.lambda1, c.lambda2));
    }
    let n = c.phi1.len();
    if c.phi1[1..n - 1].iter().any(|v| *v <= 0.0) {
        out.push("ground state changes sign".into());
    }
    let sym = (0..n).map(|k| (c.phi1[k] - c.phi1[n - 1 - k]).abs()).fold(0.0, f64::max);
    let anti = (0..n).map(|k| (c.phi2[k] + c.phi2[n - 1 - k]).abs()).fold(0.0, f64::max);
    if sym > 1e-8 || anti > 1e-8 {
        out.push(format!("parity defects {sym:e} {anti:e}"));
    }
    if c.phi(0.0) != 0.0 || c.psi(0.0).abs() > 1e-14 {
        out.push("Phi or Psi nonzero at the origin".into());
    }
    let psi = &c.psi_table;
    if !(psi.min_slope > 0.0) || !(psi.max_curvature < 0.0) || psi.min_excess_over_linear < -1e-8 {
        out.push(format!(
            "Psi shape: slope {:e} curvature {:e} excess {:e}",
            psi.min_slope, psi.max_curvature, psi.min_excess_over_linear
        ));
    }
    if c.phi_table.envelope_excess > 0.0 {
        out.push(format!("Phi outside envelope by {:e}", c.phi_table.envelope_excess));
    }
    out
}

#[test]
fn five_even_families_keep_bounds_below_the_gap() {
    for d in [1.0, 1.7] {
        for (name, v) in families(d) {
            let c = solve_1d(&v, d, 2048).unwrap();
            assert!(shape_defects(&c).is_empty(), "{name}: {:?}", shape_defects(&c));
            let table = gap_lower_bounds(&c, &s_grid()).unwrap();
            assert!(table.max_gap_bound() <= c.sigma + 1e-6, "{name} d={d}");
            assert!(table.rows.iter().all(|r| r.lambda2_margin >= -1e-6 * c.lambda2), "{name}");
        }
    }
}

#[test]
fn flat_half_bound_is_two_pi_squared() {
    let c = solve_1d(&Potential1D::zero(), 1.0, 4096).unwrap();
    let t = gap_lower_bounds(&c, &[0.5]).unwrap();
    assert!((t.rows[0].gap_bound / (2.0 * PI * PI) - 1.0).abs() < 1e-5);
    assert!((t.half_bound - t.rows[0].gap_bound).abs() < 1e-12 * t.half_bound);
    assert!((c.sigma / (3.0 * PI * PI) - 1.0).abs() < 1e-5);
}

#[test]
fn small_s_bound_vanishes() {
    let c = solve_1d(&Potential1D::zero(), 1.0, 1024).unwrap();
    let t = gap_lower_bounds(&c, &[1e-9, 1e-6, 1e-3]).unwrap();
    assert!(t.rows.windows(2).all(|w| w[0].gap_bound < w[1].gap_bound));
    assert!(t.rows[0].gap_bound < 1e-7);
    assert!(gap_lower_bounds(&c, &[0.0]).is_err() && gap_lower_bounds(&c, &[1.0]).is_err());
}

#[test]
fn flat_spectrum_scales_with_inverse_square_diameter() {
    let base = solve_1d(&Potential1D::zero(), 1.0, 2048).unwrap();
    for d in [0.5, 2.0, 3.0] {
        let c = solve_1d(&Potential1D::zero(), d, 2048).unwrap();
        let r = (c.lambda1 * d * d / base.lambda1 - 1.0).abs();
        assert!(r < 1e-10, "{r:e}");
        assert!((c.sigma * d * d / base.sigma - 1.0).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn even_convex_polynomials_have_the_expected_shapes(
        c0 in -5.0f64..5.0, c1 in 0.0f64..40.0, c2 in 0.0f64..200.0, d in 0.6f64..2.0,
    ) {
        let v = Potential1D::PolynomialEven { coefficients: vec![c0, c1, c2] };
        let c = solve_1d(&v, d, 1024).unwrap();
        let defects = shape_defects(&c);
        prop_assert!(defects.is_empty(), "{:?}", defects);
        let t = gap_lower_bounds(&c, &s_grid()).unwrap();
        prop_assert!(t.max_gap_bound() <= c.sigma + 1e-6);
        prop_assert!(c.sigma >= 3.0 * PI * PI / (d * d) * (1.0 - 1e-4));
    }

    #[test]
    fn constant_shift_moves_eigenvalues_only(shift in -50.0f64..50.0, c1 in 0.0f64..30.0) {
        let base = Potential1D::PolynomialEven { coefficients: vec![0.0, c1] };
        let moved = Potential1D::PolynomialEven { coefficients: vec![shift, c1] };
        let a = solve_1d(&base, 1.0, 1024).unwrap();
        let b = solve_1d(&moved, 1.0, 1024).unwrap();
        let scale = a.lambda2.abs() + shift.abs();
        prop_assert!((b.lambda1 - a.lambda1 - shift).abs() < 1e-9 * scale);
        prop_assert!((b.lambda2 - a.lambda2 - shift).abs() < 1e-9 * scale);
        prop_assert!((b.alpha_tilde - a.alpha_tilde).abs() < 1e-7 * a.alpha_tilde.abs().max(1.0));
        prop_assert!((b.c_bar - a.c_bar).abs() < 1e-7 * a.c_bar);
    }

    #[test]
    fn phi_is_odd_and_decreasing_towards_the_diameter(c1 in 0.0f64..30.0, s in 0.05f64..0.95) {
        let c = solve_1d(&Potential1D::PolynomialEven { coefficients: vec![0.0, c1] }, 1.0, 2048).unwrap();
        prop_assert!((c.phi(s) + c.phi(-s)).abs() < 1e-9 * c.phi(s).abs().max(1.0));
        prop_assert!((c.psi(s) + c.psi(-s)).abs() < 1e-12);
        prop_assert!(c.phi(s.max(0.9)) > c.phi(0.97));
        prop_assert!(c.psi(s) >= c.c_bar * s - 1e-8);
    }
}
