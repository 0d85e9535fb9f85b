use gaplab_core::elliptic::{assemble, lowest_eigenpairs, EigenOptions, EigenSolution};
use gaplab_core::geometry::ConvexDomain;
use gaplab_core::potential::{Potential1D, PotentialND};
use gaplab_core::sampling::{sample_pairs, PairSampling, PointPair};
use gaplab_core::sturm_liouville::solve_1d;
use gaplab_core::two_point::{
    check_gap_comparison, check_log_concavity, estimate_modulus, verify_modulus, ToleranceBudget,
};

fn solve(domain: &ConvexDomain, v: &PotentialND, h: f64) -> EigenSolution {
    lowest_eigenpairs(&assemble(domain, v, h).unwrap(), EigenOptions::default()).unwrap()
}

fn quartic() -> PotentialND {
    PotentialND::AxisPower { weights: [1.0, 0.0], exponent: 4.0, center: [0.0, 0.0] }
}

#[test]
fn quartic_modulus_on_the_unit_square_is_self_consistent() {
    let square = ConvexDomain::rectangle(1.0, 1.0).unwrap();
    let s_grid: Vec<f64> = (0..=40).map(|k| k as f64 * 0.5 * square.diameter() / 40.0).collect();
    let est = estimate_modulus(&quartic(), &square, &s_grid, 4000, 5).unwrap();
    assert!(est.envelope.windows(2).all(|w| w[0] <= w[1]));
    for (e, s) in est.envelope.iter().zip(&est.sampled) {
        assert!(*e >= 0.0);
        if let Some(s) = s {
            assert!(e <= s);
        }
    }
    // Vertical chords see no change in the gradient, so the modulus is flat up to half the side.
    for (s, e) in est.s.iter().zip(&est.envelope) {
        if *s <= 0.5 {
            assert!(e.abs() < 1e-12, "{s}: {e}");
        }
    }
    let pairs = sample_pairs(&square, &PairSampling::uniform(20_000, 0.0, 6)).unwrap();
    let report = verify_modulus(&quartic(), &est.modulus, &square, &pairs, 1e-9);
    assert!(report.passed, "{:?}", report.max_margin);
    assert_eq!(report.evaluated, pairs.len());
}

#[test]
fn steeper_quartic_modulus_is_rejected() {
    let square = ConvexDomain::rectangle(1.0, 1.0).unwrap();
    let pairs = sample_pairs(&square, &PairSampling::uniform(5000, 0.0, 7)).unwrap();
    let too_steep = Potential1D::PolynomialEven { coefficients: vec![0.0, 0.5] };
    let report = verify_modulus(&quartic(), &too_steep, &square, &pairs, 1e-9);
    assert!(!report.passed && report.violations > 0);
}

#[test]
fn symmetric_pairs_on_the_interval_attain_equality() {
    let iv = ConvexDomain::interval(-0.5, 0.5).unwrap();
    let sol = solve(&iv, &PotentialND::zero(), 1.0 / 8192.0);
    let comparison = solve_1d(&Potential1D::zero(), 1.0, 4096).unwrap();
    let pairs: Vec<PointPair> = (1..=400)
        .map(|k| {
            let a = (200 + 8 * k) as f64 / 8192.0;
            PointPair { x: [-a, 0.0], y: [a, 0.0] }
        })
        .collect();
    let report = check_log_concavity(&sol, &comparison, &pairs, Some(0.02), ToleranceBudget::default());
    assert_eq!(report.evaluated, pairs.len());
    let worst = report.min_margin.unwrap().abs().max(report.max_margin.unwrap().abs());
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn interval_with_its_own_modulus_has_zero_gap_margin() {
    let iv = ConvexDomain::interval(-0.5, 0.5).unwrap();
    let v = PotentialND::QuadraticForm { matrix: [[30.0, 0.0], [0.0, 0.0]], center: [0.0, 0.0], offset: 0.0 };
    let sol = solve(&iv, &v, 1.0 / 4096.0);
    let comparison = solve_1d(&Potential1D::PolynomialEven { coefficients: vec![0.0, 15.0] }, 1.0, 4096).unwrap();
    let gap = check_gap_comparison(&sol, &comparison, &[0.25, 0.5, 0.75], 1e-3 * comparison.lambda1).unwrap();
    assert!(gap.margin.abs() < 1e-6 * comparison.lambda1, "{}", gap.margin);
    assert!(gap.passed);
    assert!(gap.alpha_bounds.iter().all(|b| b.margin >= 0.0));
}

#[test]
fn rectangle_gap_exceeds_the_comparison_gap() {
    let rect = ConvexDomain::rectangle(1.0, 0.5).unwrap();
    let sol = solve(&rect, &PotentialND::zero(), 1.0 / 96.0);
    let comparison = solve_1d(&Potential1D::zero(), rect.diameter(), 2048).unwrap();
    let gap = check_gap_comparison(&sol, &comparison, &[0.5], 1e-3 * comparison.lambda1).unwrap();
    assert!(gap.margin > 0.1 * gap.comparison_gap, "{}", gap.margin);
    assert!(gap.diameter_margin > 0.0);
}

#[test]
fn rectangle_ground_state_passes_the_sharp_check() {
    let rect = ConvexDomain::rectangle(1.0, 0.5).unwrap();
    let h = 1.0 / 128.0;
    let sol = solve(&rect, &PotentialND::zero(), h);
    let comparison = solve_1d(&Potential1D::zero(), rect.diameter(), 4096).unwrap();
    let pairs = sample_pairs(&rect, &PairSampling::uniform(20_000, 0.0, 8)).unwrap();
    let report = check_log_concavity(&sol, &comparison, &pairs, None, ToleranceBudget::default());
    assert!(report.passed, "{:?}", report.max_margin);
    assert!(report.evaluated > 15_000);
}
