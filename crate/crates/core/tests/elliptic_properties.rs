use std::collections::VecDeque;
use std::f64::consts::PI;

use gaplab_core::elliptic::{
    assemble, assemble_with, drift_residual, lowest_eigenpairs, EigenOptions, EigenSolution,
};
use gaplab_core::geometry::ConvexDomain;
use gaplab_core::grid::{BoundaryScheme, MaskedGrid};
use gaplab_core::potential::PotentialND;
use proptest::prelude::*;

fn solve(domain: &ConvexDomain, v: &PotentialND, h: f64) -> EigenSolution {
    lowest_eigenpairs(&assemble(domain, v, h).unwrap(), EigenOptions::default()).unwrap()
}

/// Power series of `J_n`, accurate for the arguments used here (`x < 6`).
fn bessel_j(n: u32, x: f64) -> f64 {
    let mut term = (0.5 * x).powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..60 {
        term *= -(0.25 * x * x) / (k as f64 * (k + n) as f64);
        sum += term;
    }
    sum
}

fn first_zero(n: u32, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bessel_j(n, lo).signum() == bessel_j(n, mid).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn bessel_oracle_is_sane() {
    assert!((first_zero(0, 2.0, 3.0) - 2.404825557695773).abs() < 1e-12);
    assert!((first_zero(1, 3.0, 4.5) - 3.831705970207512).abs() < 1e-12);
}

#[test]
fn unit_disk_with_node_elimination_matches_bessel_zeros() {
    let disk = ConvexDomain::disk([0.0, 0.0], 1.0).unwrap();
    let sol = solve(&disk, &PotentialND::zero(), 1.0 / 128.0);
    let l1 = first_zero(0, 2.0, 3.0).powi(2);
    let l2 = first_zero(1, 3.0, 4.5).powi(2);
    assert!((sol.lambda1 / l1 - 1.0).abs() < 1e-2, "{}", sol.lambda1);
    assert!((sol.lambda2 / l2 - 1.0).abs() < 1e-2, "{}", sol.lambda2);
}

#[test]
fn fitted_boundary_converges_faster_on_the_disk() {
    let disk = ConvexDomain::disk([0.0, 0.0], 1.0).unwrap();
    let l1 = first_zero(0, 2.0, 3.0).powi(2);
    let err = |scheme, h| {
        let op = assemble_with(&disk, &PotentialND::zero(), h, scheme).unwrap();
        (lowest_eigenpairs(&op, EigenOptions::default()).unwrap().lambda1 / l1 - 1.0).abs()
    };
    let (e32, e64) = (err(BoundaryScheme::Fitted, 1.0 / 32.0), err(BoundaryScheme::Fitted, 1.0 / 64.0));
    assert!(e32 / e64 > 3.0, "{e32:e} {e64:e}");
    assert!(e64 < err(BoundaryScheme::NodeElimination, 1.0 / 64.0));
}

fn connected(grid: &MaskedGrid) -> bool {
    let mut seen = vec![false; grid.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(k) = queue.pop_front() {
        for a in 0..grid.dim {
            for dir in [-1, 1] {
                if let Some(j) = grid.neighbor(k, a, dir) {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[test]
fn masked_grids_are_interior_and_connected() {
    let domains = [
        ConvexDomain::rectangle(1.0, 0.5).unwrap(),
        ConvexDomain::disk([0.1, 0.2], 0.7).unwrap(),
        ConvexDomain::ellipse([0.0, 0.0], [1.0, 0.3], 0.6).unwrap(),
        ConvexDomain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.8]]).unwrap(),
    ];
    for d in &domains {
        for scheme in [BoundaryScheme::NodeElimination, BoundaryScheme::Fitted] {
            let g = MaskedGrid::with_scheme(d, 1.0 / 128.0, scheme).unwrap();
            assert!((0..g.len()).all(|k| d.signed_distance(g.position(k)) > 0.0));
            assert!(connected(&g), "{}", d.kind_name());
        }
    }
}

#[test]
fn eigenpairs_are_positive_orthogonal_and_resolved() {
    let v = PotentialND::QuadraticForm {
        matrix: [[2.0, 0.5], [0.5, 1.0]],
        center: [0.1, 0.0],
        offset: 0.0,
    };
    for d in [
        ConvexDomain::ellipse([0.0, 0.0], [1.0, 0.6], 0.3).unwrap(),
        ConvexDomain::polygon(vec![[0.0, 0.0], [1.2, 0.0], [1.4, 0.7], [0.2, 0.9]]).unwrap(),
    ] {
        let sol = solve(&d, &v, 1.0 / 64.0);
        assert!(sol.lambda1 < sol.lambda2);
        assert!(sol.phi1.iter().all(|p| *p > 0.0));
        assert!(sol.diagnostics.orthogonality.abs() < 1e-8);
        assert!(sol.diagnostics.residuals.iter().all(|r| *r < 1e-8), "{:?}", sol.diagnostics.residuals);
        assert!((sol.grid.inner(&sol.phi1, &sol.phi1) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn flat_interval_ratio_solves_the_drift_equation() {
    for h in [1.0 / 128.0, 1.0 / 512.0] {
        let sol = solve(&ConvexDomain::interval(0.0, 1.0).unwrap(), &PotentialND::zero(), h);
        let r = drift_residual(&sol, 2.0 * h);
        assert!(r.max_abs < 10.0 * h, "{h} {}", r.max_abs);
    }
}

#[test]
fn rectangle_drift_residual_shrinks_under_refinement() {
    let rect = ConvexDomain::rectangle(1.0, 0.7).unwrap();
    let res: Vec<f64> = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0]
        .iter()
        .map(|&h| drift_residual(&solve(&rect, &PotentialND::zero(), h), 0.1).max_abs)
        .collect();
    assert!(res[0] / res[1] > 1.8 && res[1] / res[2] > 1.8, "{res:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// With the boundary on grid lines the discrete spectrum is known in closed form.
    #[test]
    fn aligned_rectangles_reproduce_the_discrete_spectrum(na in 34usize..60, nb in 34usize..60, shift in -5.0f64..5.0) {
        let h = 1.0 / 32.0;
        let (a, b) = (na as f64 * h, nb as f64 * h);
        let rect = ConvexDomain::rectangle(a, b).unwrap();
        let sol = solve(&rect, &PotentialND::Constant { value: shift }, h);
        let mode = |p: usize, n: usize| 4.0 / (h * h) * (PI * p as f64 / (2.0 * n as f64)).sin().powi(2);
        let mut levels: Vec<f64> = (1..4).flat_map(|p| (1..4).map(move |q| (p, q)))
            .map(|(p, q)| mode(p, na) + mode(q, nb) + shift)
            .collect();
        levels.sort_by(f64::total_cmp);
        prop_assert!((sol.lambda1 - levels[0]).abs() < 1e-8 * levels[0].abs().max(1.0));
        prop_assert!((sol.lambda2 - levels[1]).abs() < 1e-8 * levels[1].abs().max(1.0));
    }
}
