//! Deterministic point and pair sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::geometry::{add, scale, ConvexDomain, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPair {
    pub x: Point,
    pub y: Point,
}

impl PointPair {
    pub fn separation(&self) -> f64 {
        crate::geometry::distance(self.x, self.y)
    }
}

/// Additive recurrence `frac(shift + n alpha)` with `alpha_j = phi_dim^-(j+1)`,
/// `phi_dim` the positive root of `x^(dim+1) = x + 1`. The shift comes from the seed.
#[derive(Debug, Clone)]
pub struct RdSequence {
    alpha: Vec<f64>,
    shift: Vec<f64>,
    index: u64,
}

impl RdSequence {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut phi = 2.0f64;
        for _ in 0..60 {
            let f = phi.powi(dim as i32 + 1) - phi - 1.0;
            let df = (dim as f64 + 1.0) * phi.powi(dim as i32) - 1.0;
            phi -= f / df;
        }
        let alpha = (1..=dim).map(|j| phi.powi(-(j as i32))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim).map(|_| rng.gen::<f64>()).collect();
        Self { alpha, shift, index: 0 }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        self.index += 1;
        let n = self.index as f64;
        self.alpha
            .iter()
            .zip(&self.shift)
            .map(|(a, s)| (s + n * a).fract())
            .collect()
    }
}

/// Pair sampling plan: `uniform` pairs drawn independently from the admissible region
/// and `stratified` pairs spread evenly over `strata` separation bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSampling {
    pub uniform: usize,
    #[serde(default)]
    pub stratified: usize,
    #[serde(default = "default_strata")]
    pub strata: usize,
    /// Both points keep at least this distance from the boundary.
    #[serde(default)]
    pub margin: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_strata() -> usize {
    16
}

impl PairSampling {
    pub fn uniform(count: usize, margin: f64, seed: u64) -> Self {
        Self {
            uniform: count,
            stratified: 0,
            strata: default_strata(),
            margin,
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.uniform + self.stratified
    }
}

/// Points of `{rho >= margin}` by rejection from the bounding box.
pub fn sample_interior(domain: &ConvexDomain, count: usize, margin: f64, seed: u64) -> Result<Vec<Point>> {
    let dim = domain.dim();
    let (lo, hi) = domain.bounding_box();
    let mut seq = RdSequence::new(dim, seed);
    let mut out = Vec::with_capacity(count);
    let cap = 1000 * count.max(1);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > cap {
            return Err(GapError::InsufficientSamples(format!(
                "only {} of {count} interior points found with margin {margin}",
                out.len()
            )));
        }
        let u = seq.next_point();
        let mut p = [lo[0] + u[0] * (hi[0] - lo[0]), 0.0];
        if dim == 2 {
            p[1] = lo[1] + u[1] * (hi[1] - lo[1]);
        }
        if domain.signed_distance(p) >= margin {
            out.push(p);
        }
    }
    Ok(out)
}

/// Half-chord of `{rho >= margin}` from `p` along the unit direction `u`.
fn inner_reach(domain: &ConvexDomain, p: Point, u: Point, margin: f64) -> f64 {
    let outer = domain.ray_exit(p, u);
    if margin <= 0.0 {
        return outer;
    }
    let (mut a, mut b) = (0.0, outer);
    for _ in 0..48 {
        let m = 0.5 * (a + b);
        if domain.signed_distance(add(p, scale(u, m))) >= margin {
            a = m;
        } else {
            b = m;
        }
    }
    a
}

pub fn sample_pairs(domain: &ConvexDomain, plan: &PairSampling) -> Result<Vec<PointPair>> {
    let margin = plan.margin.max(0.0);
    let dim = domain.dim();
    let mut pairs = Vec::with_capacity(plan.total());
    if plan.uniform > 0 {
        let xs = sample_interior(domain, plan.uniform, margin, plan.seed)?;
        let ys = sample_interior(domain, plan.uniform, margin, plan.seed ^ 0x9e37_79b9_7f4a_7c15)?;
        // break the correlation between the two streams by a fixed permutation
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed.wrapping_add(1));
        let mut perm: Vec<usize> = (0..ys.len()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        for (x, k) in xs.into_iter().zip(perm) {
            pairs.push(PointPair { x, y: ys[k] });
        }
    }
    if plan.stratified > 0 {
        let strata = plan.strata.max(1);
        let top = (domain.diameter() - 2.0 * margin).max(0.0);
        let anchors = sample_interior(domain, 4 * plan.stratified.max(16), margin, plan.seed ^ 0x5151)?;
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed.wrapping_add(2));
        for k in 0..plan.stratified {
            let band = k % strata;
            for _ in 0..200 {
                let s = top * (band as f64 + rng.gen::<f64>()) / strata as f64;
                let p = anchors[rng.gen_range(0..anchors.len())];
                let u = if dim == 1 {
                    [1.0, 0.0]
                } else {
                    let a = rng.gen::<f64>() * std::f64::consts::TAU;
                    [a.cos(), a.sin()]
                };
                let fwd = inner_reach(domain, p, u, margin);
                let back = inner_reach(domain, p, [-u[0], -u[1]], margin);
                let len = fwd + back;
                if len < s || s <= 0.0 {
                    continue;
                }
                let start = add(p, scale(u, -back + rng.gen::<f64>() * (len - s)));
                let x = start;
                let y = add(start, scale(u, s));
                if domain.contains(x) && domain.contains(y) {
                    pairs.push(PointPair { x, y });
                    break;
                }
            }
        }
    }
    Ok(pairs)
}
