//! Uniform lattice over a domain's bounding box, restricted to strictly interior nodes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::geometry::{ConvexDomain, Point};

const MASKED: u32 = u32::MAX;

/// Treatment of lattice neighbours that fall outside the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryScheme {
    /// Masked neighbours carry the Dirichlet value at lattice distance `h`.
    #[default]
    NodeElimination,
    /// Masked neighbours are replaced by the boundary crossing of the grid line.
    Fitted,
}

/// Minimum number of distinct interior lattice lines along each axis.
pub const MIN_NODES_PER_AXIS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedGrid {
    pub domain: ConvexDomain,
    pub dim: usize,
    /// Lattice node `(i, j)` sits at `origin + h (i, j)`.
    pub origin: Point,
    pub h: f64,
    /// Lattice node counts per axis; the second is 1 for intervals.
    pub shape: [usize; 2],
    /// Axis whose index varies fastest in the interior numbering.
    pub fast_axis: usize,
    pub scheme: BoundaryScheme,
    lattice_to_node: Vec<u32>,
    coords: Vec<[usize; 2]>,
    rho: Vec<f64>,
    /// Arm lengths `[-x, +x, -y, +y]` for nodes with a masked neighbour.
    arms: Vec<Option<[f64; 4]>>,
}

impl MaskedGrid {
    pub fn new(domain: &ConvexDomain, h: f64) -> Result<Self> {
        Self::with_scheme(domain, h, BoundaryScheme::NodeElimination)
    }

    pub fn with_scheme(domain: &ConvexDomain, h: f64, scheme: BoundaryScheme) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(GapError::Parameter(format!("grid spacing must be positive, got {h}")));
        }
        let dim = domain.dim();
        let (lo, hi) = domain.bounding_box();
        let mut shape = [1usize; 2];
        for a in 0..dim {
            let cells = ((hi[a] - lo[a]) / h + 1e-9).floor();
            if cells > 1e8 {
                return Err(GapError::Parameter("grid has too many nodes".into()));
            }
            shape[a] = cells as usize + 1;
        }
        let origin = [lo[0], if dim == 1 { 0.0 } else { lo[1] }];
        let fast_axis = if dim == 2 && shape[1] < shape[0] { 1 } else { 0 };
        let slow_axis = 1 - fast_axis;
        let eps = 1e-12 * domain.diameter().max(1.0);
        let mut lattice_to_node = vec![MASKED; shape[0] * shape[1]];
        let mut coords = Vec::new();
        let mut rho = Vec::new();
        for s in 0..shape[slow_axis] {
            for f in 0..shape[fast_axis] {
                let mut c = [0usize; 2];
                c[fast_axis] = f;
                c[slow_axis] = s;
                let p = [origin[0] + c[0] as f64 * h, origin[1] + c[1] as f64 * h];
                let sd = domain.signed_distance(p);
                if sd > eps {
                    lattice_to_node[c[0] + shape[0] * c[1]] = coords.len() as u32;
                    coords.push(c);
                    rho.push(sd);
                }
            }
        }
        let mut grid = Self {
            domain: domain.clone(),
            dim,
            origin,
            h,
            shape,
            fast_axis,
            scheme,
            lattice_to_node,
            coords,
            rho,
            arms: Vec::new(),
        };
        grid.arms = (0..grid.len()).map(|k| grid.compute_arms(k)).collect();
        for a in 0..dim {
            let mut lines: Vec<usize> = grid.coords.iter().map(|c| c[a]).collect();
            lines.sort_unstable();
            lines.dedup();
            if lines.len() < MIN_NODES_PER_AXIS {
                return Err(GapError::GridTooCoarse(format!(
                    "only {} interior nodes along axis {a}; at least {MIN_NODES_PER_AXIS} are required",
                    lines.len()
                )));
            }
        }
        grid.check_connected()?;
        Ok(grid)
    }

    fn compute_arms(&self, k: usize) -> Option<[f64; 4]> {
        let mut arms = [self.h; 4];
        let mut irregular = false;
        for a in 0..self.dim {
            for (slot, dir) in [(2 * a, -1i64), (2 * a + 1, 1)] {
                if self.neighbor(k, a, dir).is_none() {
                    irregular = true;
                    if self.scheme == BoundaryScheme::Fitted {
                        let mut u = [0.0; 2];
                        u[a] = dir as f64;
                        arms[slot] = self.domain.ray_exit(self.position(k), u).min(self.h);
                    }
                }
            }
        }
        irregular.then_some(arms)
    }

    /// Distances to the neighbour or boundary crossing along `axis` in directions `-1` and `+1`.
    pub fn arms(&self, k: usize, axis: usize) -> (f64, f64) {
        match self.arms[k] {
            Some(a) => (a[2 * axis], a[2 * axis + 1]),
            None => (self.h, self.h),
        }
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(k) = queue.pop_front() {
            for a in 0..self.dim {
                for dir in [-1i64, 1] {
                    if let Some(j) = self.neighbor(k, a, dir) {
                        if !seen[j] {
                            seen[j] = true;
                            count += 1;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        if count != n {
            return Err(GapError::GridTooCoarse(format!(
                "interior mask splits into several components ({count} of {n} nodes reachable)"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self, k: usize) -> [usize; 2] {
        self.coords[k]
    }

    pub fn position(&self, k: usize) -> Point {
        let c = self.coords[k];
        [self.origin[0] + c[0] as f64 * self.h, self.origin[1] + c[1] as f64 * self.h]
    }

    /// Boundary distance of interior node `k`.
    pub fn rho(&self, k: usize) -> f64 {
        self.rho[k]
    }

    /// Interior index of the lattice node at `coords`, if that node is interior.
    pub fn index_of(&self, coords: [i64; 2]) -> Option<usize> {
        if coords[0] < 0 || coords[1] < 0 {
            return None;
        }
        let (i, j) = (coords[0] as usize, coords[1] as usize);
        if i >= self.shape[0] || j >= self.shape[1] {
            return None;
        }
        match self.lattice_to_node[i + self.shape[0] * j] {
            MASKED => None,
            v => Some(v as usize),
        }
    }

    pub fn neighbor(&self, k: usize, axis: usize, dir: i64) -> Option<usize> {
        let c = self.coords[k];
        let mut q = [c[0] as i64, c[1] as i64];
        q[axis] += dir;
        self.index_of(q)
    }

    /// Interior node closest to `p`, if the closest lattice node is interior.
    pub fn nearest_node(&self, p: Point) -> Option<usize> {
        let mut q = [0i64; 2];
        for a in 0..self.dim {
            q[a] = ((p[a] - self.origin[a]) / self.h).round() as i64;
        }
        self.index_of(q)
    }

    /// Discrete `L^2` inner product `h^dim sum a_k b_k`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.h.powi(self.dim as i32) * crate::linalg::dot(a, b)
    }

    /// Three-point `grad f / f` at node `k`, with zero values at masked neighbours
    /// placed at the arm lengths of the grid's boundary scheme.
    /// `None` if `f` is not positive at `k`.
    pub fn log_gradient(&self, f: &[f64], k: usize) -> Option<Point> {
        if !(f[k] > 0.0) {
            return None;
        }
        let mut g = [0.0; 2];
        for (a, ga) in g.iter_mut().enumerate().take(self.dim) {
            let fp = self.neighbor(k, a, 1).map_or(0.0, |j| f[j]);
            let fm = self.neighbor(k, a, -1).map_or(0.0, |j| f[j]);
            let (hm, hp) = self.arms(k, a);
            let df = -hp / (hm * (hm + hp)) * fm + (hp - hm) / (hm * hp) * f[k] + hm / (hp * (hm + hp)) * fp;
            *ga = df / f[k];
        }
        Some(g)
    }

    /// Gradient of `log f` from differences of `log f` itself, for fields that are not resolved as `f`
    /// (steep powers of `rho`). Needs `f > 0` at `k` and at every neighbour.
    pub fn gradient_of_log(&self, f: &[f64], k: usize) -> Option<Point> {
        if !(f[k] > 0.0) {
            return None;
        }
        let mut g = [0.0; 2];
        for (a, ga) in g.iter_mut().enumerate().take(self.dim) {
            let fp = f[self.neighbor(k, a, 1)?];
            let fm = f[self.neighbor(k, a, -1)?];
            if !(fp > 0.0 && fm > 0.0) {
                return None;
            }
            let (hm, hp) = self.arms(k, a);
            let (lm, l0, lp) = (fm.ln(), f[k].ln(), fp.ln());
            *ga = -hp / (hm * (hm + hp)) * lm + (hp - hm) / (hm * hp) * l0 + hm / (hp * (hm + hp)) * lp;
        }
        Some(g)
    }

    /// Whether all axis neighbours of `k` are interior.
    pub fn has_full_stencil(&self, k: usize) -> bool {
        (0..self.dim).all(|a| self.neighbor(k, a, 1).is_some() && self.neighbor(k, a, -1).is_some())
    }
}
