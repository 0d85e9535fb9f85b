//! Bounded convex domains in one and two dimensions.
//!
//! Points are stored as `[f64; 2]` for every dimension; one-dimensional
//! domains keep the second coordinate at zero so Euclidean formulas apply
//! unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::report::{PairCheckAccumulator, PairCheckReport};
use crate::sampling::{PointPair, RdSequence};
use crate::sturm_liouville::OneDimComparison;

pub type Point = [f64; 2];

/// Relative tolerance used when deciding whether a point is on or outside the boundary.
const BOUNDARY_TOL: f64 = 1e-12;

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale(a: Point, t: f64) -> Point {
    [a[0] * t, a[1] * t]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn distance(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

fn rotate(p: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

/// Shape parameters of a supported convex domain, as declared in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainShape {
    Interval {
        lo: f64,
        hi: f64,
    },
    Rectangle {
        #[serde(default)]
        origin: Point,
        width: f64,
        height: f64,
    },
    Disk {
        #[serde(default)]
        center: Point,
        radius: f64,
    },
    Ellipse {
        #[serde(default)]
        center: Point,
        semi_axes: [f64; 2],
        #[serde(default)]
        angle: f64,
    },
    ConvexPolygon {
        vertices: Vec<Point>,
    },
}

/// A validated bounded convex domain with its cached diameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainShape", into = "DomainShape")]
pub struct ConvexDomain {
    shape: DomainShape,
    diameter: f64,
    /// Inward unit normals of polygon edges (empty for other kinds).
    normals: Vec<Point>,
}

impl TryFrom<DomainShape> for ConvexDomain {
    type Error = GapError;
    fn try_from(shape: DomainShape) -> Result<Self> {
        ConvexDomain::new(shape)
    }
}

impl From<ConvexDomain> for DomainShape {
    fn from(d: ConvexDomain) -> Self {
        d.shape
    }
}

fn finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

impl ConvexDomain {
    pub fn new(shape: DomainShape) -> Result<Self> {
        let invalid = |m: &str| Err(GapError::InvalidDomain(m.to_string()));
        let mut normals = Vec::new();
        match &shape {
            DomainShape::Interval { lo, hi } => {
                if !finite(&[*lo, *hi]) || hi <= lo {
                    return invalid("interval requires finite lo < hi");
                }
            }
            DomainShape::Rectangle {
                origin,
                width,
                height,
            } => {
                if !finite(&[origin[0], origin[1], *width, *height]) || *width <= 0.0 || *height <= 0.0
                {
                    return invalid("rectangle requires positive finite side lengths");
                }
            }
            DomainShape::Disk { center, radius } => {
                if !finite(&[center[0], center[1], *radius]) || *radius <= 0.0 {
                    return invalid("disk requires a positive finite radius");
                }
            }
            DomainShape::Ellipse {
                center,
                semi_axes,
                angle,
            } => {
                if !finite(&[center[0], center[1], semi_axes[0], semi_axes[1], *angle])
                    || semi_axes[0] <= 0.0
                    || semi_axes[1] <= 0.0
                {
                    return invalid("ellipse requires positive finite semi-axes");
                }
            }
            DomainShape::ConvexPolygon { vertices } => {
                normals = validate_polygon(vertices)?;
            }
        }
        let diameter = match &shape {
            DomainShape::Interval { lo, hi } => hi - lo,
            DomainShape::Rectangle { width, height, .. } => width.hypot(*height),
            DomainShape::Disk { radius, .. } => 2.0 * radius,
            DomainShape::Ellipse { semi_axes, .. } => 2.0 * semi_axes[0].max(semi_axes[1]),
            DomainShape::ConvexPolygon { vertices } => {
                let mut best: f64 = 0.0;
                for (i, a) in vertices.iter().enumerate() {
                    for b in &vertices[i + 1..] {
                        best = best.max(distance(*a, *b));
                    }
                }
                best
            }
        };
        if !(diameter > 0.0) {
            return invalid("domain has zero diameter");
        }
        Ok(Self {
            shape,
            diameter,
            normals,
        })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(DomainShape::Interval { lo, hi })
    }

    pub fn rectangle(width: f64, height: f64) -> Result<Self> {
        Self::new(DomainShape::Rectangle {
            origin: [0.0, 0.0],
            width,
            height,
        })
    }

    pub fn disk(center: Point, radius: f64) -> Result<Self> {
        Self::new(DomainShape::Disk { center, radius })
    }

    pub fn ellipse(center: Point, semi_axes: [f64; 2], angle: f64) -> Result<Self> {
        Self::new(DomainShape::Ellipse {
            center,
            semi_axes,
            angle,
        })
    }

    pub fn polygon(vertices: Vec<Point>) -> Result<Self> {
        Self::new(DomainShape::ConvexPolygon { vertices })
    }

    pub fn shape(&self) -> &DomainShape {
        &self.shape
    }

    pub fn kind_name(&self) -> &'static str {
        match self.shape {
            DomainShape::Interval { .. } => "interval",
            DomainShape::Rectangle { .. } => "rectangle",
            DomainShape::Disk { .. } => "disk",
            DomainShape::Ellipse { .. } => "ellipse",
            DomainShape::ConvexPolygon { .. } => "convex-polygon",
        }
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            DomainShape::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Diameter `sup |y - x|` over the closed domain.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        match &self.shape {
            DomainShape::Interval { lo, hi } => ([*lo, 0.0], [*hi, 0.0]),
            DomainShape::Rectangle {
                origin,
                width,
                height,
            } => (*origin, [origin[0] + width, origin[1] + height]),
            DomainShape::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            DomainShape::Ellipse {
                center,
                semi_axes,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let ex = (semi_axes[0] * c).hypot(semi_axes[1] * s);
                let ey = (semi_axes[0] * s).hypot(semi_axes[1] * c);
                ([center[0] - ex, center[1] - ey], [center[0] + ex, center[1] + ey])
            }
            DomainShape::ConvexPolygon { vertices } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Signed distance to the boundary: positive inside, zero on the boundary, negative outside.
    ///
    /// Inside the domain this is exactly `rho`. Outside, polygons return the largest
    /// violated half-plane distance, which has the right sign but may underestimate
    /// the Euclidean distance.
    pub fn signed_distance(&self, p: Point) -> f64 {
        match &self.shape {
            DomainShape::Interval { lo, hi } => (p[0] - lo).min(hi - p[0]),
            DomainShape::Rectangle {
                origin,
                width,
                height,
            } => {
                let q = [
                    (p[0] - origin[0] - width / 2.0).abs() - width / 2.0,
                    (p[1] - origin[1] - height / 2.0).abs() - height / 2.0,
                ];
                let outside = [q[0].max(0.0), q[1].max(0.0)];
                -(norm(outside) + q[0].max(q[1]).min(0.0))
            }
            DomainShape::Disk { center, radius } => radius - distance(p, *center),
            DomainShape::Ellipse {
                center,
                semi_axes,
                angle,
            } => {
                let local = rotate(sub(p, *center), -angle);
                let (dist, inside, _, _) = ellipse_projection(*semi_axes, local);
                if inside {
                    dist
                } else {
                    -dist
                }
            }
            DomainShape::ConvexPolygon { vertices } => self
                .normals
                .iter()
                .zip(vertices)
                .map(|(n, v)| dot(*n, sub(p, *v)))
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn boundary_tolerance(&self) -> f64 {
        BOUNDARY_TOL * self.diameter.max(1.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.signed_distance(p) >= -self.boundary_tolerance()
    }

    /// Boundary distance `rho(x) = dist(x, boundary)` on the closed domain.
    pub fn boundary_distance(&self, p: Point) -> Result<f64> {
        let sd = self.signed_distance(p);
        if sd < -self.boundary_tolerance() {
            return Err(GapError::OutOfDomain {
                point: p,
                distance: sd,
            });
        }
        Ok(sd.max(0.0))
    }

    /// Gradient of `rho`. `None` where `rho` has no well-defined gradient
    /// (disk centre, points outside the domain).
    ///
    /// Where several boundary pieces are equally near, the first one in the
    /// piece order (interval: lower end; polygons and rectangles: edge order
    /// starting with the bottom edge) decides.
    pub fn distance_gradient(&self, p: Point) -> Option<Point> {
        if self.signed_distance(p) < -self.boundary_tolerance() {
            return None;
        }
        match &self.shape {
            DomainShape::Interval { lo, hi } => {
                if p[0] - lo <= hi - p[0] {
                    Some([1.0, 0.0])
                } else {
                    Some([-1.0, 0.0])
                }
            }
            DomainShape::Rectangle {
                origin,
                width,
                height,
            } => {
                let dists = [
                    p[1] - origin[1],
                    origin[0] + width - p[0],
                    origin[1] + height - p[1],
                    p[0] - origin[0],
                ];
                let normals = [[0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]];
                Some(normals[argmin_first(&dists)])
            }
            DomainShape::Disk { center, .. } => {
                let v = sub(*center, p);
                let r = norm(v);
                if r <= self.boundary_tolerance() {
                    None
                } else {
                    Some(scale(v, 1.0 / r))
                }
            }
            DomainShape::Ellipse {
                center,
                semi_axes,
                angle,
            } => {
                let local = rotate(sub(p, *center), -angle);
                let (dist, _, nearest, _) = ellipse_projection(*semi_axes, local);
                let g = if dist > self.boundary_tolerance() {
                    scale(sub(local, nearest), 1.0 / dist)
                } else {
                    let n = [
                        -nearest[0] / (semi_axes[0] * semi_axes[0]),
                        -nearest[1] / (semi_axes[1] * semi_axes[1]),
                    ];
                    scale(n, 1.0 / norm(n))
                };
                Some(rotate(g, *angle))
            }
            DomainShape::ConvexPolygon { vertices } => {
                let dists: Vec<f64> = self
                    .normals
                    .iter()
                    .zip(vertices)
                    .map(|(n, v)| dot(*n, sub(p, *v)))
                    .collect();
                Some(self.normals[argmin_first(&dists)])
            }
        }
    }

    /// Distance from an interior point `p` to the boundary along the unit direction `u`.
    pub fn ray_exit(&self, p: Point, u: Point) -> f64 {
        match &self.shape {
            DomainShape::Interval { lo, hi } => {
                if u[0] > 0.0 {
                    (hi - p[0]) / u[0]
                } else if u[0] < 0.0 {
                    (lo - p[0]) / u[0]
                } else {
                    f64::INFINITY
                }
            }
            DomainShape::Rectangle {
                origin,
                width,
                height,
            } => {
                let hi = [origin[0] + width, origin[1] + height];
                let mut t = f64::INFINITY;
                for k in 0..2 {
                    if u[k] > 0.0 {
                        t = t.min((hi[k] - p[k]) / u[k]);
                    } else if u[k] < 0.0 {
                        t = t.min((origin[k] - p[k]) / u[k]);
                    }
                }
                t.max(0.0)
            }
            DomainShape::Disk { center, radius } => {
                let w = sub(p, *center);
                let b = dot(w, u);
                let c = dot(w, w) - radius * radius;
                let disc = (b * b - c).max(0.0);
                (-b + disc.sqrt()).max(0.0)
            }
            DomainShape::Ellipse {
                center,
                semi_axes,
                angle,
            } => {
                let w = rotate(sub(p, *center), -angle);
                let v = rotate(u, -angle);
                let (a2, b2) = (semi_axes[0] * semi_axes[0], semi_axes[1] * semi_axes[1]);
                let qa = v[0] * v[0] / a2 + v[1] * v[1] / b2;
                let qb = w[0] * v[0] / a2 + w[1] * v[1] / b2;
                let qc = w[0] * w[0] / a2 + w[1] * w[1] / b2 - 1.0;
                let disc = (qb * qb - qa * qc).max(0.0);
                ((-qb + disc.sqrt()) / qa).max(0.0)
            }
            DomainShape::ConvexPolygon { vertices } => {
                let mut t = f64::INFINITY;
                for (n, v) in self.normals.iter().zip(vertices) {
                    let rate = dot(*n, u);
                    if rate < 0.0 {
                        t = t.min(dot(*n, sub(p, *v)) / -rate);
                    }
                }
                t.max(0.0)
            }
        }
    }

    /// Largest boundary distance over the domain (radius of the largest inscribed ball).
    pub fn inradius(&self) -> f64 {
        match &self.shape {
            DomainShape::Interval { lo, hi } => (hi - lo) / 2.0,
            DomainShape::Rectangle { width, height, .. } => width.min(*height) / 2.0,
            DomainShape::Disk { radius, .. } => *radius,
            DomainShape::Ellipse { semi_axes, .. } => semi_axes[0].min(semi_axes[1]),
            DomainShape::ConvexPolygon { .. } => self.maximize_rho().1,
        }
    }

    /// Point of maximal boundary distance for polygons, by grid search and pattern refinement.
    fn maximize_rho(&self) -> (Point, f64) {
        let (lo, hi) = self.bounding_box();
        let m = 48;
        let mut best = (lo, f64::NEG_INFINITY);
        for i in 0..=m {
            for j in 0..=m {
                let p = [
                    lo[0] + (hi[0] - lo[0]) * i as f64 / m as f64,
                    lo[1] + (hi[1] - lo[1]) * j as f64 / m as f64,
                ];
                let v = self.signed_distance(p);
                if v > best.1 {
                    best = (p, v);
                }
            }
        }
        let mut step = (hi[0] - lo[0]).max(hi[1] - lo[1]) / m as f64;
        while step > 1e-14 * self.diameter {
            let mut improved = false;
            for k in 0..8 {
                let a = std::f64::consts::PI * k as f64 / 4.0;
                let q = add(best.0, [step * a.cos(), step * a.sin()]);
                let v = self.signed_distance(q);
                if v > best.1 {
                    best = (q, v);
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best
    }

    /// Point on the boundary for parameter `u` in `[0, 1)`, with the inward unit normal there.
    ///
    /// Rectangles and polygons are parametrised by arc length, disks and ellipses by angle.
    pub fn boundary_point(&self, u: f64) -> (Point, Point) {
        let u = u.rem_euclid(1.0);
        match &self.shape {
            DomainShape::Interval { lo, hi } => {
                if u < 0.5 {
                    ([*lo, 0.0], [1.0, 0.0])
                } else {
                    ([*hi, 0.0], [-1.0, 0.0])
                }
            }
            DomainShape::Disk { center, radius } => {
                let a = 2.0 * std::f64::consts::PI * u;
                let dir = [a.cos(), a.sin()];
                (add(*center, scale(dir, *radius)), scale(dir, -1.0))
            }
            DomainShape::Ellipse {
                center,
                semi_axes,
                angle,
            } => {
                let a = 2.0 * std::f64::consts::PI * u;
                let local = [semi_axes[0] * a.cos(), semi_axes[1] * a.sin()];
                let n = [
                    -local[0] / (semi_axes[0] * semi_axes[0]),
                    -local[1] / (semi_axes[1] * semi_axes[1]),
                ];
                let n = scale(n, 1.0 / norm(n));
                (add(*center, rotate(local, *angle)), rotate(n, *angle))
            }
            DomainShape::Rectangle { .. } | DomainShape::ConvexPolygon { .. } => {
                let verts = self.polygon_vertices();
                let normals = self.polygon_normals();
                let lengths: Vec<f64> = (0..verts.len())
                    .map(|i| distance(verts[i], verts[(i + 1) % verts.len()]))
                    .collect();
                let total: f64 = lengths.iter().sum();
                let mut target = u * total;
                for (i, len) in lengths.iter().enumerate() {
                    if target <= *len || i + 1 == lengths.len() {
                        let t = (target / len).clamp(0.0, 1.0);
                        let a = verts[i];
                        let b = verts[(i + 1) % verts.len()];
                        return (add(a, scale(sub(b, a), t)), normals[i]);
                    }
                    target -= len;
                }
                unreachable!("perimeter walk always terminates")
            }
        }
    }

    /// Vertices of rectangles and polygons in counterclockwise order.
    fn polygon_vertices(&self) -> Vec<Point> {
        match &self.shape {
            DomainShape::Rectangle {
                origin,
                width,
                height,
            } => vec![
                *origin,
                [origin[0] + width, origin[1]],
                [origin[0] + width, origin[1] + height],
                [origin[0], origin[1] + height],
            ],
            DomainShape::ConvexPolygon { vertices } => vertices.clone(),
            _ => Vec::new(),
        }
    }

    fn polygon_normals(&self) -> Vec<Point> {
        match &self.shape {
            DomainShape::Rectangle { .. } => {
                vec![[0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]]
            }
            _ => self.normals.clone(),
        }
    }

    /// The domain dilated about the origin by `t > 0`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(GapError::Parameter(format!("scale factor must be positive, got {t}")));
        }
        let shape = match &self.shape {
            DomainShape::Interval { lo, hi } => DomainShape::Interval {
                lo: lo * t,
                hi: hi * t,
            },
            DomainShape::Rectangle {
                origin,
                width,
                height,
            } => DomainShape::Rectangle {
                origin: scale(*origin, t),
                width: width * t,
                height: height * t,
            },
            DomainShape::Disk { center, radius } => DomainShape::Disk {
                center: scale(*center, t),
                radius: radius * t,
            },
            DomainShape::Ellipse {
                center,
                semi_axes,
                angle,
            } => DomainShape::Ellipse {
                center: scale(*center, t),
                semi_axes: [semi_axes[0] * t, semi_axes[1] * t],
                angle: *angle,
            },
            DomainShape::ConvexPolygon { vertices } => DomainShape::ConvexPolygon {
                vertices: vertices.iter().map(|v| scale(*v, t)).collect(),
            },
        };
        Self::new(shape)
    }

    /// Image of the domain under rotation about the origin by `angle` followed by
    /// translation by `shift`. Rectangles become polygons when rotated.
    pub fn rigid_motion(&self, angle: f64, shift: Point) -> Result<Self> {
        let map = |p: Point| add(rotate(p, angle), shift);
        let shape = match &self.shape {
            DomainShape::Interval { lo, hi } => {
                if angle != 0.0 {
                    return Err(GapError::Parameter(
                        "one-dimensional domains only admit translations".into(),
                    ));
                }
                DomainShape::Interval {
                    lo: lo + shift[0],
                    hi: hi + shift[0],
                }
            }
            DomainShape::Rectangle { .. } => DomainShape::ConvexPolygon {
                vertices: self.polygon_vertices().into_iter().map(map).collect(),
            },
            DomainShape::Disk { center, radius } => DomainShape::Disk {
                center: map(*center),
                radius: *radius,
            },
            DomainShape::Ellipse {
                center,
                semi_axes,
                angle: a0,
            } => DomainShape::Ellipse {
                center: map(*center),
                semi_axes: *semi_axes,
                angle: a0 + angle,
            },
            DomainShape::ConvexPolygon { vertices } => DomainShape::ConvexPolygon {
                vertices: vertices.iter().map(|v| map(*v)).collect(),
            },
        };
        Self::new(shape)
    }

    /// Whether the boundary is strictly convex (no flat pieces).
    pub fn is_strictly_convex(&self) -> bool {
        matches!(
            self.shape,
            DomainShape::Interval { .. } | DomainShape::Disk { .. } | DomainShape::Ellipse { .. }
        )
    }

    /// Default collar width `eps0 = min(eps_star, inradius / 4, d / 8)`.
    ///
    /// `eps_star` is the width within which `rho` stays smooth: the minimal radius of
    /// curvature for ellipses, the inradius for other kinds.
    pub fn default_eps0(&self) -> f64 {
        let eps_star = match &self.shape {
            DomainShape::Ellipse { semi_axes, .. } => {
                let (a, b) = (semi_axes[0].max(semi_axes[1]), semi_axes[0].min(semi_axes[1]));
                b * b / a
            }
            _ => self.inradius(),
        };
        eps_star.min(self.inradius() / 4.0).min(self.diameter / 8.0)
    }

    pub fn distance_field(&self) -> BoundaryDistanceField<'_> {
        BoundaryDistanceField { domain: self }
    }
}

fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

fn validate_polygon(vertices: &[Point]) -> Result<Vec<Point>> {
    let invalid = |m: String| Err(GapError::InvalidDomain(m));
    let n = vertices.len();
    if n < 3 {
        return invalid(format!("polygon needs at least 3 vertices, got {n}"));
    }
    if vertices.iter().any(|v| !finite(v)) {
        return invalid("polygon vertices must be finite".into());
    }
    let scale_len = vertices
        .iter()
        .flat_map(|v| v.iter())
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(1.0);
    let mut normals = Vec::with_capacity(n);
    let mut turning = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let c = vertices[(i + 2) % n];
        let e1 = sub(b, a);
        let e2 = sub(c, b);
        let l1 = norm(e1);
        if l1 <= 1e-12 * scale_len {
            return invalid(format!("repeated polygon vertex at index {}", (i + 1) % n));
        }
        let cross = e1[0] * e2[1] - e1[1] * e2[0];
        if !(cross > 1e-14 * scale_len * scale_len) {
            return invalid(format!(
                "polygon is not strictly convex and counterclockwise at vertex {}",
                (i + 1) % n
            ));
        }
        turning += cross.atan2(dot(e1, e2));
        normals.push([-e1[1] / l1, e1[0] / l1]);
    }
    if (turning - 2.0 * std::f64::consts::PI).abs() > 1e-6 {
        return invalid("polygon boundary winds more than once".into());
    }
    Ok(normals)
}

/// Projection of a point onto an axis-aligned ellipse centred at the origin.
///
/// Returns `(distance, inside, nearest boundary point, unused)`. Uses the
/// bisection formulation on the quadrant-reduced problem, which is robust for
/// points on the axes and near the centre.
fn ellipse_projection(semi_axes: [f64; 2], p: Point) -> (f64, bool, Point, ()) {
    let swap = semi_axes[0] < semi_axes[1];
    let (e0, e1) = if swap {
        (semi_axes[1], semi_axes[0])
    } else {
        (semi_axes[0], semi_axes[1])
    };
    let (q0, q1) = if swap { (p[1], p[0]) } else { (p[0], p[1]) };
    let (y0, y1) = (q0.abs(), q1.abs());
    let inside = (q0 / e0).powi(2) + (q1 / e1).powi(2) <= 1.0;
    let (x0, x1) = project_quadrant(e0, e1, y0, y1);
    let dist = (x0 - y0).hypot(x1 - y1);
    let x0 = x0.copysign(q0);
    let x1 = if q1 == 0.0 { x1 } else { x1.copysign(q1) };
    let nearest = if swap { [x1, x0] } else { [x0, x1] };
    (dist, inside, nearest, ())
}

fn project_quadrant(e0: f64, e1: f64, y0: f64, y1: f64) -> (f64, f64) {
    if e0 == e1 {
        let r = y0.hypot(y1);
        if r == 0.0 {
            return (0.0, e1);
        }
        return (e0 * y0 / r, e0 * y1 / r);
    }
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g != 0.0 {
                let r0 = (e0 / e1).powi(2);
                let t = ellipse_root(r0, z0, z1, g);
                (r0 * y0 / (t - 1.0 + r0), y1 / t)
            } else {
                (y0, y1)
            }
        } else {
            (0.0, e1)
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            (e0 * xde0, e1 * (1.0 - xde0 * xde0).max(0.0).sqrt())
        } else {
            (e0, 0.0)
        }
    }
}

/// Root `t = s + 1` of the projection equation, bisected in `t` so that points
/// just off the minor axis (where `t` is of the order of `z1`) keep full precision.
fn ellipse_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut t0 = z1;
    let mut t1 = if g < 0.0 { 1.0 } else { n0.hypot(z1) };
    let mut t = t0;
    for _ in 0..1100 {
        t = 0.5 * (t0 + t1);
        if t == t0 || t == t1 {
            break;
        }
        let ratio0 = n0 / (t - 1.0 + r0);
        let ratio1 = z1 / t;
        let gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if gs > 0.0 {
            t0 = t;
        } else if gs < 0.0 {
            t1 = t;
        } else {
            break;
        }
    }
    t
}

/// View of a domain as the boundary distance function `rho`.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryDistanceField<'a> {
    pub domain: &'a ConvexDomain,
}

impl<'a> BoundaryDistanceField<'a> {
    pub fn rho(&self, x: Point) -> Result<f64> {
        self.domain.boundary_distance(x)
    }

    pub fn gradient(&self, x: Point) -> Option<Point> {
        self.domain.distance_gradient(x)
    }

    /// Deterministic points of the collar `{rho <= eps}` obtained by pushing
    /// boundary points inward along the normal by a depth in `[0, eps]`.
    pub fn collar_points(&self, eps: f64, count: usize, seed: u64) -> Vec<Point> {
        let mut seq = RdSequence::new(2, seed);
        let dim = self.domain.dim();
        let mut out = Vec::with_capacity(count);
        // near polygon corners a push along one edge normal can leave through the
        // neighbouring edge; such draws are discarded
        for _ in 0..100 * count.max(1) {
            if out.len() == count {
                break;
            }
            let u = seq.next_point();
            let (b, n) = self.domain.boundary_point(u[0]);
            let mut p = add(b, scale(n, eps * u[1]));
            if dim == 1 {
                p[1] = 0.0;
            }
            if self.domain.contains(p) {
                out.push(p);
            }
        }
        out
    }
}

/// `boundary_distance` as a free function over a distance field.
pub fn boundary_distance(field: &BoundaryDistanceField<'_>, x: Point) -> Result<f64> {
    field.rho(x)
}

/// `diameter` as a free function.
pub fn diameter(domain: &ConvexDomain) -> f64 {
    domain.diameter()
}

/// Sampling density for the strict-convexity constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta0Samples {
    /// Number of collar points `x`.
    pub collar: usize,
    /// Number of unit directions `(y - x)/|y - x|` tried at each collar point.
    pub directions: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for Theta0Samples {
    fn default() -> Self {
        Self {
            collar: 2048,
            directions: 2048,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta0Estimate {
    pub theta0: f64,
    pub eps0: f64,
    /// Collar point and far point realising the sampled minimum.
    pub argmin: (Point, Point),
    pub admissible_pairs: usize,
    /// True when the sampled minimum is not strictly positive.
    pub strict_convexity_violation: bool,
}

/// Sampled minimum of `grad rho(x) . (y - x)/|y - x|` over collar points `x` with
/// `rho(x) <= eps0` and far points `y` of the closed domain with `|y - x| >= d/2`.
///
/// For a fixed `x` only the direction of `y - x` matters, and a direction is
/// admissible exactly when the chord from `x` along it reaches `d/2`, so far
/// points are enumerated through directions and `ray_exit`.
pub fn estimate_theta0(
    domain: &ConvexDomain,
    eps0: f64,
    samples: Theta0Samples,
) -> Result<Theta0Estimate> {
    if !(eps0 > 0.0) {
        return Err(GapError::Parameter(format!("eps0 must be positive, got {eps0}")));
    }
    if samples.collar == 0 || samples.directions == 0 {
        return Err(GapError::InsufficientSamples("zero sample counts".into()));
    }
    let field = domain.distance_field();
    let half_d = 0.5 * domain.diameter();
    let reach_tol = 1e-12 * domain.diameter();
    let directions: Vec<Point> = if domain.dim() == 1 {
        vec![[1.0, 0.0], [-1.0, 0.0]]
    } else {
        (0..samples.directions)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / samples.directions as f64;
                [a.cos(), a.sin()]
            })
            .collect()
    };
    let mut best = f64::INFINITY;
    let mut argmin = ([0.0; 2], [0.0; 2]);
    let mut admissible = 0usize;
    for x in field.collar_points(eps0, samples.collar, samples.seed) {
        let Some(g) = field.gradient(x) else { continue };
        for u in &directions {
            let reach = domain.ray_exit(x, *u);
            if reach + reach_tol < half_d {
                continue;
            }
            admissible += 1;
            let v = dot(g, *u);
            if v < best {
                best = v;
                argmin = (x, add(x, scale(*u, reach)));
            }
        }
    }
    if admissible == 0 {
        return Err(GapError::InsufficientSamples(
            "no admissible (collar point, far point) pairs were sampled".into(),
        ));
    }
    Ok(Theta0Estimate {
        theta0: best,
        eps0,
        argmin,
        admissible_pairs: admissible,
        strict_convexity_violation: !(best > 0.0),
    })
}

/// Constants and evaluation rule of the auxiliary initial datum
/// `u0(x) = exp(-c0 |x|^2 / 2) * rho(x)^kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryData {
    pub domain: ConvexDomain,
    /// `None` when `kappa` was supplied directly instead of derived from `theta0`.
    pub theta0: Option<f64>,
    pub eps0: f64,
    pub kappa: f64,
    pub c0: f64,
}

impl AuxiliaryData {
    /// Auxiliary data with an explicitly chosen exponent, for domains where the
    /// strict-convexity constant is not positive.
    pub fn with_kappa(domain: &ConvexDomain, eps0: f64, kappa: f64, c0: f64) -> Result<Self> {
        if !(kappa > 0.0) || !(c0 >= 0.0) {
            return Err(GapError::CannotConstruct(format!(
                "need kappa > 0 and c0 >= 0 (got {kappa}, {c0})"
            )));
        }
        Ok(Self {
            domain: domain.clone(),
            theta0: None,
            eps0,
            kappa,
            c0,
        })
    }

    pub fn u0(&self, x: Point) -> Result<f64> {
        let rho = self.domain.boundary_distance(x)?;
        Ok((-0.5 * self.c0 * dot(x, x)).exp() * rho.powf(self.kappa))
    }

    /// `grad log u0 = -c0 x + kappa grad rho / rho`, evaluated analytically.
    /// `None` on the boundary or where `grad rho` is undefined.
    pub fn grad_log_u0(&self, x: Point) -> Option<Point> {
        let rho = self.domain.boundary_distance(x).ok()?;
        if rho <= 0.0 {
            return None;
        }
        let g = self.domain.distance_gradient(x)?;
        let mut out = sub(scale(g, self.kappa / rho), scale(x, self.c0));
        if self.domain.dim() == 1 {
            out[1] = 0.0;
        }
        Some(out)
    }
}

/// Builds the auxiliary datum with `kappa = 8 / theta0`.
pub fn build_auxiliary_data(
    domain: &ConvexDomain,
    eps0: f64,
    c0: f64,
    samples: Theta0Samples,
) -> Result<AuxiliaryData> {
    if !(c0 >= 0.0) {
        return Err(GapError::CannotConstruct(format!("c0 must be nonnegative, got {c0}")));
    }
    let est = estimate_theta0(domain, eps0, samples)?;
    if est.strict_convexity_violation {
        return Err(GapError::CannotConstruct(format!(
            "sampled strict-convexity constant is {:.3e} <= 0 (pair {:?})",
            est.theta0, est.argmin
        )));
    }
    Ok(AuxiliaryData {
        domain: domain.clone(),
        theta0: Some(est.theta0),
        eps0,
        kappa: 8.0 / est.theta0,
        c0,
    })
}

/// Evaluates `[grad log u0(y) - grad log u0(x)] . (y - x)/|y - x| - Phi(|y - x|)` on each pair.
pub fn check_u0_concavity_estimate(
    aux: &AuxiliaryData,
    comparison: &OneDimComparison,
    pairs: &[PointPair],
    tolerance: f64,
) -> PairCheckReport {
    let mut acc = PairCheckAccumulator::new("u0-concavity", tolerance);
    let min_sep = 1e-9 * aux.domain.diameter();
    for pair in pairs {
        let v = sub(pair.y, pair.x);
        let sep = norm(v);
        if sep <= min_sep {
            acc.skip("coincident");
            continue;
        }
        if sep >= comparison.d {
            acc.skip("separation-beyond-comparison-diameter");
            continue;
        }
        let (Some(gx), Some(gy)) = (aux.grad_log_u0(pair.x), aux.grad_log_u0(pair.y)) else {
            acc.skip("gradient-undefined");
            continue;
        };
        let diff = sub(gy, gx);
        if !diff[0].is_finite() || !diff[1].is_finite() {
            acc.skip("gradient-overflow");
            continue;
        }
        let margin = dot(diff, v) / sep - comparison.phi(sep);
        acc.record(pair.x, pair.y, margin);
    }
    acc.finish()
}
