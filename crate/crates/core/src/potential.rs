//! Potentials on the comparison interval and on domains.

use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::geometry::Point;

/// Potential on the symmetric comparison interval `(-d/2, d/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Potential1D {
    Constant {
        value: f64,
    },
    /// `sum_k coefficients[k] * s^(2k)`.
    PolynomialEven {
        coefficients: Vec<f64>,
    },
    /// Piecewise-linear interpolation of `values` at increasing `nodes`.
    ///
    /// With `even = true` the table describes `s >= 0` and is extended by `|s|`.
    /// Derivatives are interpolated from `derivatives` when supplied and from
    /// difference quotients of the table otherwise.
    Tabulated {
        nodes: Vec<f64>,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        derivatives: Option<Vec<f64>>,
        #[serde(default)]
        even: bool,
    },
}

fn locate(nodes: &[f64], s: f64) -> (usize, f64) {
    let n = nodes.len();
    if s <= nodes[0] {
        return (0, 0.0);
    }
    if s >= nodes[n - 1] {
        return (n - 2, 1.0);
    }
    let k = nodes.partition_point(|v| *v <= s).saturating_sub(1).min(n - 2);
    let w = (s - nodes[k]) / (nodes[k + 1] - nodes[k]);
    (k, w)
}

fn node_slope(nodes: &[f64], values: &[f64], k: usize) -> f64 {
    let n = nodes.len();
    let (a, b) = if k == 0 {
        (0, 1)
    } else if k == n - 1 {
        (n - 2, n - 1)
    } else {
        (k - 1, k + 1)
    };
    (values[b] - values[a]) / (nodes[b] - nodes[a])
}

impl Potential1D {
    pub fn zero() -> Self {
        Potential1D::Constant { value: 0.0 }
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            Potential1D::Constant { value } => *value,
            Potential1D::PolynomialEven { coefficients } => {
                let s2 = s * s;
                coefficients.iter().rev().fold(0.0, |acc, c| acc * s2 + c)
            }
            Potential1D::Tabulated {
                nodes, values, even, ..
            } => {
                let t = if *even { s.abs() } else { s };
                let (k, w) = locate(nodes, t);
                values[k] * (1.0 - w) + values[k + 1] * w
            }
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            Potential1D::Constant { .. } => 0.0,
            Potential1D::PolynomialEven { coefficients } => {
                let s2 = s * s;
                let mut acc = 0.0;
                for (k, c) in coefficients.iter().enumerate().skip(1).rev() {
                    acc = acc * s2 + 2.0 * k as f64 * c;
                }
                acc * s
            }
            Potential1D::Tabulated {
                nodes,
                values,
                derivatives,
                even,
            } => {
                let (t, sign) = if *even { (s.abs(), s.signum()) } else { (s, 1.0) };
                let (k, w) = locate(nodes, t);
                let dv = match derivatives {
                    Some(d) => d[k] * (1.0 - w) + d[k + 1] * w,
                    None => {
                        node_slope(nodes, values, k) * (1.0 - w)
                            + node_slope(nodes, values, k + 1) * w
                    }
                };
                if *even && s == 0.0 {
                    0.0
                } else {
                    sign * dv
                }
            }
        }
    }

    pub fn is_even(&self) -> bool {
        match self {
            Potential1D::Constant { .. } | Potential1D::PolynomialEven { .. } => true,
            Potential1D::Tabulated { even, nodes, values, .. } => {
                *even || {
                    // symmetric table about zero
                    let n = nodes.len();
                    (0..n).all(|k| {
                        (nodes[k] + nodes[n - 1 - k]).abs() <= 1e-12 * nodes[n - 1].abs().max(1.0)
                            && (values[k] - values[n - 1 - k]).abs()
                                <= 1e-12 * values[k].abs().max(1.0)
                    })
                }
            }
        }
    }

    /// Checks finiteness and that a table covers `[-half_width, half_width]`.
    pub fn validate(&self, half_width: f64) -> Result<()> {
        let bad = |m: String| Err(GapError::InvalidPotential(m));
        match self {
            Potential1D::Constant { value } => {
                if !value.is_finite() {
                    return bad("constant potential must be finite".into());
                }
            }
            Potential1D::PolynomialEven { coefficients } => {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    return bad("polynomial needs finite coefficients".into());
                }
            }
            Potential1D::Tabulated {
                nodes,
                values,
                derivatives,
                even,
            } => {
                if nodes.len() < 2 || nodes.len() != values.len() {
                    return bad("table needs at least two nodes and matching values".into());
                }
                if let Some(d) = derivatives {
                    if d.len() != nodes.len() || d.iter().any(|v| !v.is_finite()) {
                        return bad("derivative table must match nodes".into());
                    }
                }
                if nodes.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("table nodes must be strictly increasing".into());
                }
                if values.iter().chain(nodes.iter()).any(|v| !v.is_finite()) {
                    return bad("table entries must be finite".into());
                }
                let tol = 1e-9 * half_width.max(1.0);
                let lo_needed = if *even { 0.0 } else { -half_width };
                if nodes[0] > lo_needed + tol || nodes[nodes.len() - 1] < half_width - tol {
                    return bad(format!(
                        "table covers [{}, {}] but [{lo_needed}, {half_width}] is required",
                        nodes[0],
                        nodes[nodes.len() - 1]
                    ));
                }
            }
        }
        Ok(())
    }

    /// Tabulates the even function `value` on `[0, half_width]` with `n` cells.
    pub fn tabulate_even(half_width: f64, n: usize, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Self {
        let nodes: Vec<f64> = (0..=n).map(|k| half_width * k as f64 / n as f64).collect();
        Potential1D::Tabulated {
            values: nodes.iter().map(|s| f(*s)).collect(),
            derivatives: Some(nodes.iter().map(|s| df(*s)).collect()),
            nodes,
            even: true,
        }
    }
}

/// Potential on a domain in one or two dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialND {
    Constant {
        value: f64,
    },
    /// `0.5 (x - center)^T matrix (x - center) + offset` with symmetric `matrix`.
    QuadraticForm {
        matrix: [[f64; 2]; 2],
        #[serde(default)]
        center: Point,
        #[serde(default)]
        offset: f64,
    },
    /// `coefficient * |x - center|^exponent`.
    Radial {
        coefficient: f64,
        exponent: f64,
        #[serde(default)]
        center: Point,
    },
    /// `sum_i weights[i] * |x_i - center_i|^exponent`.
    AxisPower {
        weights: [f64; 2],
        exponent: f64,
        #[serde(default)]
        center: Point,
    },
    /// Bilinear interpolation of samples on a uniform grid with `shape[0]` nodes
    /// along the first axis; `values` is stored with the first axis fastest.
    TabulatedOnGrid {
        origin: Point,
        spacing: f64,
        shape: [usize; 2],
        values: Vec<f64>,
    },
}

impl PotentialND {
    pub fn zero() -> Self {
        PotentialND::Constant { value: 0.0 }
    }

    pub fn value(&self, x: Point) -> f64 {
        match self {
            PotentialND::Constant { value } => *value,
            PotentialND::QuadraticForm {
                matrix,
                center,
                offset,
            } => {
                let w = [x[0] - center[0], x[1] - center[1]];
                let aw = [
                    matrix[0][0] * w[0] + matrix[0][1] * w[1],
                    matrix[1][0] * w[0] + matrix[1][1] * w[1],
                ];
                0.5 * (w[0] * aw[0] + w[1] * aw[1]) + offset
            }
            PotentialND::Radial {
                coefficient,
                exponent,
                center,
            } => {
                let r = (x[0] - center[0]).hypot(x[1] - center[1]);
                coefficient * r.powf(*exponent)
            }
            PotentialND::AxisPower {
                weights,
                exponent,
                center,
            } => (0..2)
                .map(|i| weights[i] * (x[i] - center[i]).abs().powf(*exponent))
                .sum(),
            PotentialND::TabulatedOnGrid { .. } => self.bilinear(x).0,
        }
    }

    pub fn gradient(&self, x: Point) -> Point {
        match self {
            PotentialND::Constant { .. } => [0.0, 0.0],
            PotentialND::QuadraticForm { matrix, center, .. } => {
                let w = [x[0] - center[0], x[1] - center[1]];
                [
                    matrix[0][0] * w[0] + matrix[0][1] * w[1],
                    matrix[1][0] * w[0] + matrix[1][1] * w[1],
                ]
            }
            PotentialND::Radial {
                coefficient,
                exponent,
                center,
            } => {
                let w = [x[0] - center[0], x[1] - center[1]];
                let r = w[0].hypot(w[1]);
                if r == 0.0 {
                    return [0.0, 0.0];
                }
                let f = coefficient * exponent * r.powf(exponent - 2.0);
                [f * w[0], f * w[1]]
            }
            PotentialND::AxisPower {
                weights,
                exponent,
                center,
            } => {
                let mut g = [0.0; 2];
                for i in 0..2 {
                    let w = x[i] - center[i];
                    if w != 0.0 {
                        g[i] = weights[i] * exponent * w.abs().powf(exponent - 1.0) * w.signum();
                    }
                }
                g
            }
            PotentialND::TabulatedOnGrid { .. } => self.bilinear(x).1,
        }
    }

    fn bilinear(&self, x: Point) -> (f64, Point) {
        let PotentialND::TabulatedOnGrid {
            origin,
            spacing,
            shape,
            values,
        } = self
        else {
            unreachable!()
        };
        let mut idx = [0usize; 2];
        let mut w = [0.0; 2];
        for a in 0..2 {
            if shape[a] < 2 {
                continue;
            }
            let t = ((x[a] - origin[a]) / spacing).clamp(0.0, (shape[a] - 1) as f64);
            let k = (t.floor() as usize).min(shape[a] - 2);
            idx[a] = k;
            w[a] = t - k as f64;
        }
        let at = |i: usize, j: usize| values[i + shape[0] * j];
        let j1 = if shape[1] < 2 { idx[1] } else { idx[1] + 1 };
        let (i0, i1) = (idx[0], idx[0] + 1);
        let (v00, v10, v01, v11) = (at(i0, idx[1]), at(i1, idx[1]), at(i0, j1), at(i1, j1));
        let value = v00 * (1.0 - w[0]) * (1.0 - w[1])
            + v10 * w[0] * (1.0 - w[1])
            + v01 * (1.0 - w[0]) * w[1]
            + v11 * w[0] * w[1];
        let gx = ((v10 - v00) * (1.0 - w[1]) + (v11 - v01) * w[1]) / spacing;
        let gy = if shape[1] < 2 {
            0.0
        } else {
            ((v01 - v00) * (1.0 - w[0]) + (v11 - v10) * w[0]) / spacing
        };
        (value, [gx, gy])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GapError::InvalidPotential(m.to_string()));
        match self {
            PotentialND::Constant { value } if !value.is_finite() => bad("constant must be finite"),
            PotentialND::QuadraticForm { matrix, center, offset } => {
                let all = [matrix[0][0], matrix[0][1], matrix[1][0], matrix[1][1], center[0], center[1], *offset];
                if all.iter().any(|v| !v.is_finite()) {
                    return bad("quadratic form entries must be finite");
                }
                if (matrix[0][1] - matrix[1][0]).abs() > 1e-12 * (matrix[0][1].abs() + 1.0) {
                    return bad("quadratic form matrix must be symmetric");
                }
                Ok(())
            }
            PotentialND::Radial { coefficient, exponent, .. } => {
                if !coefficient.is_finite() || !(*exponent >= 1.0) {
                    return bad("radial potential needs a finite coefficient and exponent >= 1");
                }
                Ok(())
            }
            PotentialND::AxisPower { weights, exponent, .. } => {
                if weights.iter().any(|w| !w.is_finite()) || !(*exponent >= 1.0) {
                    return bad("axis power needs finite weights and exponent >= 1");
                }
                Ok(())
            }
            PotentialND::TabulatedOnGrid { spacing, shape, values, .. } => {
                if !(*spacing > 0.0) || shape[0] < 2 || shape[1] < 1 || values.len() != shape[0] * shape[1] {
                    return bad("grid table has inconsistent shape");
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return bad("grid table entries must be finite");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Whether the potential is convex; `None` if this cannot be decided from the parameters.
    pub fn is_convex(&self) -> Option<bool> {
        match self {
            PotentialND::Constant { .. } => Some(true),
            PotentialND::QuadraticForm { matrix, .. } => {
                let tr = matrix[0][0] + matrix[1][1];
                let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
                Some(det >= 0.0 && tr >= 0.0)
            }
            PotentialND::Radial { coefficient, exponent, .. } => Some(*coefficient >= 0.0 && *exponent >= 1.0),
            PotentialND::AxisPower { weights, exponent, .. } => {
                Some(weights.iter().all(|w| *w >= 0.0) && *exponent >= 1.0)
            }
            PotentialND::TabulatedOnGrid { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_even_value_and_derivative() {
        let v = Potential1D::PolynomialEven {
            coefficients: vec![1.0, 2.0, 3.0],
        };
        let s: f64 = 0.7;
        assert_relative_eq!(v.value(s), 1.0 + 2.0 * s * s + 3.0 * s.powi(4));
        assert_relative_eq!(v.derivative(s), 4.0 * s + 12.0 * s.powi(3));
        assert_relative_eq!(v.value(-s), v.value(s));
    }

    #[test]
    fn tabulated_even_extension() {
        let v = Potential1D::tabulate_even(1.0, 100, |s| s * s, |s| 2.0 * s);
        assert_relative_eq!(v.value(-0.5), 0.25, epsilon = 1e-4);
        assert_relative_eq!(v.derivative(-0.5), -1.0, epsilon = 1e-12);
        assert_eq!(v.derivative(0.0), 0.0);
        v.validate(1.0).unwrap();
        assert!(v.validate(1.5).is_err());
    }

    #[test]
    fn tabulated_without_derivatives_uses_differences() {
        let nodes: Vec<f64> = (0..=200).map(|k| -1.0 + k as f64 * 0.01).collect();
        let values: Vec<f64> = nodes.iter().map(|s| s * s * s).collect();
        let v = Potential1D::Tabulated {
            nodes,
            values,
            derivatives: None,
            even: false,
        };
        assert_relative_eq!(v.derivative(0.5), 0.75, epsilon = 1e-3);
        assert!(!v.is_even());
    }

    #[test]
    fn nd_gradients_match_differences() {
        let pots = [
            PotentialND::QuadraticForm {
                matrix: [[2.0, 0.5], [0.5, 1.0]],
                center: [0.1, -0.2],
                offset: 0.3,
            },
            PotentialND::Radial {
                coefficient: 1.5,
                exponent: 3.0,
                center: [0.0, 0.0],
            },
            PotentialND::AxisPower {
                weights: [1.0, 0.0],
                exponent: 4.0,
                center: [0.0, 0.0],
            },
        ];
        let x = [0.3, 0.45];
        let h = 1e-6;
        for p in &pots {
            let g = p.gradient(x);
            for a in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += h;
                xm[a] -= h;
                let fd = (p.value(xp) - p.value(xm)) / (2.0 * h);
                assert_relative_eq!(g[a], fd, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn grid_table_reproduces_bilinear_data() {
        let shape = [11, 11];
        let spacing = 0.1;
        let values: Vec<f64> = (0..121)
            .map(|k| {
                let (i, j) = (k % 11, k / 11);
                1.0 + 2.0 * i as f64 * spacing - 0.5 * j as f64 * spacing
            })
            .collect();
        let p = PotentialND::TabulatedOnGrid {
            origin: [0.0, 0.0],
            spacing,
            shape,
            values,
        };
        p.validate().unwrap();
        assert_relative_eq!(p.value([0.33, 0.71]), 1.0 + 0.66 - 0.355, epsilon = 1e-12);
        let g = p.gradient([0.33, 0.71]);
        assert_relative_eq!(g[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(g[1], -0.5, epsilon = 1e-12);
    }
}
