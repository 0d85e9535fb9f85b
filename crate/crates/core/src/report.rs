//! Summaries of pairwise inequality checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMargin {
    pub x: Point,
    pub y: Point,
    pub margin: f64,
}

/// Outcome of evaluating a margin `lhs - rhs` over a set of point pairs.
/// The check passes when every evaluated margin is at most `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheckReport {
    pub check: String,
    pub sample_count: usize,
    pub evaluated: usize,
    pub skipped: usize,
    pub skip_reasons: BTreeMap<String, usize>,
    pub min_margin: Option<f64>,
    pub max_margin: Option<f64>,
    pub worst: Option<PairMargin>,
    pub tolerance: f64,
    pub violations: usize,
    pub passed: bool,
    /// Every evaluated pair, kept for CSV export.
    #[serde(skip)]
    pub records: Vec<PairMargin>,
}

impl PairCheckReport {
    /// Combines two reports of the same check. Associative, with the empty report as identity.
    pub fn merge(&self, other: &PairCheckReport) -> PairCheckReport {
        let mut skip_reasons = self.skip_reasons.clone();
        for (k, v) in &other.skip_reasons {
            *skip_reasons.entry(k.clone()).or_insert(0) += v;
        }
        let opt = |a: Option<f64>, b: Option<f64>, f: fn(f64, f64) -> f64| match (a, b) {
            (Some(x), Some(y)) => Some(f(x, y)),
            (x, None) => x,
            (None, y) => y,
        };
        let worst = match (&self.worst, &other.worst) {
            (Some(a), Some(b)) => Some(if b.margin > a.margin { b.clone() } else { a.clone() }),
            (a, None) => a.clone(),
            (None, b) => b.clone(),
        };
        let evaluated = self.evaluated + other.evaluated;
        let max_margin = opt(self.max_margin, other.max_margin, f64::max);
        let tolerance = self.tolerance.min(other.tolerance);
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        PairCheckReport {
            check: self.check.clone(),
            sample_count: self.sample_count + other.sample_count,
            evaluated,
            skipped: self.skipped + other.skipped,
            skip_reasons,
            min_margin: opt(self.min_margin, other.min_margin, f64::min),
            max_margin,
            worst,
            tolerance,
            violations: self.violations + other.violations,
            passed: evaluated > 0 && max_margin.is_some_and(|m| m <= tolerance),
            records,
        }
    }

    /// CSV with one row per evaluated pair.
    pub fn to_csv(&self) -> String {
        let dim2 = self.records.iter().any(|r| r.x[1] != 0.0 || r.y[1] != 0.0);
        let mut out = if dim2 {
            String::from("x0,x1,y0,y1,separation,margin\n")
        } else {
            String::from("x,y,separation,margin\n")
        };
        for r in &self.records {
            let sep = crate::geometry::distance(r.x, r.y);
            if dim2 {
                out.push_str(&format!(
                    "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                    r.x[0], r.x[1], r.y[0], r.y[1], sep, r.margin
                ));
            } else {
                out.push_str(&format!("{:.17e},{:.17e},{:.17e},{:.17e}\n", r.x[0], r.y[0], sep, r.margin));
            }
        }
        out
    }
}

/// Incremental builder for a [`PairCheckReport`].
#[derive(Debug, Clone)]
pub struct PairCheckAccumulator {
    report: PairCheckReport,
}

impl PairCheckAccumulator {
    pub fn new(check: &str, tolerance: f64) -> Self {
        Self {
            report: PairCheckReport {
                check: check.to_string(),
                sample_count: 0,
                evaluated: 0,
                skipped: 0,
                skip_reasons: BTreeMap::new(),
                min_margin: None,
                max_margin: None,
                worst: None,
                tolerance,
                violations: 0,
                passed: false,
                records: Vec::new(),
            },
        }
    }

    pub fn record(&mut self, x: Point, y: Point, margin: f64) {
        let r = &mut self.report;
        r.sample_count += 1;
        r.evaluated += 1;
        r.min_margin = Some(r.min_margin.map_or(margin, |m| m.min(margin)));
        if r.max_margin.is_none_or(|m| margin > m) {
            r.max_margin = Some(margin);
            r.worst = Some(PairMargin { x, y, margin });
        }
        if !(margin <= r.tolerance) {
            r.violations += 1;
        }
        r.records.push(PairMargin { x, y, margin });
    }

    pub fn skip(&mut self, reason: &str) {
        let r = &mut self.report;
        r.sample_count += 1;
        r.skipped += 1;
        *r.skip_reasons.entry(reason.to_string()).or_insert(0) += 1;
    }

    pub fn finish(mut self) -> PairCheckReport {
        let r = &mut self.report;
        r.passed = r.evaluated > 0 && r.max_margin.is_some_and(|m| m <= r.tolerance);
        self.report
    }
}
