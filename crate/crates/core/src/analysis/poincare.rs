//! Poincaré sections of sampled trajectories.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};

/// Minimum section size accepted for classification.
pub const MIN_POINTS: usize = 100;

/// Half-width of the Lagrange stencil used between samples.
const STENCIL: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SectionRule {
    /// Samples at `t_k = t_first + phase + k·period`; the period defaults to
    /// the mechanical period `2π/ω_m`.
    Stroboscopic {
        #[serde(default)]
        period: Option<f64>,
        #[serde(default)]
        phase: f64,
    },
    /// Upward crossings of `x₂ = 0`. Points are `(x₁, p₁)` with
    /// `p₁ = 2 Im β₁`, since `x₂` vanishes on the section.
    Hyperplane,
}

impl Default for SectionRule {
    fn default() -> Self {
        SectionRule::Stroboscopic { period: None, phase: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareData {
    pub points: Vec<[f64; 2]>,
    pub rule: SectionRule,
    /// Resolved strobe period, if stroboscopic.
    pub period: Option<f64>,
}

impl PoincareData {
    pub fn spread(&self) -> f64 {
        normalized_spread(&self.points)
    }

    pub fn clusters(&self) -> usize {
        cluster_count(&self.points, CLUSTER_RADIUS)
    }
}

/// Section of `ts` under `rule`. `omega_m` sets the default strobe period.
pub fn poincare_section(ts: &TimeSeries, rule: &SectionRule, omega_m: f64) -> Result<PoincareData> {
    let dt = ts
        .stride()
        .ok_or_else(|| Error::InsufficientData("trajectory has fewer than two samples".into()))?;
    let (points, period) = match *rule {
        SectionRule::Stroboscopic { period, phase } => {
            let period = period.unwrap_or(2.0 * PI / omega_m);
            if !(period > 0.0 && period.is_finite()) {
                return Err(Error::Config("strobe period must be positive".into()));
            }
            (strobe(ts, dt, period, phase), Some(period))
        }
        SectionRule::Hyperplane => (crossings(ts), None),
    };
    if points.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "section has {} points, need at least {MIN_POINTS}",
            points.len()
        )));
    }
    Ok(PoincareData { points, rule: *rule, period })
}

fn strobe(ts: &TimeSeries, dt: f64, period: f64, phase: f64) -> Vec<[f64; 2]> {
    let (x1, x2) = (ts.x(0), ts.x(1));
    let t0 = ts.t[0];
    let t_last = *ts.t.last().unwrap();
    let ratio = period / dt;
    let exact = (ratio - ratio.round()).abs() < 1e-9 && (phase / dt - (phase / dt).round()).abs() < 1e-9;
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = t0 + phase + k as f64 * period;
        if t > t_last + 1e-9 * dt {
            break;
        }
        if t >= t0 {
            let u = (t - t0) / dt;
            out.push(if exact {
                let i = (u.round() as usize).min(x1.len() - 1);
                [x1[i], x2[i]]
            } else {
                [lagrange(&x1, u), lagrange(&x2, u)]
            });
        }
        k += 1;
    }
    out
}

fn crossings(ts: &TimeSeries) -> Vec<[f64; 2]> {
    let (x1, x2) = (ts.x(0), ts.x(1));
    let p1: Vec<f64> = ts.states.iter().map(|s| 2.0 * s.beta[0].im).collect();
    let mut out = Vec::new();
    for k in 0..x2.len().saturating_sub(1) {
        if x2[k] < 0.0 && x2[k + 1] >= 0.0 {
            // secant start, then Newton on the interpolant
            let mut u = k as f64 + x2[k] / (x2[k] - x2[k + 1]);
            for _ in 0..8 {
                let h = 1e-4;
                let v = lagrange(&x2, u);
                let dv = (lagrange(&x2, u + h) - lagrange(&x2, u - h)) / (2.0 * h);
                if dv == 0.0 {
                    break;
                }
                u = (u - v / dv).clamp(k as f64, (k + 1) as f64);
            }
            out.push([lagrange(&x1, u), lagrange(&p1, u)]);
        }
    }
    out
}

/// Lagrange interpolation of uniformly sampled `y` at fractional index `u`,
/// on the `2·STENCIL` nearest samples (clipped at the ends).
fn lagrange(y: &[f64], u: f64) -> f64 {
    let n = y.len();
    let width = (2 * STENCIL).min(n);
    let base = (u.floor() as isize - STENCIL as isize + 1).clamp(0, (n - width) as isize) as usize;
    let nearest = u.round();
    if (u - nearest).abs() < 1e-12 && nearest >= 0.0 && (nearest as usize) < n {
        return y[nearest as usize];
    }
    let mut acc = 0.0;
    for i in base..base + width {
        let mut w = 1.0;
        for j in base..base + width {
            if j != i {
                w *= (u - j as f64) / (i as f64 - j as f64);
            }
        }
        acc += w * y[i];
    }
    acc
}

/// Largest pairwise distance between section points.
pub fn diameter(points: &[[f64; 2]]) -> f64 {
    let hull = convex_hull(points);
    let mut d: f64 = 0.0;
    for a in &hull {
        for b in &hull {
            d = d.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
        }
    }
    d
}

/// Convex-hull area over bounding-box area; 0 for degenerate clouds.
pub fn normalized_spread(points: &[[f64; 2]]) -> f64 {
    let (lo, hi) = bounding_box(points);
    let box_area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
    let scale = lo.iter().chain(&hi).fold(1.0f64, |m, v| m.max(v.abs()));
    if !(box_area > (DEGENERATE * scale).powi(2)) {
        return 0.0;
    }
    polygon_area(&convex_hull(points)) / box_area
}

/// Clouds narrower than this fraction of their magnitude count as a point.
const DEGENERATE: f64 = 1e-9;

/// Cluster radius as a fraction of the bounding-box diagonal.
pub const CLUSTER_RADIUS: f64 = 0.02;

/// Leader clustering: each point joins the first centre within
/// `radius × diagonal`, otherwise it opens a new cluster.
pub fn cluster_count(points: &[[f64; 2]], radius: f64) -> usize {
    let (lo, hi) = bounding_box(points);
    let diag = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
    let scale = lo.iter().chain(&hi).fold(1.0f64, |m, v| m.max(v.abs()));
    if points.is_empty() {
        return 0;
    }
    if diag <= DEGENERATE * scale {
        return 1;
    }
    let r2 = (radius * diag).powi(2);
    let mut centres: Vec<[f64; 2]> = Vec::new();
    for p in points {
        if !centres.iter().any(|c| (c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2) <= r2) {
            centres.push(*p);
        }
    }
    centres.len()
}

fn bounding_box(points: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    points.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
        ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
    })
}

/// Andrew's monotone chain; counter-clockwise, without repeated endpoint.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for p in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        .abs()
}
