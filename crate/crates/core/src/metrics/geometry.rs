//! Planar extent measures: convex hull, bounding box, minimal enclosing
//! circle.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HullSummary {
    pub hull_area: f64,
    pub box_area: f64,
    pub circle_area: f64,
    /// Fewer than three points, or all points collinear.
    pub degenerate: bool,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise hull vertices (Andrew's monotone chain), without
/// collinear points.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let chain = |iter: &mut dyn Iterator<Item = &[f64; 2]>| {
        let mut out: Vec<[f64; 2]> = Vec::new();
        for &p in iter {
            while out.len() >= 2 && cross(out[out.len() - 2], out[out.len() - 1], p) <= 0.0 {
                out.pop();
            }
            out.push(p);
        }
        out.pop();
        out
    };
    let mut hull = chain(&mut pts.iter());
    hull.extend(chain(&mut pts.iter().rev()));
    hull
}

fn shoelace(polygon: &[[f64; 2]]) -> f64 {
    if polygon.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..polygon.len() {
        let a = polygon[i];
        let b = polygon[(i + 1) % polygon.len()];
        twice += a[0] * b[1] - a[1] * b[0];
    }
    twice.abs() / 2.0
}

#[derive(Debug, Clone, Copy)]
struct Circle {
    centre: [f64; 2],
    radius: f64,
}

impl Circle {
    fn contains(&self, p: [f64; 2]) -> bool {
        let d = ((p[0] - self.centre[0]).powi(2) + (p[1] - self.centre[1]).powi(2)).sqrt();
        d <= self.radius * (1.0 + 1e-12) + 1e-15
    }

    fn from_two(a: [f64; 2], b: [f64; 2]) -> Self {
        let centre = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        let radius = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() / 2.0;
        Circle { centre, radius }
    }

    fn from_three(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Self {
        let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
        if d.abs() < 1e-300 {
            // Collinear: the widest pair spans the circle.
            let candidates = [
                Self::from_two(a, b),
                Self::from_two(a, c),
                Self::from_two(b, c),
            ];
            return candidates
                .into_iter()
                .max_by(|x, y| x.radius.total_cmp(&y.radius))
                .unwrap();
        }
        let a2 = a[0] * a[0] + a[1] * a[1];
        let b2 = b[0] * b[0] + b[1] * b[1];
        let c2 = c[0] * c[0] + c[1] * c[1];
        let ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d;
        let uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d;
        let radius = ((a[0] - ux).powi(2) + (a[1] - uy).powi(2)).sqrt();
        Circle {
            centre: [ux, uy],
            radius,
        }
    }
}

/// Smallest circle containing every point (Welzl, iterative form) as
/// `(centre, radius)`. Points are visited in a fixed pseudo-random order so
/// the result is deterministic.
pub fn minimal_enclosing_circle(points: &[[f64; 2]]) -> Option<([f64; 2], f64)> {
    let mut pts = points.to_vec();
    if pts.is_empty() {
        return None;
    }
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed));
    let mut circle = Circle {
        centre: pts[0],
        radius: 0.0,
    };
    for i in 1..pts.len() {
        if circle.contains(pts[i]) {
            continue;
        }
        circle = Circle {
            centre: pts[i],
            radius: 0.0,
        };
        for j in 0..i {
            if circle.contains(pts[j]) {
                continue;
            }
            circle = Circle::from_two(pts[i], pts[j]);
            for k in 0..j {
                if !circle.contains(pts[k]) {
                    circle = Circle::from_three(pts[i], pts[j], pts[k]);
                }
            }
        }
    }
    Some((circle.centre, circle.radius))
}

pub fn hull_and_box(points: &[[f64; 2]]) -> Result<HullSummary, MetricError> {
    if points.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let hull = convex_hull(points);
    let hull_area = shoelace(&hull);
    let degenerate = hull.len() < 3 || hull_area == 0.0;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for axis in 0..2 {
            lo[axis] = lo[axis].min(p[axis]);
            hi[axis] = hi[axis].max(p[axis]);
        }
    }
    let box_area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
    let (_, radius) = minimal_enclosing_circle(points).expect("non-empty");
    Ok(HullSummary {
        hull_area: if degenerate { 0.0 } else { hull_area },
        box_area,
        circle_area: std::f64::consts::PI * radius * radius,
        degenerate,
    })
}
