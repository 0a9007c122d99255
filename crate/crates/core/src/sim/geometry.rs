//! Planar geometry helpers for the lane-graph simulator: polylines with
//! arc-length lookup, point/segment distances and oriented-rectangle
//! footprints with overlap tests.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Vec2) -> f64 {
        self.sub(o).norm()
    }

    /// Unit vector; falls back to +x for a zero vector.
    pub fn unit(self) -> Vec2 {
        let n = self.norm();
        if n < 1e-12 {
            Vec2::new(1.0, 0.0)
        } else {
            self.scale(1.0 / n)
        }
    }

    /// 90-degree counter-clockwise rotation.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

/// Distance from `p` to the segment `a`-`b`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 < 1e-18 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

/// A polyline with precomputed cumulative arc lengths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<Vec2>,
    cum: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<Vec2>) -> Self {
        let mut cum = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in points.windows(2) {
            acc += w[0].dist(w[1]);
            cum.push(acc);
        }
        Self { points, cum }
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap_or(&0.0)
    }

    /// Position and unit tangent at arc length `s` (clamped to the polyline).
    pub fn point_at(&self, s: f64) -> (Vec2, Vec2) {
        let s = s.clamp(0.0, self.length());
        // Find the segment containing s.
        let mut i = match self
            .cum
            .binary_search_by(|c| c.partial_cmp(&s).expect("finite arc length"))
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if i + 1 >= self.points.len() {
            i = self.points.len().saturating_sub(2);
        }
        let a = self.points[i];
        let b = self.points[i + 1];
        let seg = b.sub(a);
        let seg_len = seg.norm();
        let t = if seg_len < 1e-12 {
            0.0
        } else {
            (s - self.cum[i]) / seg_len
        };
        (a.add(seg.scale(t)), seg.unit())
    }

    /// Closest arc length and distance to `p`.
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        let mut best_s = 0.0;
        let mut best_d = f64::INFINITY;
        for (i, w) in self.points.windows(2).enumerate() {
            let ab = w[1].sub(w[0]);
            let len2 = ab.dot(ab);
            let t = if len2 < 1e-18 {
                0.0
            } else {
                (p.sub(w[0]).dot(ab) / len2).clamp(0.0, 1.0)
            };
            let q = w[0].add(ab.scale(t));
            let d = p.dist(q);
            if d < best_d {
                best_d = d;
                best_s = self.cum[i] + ab.norm() * t;
            }
        }
        (best_s, best_d)
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.project(p).1
    }

    /// Points sampled every `step` meters, with the endpoint included.
    pub fn sample(&self, step: f64) -> Vec<(f64, Vec2)> {
        let len = self.length();
        let n = (len / step).ceil().max(1.0) as usize;
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let s = (i as f64 * step).min(len);
            out.push((s, self.point_at(s).0));
        }
        out
    }
}

/// Axis-oriented vehicle footprint: center, unit heading, half-extents.
#[derive(Debug, Clone, Copy)]
pub struct Footprint {
    pub center: Vec2,
    pub heading: Vec2,
    pub half_len: f64,
    pub half_wid: f64,
}

impl Footprint {
    pub fn corners(&self) -> [Vec2; 4] {
        let fwd = self.heading.scale(self.half_len);
        let side = self.heading.perp().scale(self.half_wid);
        [
            self.center.add(fwd).add(side),
            self.center.add(fwd).sub(side),
            self.center.sub(fwd).sub(side),
            self.center.sub(fwd).add(side),
        ]
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let d = p.sub(self.center);
        d.dot(self.heading).abs() <= self.half_len && d.dot(self.heading.perp()).abs() <= self.half_wid
    }

    /// Separating-axis overlap test for two oriented rectangles.
    pub fn overlaps(&self, other: &Footprint) -> bool {
        let axes = [
            self.heading,
            self.heading.perp(),
            other.heading,
            other.heading.perp(),
        ];
        let a = self.corners();
        let b = other.corners();
        for axis in axes {
            let (a_min, a_max) = project_corners(&a, axis);
            let (b_min, b_max) = project_corners(&b, axis);
            if a_max < b_min || b_max < a_min {
                return false;
            }
        }
        true
    }

    /// Minimum distance between two rectangle boundaries; zero on overlap.
    pub fn distance(&self, other: &Footprint) -> f64 {
        if self.overlaps(other) {
            return 0.0;
        }
        let a = self.corners();
        let b = other.corners();
        let mut best = f64::INFINITY;
        for i in 0..4 {
            for j in 0..4 {
                best = best.min(point_segment_distance(a[i], b[j], b[(j + 1) % 4]));
                best = best.min(point_segment_distance(b[i], a[j], a[(j + 1) % 4]));
            }
        }
        best
    }
}

fn project_corners(corners: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in corners {
        let v = c.dot(axis);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_length_and_lookup() {
        let pl = Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(3.0, 0.0), Vec2::new(3.0, 4.0)]);
        assert!((pl.length() - 7.0).abs() < 1e-12);
        let (p, t) = pl.point_at(3.0 + 2.0);
        assert!(p.dist(Vec2::new(3.0, 2.0)) < 1e-12);
        assert!(t.dist(Vec2::new(0.0, 1.0)) < 1e-12);
    }

    #[test]
    fn projection_returns_closest_point() {
        let pl = Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)]);
        let (s, d) = pl.project(Vec2::new(4.0, 3.0));
        assert!((s - 4.0).abs() < 1e-12);
        assert!((d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn footprint_overlap_matrix() {
        let a = Footprint {
            center: Vec2::new(0.0, 0.0),
            heading: Vec2::new(1.0, 0.0),
            half_len: 2.0,
            half_wid: 1.0,
        };
        let b = Footprint {
            center: Vec2::new(3.0, 0.0),
            heading: Vec2::new(1.0, 0.0),
            half_len: 2.0,
            half_wid: 1.0,
        };
        assert!(a.overlaps(&b));
        let far = Footprint {
            center: Vec2::new(10.0, 0.0),
            ..b
        };
        assert!(!a.overlaps(&far));
        // Rotated rectangle overlapping only via the diagonal.
        let rot = Footprint {
            center: Vec2::new(2.6, 1.6),
            heading: Vec2::new(0.7071067811865476, 0.7071067811865476),
            half_len: 2.0,
            half_wid: 1.0,
        };
        assert!(a.overlaps(&rot));
    }
}
