//! Separating-axis overlap tests and the collision possibility index for
//! oriented rectangles.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedRect {
    pub center: [f64; 2],
    /// Direction of the length axis, rad.
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl OrientedRect {
    pub fn new(center: [f64; 2], heading: f64, length: f64, width: f64) -> Self {
        debug_assert!(length > 0.0 && width > 0.0);
        Self {
            center,
            heading,
            length,
            width,
        }
    }

    /// Unit edge directions: `[length axis, width axis]`.
    pub fn axes(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.heading.sin_cos();
        [[c, s], [-s, c]]
    }

    /// Corners in order front-left, front-right, rear-right, rear-left,
    /// where "front" is along +length axis and "left" along +width axis.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let [u, n] = self.axes();
        let hl = self.length / 2.0;
        let hw = self.width / 2.0;
        let at = |a: f64, b: f64| {
            [
                self.center[0] + a * u[0] + b * n[0],
                self.center[1] + a * u[1] + b * n[1],
            ]
        };
        [at(hl, hw), at(hl, -hw), at(-hl, -hw), at(-hl, hw)]
    }

    /// Same centre and heading, dimensions scaled by `ratio`.
    pub fn scaled(&self, ratio: f64) -> Self {
        Self {
            length: self.length * ratio,
            width: self.width * ratio,
            ..*self
        }
    }

    fn project(&self, axis: [f64; 2]) -> (f64, f64) {
        let c = dot(self.center, axis);
        let [u, n] = self.axes();
        let r = self.length / 2.0 * dot(u, axis).abs() + self.width / 2.0 * dot(n, axis).abs();
        (c - r, c + r)
    }
}

/// Gap between the projections of `a` and `b` onto a unit `axis`;
/// zero when the projected intervals overlap or touch.
pub fn projection_gap(a: &OrientedRect, b: &OrientedRect, axis: [f64; 2]) -> f64 {
    let (a_lo, a_hi) = a.project(axis);
    let (b_lo, b_hi) = b.project(axis);
    if b_lo > a_hi {
        b_lo - a_hi
    } else if a_lo > b_hi {
        a_lo - b_hi
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionScore {
    /// Collision possibility index in [0, 1] at unit scale.
    pub index: f64,
    /// Projection gaps along `a`'s length and width axes.
    pub gaps_a: [f64; 2],
    /// Projection gaps along `b`'s length and width axes.
    pub gaps_b: [f64; 2],
    pub composite_a: f64,
    pub composite_b: f64,
}

impl CollisionScore {
    /// Root-mean-square of the two composite gaps, m.
    pub fn distance(&self) -> f64 {
        ((self.composite_a.powi(2) + self.composite_b.powi(2)) / 2.0).sqrt()
    }

    /// Index with the gap measured in units of `1 / scale` metres.
    pub fn scaled_index(&self, scale: f64) -> f64 {
        (-scale * self.distance()).exp()
    }

    pub fn overlapping(&self) -> bool {
        self.gaps_a
            .iter()
            .chain(self.gaps_b.iter())
            .all(|g| *g == 0.0)
    }
}

pub fn collision_index(a: &OrientedRect, b: &OrientedRect) -> CollisionScore {
    let [a1, a2] = a.axes();
    let [b1, b2] = b.axes();
    let gaps_a = [projection_gap(a, b, a1), projection_gap(a, b, a2)];
    let gaps_b = [projection_gap(a, b, b1), projection_gap(a, b, b2)];
    let composite_a = gaps_a[0].hypot(gaps_a[1]);
    let composite_b = gaps_b[0].hypot(gaps_b[1]);
    let mut score = CollisionScore {
        index: 0.0,
        gaps_a,
        gaps_b,
        composite_a,
        composite_b,
    };
    score.index = score.scaled_index(1.0);
    score
}

/// True unless one of the four edge directions separates the rectangles.
/// Touching rectangles count as overlapping.
pub fn overlaps(a: &OrientedRect, b: &OrientedRect) -> bool {
    a.axes()
        .into_iter()
        .chain(b.axes())
        .all(|axis| projection_gap(a, b, axis) == 0.0)
}
