//! Polygon intersection by edge crossings and vertex containment.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stackdrive::collision::OrientedRect;

type P = [f64; 2];

fn cross(o: P, a: P, b: P) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segments_cross(p1: P, p2: P, q1: P, q2: P) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0)
}

fn inside(poly: &[P; 4], p: P) -> bool {
    // convex, either winding: all cross products share a sign
    let s: Vec<f64> = (0..4)
        .map(|i| cross(poly[i], poly[(i + 1) % 4], p))
        .collect();
    s.iter().all(|v| *v >= 0.0) || s.iter().all(|v| *v <= 0.0)
}

pub fn polygon_oracle(a: &OrientedRect, b: &OrientedRect) -> bool {
    let ca = a.corners();
    let cb = b.corners();
    for i in 0..4 {
        for j in 0..4 {
            if segments_cross(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4]) {
                return true;
            }
        }
    }
    ca.iter().any(|p| inside(&cb, *p)) || cb.iter().any(|p| inside(&ca, *p))
}

pub fn random_rect(rng: &mut ChaCha8Rng) -> OrientedRect {
    OrientedRect::new(
        [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)],
        rng.random_range(-3.2..3.2),
        rng.random_range(0.5..6.0),
        rng.random_range(0.5..3.0),
    )
}

/// Equal axis-aligned rectangles one behind the other with edge gap `d`.
pub fn gapped_pair(d: f64) -> (OrientedRect, OrientedRect) {
    (
        OrientedRect::new([0.0, 0.0], 0.0, 4.5, 1.8),
        OrientedRect::new([4.5 + d, 0.0], 0.0, 4.5, 1.8),
    )
}
