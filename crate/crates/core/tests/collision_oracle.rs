use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stackdrive::collision::{collision_index, overlaps, OrientedRect};

#[path = "support/polygon.rs"]
mod polygon;

use polygon::{gapped_pair, polygon_oracle, random_rect};

#[test]
fn sat_matches_polygon_intersection() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut hits = 0;
    for k in 0..10_000 {
        let a = random_rect(&mut rng);
        let b = random_rect(&mut rng);
        let expect = polygon_oracle(&a, &b);
        assert_eq!(overlaps(&a, &b), expect, "pair {k}: {a:?} {b:?}");
        hits += expect as usize;
    }
    // both outcomes are exercised
    assert!(hits > 1000 && hits < 9000, "{hits}");
}

#[test]
fn longitudinal_gap_gives_exponential_index() {
    for d in [0.5, 1.0, 2.0, 5.0] {
        let (a, b) = gapped_pair(d);
        let i = collision_index(&a, &b).index;
        assert!((i - (-d).exp()).abs() < 1e-12, "d={d}: {i}");
    }
}

fn rect() -> impl Strategy<Value = OrientedRect> {
    (
        -8.0..8.0f64,
        -8.0..8.0f64,
        -3.2..3.2f64,
        0.5..6.0f64,
        0.5..3.0f64,
    )
        .prop_map(|(x, y, h, l, w)| OrientedRect::new([x, y], h, l, w))
}

fn moved(r: &OrientedRect, angle: f64, shift: [f64; 2]) -> OrientedRect {
    let (s, c) = angle.sin_cos();
    let [x, y] = r.center;
    OrientedRect::new(
        [c * x - s * y + shift[0], s * x + c * y + shift[1]],
        r.heading + angle,
        r.length,
        r.width,
    )
}

proptest! {
    #[test]
    fn index_is_symmetric_and_bounded(a in rect(), b in rect()) {
        let i = collision_index(&a, &b).index;
        let j = collision_index(&b, &a).index;
        prop_assert!((i - j).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&i));
        prop_assert_eq!(overlaps(&a, &b), overlaps(&b, &a));
        if overlaps(&a, &b) {
            prop_assert_eq!(i, 1.0);
        }
    }

    #[test]
    fn rigid_motion_preserves_index(a in rect(), b in rect(), angle in -3.2..3.2f64, dx in -50.0..50.0f64, dy in -50.0..50.0f64) {
        let i = collision_index(&a, &b).index;
        let j = collision_index(&moved(&a, angle, [dx, dy]), &moved(&b, angle, [dx, dy])).index;
        prop_assert!((i - j).abs() < 1e-9, "{} vs {}", i, j);
    }

    #[test]
    fn pulling_apart_never_raises_index(gap in 0.0..10.0f64, extra in 0.0..10.0f64, lateral in -3.0..3.0f64) {
        let a = OrientedRect::new([0.0, 0.0], 0.0, 4.5, 1.8);
        let near = OrientedRect::new([4.5 + gap, lateral], 0.0, 4.5, 1.8);
        let far = OrientedRect::new([4.5 + gap + extra, lateral], 0.0, 4.5, 1.8);
        prop_assert!(collision_index(&a, &far).index <= collision_index(&a, &near).index);
    }
}
