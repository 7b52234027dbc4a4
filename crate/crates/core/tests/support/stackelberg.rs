//! Independent exhaustive enumerator for the three-level game.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stackdrive::game::PayoffTensor;

pub type Utilities = [[[[f64; 3]; 3]; 3]; 3];

// Strategy codes: 0 = L, 1 = S, 2 = R; preference order for ties is S, L, R.
pub const PREFERENCE: [usize; 3] = [1, 0, 2];

pub fn pick(best: &[bool; 3]) -> usize {
    *PREFERENCE.iter().find(|&&s| best[s]).unwrap()
}

pub fn best_of(values: [f64; 3]) -> [bool; 3] {
    let m = values[0].max(values[1]).max(values[2]);
    [values[0] == m, values[1] == m, values[2] == m]
}

/// Follower replies `[g2, g3]` to leader move `a`.
pub fn reaction(u: &Utilities, a: usize) -> [usize; 2] {
    let third = |b: usize| best_of(u[2][a][b]);
    // the middle player guards against the worst of the last player's ties
    let worst = [0, 1, 2].map(|b| {
        let set = third(b);
        (0..3)
            .filter(|c| set[*c])
            .map(|c| u[1][a][b][c])
            .fold(f64::INFINITY, f64::min)
    });
    let b = pick(&best_of(worst));
    [b, pick(&third(b))]
}

pub fn oracle(u: &Utilities) -> [usize; 3] {
    let react = [0, 1, 2].map(|a| reaction(u, a));
    let lead = [0, 1, 2].map(|a| u[0][a][react[a][0]][react[a][1]]);
    let a = pick(&best_of(lead));
    [a, react[a][0], react[a][1]]
}

pub fn random_tensor(rng: &mut ChaCha8Rng) -> PayoffTensor {
    let mut t = PayoffTensor::zeros();
    // about half the tensors get coarse integer payoffs so ties occur
    let coarse = rng.random_bool(0.5);
    for v in t.utilities.iter_mut().flatten().flatten().flatten() {
        *v = if coarse {
            rng.random_range(0..3) as f64
        } else {
            rng.random_range(-100.0..100.0)
        };
    }
    t
}
