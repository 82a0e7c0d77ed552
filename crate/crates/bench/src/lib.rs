//! Shared fixtures for the criterion benchmarks.

use dudley_core::lorentz::AlgebraElement;
use dudley_core::rng::splitmix64;

/// Deterministic pseudo-random algebra element, same for every bench run.
pub fn sample_algebra(d: usize, seed: u64, scale: f64) -> AlgebraElement {
    let mut state = splitmix64(seed ^ 0x5851_F42D_4C95_7F2D);
    let mut next = || {
        state = splitmix64(state);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut a = AlgebraElement::zero(d);
    for i in 1..=d {
        a.set_first(i, scale * next());
        a.set_spat(i, scale * next());
    }
    a.set_time(scale * next());
    for i in 1..d {
        for j in (i + 1)..=d {
            a.set_rot(i, j, scale * next());
        }
    }
    a
}
