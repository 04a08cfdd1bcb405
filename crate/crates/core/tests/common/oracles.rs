//! Brute-force reference implementations of the rank metrics.

use skillpath_core::numcore::Rng;

/// Rank by direct counting: 1 + #smaller + (#equal - 1) / 2.
pub fn count_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let below = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

pub fn oracle_srocc(a: &[f64], b: &[f64]) -> f64 {
    pearson(&count_ranks(a), &count_ranks(b))
}

/// Vector with frequent ties: half the time values come from a small
/// integer alphabet.
pub fn tied_vector(n: usize, rng: &mut Rng) -> Vec<f64> {
    let alphabet = 1 + rng.below(6);
    let tied = rng.uniform() < 0.5;
    (0..n)
        .map(|_| {
            if tied {
                rng.int_inclusive(0, alphabet) as f64
            } else {
                rng.normal(0.0, 3.0)
            }
        })
        .collect()
}

/// One of four strictly increasing maps, chosen by `i`.
pub fn monotone_map(i: usize, rng: &mut Rng) -> impl Fn(f64) -> f64 {
    let (scale, shift) = (0.1 + rng.uniform() * 5.0, rng.normal(0.0, 10.0));
    move |x| match i % 4 {
        0 => scale * x + shift,
        1 => (x / 10.0).exp(),
        2 => x * x * x + x,
        _ => (x / 4.0).atan(),
    }
}
