#![allow(dead_code)]

pub mod gradcheck;
pub mod oracles;

use skillpath_core::model::{PathFeatures, PathId};
use skillpath_core::numcore::Rng;

/// Random features for all four paths with the given dims `(V, T, P, E)`.
pub fn random_features(len: usize, dims: [usize; 4], rng: &mut Rng) -> PathFeatures {
    PathId::ALL
        .iter()
        .zip(dims)
        .map(|(&id, d)| {
            let mut x = gradcheck::random_tensor(len, d, 1.0, rng);
            if id.is_proxy() {
                x.data_mut().iter_mut().for_each(|v| *v = rng.uniform());
            }
            (id, x)
        })
        .collect()
}
