//! Random model families shared by the property suites.
#![allow(dead_code)]

use entropy_decay::chain::Chain;
use entropy_decay::models::ModelSpec;
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Birth-death chain on `0..=n` with positive rates away from the ends.
pub fn birth_death(max_n: usize) -> impl Strategy<Value = ModelSpec> {
    (2..=max_n).prop_flat_map(|n| {
        (prop::collection::vec(0.1f64..3.0, n), prop::collection::vec(0.1f64..3.0, n)).prop_map(move |(a, b)| {
            let mut birth = a;
            birth.push(0.0);
            let mut death = vec![0.0];
            death.extend(b);
            ModelSpec::BirthDeath { birth, death, offset: 0 }
        })
    })
}

/// Birth-death chain with `a` nonincreasing and `b` nondecreasing.
pub fn monotone_birth_death(max_n: usize) -> impl Strategy<Value = ModelSpec> {
    (2..=max_n).prop_flat_map(|n| {
        (prop::collection::vec(0.1f64..3.0, n), prop::collection::vec(0.05f64..1.5, n)).prop_map(move |(mut a, inc)| {
            a.sort_by(|x, y| y.total_cmp(x));
            a.push(0.0);
            let mut death = vec![0.0];
            let mut acc = 0.0;
            for d in inc {
                acc += d;
                death.push(acc);
            }
            ModelSpec::BirthDeath { birth: a, death, offset: 0 }
        })
    })
}

/// Zero-range process with positive increasing rates on every site.
pub fn zero_range() -> impl Strategy<Value = ModelSpec> {
    (2usize..=3, 1usize..=3).prop_flat_map(|(l, n)| {
        prop::collection::vec(prop::collection::vec(0.2f64..2.0, n), l).prop_map(move |incs| {
            let rates = incs
                .into_iter()
                .map(|inc| {
                    let mut row = vec![0.0];
                    let mut acc = 0.0;
                    for d in inc {
                        acc += d;
                        row.push(acc);
                    }
                    row
                })
                .collect();
            ModelSpec::ZeroRange { particles: n, rates }
        })
    })
}

/// Zero-range process whose increments all lie in `[1, 1.8)`.
pub fn zero_range_condition_b() -> impl Strategy<Value = ModelSpec> {
    (2usize..=3, 1usize..=3).prop_flat_map(|(l, n)| {
        prop::collection::vec(prop::collection::vec(1.0f64..1.8, n), l).prop_map(move |incs| {
            let rates = incs
                .into_iter()
                .map(|inc| {
                    let mut row = vec![0.0];
                    let mut acc = 0.0;
                    for d in inc {
                        acc += d;
                        row.push(acc);
                    }
                    row
                })
                .collect();
            ModelSpec::ZeroRange { particles: n, rates }
        })
    })
}

pub fn bernoulli_laplace(lo: f64, hi: f64) -> impl Strategy<Value = ModelSpec> {
    (2usize..=5)
        .prop_flat_map(|l| (Just(l), 1..l))
        .prop_flat_map(move |(l, n)| {
            prop::collection::vec(lo..hi, l)
                .prop_map(move |intensities| ModelSpec::BernoulliLaplace { particles: n, intensities })
        })
}

pub fn any_model() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![birth_death(12), zero_range(), bernoulli_laplace(0.2, 3.0)]
}

pub fn chain(spec: &ModelSpec) -> Chain {
    Chain::new(spec).expect("valid model")
}

/// `exp(U)` with `U` uniform on `(-spread, spread)`.
pub fn positive_function(seed: u64, n: usize, spread: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-spread..spread).exp()).collect()
}

pub fn signed_function(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}
