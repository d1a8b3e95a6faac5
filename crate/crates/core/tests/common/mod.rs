#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rft_inverse::forward::{CompositeStep, ObservationMode};
use rft_inverse::{CompositeDataset, Hyperparameters, KernelConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn angle(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (
        rng.random_range(-FRAC_PI_2..FRAC_PI_2),
        rng.random_range(-FRAC_PI_2..=FRAC_PI_2),
    )
}

pub fn kernel(rng: &mut ChaCha8Rng) -> KernelConfig {
    KernelConfig::new(
        rng.random_range(0.5..2.0),
        [0; 4].map(|_| rng.random_range(0.3..2.0)),
    )
    .unwrap()
}

pub fn hyper(rng: &mut ChaCha8Rng) -> Hyperparameters {
    Hyperparameters::new(kernel(rng), kernel(rng), rng.random_range(1e-2..2e-1))
}

/// `t` steps of 1..=`max_m` segments; torque mode attaches random 2x2 sensor maps.
pub fn dataset(rng: &mut ChaCha8Rng, t: usize, max_m: usize, torque: bool) -> CompositeDataset {
    let steps = (0..t)
        .map(|_| {
            let m = rng.random_range(1..=max_m);
            let angles = (0..m).map(|_| angle(rng)).collect();
            let weights = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
            let sensors = torque.then(|| {
                (0..m)
                    .map(|_| DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0)))
                    .collect()
            });
            CompositeStep {
                observation: vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
                angles,
                weights,
                sensors,
            }
        })
        .collect();
    CompositeDataset {
        mode: if torque {
            ObservationMode::Torque
        } else {
            ObservationMode::Force
        },
        channels: 2,
        steps,
        noise_variance: 0.0,
    }
}
