//! Seeded synthetic regression problems with a block-sparse coefficient
//! vector: 10% of the coefficients equal 1, 20% equal 2, the rest are zero.

use alin_core::SparseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{usage, CliResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub p: usize,
    /// Noise standard deviation.
    pub sd: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.n == 0 || self.p == 0 {
            return Err(usage("synthetic problems need n, p ≥ 1"));
        }
        if !(self.sd >= 0.0) || !self.sd.is_finite() {
            return Err(usage(format!("noise sd must be ≥ 0, got {}", self.sd)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub x: SparseMatrix,
    pub y: Vec<f64>,
    pub beta_true: Vec<f64>,
}

/// Ones on `[0.1p, 0.2p)`, twos on `[0.2p, 0.4p)`, zeros elsewhere.
pub fn true_coefficients(p: usize) -> Vec<f64> {
    let (a, b, c) = (p / 10, p / 5, 2 * p / 5);
    (0..p)
        .map(|j| {
            if (a..b).contains(&j) {
                1.0
            } else if (b..c).contains(&j) {
                2.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Standard normal `X` (row by row from one ChaCha stream), then
/// `y = Xβ + ε` with `ε ~ N(0, sd²)` drawn from the same stream.
pub fn synth_generate(spec: &SynthSpec) -> CliResult<Synthetic> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut triplets = Vec::with_capacity(spec.n * spec.p);
    for i in 0..spec.n {
        for j in 0..spec.p {
            triplets.push((i, j, rng.sample::<f64, _>(StandardNormal)));
        }
    }
    let x = SparseMatrix::from_triplets(spec.n, spec.p, triplets)?;
    let beta_true = true_coefficients(spec.p);
    let mut y = x.matvec(&beta_true)?;
    if spec.sd > 0.0 {
        let noise = Normal::new(0.0, spec.sd).expect("sd checked above");
        for yi in &mut y {
            *yi += noise.sample(&mut rng);
        }
    }
    Ok(Synthetic { x, y, beta_true })
}
