//! Row-selection distributions and reproducible random streams.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance on `sum(p) = 1`.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Weights below this count as zero for the positivity check.
pub const POSITIVITY_FLOOR: f64 = 1e-15;

/// A point on the probability simplex. Zero entries are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector {
    weights: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty weight vector".into()));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "weight {i} is {}",
                weights[i]
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(ProbabilityVector { weights })
    }

    pub fn uniform(m: usize) -> Self {
        assert!(m > 0);
        ProbabilityVector {
            weights: vec![1.0 / m as f64; m],
        }
    }

    /// Normalizes nonnegative weights to unit sum.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        if let Some(i) = w.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidDistribution(format!("weight {i} is {}", w[i])));
        }
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(w.iter().map(|x| x / sum).collect())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.weights
    }

    /// Whether every weight is strictly positive, as the convergence
    /// theory assumes.
    pub fn positivity_ok(&self) -> bool {
        self.weights.iter().all(|&w| w >= POSITIVITY_FLOOR)
    }
}

/// Seeded random stream. One owner per replicate.
#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Independent stream for replicate `id`, a pure function of
    /// `(self.seed, id)`. The parent's position is irrelevant.
    pub fn derive_replicate(&self, id: u64) -> RngState {
        derive_replicate_rng(self.seed, id)
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for replicate `id` under master `seed`: the child seed is a
/// SplitMix64 hash of the pair.
pub fn derive_replicate_rng(seed: u64, id: u64) -> RngState {
    let child = splitmix64(splitmix64(seed) ^ splitmix64(id.wrapping_add(0x5851_f42d_4c95_7f2d)));
    RngState::new(child)
}

/// Walker/Vose alias table: O(m) construction, O(1) draws.
#[derive(Clone, Debug)]
pub struct DiscreteSampler {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl DiscreteSampler {
    pub fn new(p: &ProbabilityVector) -> Result<Self> {
        let w = p.as_slice();
        let m = w.len();
        let mut prob: Vec<f64> = w.iter().map(|x| x * m as f64).collect();
        let mut alias: Vec<usize> = (0..m).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) =
            (0..m).partition(|&i| prob[i] < 1.0);

        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s] = l;
            prob[l] -= 1.0 - prob[s];
            if prob[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        for i in large {
            prob[i] = 1.0;
        }
        // leftovers from rounding; zero-weight rows must stay unreachable
        let fallback = w.iter().position(|&x| x > 0.0).ok_or_else(|| {
            Error::InvalidDistribution("all weights are zero".into())
        })?;
        for i in small {
            if w[i] > 0.0 {
                prob[i] = 1.0;
            } else {
                prob[i] = 0.0;
                alias[i] = fallback;
            }
        }
        Ok(DiscreteSampler { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.random_range(0..self.prob.len());
        let u: f64 = rng.random();
        if u < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

/// Alias sampler for `p`.
pub fn build_sampler(p: &ProbabilityVector) -> Result<DiscreteSampler> {
    DiscreteSampler::new(p)
}
