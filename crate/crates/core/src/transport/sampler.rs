use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Counter-based standard normal stream: sample `i` of `(seed, stream)` is a
/// pure function of those three values, so batches can be generated in any
/// order or in parallel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StdNormalSampler {
    pub dimension: usize,
    pub seed: u64,
    pub stream: u64,
}

const CHUNK: usize = 4096;

impl StdNormalSampler {
    pub fn new(dimension: usize, seed: u64, stream: u64) -> Self {
        StdNormalSampler { dimension, seed, stream }
    }

    /// 32-bit ChaCha words consumed per sample (one `u64` per uniform,
    /// two uniforms per Box–Muller pair).
    fn words_per_sample(&self) -> u128 {
        (self.dimension.div_ceil(2) * 4) as u128
    }

    fn rng_at(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(index as u128 * self.words_per_sample());
        rng
    }

    pub fn sample(&self, index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        self.fill_from(&mut self.rng_at(index), &mut out);
        out
    }

    /// Samples `start..start + count`, row-major (`count × dimension`).
    pub fn samples(&self, start: usize, count: usize) -> Vec<f64> {
        let d = self.dimension;
        let mut out = vec![0.0; count * d];
        if d == 0 {
            return out;
        }
        out.par_chunks_mut(CHUNK * d).enumerate().for_each(|(c, chunk)| {
            let mut rng = self.rng_at(start + c * CHUNK);
            for row in chunk.chunks_mut(d) {
                self.fill_from(&mut rng, row);
            }
        });
        out
    }

    fn fill_from(&self, rng: &mut ChaCha8Rng, row: &mut [f64]) {
        for pair in 0..self.dimension.div_ceil(2) {
            let u1 = unit_open(rng.next_u64());
            let u2 = unit_open(rng.next_u64());
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
            row[2 * pair] = r * c;
            if 2 * pair + 1 < row.len() {
                row[2 * pair + 1] = r * s;
            }
        }
    }
}

/// Uniform on the open interval (0, 1) from the top 53 bits.
fn unit_open(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}
