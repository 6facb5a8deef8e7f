//! Reproducible random streams and the deterministic block runner.
//!
//! Every estimator splits its sample budget into [`BLOCKS`] fixed blocks.
//! Block `i` draws from ChaCha8 keyed by the estimator seed with stream id
//! `i`, so the random numbers a block sees do not depend on how many worker
//! threads exist. Block results are collected in index order and merged
//! sequentially, which keeps floating-point reductions bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Identifier recorded in every result record.
pub const STREAM_ALGORITHM: &str = "chacha8/seed-u64+stream-u64";

/// Number of sample blocks per estimator invocation; also the jackknife
/// block count.
pub const BLOCKS: usize = 100;

/// Random stream for batch `batch_index` of a run seeded with `seed`.
pub fn split_streams(seed: u64, batch_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch_index);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A seed namespace. Sub-namespaces are derived by hashing a tag, so two
/// estimators in one run never share random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomStreams {
    seed: u64,
}

impl RandomStreams {
    pub fn new(seed: u64) -> Self {
        RandomStreams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn derive(&self, tag: &str) -> Self {
        // FNV-1a over the tag, then mixed with the parent seed.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in tag.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        RandomStreams { seed: splitmix64(self.seed ^ splitmix64(h)) }
    }

    pub fn derive_index(&self, index: u64) -> Self {
        RandomStreams { seed: splitmix64(self.seed.wrapping_add(splitmix64(index))) }
    }

    pub fn block(&self, index: usize) -> ChaCha8Rng {
        split_streams(self.seed, index as u64)
    }
}

/// Sizes of the sample blocks: `min(samples, BLOCKS)` blocks whose sizes
/// differ by at most one.
pub fn block_sizes(samples: u64) -> Vec<u64> {
    let blocks = (BLOCKS as u64).min(samples.max(1));
    let base = samples / blocks;
    let extra = samples % blocks;
    (0..blocks).map(|i| base + u64::from(i < extra)).collect()
}

/// Runs `work(rng, block_samples, block_index)` for every block in parallel
/// on the current rayon pool and returns the results in block order.
pub fn run_blocks<T, F>(streams: &RandomStreams, samples: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64, usize) -> T + Sync,
{
    let sizes = block_sizes(samples);
    sizes
        .par_iter()
        .enumerate()
        .map(|(i, &count)| {
            let mut rng = streams.block(i);
            work(&mut rng, count, i)
        })
        .collect()
}
