use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator handed to every sampler.
pub type StreamRng = ChaCha8Rng;

/// Key of an independent random stream: a run seed plus a replication index.
///
/// ChaCha exposes 2^64 streams per seed, so replication `i` of a run always
/// draws the same numbers no matter which thread executes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A stream keyed by `(self, tag)`, independent of `self` and of every
    /// other tag.
    pub fn child(&self, tag: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(0x9e37_79b9))),
            stream_id: tag,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
