//! Seeded random streams.
//!
//! Every consumer of randomness in a run draws from its own ChaCha stream
//! whose seed is derived from the run seed, the trial index and a purpose
//! tag. Streams never share state, so adding draws to one consumer leaves
//! the others bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a derived stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Channel,
    Backoff,
    Policy,
    Replay,
    Init,
    Apc,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Channel => 1,
            Purpose::Backoff => 2,
            Purpose::Policy => 3,
            Purpose::Replay => 4,
            Purpose::Init => 5,
            Purpose::Apc => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Substream for one Monte-Carlo trial.
    pub fn trial(&self, trial: u64) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ splitmix64(trial.wrapping_add(0x5452_4941_4c00))))
    }

    /// Generator for `purpose`, optionally specialised to one AP.
    pub fn rng(&self, purpose: Purpose, ap: Option<usize>) -> SimRng {
        let ap_tag = ap.map_or(u64::MAX, |a| a as u64);
        let s = splitmix64(self.seed ^ splitmix64(purpose.tag()) ^ splitmix64(ap_tag).rotate_left(17));
        ChaCha8Rng::seed_from_u64(s)
    }
}
