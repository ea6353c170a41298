//! Deterministic per-round, per-worker random streams.
//!
//! Every random decision in a run is drawn from a stream keyed by
//! `(seed, round, worker, channel)`. Streams are derived independently, so
//! worker evaluation order never changes what any worker draws, and any
//! single round can be replayed in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which decision a stream feeds inside one worker-round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Sample-index draw (Algorithm line "compute i.i.d. stochastic gradient").
    Sample,
    /// Coordinate subset for the y-side (or only) compressed message.
    SubsetY,
    /// Coordinate subset for the z-side compressed message.
    SubsetZ,
}

impl Channel {
    fn tag(self) -> u64 {
        match self {
            Channel::Sample => 0x01,
            Channel::SubsetY => 0x02,
            Channel::SubsetZ => 0x03,
        }
    }
}

/// SplitMix64 finalizer; stable across platforms.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combine the key fields into one well-mixed 64-bit stream seed.
fn stream_seed(seed: u64, t: u64, p: u64, channel: Channel) -> u64 {
    let mut h = mix(seed);
    h = mix(h ^ t);
    h = mix(h ^ p.wrapping_shl(1).wrapping_add(1));
    mix(h ^ channel.tag())
}

/// Factory for the keyed streams of one experiment.
#[derive(Debug, Clone, Copy)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream for `(round t, worker p, channel)`.
    pub fn at(&self, t: u64, p: usize, channel: Channel) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(stream_seed(self.seed, t, p as u64, channel))
    }

    /// Stream for run-level decisions not tied to a worker (output selection,
    /// stage sampling). Keyed on a reserved worker id.
    pub fn run_level(&self, purpose: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(stream_seed(self.seed, purpose, u64::MAX, Channel::Sample))
    }
}
