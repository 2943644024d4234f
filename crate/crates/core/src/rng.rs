//! Seed splitting for independent, reproducible random streams.
//!
//! A run seed is `mix(master, run_index, "run")`, and each named stream of a
//! run is `mix(run_seed, 0, name)`, where `mix` folds the FNV-1a hash of the
//! name and the index into the seed through SplitMix64 finalizers. Every
//! stream is a ChaCha8 generator seeded from the derived value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random streams used by one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Field,
    Delay,
    Error,
    Placement,
}

impl Stream {
    pub fn name(self) -> &'static str {
        match self {
            Stream::Field => "field",
            Stream::Delay => "delay",
            Stream::Error => "error",
            Stream::Placement => "placement",
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn mix(seed: u64, index: u64, name: &str) -> u64 {
    splitmix64(splitmix64(seed ^ fnv1a(name)) ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Seed of run `run_index` under `master_seed`. Independent of scheduling.
pub fn run_seed(master_seed: u64, run_index: u64) -> u64 {
    mix(master_seed, run_index, "run")
}

pub fn stream_seed(run_seed: u64, stream: Stream) -> u64 {
    mix(run_seed, 0, stream.name())
}

pub fn stream(run_seed: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(run_seed, stream))
}
