//! Seeded random streams.
//!
//! Every replicate draws from its own ChaCha8 stream. The stream for
//! `(master_seed, lane, index)` is the ChaCha8 generator keyed by
//! `seed_from_u64(master_seed ^ lane_salt(lane))` with its 64-bit stream
//! counter set to `index`, so results never depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type RandomStream = ChaCha8Rng;

/// Independent purposes within one run (e.g. the two arms of a
/// cross-simulator comparison) use different lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lane(pub u64);

impl Lane {
    pub const MAIN: Lane = Lane(0);
    pub const CLUSTER: Lane = Lane(1);
    pub const THINNING: Lane = Lane(2);
    pub const STATIONARY: Lane = Lane(3);
    pub const PLAIN: Lane = Lane(4);
    pub const AUX: Lane = Lane(5);
}

fn lane_salt(lane: Lane) -> u64 {
    // splitmix64 finalizer
    let mut z = lane.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream(master_seed: u64, lane: Lane, index: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ lane_salt(lane));
    rng.set_stream(index);
    rng
}

pub fn stream(seed: u64) -> RandomStream {
    substream(seed, Lane::MAIN, 0)
}

/// Runs `f(index, stream)` for `reps` replicates in parallel, returning the
/// results in replicate order.
pub fn replicate<T, F>(reps: usize, master_seed: u64, lane: Lane, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut RandomStream) -> T + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(master_seed, lane, i as u64);
            f(i, &mut rng)
        })
        .collect()
}
