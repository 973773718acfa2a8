//! Counter-based random substreams.
//!
//! Every random draw in a run is addressed by `(seed, purpose, index, iteration)`.
//! Each address is hashed into an independent ChaCha seed, so the value drawn
//! for a particle at a given iteration does not depend on evaluation order or
//! on how many threads took part.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Init = 1,
    Noise = 2,
    /// Minibatch shared by every particle within an iteration.
    SharedBatch = 3,
    /// Minibatch owned by one particle (SGLD).
    ParticleBatch = 4,
    /// Synthetic data generation for posterior targets.
    Data = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the 256-bit ChaCha key for one substream address.
fn derive_key(seed: u64, purpose: StreamPurpose, index: u64, iteration: u64) -> [u8; 32] {
    let mut state = splitmix64(seed);
    state = splitmix64(state ^ (purpose as u64).wrapping_mul(0xd6e8_feb8_6659_fd93));
    state = splitmix64(state ^ index.wrapping_mul(0xa076_1d64_78bd_642f));
    state = splitmix64(state ^ iteration.wrapping_mul(0xe703_7ed1_a0b4_28db));
    let mut key = [0u8; 32];
    for (n, chunk) in key.chunks_exact_mut(8).enumerate() {
        state = splitmix64(state.wrapping_add(n as u64));
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// Opens the substream at the given address.
pub fn substream(seed: u64, purpose: StreamPurpose, index: u64, iteration: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_key(seed, purpose, index, iteration))
}
