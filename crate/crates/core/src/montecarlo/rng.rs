//! Counter-based, splittable random streams.
//!
//! Every `(master_seed, realization, grid_point)` triple maps to its own
//! ChaCha8 stream:
//!
//! ```text
//! key   = [splitmix64(master)_0, splitmix64(master)_1, grid_index, TAG]   (4 x u64, LE)
//! nonce = realization_index
//! ```
//!
//! The SplitMix64 expansion is a bijection of the master seed, so distinct
//! `(master, grid)` pairs give distinct keys and distinct realisations share a
//! key but not a stream. The construction is part of the result format: changing
//! it changes every published number, so it is versioned through `TAG`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const TAG: u64 = 0x6870_6770_6e5f_7631; // "hpgpn_v1"

/// Grid index reserved for channel generation; resampling attempt `a` uses
/// `CHANNEL_DOMAIN - a`.
pub const CHANNEL_DOMAIN: u64 = u64::MAX;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_stream_rng(master_seed: u64, realization_index: u64, grid_index: u64) -> StreamRng {
    let mut state = master_seed;
    let words = [splitmix64(&mut state), splitmix64(&mut state), grid_index, TAG];
    let mut key = [0u8; 32];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = StreamRng::from_seed(key);
    rng.set_stream(realization_index);
    rng
}
