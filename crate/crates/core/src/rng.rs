//! Seed derivation. Every random consumer gets its own named substream of
//! the root seed, and replicated work (bootstrap replicates, slides) gets a
//! ChaCha stream per index so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derives the seed of a named substream, e.g. `substream(root, "bootstrap")`.
pub fn substream(root: u64, name: &str) -> u64 {
    splitmix64(root ^ splitmix64(fnv1a(name.as_bytes())))
}

/// Mixes an index into a seed. Used where a nested stream is needed.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

/// Generator for replicate `index` of `seed`: the ChaCha stream id is the index.
pub fn stream_rng(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stateless per-coordinate hash in `[0, 1)`, for pixel-level texture.
#[inline]
pub fn hash_unit(seed: u64, x: u64, y: u64) -> f64 {
    let h = splitmix64(seed ^ splitmix64(x.wrapping_mul(0x9e37_79b9).wrapping_add(y << 32 | y >> 32)));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
