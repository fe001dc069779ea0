//! Seeded random streams.
//!
//! All randomness comes from ChaCha8 streams keyed by a root seed that is
//! split hierarchically (corpus → sample → stage), so any sub-stream can be
//! regenerated without replaying its siblings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator identifier recorded in manifests.
pub const GENERATOR: &str = "chacha8/rand_chacha-0.9";

pub type Rng = ChaCha8Rng;

/// SplitMix64 finaliser.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `label`/`index` under `parent`.
pub fn derive(parent: u64, label: &str, index: u64) -> u64 {
    let mut h = mix(parent);
    for b in label.bytes() {
        h = mix(h ^ u64::from(b));
    }
    mix(h ^ index)
}

pub fn stream(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
