//! Seed derivation and random streams.
//!
//! Every random source is a [`ChaCha8Rng`] keyed by a 64-bit seed and
//! addressed by a 64-bit stream number. Seeds for independent components are
//! derived from `(master_seed, index, tag)` by [`derive_seed`]:
//!
//! ```text
//! h   = fnv1a64(tag)
//! s   = splitmix64(master_seed ^ splitmix64(index ^ splitmix64(h)))
//! ```
//!
//! so trials never share generator state and results do not depend on the
//! order in which trials are executed. Gaussian variates use the ziggurat
//! sampler from `rand_distr`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Seed for component `tag` of item `index` under `master`.
pub fn derive_seed(master: u64, index: u64, tag: &str) -> u64 {
    let h = splitmix64(fnv1a64(tag.as_bytes()));
    splitmix64(master ^ splitmix64(index ^ h))
}

/// Generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fills `out` with i.i.d. `N(0, scale²)` draws.
pub fn fill_gaussian(rng: &mut StreamRng, out: &mut [f64], scale: f64) {
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v = scale * z;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;

    #[test]
    fn derivation_separates_tags_and_indices() {
        let a = derive_seed(7, 0, "channel");
        assert_eq!(a, derive_seed(7, 0, "channel"));
        assert_ne!(a, derive_seed(7, 0, "matrix"));
        assert_ne!(a, derive_seed(7, 1, "channel"));
        assert_ne!(a, derive_seed(8, 0, "channel"));
    }

    #[test]
    fn streams_are_distinct() {
        let x: u64 = stream(1, 0).random();
        let y: u64 = stream(1, 1).random();
        let z: u64 = stream(1, 0).random();
        assert_ne!(x, y);
        assert_eq!(x, z);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
