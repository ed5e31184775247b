//! Named, versioned seed splitting. Every random stream in the toolkit is
//! derived from one user seed and a stream name, so adding a stream never
//! shifts the others.

/// Identifier recorded in manifests; bump when the derivation changes.
pub const SEED_SCHEME: &str = "splitmix64-fnv1a/v1";

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// One splitmix64 output for state `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed of the stream `name` under `seed`.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    splitmix64(seed ^ fnv1a(name))
}

/// Seed of item `index` of the stream `name` under `seed`.
pub fn derive_indexed(seed: u64, name: &str, index: u64) -> u64 {
    splitmix64(derive_seed(seed, name).wrapping_add(index.wrapping_mul(GOLDEN_GAMMA)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // first outputs of the reference generator seeded with 0
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(splitmix64(GOLDEN_GAMMA), 0x6e78_9e6a_a1b9_65f4);
    }

    #[test]
    fn streams_are_distinct_and_stable() {
        let a = derive_seed(7, "record");
        assert_eq!(a, derive_seed(7, "record"));
        assert_ne!(a, derive_seed(7, "params"));
        assert_ne!(a, derive_seed(8, "record"));
        let items: std::collections::HashSet<u64> =
            (0..1000).map(|i| derive_indexed(7, "x", i)).collect();
        assert_eq!(items.len(), 1000);
    }
}
