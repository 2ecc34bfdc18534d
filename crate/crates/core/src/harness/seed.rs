//! Deterministic seed derivation.
//!
//! Sub-seeds mix the master seed, an FNV-1a hash of the protocol label, the
//! sweep index and the replicate through SplitMix64 finalizers. Every run
//! then drives its own `ChaCha8Rng`, so results do not depend on platform or
//! thread scheduling.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

pub fn derive_seed(master: u64, protocol: &str, sweep_index: u64, replicate: u64) -> u64 {
    let mut h = splitmix(master);
    for word in [fnv1a(protocol.as_bytes()), sweep_index, replicate] {
        h = splitmix(h ^ word);
    }
    h
}
