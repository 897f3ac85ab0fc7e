//! Counter-based random streams.
//!
//! Every replica draws from a ChaCha8 keystream addressed by
//! `(master seed, purpose, replica)`: the key is derived from the master seed
//! and the purpose, the 64-bit stream word is the replica index. Streams for
//! different purposes or replicas never overlap, and a replica's numbers do
//! not depend on how replicas are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. Disjoint purposes give independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Environment,
    Walk,
    Trap,
    Backbone,
    Analysis,
    Bootstrap,
    Fixture,
    /// Walks started at a trap entrance of a fixed pair.
    Holding,
    Custom(u32),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Environment => 1,
            Purpose::Walk => 2,
            Purpose::Trap => 3,
            Purpose::Backbone => 4,
            Purpose::Analysis => 5,
            Purpose::Bootstrap => 6,
            Purpose::Fixture => 7,
            Purpose::Holding => 8,
            Purpose::Custom(t) => 0x1_0000_0000 | u64::from(t),
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for replica `replica` of `purpose` under `master_seed`.
pub fn substream(master_seed: u64, purpose: Purpose, replica: u64) -> StreamRng {
    let mut state = master_seed ^ purpose.tag().wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replica);
    rng
}

/// Master seed for a nested experiment, derived from a parent seed and a label.
pub fn derive_seed(master_seed: u64, label: u64) -> u64 {
    let mut state = master_seed ^ label.rotate_left(17);
    splitmix64(&mut state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draws(mut rng: StreamRng) -> Vec<u64> {
        (0..8).map(|_| rng.gen()).collect()
    }

    #[test]
    fn same_address_same_stream() {
        assert_eq!(
            draws(substream(42, Purpose::Walk, 7)),
            draws(substream(42, Purpose::Walk, 7))
        );
    }

    #[test]
    fn addresses_are_disjoint() {
        let base = draws(substream(42, Purpose::Walk, 7));
        assert_ne!(base, draws(substream(43, Purpose::Walk, 7)));
        assert_ne!(base, draws(substream(42, Purpose::Trap, 7)));
        assert_ne!(base, draws(substream(42, Purpose::Walk, 8)));
    }
}
