//! Deterministic per-trial random streams.
//!
//! Every Monte Carlo trial draws from streams derived from
//! `(master_seed, trial_index, label)`, so results are bit-identical whether
//! trials run serially or spread over a worker pool, and the vertex, pair-edge
//! and root-edge randomness of a trial never alias each other.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamLabel {
    Vertices,
    PairEdges,
    RootEdges,
    RootMark,
}

impl StreamLabel {
    fn tag(self) -> u64 {
        match self {
            StreamLabel::Vertices => 0x5645_5254,
            StreamLabel::PairEdges => 0x4544_4745,
            StreamLabel::RootEdges => 0x524f_4f54,
            StreamLabel::RootMark => 0x4d41_524b,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Single mixed 64-bit value identifying a trial; used as seed provenance.
pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    let mut s = master_seed;
    let a = splitmix64(&mut s);
    let mut t = trial ^ a;
    splitmix64(&mut t)
}

/// Counter-based stream for one `(master_seed, trial, label)` triple.
pub fn stream(master_seed: u64, trial: u64, label: StreamLabel) -> ChaCha8Rng {
    let mut state = master_seed ^ 0x6a09_e667_f3bc_c908;
    let mut acc = splitmix64(&mut state);
    state ^= trial.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    acc ^= splitmix64(&mut state).rotate_left(17);
    state ^= label.tag();
    acc ^= splitmix64(&mut state).rotate_left(31);

    let mut seed_state = acc;
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut seed_state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
