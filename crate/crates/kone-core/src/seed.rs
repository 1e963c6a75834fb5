//! Deterministic seeding contract.
//!
//! Every stochastic entry point takes a 64-bit root seed. Parallel work is
//! split into streams: replica `i` draws from `stream_rng(seed, i)`, a
//! counter-based ChaCha stream, so results are independent of thread
//! scheduling and bit-identical across reruns. Nested consumers reserve
//! disjoint stream-id blocks (see the constants below).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream-id block for CRM replica sampling.
pub const STREAM_BLOCK_CRM: u64 = 0;
/// Stream-id block for Gibbs chains.
pub const STREAM_BLOCK_GIBBS: u64 = 1 << 32;
/// Stream-id block for diffusion trajectories.
pub const STREAM_BLOCK_DIFFUSION: u64 = 2 << 32;
/// Stream-id block for insertion (importance) sampling in the verifiers.
pub const STREAM_BLOCK_INSERTION: u64 = 3 << 32;

/// RNG for stream `stream` of root seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
