use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for a (seed, stream) pair; streams separate restarts.
pub(crate) fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
