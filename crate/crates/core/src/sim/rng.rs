use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic per-clip random stream.
///
/// ChaCha8 is a counter-based generator: the 64-bit seed fills the key, the
/// clip id (FNV-1a hashed to 64 bits) selects the stream, and the 64-bit block
/// counter advances within it. Outputs therefore depend only on (seed, id)
/// and not on the order in which clips are processed.
pub fn clip_rng(seed: u64, clip_id: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(clip_id.as_bytes()));
    rng
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
