use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

/// Independent random streams used for one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Factor = 0,
    Initial = 1,
    Chain = 2,
    Direct = 3,
}

/// Counter-based generator for `(base seed, path index, stream)`: any path
/// can be regenerated on its own, in any order.
pub fn path_rng(seed: u64, path: u64, stream: Stream) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path.wrapping_mul(4).wrapping_add(stream as u64));
    rng
}
