//! Seeded random streams.
//!
//! Every randomized step draws from ChaCha8 keyed by the user seed. Independent
//! sub-streams are addressed by `(domain, index)` through ChaCha's 64-bit
//! stream selector: the high 16 bits carry the domain tag and the low 48 bits
//! the index (row, item, annotator, trial, ...). Output is therefore a pure
//! function of `(seed, domain, index)` and does not depend on the order in
//! which streams are consumed or on the platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream domains. Values are part of the reproducibility contract; never
/// renumber them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum Domain {
    ItemOffset = 1,
    RowNoise = 2,
    GoldLabel = 3,
    Attributes = 4,
    QuotaShuffle = 5,
    NoiseRow = 6,
    KMeans = 16,
    Gmm = 17,
    UmapInit = 32,
    UmapLayout = 33,
    NnDescent = 34,
    Apcs = 48,
    Sweep = 64,
    Trial = 65,
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) | (index & 0x0000_FFFF_FFFF_FFFF));
    rng
}
