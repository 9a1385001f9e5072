//! Shared inputs for the benchmarks.

use hdwalk::linalg::{GramMatrix, PointCloud};
use hdwalk::{derive_stream, SeedSpec};

/// Deterministic cloud of `len` points in `dim` dimensions.
pub fn cloud(len: usize, dim: usize, seed: u64) -> PointCloud {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let data = (0..len * dim).map(|_| next()).collect();
    PointCloud::from_flat(dim, data, "bench").expect("valid cloud")
}

/// Gram matrix of a random cloud, which is positive semidefinite.
pub fn gram(m: usize, seed: u64) -> GramMatrix {
    let c = cloud(m + 1, 2 * m, seed);
    hdwalk::linalg::gram_from_cloud(&c, 0).expect("valid gram")
}

pub fn stream(i: u64) -> hdwalk::Stream {
    derive_stream(SeedSpec::new(42, i))
}
