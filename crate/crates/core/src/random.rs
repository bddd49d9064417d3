//! Seeded random matrices shared by the harness, the CLI and the tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matcore::{c64, pivoted_qr, CMatrix, C64};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with stream indices so nested loops get independent
/// streams (splitmix64 finaliser).
pub fn sub_seed(seed: u64, indices: &[u64]) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &i in indices {
        h ^= i
            .wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Haar-ish unitary from the QR factor of a Gaussian matrix.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    pivoted_qr(&gaussian_matrix(rng, n, n)).q
}

/// `U diag(s) V` with singular values log-uniform in `[1, sqrt(cond_max)]`
/// paired against their reciprocal range, so the condition number stays
/// below `cond_max`.
pub fn well_conditioned<R: Rng + ?Sized>(rng: &mut R, n: usize, cond_max: f64) -> CMatrix {
    let u = unitary(rng, n);
    let v = unitary(rng, n);
    let top = cond_max.max(1.0).ln() * 0.999;
    let s: Vec<C64> = (0..n).map(|_| c64((rng.random::<f64>() * top).exp(), 0.0)).collect();
    &(&u * &CMatrix::diag(&s)) * &v
}
