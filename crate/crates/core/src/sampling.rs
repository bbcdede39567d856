//! Seeded random instances: Hermitian, positive-definite, unitary and
//! invertible matrices, and elements of a subspace.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::convexity::HermSubspace;
use crate::error::Result;
use crate::matcore::{CMat, HermMatrix, PosDefMatrix};

/// Deterministic generator for stream `stream` of seed `seed`.
///
/// Streams are mixed through splitmix64 so nearby `(seed, stream)` pairs give
/// unrelated sequences.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(stream.wrapping_add(0x9e37_79b9_7f4a_7c15))))
}

/// Per-trial seed derived from a base seed and a trial index.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    splitmix(seed ^ trial)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Matrix with independent standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| Complex64::new(gaussian(rng), gaussian(rng)))
}

/// GUE-style Hermitian matrix rescaled so that `||x||_inf = norm`.
pub fn hermitian_with_norm<R: Rng + ?Sized>(rng: &mut R, n: usize, norm: f64) -> Result<HermMatrix> {
    let g = ginibre(rng, n);
    let x = HermMatrix::new(g)?;
    let op = x.op_norm()?;
    if op == 0.0 {
        return Ok(x);
    }
    Ok(x.scale(norm / op))
}

/// GUE-style Hermitian matrix with `||x||_inf` uniform in `(0, cap]`.
pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize, cap: f64) -> Result<HermMatrix> {
    let u: f64 = 1.0 - rng.random::<f64>();
    hermitian_with_norm(rng, n, cap * u)
}

/// `exp(x)` for a random Hermitian `x` with `||x||_inf <= cap`.
pub fn posdef<R: Rng + ?Sized>(rng: &mut R, n: usize, cap: f64) -> Result<PosDefMatrix> {
    PosDefMatrix::exp_of(&hermitian(rng, n, cap)?)
}

/// Haar-distributed unitary from the QR factorization of a Ginibre matrix.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let qr = ginibre(rng, n).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let m = d.norm();
        if m > 0.0 {
            let phase = d / Complex64::new(m, 0.0);
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// Random well-conditioned invertible matrix `u * diag(s) * v` with singular
/// values in `[0.5, 2]`.
pub fn invertible<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let u = unitary(rng, n);
    let v = unitary(rng, n);
    let s = CMat::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(0.5 + 1.5 * rng.random::<f64>(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    u * s * v
}

/// Random element of a subspace with `||h||_inf` uniform in `(0, cap]`.
pub fn in_subspace<R: Rng + ?Sized>(rng: &mut R, h: &HermSubspace, cap: f64) -> Result<HermMatrix> {
    let n = h.ambient_dim();
    let mut acc = HermMatrix::zeros(n);
    for b in h.basis() {
        acc = &acc + &b.scale(gaussian(rng));
    }
    let op = acc.op_norm()?;
    if op == 0.0 {
        return Ok(acc);
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    Ok(acc.scale(cap * u / op))
}
