use num_complex::Complex64;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::{CMatrix, CVector, HermitianMatrix};

pub fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_cmatrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| cn(rng))
}

pub fn random_cvector(n: usize, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(n, |_, _| cn(rng))
}

pub fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    HermitianMatrix::from_raw(random_cmatrix(n, n, rng))
}

/// `A Aᴴ` with `A` of size n×r.
pub fn random_psd(n: usize, r: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    let a = random_cmatrix(n, r, rng);
    HermitianMatrix::from_raw(&a * a.adjoint())
}

pub fn random_phases(n: usize, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(n, |_, _| {
        Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)
    })
}

/// Coarse-to-fine grid search over the unit box `[0, 1]^dim`. Each round
/// evaluates a full `points^dim` grid and shrinks the box around the best
/// point by `shrink`.
pub fn grid_minimize(dim: usize, points: usize, rounds: usize, shrink: f64, f: impl Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let mut lo = vec![0.0; dim];
    let mut hi = vec![1.0; dim];
    let mut best = vec![0.5; dim];
    let mut best_val = f(&best);
    let mut x = vec![0.0; dim];
    for _ in 0..rounds {
        let total = points.pow(dim as u32);
        for idx in 0..total {
            let mut r = idx;
            for d in 0..dim {
                let i = r % points;
                r /= points;
                x[d] = lo[d] + (hi[d] - lo[d]) * i as f64 / (points - 1) as f64;
            }
            let val = f(&x);
            if val < best_val {
                best_val = val;
                best.copy_from_slice(&x);
            }
        }
        for d in 0..dim {
            let half = 0.5 * (hi[d] - lo[d]) * shrink;
            lo[d] = (best[d] - half).max(0.0);
            hi[d] = (best[d] + half).min(1.0);
        }
    }
    (best, best_val)
}
