//! Complex dense linear algebra shared by the rest of the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative eigenvalue threshold for rank and singularity decisions.
pub const RANK_TOL: f64 = 1e-9;

pub const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Complex Hermitian matrix; symmetrized on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(Self::from_raw(m))
    }

    /// Symmetrizes without validation; for internal arithmetic results.
    pub(crate) fn from_raw(m: CMatrix) -> Self {
        let h = (&m + m.adjoint()) * c(0.5);
        Self(h)
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self(CMatrix::from_fn(n, n, |i, j| if i == j { c(d[i]) } else { Complex64::new(0.0, 0.0) }))
    }

    /// `x xᴴ`.
    pub fn outer(x: &CVector) -> Self {
        Self::from_raw(x * x.adjoint())
    }

    /// Sum of `x xᴴ` over the given vectors; `n` is used when the list is empty.
    pub fn sum_outer(xs: &[CVector], n: usize) -> Self {
        let mut acc = CMatrix::zeros(n, n);
        for x in xs {
            acc += x * x.adjoint();
        }
        Self::from_raw(acc)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    /// `xᴴ A x`, real for Hermitian `A`.
    pub fn quad(&self, x: &CVector) -> f64 {
        x.dotc(&(&self.0 * x)).re
    }

    /// `Re tr(A B)`.
    pub fn trace_product(&self, b: &CMatrix) -> f64 {
        self.0.component_mul(&b.transpose()).iter().map(|z| z.re).sum()
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * c(s))
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Self {
        Self(&self.0 - &other.0)
    }

    /// `B A Bᴴ`.
    pub fn congruence(&self, b: &CMatrix) -> Self {
        Self::from_raw(b * &self.0 * b.adjoint())
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        self.0.clone().symmetric_eigenvalues()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().max()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Eigen-decomposition with eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct Evd {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl Evd {
    /// Absolute threshold `RANK_TOL · λ_max` (zero for negative semidefinite input).
    pub fn rank_tol(&self) -> f64 {
        RANK_TOL * self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn rank(&self) -> usize {
        let tol = self.rank_tol();
        self.values.iter().filter(|&&l| l > tol).count()
    }
}

pub fn hermitian_evd(a: &HermitianMatrix) -> Result<Evd> {
    if a.0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    let e = a.0.clone().symmetric_eigen();
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| e.eigenvalues[j].total_cmp(&e.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| e.eigenvalues[i]));
    let vectors = CMatrix::from_fn(n, n, |r, k| e.eigenvectors[(r, order[k])]);
    Ok(Evd { values, vectors })
}

/// `tr(A⁻¹)` for Hermitian positive definite `A`.
pub fn trace_inverse(a: &HermitianMatrix) -> Result<f64> {
    let e = hermitian_evd(a)?;
    let tol = e.rank_tol();
    if e.values.iter().any(|&l| l <= tol) {
        return Err(Error::SingularMatrix);
    }
    Ok(e.values.iter().map(|l| 1.0 / l).sum())
}

/// Hermitian square root of a PSD matrix, with negative eigenvalues clipped.
pub fn psd_sqrt(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let e = hermitian_evd(a)?;
    let d = e.values.map(|l| c(l.max(0.0).sqrt()));
    Ok(HermitianMatrix::from_raw(&e.vectors * CMatrix::from_diagonal(&d) * e.vectors.adjoint()))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn kron_real(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Column-stacking vectorization.
pub fn vec(x: &CMatrix) -> CVector {
    CVector::from_column_slice(x.as_slice())
}

pub fn unvec(v: &CVector, rows: usize, cols: usize) -> Result<CMatrix> {
    if v.len() != rows * cols {
        return Err(Error::InvalidInput(format!("cannot reshape {} entries to {rows}x{cols}", v.len())));
    }
    Ok(CMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// `(Bᵀ ⊗ A)·vec(X)` as a column, which equals `vec(A X B)`.
pub fn kron_vec_identities(a: &CMatrix, b: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != x.nrows() || x.ncols() != b.nrows() {
        return Err(Error::InvalidInput(format!(
            "non-conformable product {}x{} · {}x{} · {}x{}",
            a.nrows(),
            a.ncols(),
            x.nrows(),
            x.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let k = kron(&b.transpose(), a);
    let y = k * vec(x);
    Ok(CMatrix::from_column_slice(y.len(), 1, y.as_slice()))
}

/// `[[Re A, −Im A], [Im A, Re A]]`.
pub fn real_embed(a: &HermitianMatrix) -> DMatrix<f64> {
    real_embed_general(&a.0)
}

pub fn real_embed_general(a: &CMatrix) -> DMatrix<f64> {
    let (r, cidx) = a.shape();
    DMatrix::from_fn(2 * r, 2 * cidx, |i, j| {
        let z = a[(i % r, j % cidx)];
        match (i < r, j < cidx) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Inverse of [`real_embed`] for arbitrary symmetric 2n×2n input: averages
/// the two diagonal blocks and the antisymmetric parts of the off-diagonal
/// blocks. PSD input maps to PSD output.
pub fn complexify(y: &DMatrix<f64>) -> HermitianMatrix {
    let n = y.nrows() / 2;
    let m = CMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (y[(i, j)] + y[(n + i, n + j)]);
        let im = 0.5 * (y[(j, n + i)] - y[(i, n + j)]);
        Complex64::new(re, im)
    });
    HermitianMatrix::from_raw(m)
}

/// Whether `[[a11, a12], [conj(a12), a22]] ⪰ 0`.
pub fn schur_psd_test(a11: f64, a12: Complex64, a22: f64) -> bool {
    a11 >= 0.0 && a22 >= 0.0 && a11 * a22 >= a12.norm_sqr()
}

/// Vector with entries `exp(j·φₙ)`.
pub fn unit_phases(phases: &[f64]) -> CVector {
    CVector::from_iterator(phases.len(), phases.iter().map(|&p| Complex64::from_polar(1.0, p)))
}

/// Projects each entry onto the unit circle (`1` where the entry is zero).
pub fn project_unit_modulus(x: &CVector) -> CVector {
    x.map(|z| if z.norm() > 0.0 { Complex64::from_polar(1.0, z.arg()) } else { c(1.0) })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::testutil::{random_cmatrix, random_hermitian, random_psd};

    #[test]
    fn evd_of_identity_and_diagonal() {
        let e = hermitian_evd(&HermitianMatrix::identity(3)).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 1.0, 1.0]);
        let e = hermitian_evd(&HermitianMatrix::from_real_diagonal(&[0.0, 2.0])).unwrap();
        assert_eq!(e.values.as_slice(), &[2.0, 0.0]);
        assert_eq!(e.vectors[(1, 0)].norm(), 1.0);
    }

    #[test]
    fn evd_rejects_non_finite() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = Complex64::new(f64::NAN, 0.0);
        assert!(HermitianMatrix::new(m.clone()).is_err());
        assert!(hermitian_evd(&HermitianMatrix(m)).is_err());
    }

    #[test]
    fn trace_inverse_examples() {
        assert!((trace_inverse(&HermitianMatrix::identity(4)).unwrap() - 4.0).abs() < 1e-15);
        assert!((trace_inverse(&HermitianMatrix::from_real_diagonal(&[2.0, 4.0])).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(
            trace_inverse(&HermitianMatrix::from_real_diagonal(&[1.0, 1e-12])),
            Err(Error::SingularMatrix)
        ));
    }

    #[test]
    fn trace_inverse_matches_lu_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_psd(5, 5, &mut rng);
        let inv = a.matrix().clone().try_inverse().unwrap();
        let direct: f64 = inv.diagonal().iter().map(|z| z.re).sum();
        let rel = (trace_inverse(&a).unwrap() - direct).abs() / direct;
        assert!(rel < 1e-10, "{rel:e}");
    }

    #[test]
    fn kron_vec_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_cmatrix(2, 2, &mut rng);
        let i2 = CMatrix::identity(2, 2);
        let y = kron_vec_identities(&i2, &i2, &x).unwrap();
        assert!((y.column(0) - vec(&x)).norm() < 1e-15);
        let a = CMatrix::from_element(1, 1, Complex64::new(2.0, 1.0));
        let b = CMatrix::from_element(1, 1, Complex64::new(0.5, -3.0));
        let xs = CMatrix::from_element(1, 1, Complex64::new(-1.0, 0.25));
        let y = kron_vec_identities(&a, &b, &xs).unwrap();
        assert!((y[(0, 0)] - a[(0, 0)] * b[(0, 0)] * xs[(0, 0)]).norm() < 1e-15);
        assert!(kron_vec_identities(&a, &b, &x).is_err());
    }

    #[test]
    fn real_embed_examples() {
        let e = real_embed(&HermitianMatrix::identity(1));
        assert_eq!(e, DMatrix::identity(2, 2));
        let pauli = CMatrix::from_row_slice(2, 2, &[c(0.0), -J, J, c(0.0)]);
        let e = real_embed(&HermitianMatrix::new(pauli).unwrap());
        let mut ev: Vec<f64> = e.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn complexify_inverts_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_hermitian(4, &mut rng);
        let back = complexify(&real_embed(&a));
        assert!((back.matrix() - a.matrix()).norm() < 1e-14);
    }

    #[test]
    fn schur_examples() {
        assert!(schur_psd_test(1.0, c(0.0), 1.0));
        assert!(!schur_psd_test(1.0, c(2.0), 1.0));
        assert!(schur_psd_test(4.0, Complex64::new(1.0, 1.0), 1.0));
        // Oracle: minimum eigenvalue of the 2×2 block.
        let m = HermitianMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(4.0), Complex64::new(1.0, 1.0), Complex64::new(1.0, -1.0), c(1.0)],
        ))
        .unwrap();
        assert!(m.min_eigenvalue() >= 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn evd_reconstructs(seed in any::<u64>(), n in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_hermitian(n, &mut rng);
            let e = hermitian_evd(&a).unwrap();
            let d = e.values.map(c);
            let rec = &e.vectors * CMatrix::from_diagonal(&d) * e.vectors.adjoint();
            prop_assert!((rec - a.matrix()).norm() <= 1e-10 * a.norm().max(1e-300));
            let gram = e.vectors.adjoint() * &e.vectors;
            prop_assert!((gram - CMatrix::identity(n, n)).norm() <= 1e-10);
            prop_assert!(e.values.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn embedding_preserves_trace_products(seed in any::<u64>(), n in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_hermitian(n, &mut rng);
            let b = random_hermitian(n, &mut rng);
            let lhs = (real_embed(&a) * real_embed(&b)).trace();
            let rhs = 2.0 * (a.matrix() * b.matrix()).trace().re;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()).max(a.norm() * b.norm()));
        }

        #[test]
        fn embedding_of_psd_is_psd(seed in any::<u64>(), n in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_psd(n, n, &mut rng);
            prop_assert!(real_embed(&a).symmetric_eigenvalues().min() >= -1e-12 * a.norm());
        }

        #[test]
        fn kron_vec_identity_holds(seed in any::<u64>(), p in 1usize..4, q in 1usize..4, r in 1usize..4, s in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_cmatrix(p, q, &mut rng);
            let x = random_cmatrix(q, r, &mut rng);
            let b = random_cmatrix(r, s, &mut rng);
            let lhs = vec(&(&a * &x * &b));
            let rhs = kron_vec_identities(&a, &b, &x).unwrap();
            prop_assert!((lhs - rhs.column(0)).norm() <= 1e-12 * (1.0 + a.norm() * x.norm() * b.norm()));
        }

        #[test]
        fn trace_inverse_is_sum_of_reciprocals(seed in any::<u64>(), n in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_psd(n, n + 2, &mut rng);
            let e = hermitian_evd(&a).unwrap();
            let want: f64 = e.values.iter().map(|l| 1.0 / l).sum();
            let got = trace_inverse(&a).unwrap();
            prop_assert!((got - want).abs() <= 1e-10 * want);
        }
    }
}
