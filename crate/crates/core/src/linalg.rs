//! Structured dense linear algebra: Pfaffians, orthogonal exponentials of
//! antisymmetric generators, the four block contractions used by the pair
//! formulas, iterative rank-1 inverse updates and SVD pseudo-inverses.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Absolute tolerance used when validating skew/Hermitian structure on input.
pub const STRUCTURE_TOL: f64 = 1e-10;

pub(crate) const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Largest |M_ij + M_ji|.
pub fn skew_violation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] + m[(j, i)]).norm());
        }
    }
    worst
}

pub fn real_skew_violation(m: &RMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] + m[(j, i)]).abs());
        }
    }
    worst
}

/// Even-dimensional complex skew-symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    entries: CMatrix,
}

impl SkewMatrix {
    /// Validates skewness to [`STRUCTURE_TOL`] and even dimension, then
    /// re-antisymmetrizes to remove residual drift.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Dimension(format!(
                "skew matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if !entries.nrows().is_multiple_of(2) {
            return Err(Error::Dimension(format!(
                "skew matrix dimension must be even, got {}",
                entries.nrows()
            )));
        }
        let violation = skew_violation(&entries);
        if violation > STRUCTURE_TOL {
            return Err(Error::Validation(format!(
                "matrix is not skew-symmetric (max |M + Mᵀ| = {violation:e})"
            )));
        }
        let sym = (&entries - entries.transpose()) * Complex64::new(0.5, 0.0);
        Ok(Self { entries: sym })
    }

    pub fn from_real(entries: &RMatrix) -> Result<Self> {
        Self::new(to_complex(entries))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_inner(self) -> CMatrix {
        self.entries
    }
}

/// Index pattern for the four signed block contractions. The row vector is
/// built from `q` and the column vector from `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockContractionKind {
    PlusMinus,
    MinusPlus,
    PlusPlus,
    MinusMinus,
}

impl BlockContractionKind {
    /// (sign of the i-entry in the row vector, sign of the i-entry in the column vector).
    fn signs(self) -> (f64, f64) {
        match self {
            BlockContractionKind::PlusMinus => (1.0, -1.0),
            BlockContractionKind::MinusPlus => (-1.0, 1.0),
            BlockContractionKind::PlusPlus => (-1.0, -1.0),
            BlockContractionKind::MinusMinus => (1.0, 1.0),
        }
    }

    /// Row vector (1_q, ±i_q) and column vector (1_p, ±i_p) of length 2N.
    pub fn vectors(self, n_modes: usize, p: usize, q: usize) -> (DVector<Complex64>, DVector<Complex64>) {
        let (row_sign, col_sign) = self.signs();
        let mut row = DVector::zeros(2 * n_modes);
        let mut col = DVector::zeros(2 * n_modes);
        row[q] = Complex64::new(1.0, 0.0);
        row[n_modes + q] = I * row_sign;
        col[p] = Complex64::new(1.0, 0.0);
        col[n_modes + p] = I * col_sign;
        (row, col)
    }
}

/// Four-term signed sum of `m[q,p]`, `m[q,N+p]`, `m[N+q,p]`, `m[N+q,N+p]`
/// (0-based modes).
pub fn block_contract(m: &CMatrix, kind: BlockContractionKind, p: usize, q: usize) -> Result<Complex64> {
    let dim = m.nrows();
    if !dim.is_multiple_of(2) || !m.is_square() {
        return Err(Error::Dimension(format!(
            "block contraction needs an even square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = dim / 2;
    for index in [p, q] {
        if index >= n {
            return Err(Error::IndexOutOfRange { index, bound: n });
        }
    }
    Ok(block_contract_unchecked(m, kind, p, q))
}

#[inline]
pub(crate) fn block_contract_unchecked(m: &CMatrix, kind: BlockContractionKind, p: usize, q: usize) -> Complex64 {
    let n = m.nrows() / 2;
    let (rs, cs) = kind.signs();
    let (ri, ci) = (I * rs, I * cs);
    m[(q, p)] + m[(q, n + p)] * ci + ri * m[(n + q, p)] + ri * ci * m[(n + q, n + p)]
}

/// Pfaffian by skew-symmetric Gaussian elimination with partial pivoting.
pub fn pfaffian(s: &SkewMatrix) -> Complex64 {
    pfaffian_raw(s.entries())
}

/// Pfaffian of a matrix assumed skew-symmetric; only the strict upper
/// triangle is read.
pub(crate) fn pfaffian_raw(m: &CMatrix) -> Complex64 {
    let n = m.nrows();
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if n % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let mut a = m.clone();
    let mut result = Complex64::new(1.0, 0.0);
    let mut k = 0;
    while k + 1 < n {
        // pivot: largest entry in row k right of the diagonal
        let mut pivot = k + 1;
        let mut best = a[(k, k + 1)].norm();
        for j in (k + 2)..n {
            let v = a[(k, j)].norm();
            if v > best {
                best = v;
                pivot = j;
            }
        }
        if pivot != k + 1 {
            a.swap_rows(k + 1, pivot);
            a.swap_columns(k + 1, pivot);
            result = -result;
        }
        let head = a[(k, k + 1)];
        if head.norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        result *= head;
        if k + 2 < n {
            let tau: Vec<Complex64> = ((k + 2)..n).map(|j| a[(k, j)] / head).collect();
            let col: Vec<Complex64> = ((k + 2)..n).map(|i| a[(i, k + 1)]).collect();
            let rest = n - k - 2;
            for ii in 0..rest {
                for jj in 0..rest {
                    a[(k + 2 + ii, k + 2 + jj)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
        k += 2;
    }
    result
}

/// Real orthogonal `exp(iξ)` for ξ Hermitian and antisymmetric.
pub fn skew_exp(xi: &CMatrix) -> Result<RMatrix> {
    let generator = antisymmetric_generator(xi)?;
    Ok(generator.exp())
}

/// Validates ξ† = ξ, ξᵀ = −ξ and returns the real antisymmetric iξ.
pub(crate) fn antisymmetric_generator(xi: &CMatrix) -> Result<RMatrix> {
    if !xi.is_square() {
        return Err(Error::Dimension(format!("ξ must be square, got {}x{}", xi.nrows(), xi.ncols())));
    }
    let n = xi.nrows();
    let mut worst_herm = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst_herm = worst_herm.max((xi[(i, j)] - xi[(j, i)].conj()).norm());
        }
    }
    let worst_skew = skew_violation(xi);
    if worst_herm > STRUCTURE_TOL || worst_skew > STRUCTURE_TOL {
        return Err(Error::Validation(format!(
            "ξ must be Hermitian and antisymmetric (Hermitian defect {worst_herm:e}, skew defect {worst_skew:e})"
        )));
    }
    let k = xi.map(|z| (I * z).re);
    Ok((&k - k.transpose()) * 0.5)
}

/// One term β·|u⟩⟨v| of an update sequence.
#[derive(Debug, Clone)]
pub struct RankOneUpdate {
    pub coeff: Complex64,
    pub left: DVector<Complex64>,
    pub right: DVector<Complex64>,
}

impl RankOneUpdate {
    pub fn new(coeff: Complex64, left: DVector<Complex64>, right: DVector<Complex64>) -> Self {
        Self { coeff, left, right }
    }

    /// β·|i⟩⟨j| with unit basis vectors.
    pub fn unit(coeff: Complex64, i: usize, j: usize, dim: usize) -> Self {
        let mut left = DVector::zeros(dim);
        let mut right = DVector::zeros(dim);
        left[i] = Complex64::new(1.0, 0.0);
        right[j] = Complex64::new(1.0, 0.0);
        Self { coeff, left, right }
    }
}

/// Threshold on |1 + tr(C⁻¹B)| below which an update step is declared singular.
pub const MILLER_SINGULAR_TOL: f64 = 1e-12;

/// Inverse of `A + Σ_k β_k |u_k⟩⟨v_k|` from `A⁻¹` by successive rank-1
/// updates `C⁻¹ ← C⁻¹ − g C⁻¹ B C⁻¹`, `g = 1/(1 + tr(C⁻¹B))`.
///
/// The base "inverse" may itself be singular (it only has to be the limit of
/// inverses); each step is the Sherman–Morrison identity for `1 + B C⁻¹`.
pub fn miller_inverse(base_inverse: &CMatrix, updates: &[RankOneUpdate]) -> Result<CMatrix> {
    let mut inv = base_inverse.clone();
    for (step, update) in updates.iter().enumerate() {
        if update.left.len() != inv.nrows() || update.right.len() != inv.ncols() {
            return Err(Error::Dimension(format!(
                "rank-1 update {step} has vectors of length {}/{} for a {}x{} matrix",
                update.left.len(),
                update.right.len(),
                inv.nrows(),
                inv.ncols()
            )));
        }
        let cu = &inv * &update.left;
        let vc = update.right.transpose() * &inv;
        let trace = update.coeff * (update.right.transpose() * &cu)[(0, 0)];
        let denom = Complex64::new(1.0, 0.0) + trace;
        if denom.norm() < MILLER_SINGULAR_TOL {
            return Err(Error::SingularUpdate { step, magnitude: denom.norm() });
        }
        let g = update.coeff / denom;
        inv -= (cu * vc) * g;
    }
    Ok(inv)
}

/// Default relative singular-value cutoff for [`pseudo_inverse`].
pub const DEFAULT_RCOND: f64 = 1e-12;

/// Moore–Penrose inverse with singular values below `rcond·σ_max` discarded.
pub fn pseudo_inverse(m: &RMatrix, rcond: f64) -> RMatrix {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return RMatrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("SVD requested U");
    let v_t = svd.v_t.expect("SVD requested Vᵀ");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = rcond * sigma_max;
    let mut out = RMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            let vk = v_t.row(k).transpose();
            let uk = u.column(k);
            out += (vk * uk.transpose()) / s;
        }
    }
    out
}

/// Direct complex inverse, or a validation error naming the context.
pub(crate) fn invert(m: &CMatrix, context: &str) -> Result<CMatrix> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Validation(format!("{context}: matrix is singular")))
}

/// 1-norm condition number estimate via an explicit inverse.
pub(crate) fn condition_number(m: &CMatrix, inverse: &CMatrix) -> f64 {
    fn one_norm(a: &CMatrix) -> f64 {
        (0..a.ncols())
            .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
    one_norm(m) * one_norm(inverse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_skew(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = -z;
            }
        }
        m
    }

    #[test]
    fn pfaffian_two_by_two() {
        let a = Complex64::new(0.3, -1.7);
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0), a, -a, c(0.0)]);
        let pf = pfaffian(&SkewMatrix::new(m).unwrap());
        assert!((pf - a).norm() < 1e-15);
    }

    #[test]
    fn pfaffian_of_symplectic_form_is_minus_one() {
        // σ⊗1₂ : Pf = a12 a34 − a13 a24 + a14 a23 = 0 − 1·1 + 0 = −1
        let mut m = RMatrix::zeros(4, 4);
        m[(0, 2)] = 1.0;
        m[(2, 0)] = -1.0;
        m[(1, 3)] = 1.0;
        m[(3, 1)] = -1.0;
        let pf = pfaffian(&SkewMatrix::from_real(&m).unwrap());
        assert!((pf - c(-1.0)).norm() < 1e-15);
    }

    #[test]
    fn pfaffian_squared_is_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_skew(&mut rng, 6);
        let pf = pfaffian(&SkewMatrix::new(m.clone()).unwrap());
        let det = m.determinant();
        assert!((pf * pf - det).norm() <= 1e-10 * det.norm().max(1.0));
    }

    #[test]
    fn odd_dimension_and_non_skew_rejected() {
        assert!(matches!(SkewMatrix::new(CMatrix::zeros(3, 3)), Err(Error::Dimension(_))));
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(1.0);
        assert!(matches!(SkewMatrix::new(m), Err(Error::Validation(_))));
    }

    #[test]
    fn skew_exp_of_zero_and_rotation() {
        let u = skew_exp(&CMatrix::zeros(4, 4)).unwrap();
        assert!((u - RMatrix::identity(4, 4)).camax() < 1e-15);

        // iξ = [[0, θ], [−θ, 0]]  ⇒  ξ = [[0, −iθ], [iθ, 0]]
        let theta = 0.7;
        let xi = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0), Complex64::new(0.0, -theta), Complex64::new(0.0, theta), c(0.0)],
        );
        let u = skew_exp(&xi).unwrap();
        let expected =
            RMatrix::from_row_slice(2, 2, &[theta.cos(), theta.sin(), -theta.sin(), theta.cos()]);
        assert!((u - expected).camax() < 1e-14);
    }

    #[test]
    fn skew_exp_rejects_non_hermitian() {
        let xi = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(-1.0), c(0.0)]);
        assert!(matches!(skew_exp(&xi), Err(Error::Validation(_))));
    }

    #[test]
    fn block_contract_cases() {
        let zero = CMatrix::zeros(4, 4);
        for kind in [
            BlockContractionKind::PlusMinus,
            BlockContractionKind::MinusPlus,
            BlockContractionKind::PlusPlus,
            BlockContractionKind::MinusMinus,
        ] {
            assert_eq!(block_contract(&zero, kind, 1, 0).unwrap(), c(0.0));
        }
        // Υ, +−: −2i δ_pq
        let n = 2;
        let mut ups = CMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            ups[(j, n + j)] = c(1.0);
            ups[(n + j, j)] = c(-1.0);
        }
        for p in 0..n {
            for q in 0..n {
                let v = block_contract(&ups, BlockContractionKind::PlusMinus, p, q).unwrap();
                let expected = if p == q { Complex64::new(0.0, -2.0) } else { c(0.0) };
                assert!((v - expected).norm() < 1e-15);
            }
        }
        assert!(matches!(
            block_contract(&ups, BlockContractionKind::PlusMinus, 2, 0),
            Err(Error::IndexOutOfRange { index: 2, bound: 2 })
        ));
    }

    #[test]
    fn block_contract_matches_vector_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_skew(&mut rng, 6);
        for kind in [
            BlockContractionKind::PlusMinus,
            BlockContractionKind::MinusPlus,
            BlockContractionKind::PlusPlus,
            BlockContractionKind::MinusMinus,
        ] {
            let (row, col) = kind.vectors(3, 2, 1);
            let direct = (row.transpose() * &m * col)[(0, 0)];
            let fast = block_contract(&m, kind, 2, 1).unwrap();
            assert!((direct - fast).norm() < 1e-14);
        }
    }

    #[test]
    fn miller_empty_and_sherman_morrison() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = CMatrix::from_fn(4, 4, |i, j| {
            c(if i == j { 3.0 } else { 0.0 }) + Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))
        });
        let a_inv = a.clone().try_inverse().unwrap();
        assert_eq!(miller_inverse(&a_inv, &[]).unwrap(), a_inv);

        let u = DVector::from_fn(4, |i, _| Complex64::new(0.1 * i as f64, 0.3));
        let v = DVector::from_fn(4, |i, _| Complex64::new(0.2, -0.1 * i as f64));
        let beta = Complex64::new(0.7, 0.2);
        let updated = miller_inverse(&a_inv, &[RankOneUpdate::new(beta, u.clone(), v.clone())]).unwrap();
        // Sherman–Morrison closed form
        let au = &a_inv * &u;
        let va = v.transpose() * &a_inv;
        let denom = c(1.0) + beta * (v.transpose() * &au)[(0, 0)];
        let closed = &a_inv - (au * va) * (beta / denom);
        assert!((updated - closed).camax() < 1e-12);
    }

    #[test]
    fn miller_reports_singular_step() {
        let inv = CMatrix::identity(2, 2);
        let err = miller_inverse(&inv, &[RankOneUpdate::unit(c(0.5), 0, 0, 2), RankOneUpdate::unit(c(-1.0), 1, 1, 2)])
            .unwrap_err();
        assert!(matches!(err, Error::SingularUpdate { step: 1, .. }));
    }

    #[test]
    fn pseudo_inverse_simple_cases() {
        let id = RMatrix::identity(3, 3);
        assert!((pseudo_inverse(&id, DEFAULT_RCOND) - &id).camax() < 1e-15);
        let d = RMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let expected = RMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        assert!((pseudo_inverse(&d, DEFAULT_RCOND) - expected).camax() < 1e-15);
    }
}
