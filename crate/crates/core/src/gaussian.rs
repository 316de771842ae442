//! Gaussian sector: the covariance matrix Γ of a pure fermionic Gaussian
//! state in the Majorana basis `A_j = c_j† + c_j`, `A_{N+j} = i(c_j† − c_j)`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{antisymmetric_generator, real_skew_violation, CMatrix, RMatrix, STRUCTURE_TOL};

/// Allowed Frobenius deviation of Γ² from −1 on construction.
pub const PURITY_TOL: f64 = 1e-8;

/// Smallest admissible |eigenvalue| of iΓ during purification.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Υ = σ⊗1 with σ = [[0, 1], [−1, 0]].
pub fn symplectic_form(n_modes: usize) -> RMatrix {
    let mut ups = RMatrix::zeros(2 * n_modes, 2 * n_modes);
    for j in 0..n_modes {
        ups[(j, n_modes + j)] = 1.0;
        ups[(n_modes + j, j)] = -1.0;
    }
    ups
}

/// Frobenius norm of Γ² + 1.
pub fn purity_defect(gamma: &RMatrix) -> f64 {
    let n = gamma.nrows();
    (gamma * gamma + RMatrix::identity(n, n)).norm()
}

#[derive(Debug, Clone)]
pub struct GaussianParams {
    n_modes: usize,
    xi: CMatrix,
}

impl GaussianParams {
    pub fn new(xi: CMatrix) -> Result<Self> {
        if !xi.nrows().is_multiple_of(2) || !xi.is_square() || xi.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "ξ must be 2N×2N with N ≥ 1, got {}x{}",
                xi.nrows(),
                xi.ncols()
            )));
        }
        antisymmetric_generator(&xi)?;
        Ok(Self { n_modes: xi.nrows() / 2, xi })
    }

    pub fn zero(n_modes: usize) -> Self {
        Self { n_modes, xi: CMatrix::zeros(2 * n_modes, 2 * n_modes) }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn xi(&self) -> &CMatrix {
        &self.xi
    }
}

/// Real antisymmetric Γ with Γ² = −1.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    n_modes: usize,
    gamma: RMatrix,
}

impl CovarianceMatrix {
    /// Checks shape, antisymmetry (1e−10) and purity (1e−8), then
    /// re-antisymmetrizes.
    pub fn new(gamma: RMatrix) -> Result<Self> {
        if !gamma.is_square() || !gamma.nrows().is_multiple_of(2) || gamma.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "covariance must be 2N×2N with N ≥ 1, got {}x{}",
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        if gamma.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("covariance has non-finite entries".into()));
        }
        let skew = real_skew_violation(&gamma);
        if skew > STRUCTURE_TOL {
            return Err(Error::Validation(format!("covariance is not antisymmetric (defect {skew:e})")));
        }
        let gamma = (&gamma - gamma.transpose()) * 0.5;
        let defect = purity_defect(&gamma);
        if defect > PURITY_TOL {
            return Err(Error::Validation(format!("covariance is not pure: ‖Γ² + 1‖_F = {defect:e}")));
        }
        Ok(Self { n_modes: gamma.nrows() / 2, gamma })
    }

    /// Wraps an antisymmetric matrix without the purity check. Meant for
    /// derivative probes that step off the pure manifold.
    pub fn unchecked(gamma: RMatrix) -> Self {
        Self { n_modes: gamma.nrows() / 2, gamma }
    }

    /// Fermionic vacuum, Γ = −Υ.
    pub fn vacuum(n_modes: usize) -> Self {
        Self { n_modes, gamma: -symplectic_form(n_modes) }
    }

    /// Every mode occupied, Γ = +Υ.
    pub fn filled(n_modes: usize) -> Self {
        Self { n_modes, gamma: symplectic_form(n_modes) }
    }

    /// Product state with the listed modes occupied.
    pub fn from_occupations(occupied: &[bool]) -> Self {
        let n = occupied.len();
        let mut gamma = RMatrix::zeros(2 * n, 2 * n);
        for (j, &occ) in occupied.iter().enumerate() {
            let s = if occ { 1.0 } else { -1.0 };
            gamma[(j, n + j)] = s;
            gamma[(n + j, j)] = -s;
        }
        Self { n_modes: n, gamma }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.gamma
    }

    pub fn into_matrix(self) -> RMatrix {
        self.gamma
    }

    pub fn purity_defect(&self) -> f64 {
        purity_defect(&self.gamma)
    }
}

/// Γ = −U Υ Uᵀ with U = e^{iξ}.
pub fn covariance_from_xi(params: &GaussianParams) -> CovarianceMatrix {
    let generator = antisymmetric_generator(params.xi()).expect("GaussianParams is validated on construction");
    let u = generator.exp();
    let gamma = -(&u * symplectic_form(params.n_modes()) * u.transpose());
    let gamma = (&gamma - gamma.transpose()) * 0.5;
    CovarianceMatrix { n_modes: params.n_modes(), gamma }
}

/// Nearest pure covariance: the spectral sign of iΓ_raw, computed as
/// Γ(−Γ²)^{−1/2} so everything stays real.
pub fn purify(gamma_raw: &RMatrix) -> Result<CovarianceMatrix> {
    if !gamma_raw.is_square() || !gamma_raw.nrows().is_multiple_of(2) || gamma_raw.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "covariance must be 2N×2N with N ≥ 1, got {}x{}",
            gamma_raw.nrows(),
            gamma_raw.ncols()
        )));
    }
    if gamma_raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("covariance has non-finite entries".into()));
    }
    let skew = (gamma_raw - gamma_raw.transpose()) * 0.5;
    let neg_sq = -(&skew * &skew);
    let neg_sq = (&neg_sq + neg_sq.transpose()) * 0.5;
    let eig = SymmetricEigen::new(neg_sq);
    let smallest = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0).sqrt();
    if smallest < DEGENERACY_TOL {
        return Err(Error::Degenerate(smallest));
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let root = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let projected = &skew * root;
    let gamma = (&projected - projected.transpose()) * 0.5;
    Ok(CovarianceMatrix { n_modes: gamma.nrows() / 2, gamma })
}

/// ⟨n_j⟩ = (1 + Γ_{j,N+j}) / 2.
pub fn occupation_numbers(gamma: &CovarianceMatrix) -> Vec<f64> {
    let n = gamma.n_modes();
    (0..n).map(|j| 0.5 * (1.0 + gamma.matrix()[(j, n + j)])).collect()
}

/// Slater determinant filling the `filling` lowest eigen-orbitals of the
/// Hermitian one-body matrix `f`, expressed in the original mode basis.
pub fn mean_field_init(f: &CMatrix, filling: usize) -> Result<CovarianceMatrix> {
    let n = f.nrows();
    if !f.is_square() || n == 0 {
        return Err(Error::Dimension(format!("one-body matrix must be square and non-empty, got {}x{}", f.nrows(), f.ncols())));
    }
    if filling > n {
        return Err(Error::Config(format!("filling {filling} exceeds the {n} available modes")));
    }
    let herm = (f + f.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    // Rotated modes c'_k = Σ_j W_kj c_j with W = V†; rows of W ordered by energy.
    let v = &eig.eigenvectors;
    let w = CMatrix::from_fn(n, n, |k, j| v[(j, order[k])].conj());
    let mut rot = RMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        for j in 0..n {
            let z = w[(k, j)];
            rot[(k, j)] = z.re;
            rot[(k, n + j)] = -z.im;
            rot[(n + k, j)] = z.im;
            rot[(n + k, n + j)] = z.re;
        }
    }
    let occupied: Vec<bool> = (0..n).map(|k| k < filling).collect();
    let rotated = CovarianceMatrix::from_occupations(&occupied);
    let gamma = rot.transpose() * rotated.matrix() * &rot;
    let gamma = (&gamma - gamma.transpose()) * 0.5;
    Ok(CovarianceMatrix { n_modes: n, gamma })
}

/// Covariance of a random pure Gaussian state, `exp(K)` applied to the vacuum
/// with K antisymmetric and entries drawn from [−scale, scale].
/// ξ = −iK for a real antisymmetric K with entries uniform in (−scale, scale).
pub fn random_gaussian_params<R: rand::Rng>(rng: &mut R, n_modes: usize, scale: f64) -> GaussianParams {
    let dim = 2 * n_modes;
    let mut xi = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in (i + 1)..dim {
            let x = rng.random_range(-scale..scale);
            xi[(i, j)] = Complex64::new(0.0, -x);
            xi[(j, i)] = Complex64::new(0.0, x);
        }
    }
    GaussianParams { n_modes, xi }
}

pub fn random_covariance<R: rand::Rng>(rng: &mut R, n_modes: usize, scale: f64) -> CovarianceMatrix {
    perturb_covariance(&CovarianceMatrix::vacuum(n_modes), rng, scale)
}

/// Γ → RΓRᵀ with R = exp(K) for a random real antisymmetric K with entries
/// uniform in (−scale, scale). The rotation is in SO(2N), so purity and
/// fermion parity are preserved.
pub fn perturb_covariance<R: rand::Rng>(gamma: &CovarianceMatrix, rng: &mut R, scale: f64) -> CovarianceMatrix {
    let n_modes = gamma.n_modes;
    let dim = 2 * n_modes;
    let mut k = RMatrix::zeros(dim, dim);
    if scale > 0.0 {
        for i in 0..dim {
            for j in (i + 1)..dim {
                let x = rng.random_range(-scale..scale);
                k[(i, j)] = x;
                k[(j, i)] = -x;
            }
        }
    }
    let r = k.exp();
    let rotated = &r * &gamma.gamma * r.transpose();
    CovarianceMatrix { n_modes, gamma: (&rotated - rotated.transpose()) * 0.5 }
}
