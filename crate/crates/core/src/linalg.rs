//! Dense complex linear algebra used by every other module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Vectorization of operators
//! (see [`vec_operator`]) is row-major: index `i * d + j` holds `rho[(i, j)]`.
//! With that layout `A rho B` maps to `(A ⊗ Bᵀ) vec(rho)`.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;
/// Singular values below this count as zero when extracting null spaces.
pub const SVD_RANK_TOL: f64 = 1e-8;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn ensure_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Largest entrywise modulus of `m - m†`.
pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b + b * a
}

/// Frobenius inner product `tr(a† b)`.
pub fn frobenius_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `tr(a b)` without forming the product.
pub fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all<'a, I>(factors: I) -> ComplexMatrix
where
    I: IntoIterator<Item = &'a ComplexMatrix>,
{
    factors
        .into_iter()
        .fold(identity(1), |acc, f| acc.kronecker(f))
}

/// Row-major vectorization.
pub fn vec_operator(m: &ComplexMatrix) -> ComplexVector {
    let (r, cols) = m.shape();
    ComplexVector::from_fn(r * cols, |k, _| m[(k / cols, k % cols)])
}

/// Inverse of [`vec_operator`] for a `d x d` operator.
pub fn devec_operator(v: &ComplexVector, d: usize) -> Result<ComplexMatrix> {
    if v.len() != d * d {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} is not a {d}x{d} operator",
            v.len()
        )));
    }
    Ok(ComplexMatrix::from_fn(d, d, |i, j| v[i * d + j]))
}

/// Trace-one, Hermitian, positive-semidefinite matrix tagged with its tensor structure.
///
/// Construction only checks shapes; call [`DensityMatrix::validate`] to check the
/// physical constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    factor_dims: Vec<usize>,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix, factor_dims: Vec<usize>) -> Result<Self> {
        let d = ensure_square(&matrix)?;
        if factor_dims.is_empty() || factor_dims.contains(&0) {
            return Err(Error::InvalidFactors(format!(
                "factor dimensions must be positive, got {factor_dims:?}"
            )));
        }
        let prod: usize = factor_dims.iter().product();
        if prod != d {
            return Err(Error::InvalidFactors(format!(
                "product of {factor_dims:?} is {prod}, matrix dimension is {d}"
            )));
        }
        Ok(Self {
            matrix,
            factor_dims,
        })
    }

    /// `|psi><psi|` for a normalized state vector.
    pub fn from_pure(psi: &ComplexVector, factor_dims: Vec<usize>) -> Result<Self> {
        let m = psi * psi.adjoint();
        Self::new(m, factor_dims)
    }

    pub fn qubits(matrix: ComplexMatrix, n: usize) -> Result<Self> {
        Self::new(matrix, vec![2; n])
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        trace_of_product(&self.matrix, &self.matrix).re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = hermitian_part(&self.matrix)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(HERMITIAN_TOL, TRACE_TOL, PSD_TOL)
    }

    pub fn validate_with(&self, herm_tol: f64, trace_tol: f64, psd_tol: f64) -> Result<()> {
        let dev = hermitian_deviation(&self.matrix);
        if dev > herm_tol {
            return Err(Error::InvalidState(format!(
                "Hermiticity violated by {dev:e}"
            )));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > trace_tol {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -psd_tol {
            return Err(Error::InvalidState(format!(
                "minimum eigenvalue {min:e} below -{psd_tol:e}"
            )));
        }
        Ok(())
    }
}

fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Reduced state over the factors listed in `keep`, in their original order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let dims = rho.factor_dims();
    if keep.is_empty() {
        return Err(Error::EmptyKeep);
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::FactorOutOfRange {
            index: bad,
            count: dims.len(),
        });
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();

    // stride of factor i in the full (row-major, first factor most significant) index
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let offsets = |factors: &[usize]| -> Vec<usize> {
        let mut offs = vec![0usize];
        for &f in factors {
            let mut next = Vec::with_capacity(offs.len() * dims[f]);
            for &o in &offs {
                for x in 0..dims[f] {
                    next.push(o + x * strides[f]);
                }
            }
            offs = next;
        }
        offs
    };
    let keep_offs = offsets(&keep);
    let trace_offs = offsets(&traced);

    let m = rho.matrix();
    let dk = keep_offs.len();
    let mut out = ComplexMatrix::zeros(dk, dk);
    for (r, &ro) in keep_offs.iter().enumerate() {
        for (cidx, &co) in keep_offs.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &trace_offs {
                acc += m[(ro + t, co + t)];
            }
            out[(r, cidx)] = acc;
        }
    }
    let kept_dims = keep.iter().map(|&k| dims[k]).collect();
    DensityMatrix::new(out, kept_dims)
}

/// Matrix exponential (scaling and squaring with a Padé core).
pub fn matrix_exp(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(m)?;
    Ok(m.clone().exp())
}

/// `exp(-i h t)` for Hermitian `h`, through its eigendecomposition.
pub fn unitary_propagator(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let eig = eig_hermitian(h)?;
    let phases = ComplexVector::from_iterator(
        eig.values.len(),
        eig.values.iter().map(|&e| C64::from_polar(1.0, -e * t)),
    );
    let v = &eig.vectors;
    Ok(v * ComplexMatrix::from_diagonal(&phases) * v.adjoint())
}

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: ComplexMatrix,
}

pub fn eig_hermitian(h: &ComplexMatrix) -> Result<HermitianEigen> {
    ensure_square(h)?;
    let deviation = hermitian_deviation(h);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let eig = SymmetricEigen::new(hermitian_part(h));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(h.nrows(), h.ncols(), |i, j| {
        eig.eigenvectors[(i, order[j])]
    });
    Ok(HermitianEigen { values, vectors })
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: C64,
    /// Unit-norm right eigenvector.
    pub vector: ComplexVector,
}

/// All eigenvalues (with multiplicity) and right eigenvectors of a general square matrix.
///
/// Eigenvalues come from the complex Schur form. Eigenvectors are taken from
/// the null space of `m - λI` (smallest right singular vectors), one per
/// member of each cluster of coincident eigenvalues, so repeated eigenvalues
/// of diagonalizable matrices get independent vectors.
pub fn eig_general(m: &ComplexMatrix) -> Result<Vec<EigenPair>> {
    let n = ensure_square(m)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = m.norm().max(1.0);
    let schur = Schur::try_new(m.clone(), 1e-15 * scale, 10_000 * n)
        .ok_or_else(|| Error::EigenFailure("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::EigenFailure("non-finite eigenvalue".into()));
    }

    let cluster_tol = 1e-9 * scale;
    let mut assigned = vec![false; n];
    let mut pairs: Vec<Option<EigenPair>> = vec![None; n];
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let members: Vec<usize> = (i..n)
            .filter(|&k| !assigned[k] && (values[k] - values[i]).norm() <= cluster_tol)
            .collect();
        let centre: C64 =
            members.iter().map(|&k| values[k]).sum::<C64>() / members.len() as f64;
        let shifted = m - ComplexMatrix::identity(n, n) * centre;
        let svd = SVD::new(shifted, false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::EigenFailure("SVD did not produce right vectors".into()))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        for (slot, &k) in members.iter().enumerate() {
            let row = order[slot];
            let vector = ComplexVector::from_fn(n, |j, _| v_t[(row, j)].conj());
            pairs[k] = Some(EigenPair {
                value: values[k],
                vector,
            });
            assigned[k] = true;
        }
    }
    Ok(pairs.into_iter().map(|p| p.expect("every index assigned")).collect())
}

/// `-tr(rho ln rho)` in nats, with `0 ln 0 = 0`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_spectrum(&rho.eigenvalues())
}

pub(crate) fn entropy_of_spectrum(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Half the trace norm of `r1 - r2`.
///
/// The difference of two density matrices is Hermitian, so its singular values
/// are the moduli of its eigenvalues.
pub fn trace_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    if r1.dim() != r2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "trace distance between {}- and {}-dimensional states",
            r1.dim(),
            r2.dim()
        )));
    }
    Ok(trace_distance_raw(r1.matrix(), r2.matrix()))
}

pub(crate) fn trace_distance_raw(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let diff = hermitian_part(&(a - b));
    0.5 * diff
        .symmetric_eigenvalues()
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
}
