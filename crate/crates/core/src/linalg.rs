//! Dense complex operator algebra.
//!
//! Superoperators use the column-stacking convention throughout:
//! `vec(a ρ b) = (bᵀ ⊗ a) vec(ρ)`. nalgebra stores matrices column-major, so
//! `vec` is the raw storage order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense square complex matrix acting on a `dim`-dimensional Hilbert space.
pub type Operator = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Relative asymmetry accepted by [`hermitian_eig`] before symmetrizing.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

pub fn identity(dim: usize) -> Operator {
    Operator::identity(dim, dim)
}

/// Lowering operator `|0⟩⟨1|` of a two-level factor (index 0 = ground).
pub fn lowering() -> Operator {
    Operator::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])
}

pub fn pauli_x() -> Operator {
    Operator::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn kron(a: &Operator, b: &Operator) -> Operator {
    a.kronecker(b)
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    a * b - b * a
}

/// Largest entry modulus.
pub fn max_norm(a: &DMatrix<C64>) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `max |a - a†|`.
pub fn hermiticity_defect(a: &Operator) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(a: &Operator) -> Operator {
    (a + a.adjoint()).scale(0.5)
}

fn ensure_square(a: &Operator) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    Ok(a.nrows())
}

/// Column-stacked vectorization.
pub fn vec_op(rho: &Operator) -> DVector<C64> {
    DVector::from_column_slice(rho.as_slice())
}

/// Inverse of [`vec_op`].
pub fn devec(v: &DVector<C64>, dim: usize) -> Operator {
    assert_eq!(v.len(), dim * dim, "devec: length {} is not {dim}²", v.len());
    Operator::from_column_slice(dim, dim, v.as_slice())
}

/// Matrix form of a linear map on `dim × dim` operators.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    matrix: DMatrix<C64>,
    dim: usize,
}

impl SuperOperator {
    pub fn zeros(dim: usize) -> Self {
        Self { matrix: DMatrix::zeros(dim * dim, dim * dim), dim }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim * dim, dim * dim), dim }
    }

    pub fn from_matrix(matrix: DMatrix<C64>, dim: usize) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::DimensionMismatch { left: matrix.nrows(), right: dim * dim });
        }
        Ok(Self { matrix, dim })
    }

    /// Hilbert-space dimension `D` (the matrix is `D² × D²`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn apply(&self, rho: &Operator) -> Operator {
        devec(&(&self.matrix * vec_op(rho)), self.dim)
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self { matrix: self.matrix.map(|z| z * factor), dim: self.dim }
    }

    pub fn add_assign(&mut self, other: &SuperOperator) {
        assert_eq!(self.dim, other.dim);
        self.matrix += &other.matrix;
    }

    pub fn sub_assign(&mut self, other: &SuperOperator) {
        assert_eq!(self.dim, other.dim);
        self.matrix -= &other.matrix;
    }
}

/// `ρ ↦ a ρ b` as the matrix `bᵀ ⊗ a`.
pub fn sandwich_superop(a: &Operator, b: &Operator) -> Result<SuperOperator> {
    let da = ensure_square(a)?;
    let db = ensure_square(b)?;
    if da != db {
        return Err(Error::DimensionMismatch { left: da, right: db });
    }
    Ok(SuperOperator { matrix: b.transpose().kronecker(a), dim: da })
}

/// `ρ ↦ a ρ`.
pub fn left_superop(a: &Operator) -> Result<SuperOperator> {
    let d = ensure_square(a)?;
    sandwich_superop(a, &identity(d))
}

/// `ρ ↦ ρ b`.
pub fn right_superop(b: &Operator) -> Result<SuperOperator> {
    let d = ensure_square(b)?;
    sandwich_superop(&identity(d), b)
}

/// `ρ ↦ -i [h, ρ]`.
pub fn hamiltonian_superop(h: &Operator) -> Result<SuperOperator> {
    let mut s = left_superop(h)?;
    s.sub_assign(&right_superop(h)?);
    Ok(s.scale(-I))
}

/// Spectral decomposition `H = Σ_α ε_α |ψ_α⟩⟨ψ_α|`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, ordered like `values`.
    pub vectors: Operator,
    /// Optional split `ε_α = base_α + shift_α` used to form gaps without cancellation.
    split: Option<Vec<(f64, f64)>>,
}

impl EigenDecomposition {
    pub fn new(values: Vec<f64>, vectors: Operator) -> Self {
        Self { values, vectors, split: None }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `λ_αβ = ε_α − ε_β`.
    pub fn gap(&self, alpha: usize, beta: usize) -> f64 {
        match &self.split {
            Some(parts) => (parts[alpha].0 - parts[beta].0) + (parts[alpha].1 - parts[beta].1),
            None => self.values[alpha] - self.values[beta],
        }
    }

    /// Gap table `λ_αβ`.
    pub fn gaps(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |a, b| self.gap(a, b))
    }

    /// Rotate the eigenvectors by `u`, keeping eigenvalues: the decomposition of
    /// `u H u†` given that of `H`.
    pub fn rotated(mut self, u: &Operator) -> Self {
        self.vectors = u * &self.vectors;
        self
    }

    /// Matrix elements `⟨ψ_α|op|ψ_β⟩`.
    pub fn to_eigenbasis(&self, op: &Operator) -> Operator {
        self.vectors.adjoint() * op * &self.vectors
    }

    pub fn from_eigenbasis(&self, op: &Operator) -> Operator {
        &self.vectors * op * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> Operator {
        let diag = Operator::from_diagonal(&DVector::from_iterator(
            self.dim(),
            self.values.iter().map(|&v| C64::new(v, 0.0)),
        ));
        self.from_eigenbasis(&diag)
    }
}

/// Eigendecomposition of a Hermitian operator.
///
/// The input is symmetrized before solving. Eigenvalues come back ascending and
/// each eigenvector is phase-fixed so its first non-negligible component is
/// real and positive, which makes the output a deterministic function of the
/// input.
pub fn hermitian_eig(h: &Operator) -> Result<EigenDecomposition> {
    let n = ensure_square(h)?;
    let scale = max_norm(h);
    let defect = hermiticity_defect(h);
    let tolerance = HERMITIAN_TOLERANCE * scale.max(f64::MIN_POSITIVE);
    if defect > tolerance {
        return Err(Error::NonHermitianInput { defect, tolerance });
    }
    let sym = hermitian_part(h);
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::SingularSolve("Hermitian eigensolver did not converge".into()))?;

    let zeros = vec![0.0; n];
    Ok(canonical_eigen(&zeros, eig.eigenvalues.as_slice(), &eig.eigenvectors, false))
}

/// Sort ascending, normalize and phase-fix columns.
fn canonical_eigen(base: &[f64], shift: &[f64], raw_vectors: &Operator, keep_split: bool) -> EigenDecomposition {
    let n = base.len();
    let raw_values: Vec<f64> = base.iter().zip(shift).map(|(b, s)| b + s).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw_values[a].total_cmp(&raw_values[b]).then(a.cmp(&b)));

    let values = order.iter().map(|&k| raw_values[k]).collect();
    let mut vectors = Operator::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = raw_vectors.column(k).into_owned();
        let norm = v.norm();
        v.unscale_mut(norm);
        if let Some(lead) = v.iter().copied().find(|z| z.norm() > 1e-12) {
            let phase = lead.conj() / lead.norm();
            v *= phase;
        }
        vectors.set_column(col, &v);
    }
    let split = keep_split.then(|| order.iter().map(|&k| (base[k], shift[k])).collect());
    EigenDecomposition { values, vectors, split }
}

/// Cyclic Jacobi eigendecomposition of a Hermitian operator.
///
/// Slower than [`hermitian_eig`] but, for nearly diagonal input, small
/// eigenvector components keep their relative accuracy instead of being
/// swamped by rounding of order `ε_mach · ‖H‖`.
pub fn jacobi_eig(h: &Operator) -> Result<EigenDecomposition> {
    let n = ensure_square(h)?;
    jacobi_eig_split(&vec![0.0; n], h)
}

/// Jacobi eigendecomposition of `diag(base) + h`.
///
/// The diagonal is carried as `base + shift` throughout, so eigenvalues that
/// differ only by a tiny shift on top of an equal base give exact-to-rounding
/// gaps via [`EigenDecomposition::gap`].
pub fn jacobi_eig_split(base: &[f64], h: &Operator) -> Result<EigenDecomposition> {
    let labels: Vec<usize> = (0..base.len()).collect();
    let r = jacobi_block_reduce(base, h, &labels)?;
    Ok(canonical_eigen(base, &r.shift, &r.vectors, true))
}

/// Unitary reduction of `diag(base) + h` to block-diagonal form.
#[derive(Debug, Clone)]
pub struct BlockReduction {
    pub vectors: Operator,
    /// Reduced perturbation: only entries within one cluster survive off the diagonal.
    pub reduced: Operator,
    /// Diagonal of `reduced`, accumulated separately from `base`.
    pub shift: Vec<f64>,
}

/// Cyclic complex Jacobi that only annihilates couplings between indices with
/// different `cluster` labels. With every label distinct this is a full
/// eigensolver; gaps stay accurate because `base` is never mixed into the
/// accumulated shifts.
pub fn jacobi_block_reduce(base: &[f64], h: &Operator, cluster: &[usize]) -> Result<BlockReduction> {
    let n = ensure_square(h)?;
    if base.len() != n {
        return Err(Error::DimensionMismatch { left: base.len(), right: n });
    }
    if cluster.len() != n {
        return Err(Error::DimensionMismatch { left: cluster.len(), right: n });
    }
    let defect = hermiticity_defect(h);
    let tolerance = HERMITIAN_TOLERANCE * max_norm(h).max(f64::MIN_POSITIVE);
    if defect > tolerance {
        return Err(Error::NonHermitianInput { defect, tolerance });
    }
    let mut a = hermitian_part(h);
    let mut shift: Vec<f64> = (0..n).map(|k| a[(k, k)].re).collect();
    let mut v = identity(n);
    for _sweep in 0..64 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                if cluster[p] == cluster[q] {
                    continue;
                }
                let apq = a[(p, q)];
                let modulus = apq.norm();
                let spread = (base[q] - base[p]) + (shift[q] - shift[p]);
                if modulus < f64::MIN_POSITIVE || modulus <= f64::EPSILON * f64::EPSILON * spread.abs() {
                    continue;
                }
                rotated = true;
                let e = apq / modulus;
                let tau = spread / (2.0 * modulus);
                let t = if tau == 0.0 { 1.0 } else { tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt()) };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in (0..n).filter(|&k| k != p && k != q) {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    let new_kp = akp * c - akq * e.conj() * s;
                    let new_kq = akp * e * s + akq * c;
                    a[(k, p)] = new_kp;
                    a[(k, q)] = new_kq;
                    a[(p, k)] = new_kp.conj();
                    a[(q, k)] = new_kq.conj();
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * c - vkq * e.conj() * s;
                    v[(k, q)] = vkp * e * s + vkq * c;
                }
                shift[p] -= t * modulus;
                shift[q] += t * modulus;
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
            }
        }
        if !rotated {
            for k in 0..n {
                a[(k, k)] = C64::new(shift[k], 0.0);
            }
            return Ok(BlockReduction { vectors: v, reduced: a, shift });
        }
    }
    Err(Error::SingularSolve("Jacobi eigensolver did not converge".into()))
}

/// Trace of `a · b` without forming the product.
pub fn trace_product(a: &Operator, b: &Operator) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
