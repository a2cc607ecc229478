//! Dense Hermitian operators on a bipartite space `C^dA ⊗ C^dB`.
//!
//! Product-basis vectors `|i⟩_A |j⟩_B` sit at row-major index `i·dB + j`.
//! The partial transpose always acts on Bob's factor.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ceiling on the total dimension `dA·dB` of any constructed operator.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Relative tolerance of the Hermiticity check.
pub const HERMITIAN_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BipartiteDims {
    #[serde(rename = "dA")]
    pub da: usize,
    #[serde(rename = "dB")]
    pub db: usize,
}

impl BipartiteDims {
    pub fn new(da: usize, db: usize) -> Result<Self> {
        let dims = BipartiteDims { da, db };
        if da == 0 || db == 0 {
            return Err(Error::InvalidDims(dims));
        }
        Ok(dims)
    }

    /// Total dimension `dA·dB`.
    pub fn total(&self) -> usize {
        self.da * self.db
    }

    /// Dims of `A ⊗ B` with all Alice factors grouped before all Bob factors.
    pub fn compose(&self, other: &BipartiteDims) -> BipartiteDims {
        BipartiteDims {
            da: self.da * other.da,
            db: self.db * other.db,
        }
    }
}

impl fmt::Display for BipartiteDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}⊗{}", self.da, self.db)
    }
}

/// Eigendecomposition with eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, one per column, aligned with `eigenvalues`.
    pub eigenvectors: DMatrix<Complex64>,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        *self.eigenvalues.last().expect("empty spectrum")
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `Σ f(λ_k) v_k v_k†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
        let mut scaled = self.eigenvectors.clone();
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(f(lambda));
        }
        scaled * self.eigenvectors.adjoint()
    }
}

/// Result of a positive-semidefiniteness test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdCheck {
    pub psd: bool,
    pub min_eigenvalue: f64,
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorJson", into = "OperatorJson")]
pub struct HermitianOperator {
    dims: BipartiteDims,
    mat: DMatrix<Complex64>,
}

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HermitianOperator[{}]{}", self.dims, self.mat)
    }
}

impl HermitianOperator {
    /// Validates shape and Hermiticity, then stores the exactly Hermitian
    /// part `(A + A†)/2`.
    pub fn new(dims: BipartiteDims, mat: DMatrix<Complex64>) -> Result<Self> {
        let dims = BipartiteDims::new(dims.da, dims.db)?;
        let d = dims.total();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::ShapeMismatch {
                dims,
                rows: mat.nrows(),
                cols: mat.ncols(),
                expected: d,
            });
        }
        let scale = mat.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let tolerance = HERMITIAN_TOL * (1.0 + scale);
        let mut deviation = 0.0f64;
        for i in 0..d {
            for j in i..d {
                deviation = deviation.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
            }
        }
        if !deviation.is_finite() || deviation > tolerance {
            return Err(Error::NotHermitian { deviation, tolerance });
        }
        Ok(Self::hermitized(dims, mat))
    }

    /// Hermitian part of `mat`, with no tolerance check. Callers guarantee
    /// the shape.
    pub(crate) fn hermitized(dims: BipartiteDims, mut mat: DMatrix<Complex64>) -> Self {
        let d = dims.total();
        debug_assert_eq!(mat.nrows(), d);
        for i in 0..d {
            mat[(i, i)].im = 0.0;
            for j in (i + 1)..d {
                let avg = (mat[(i, j)] + mat[(j, i)].conj()) * 0.5;
                mat[(i, j)] = avg;
                mat[(j, i)] = avg.conj();
            }
        }
        HermitianOperator { dims, mat }
    }

    pub fn zeros(dims: BipartiteDims) -> Self {
        let d = dims.total();
        HermitianOperator {
            dims,
            mat: DMatrix::from_element(d, d, ZERO),
        }
    }

    pub fn identity(dims: BipartiteDims) -> Self {
        let d = dims.total();
        HermitianOperator {
            dims,
            mat: DMatrix::identity(d, d),
        }
    }

    pub fn from_real_diagonal(dims: BipartiteDims, diag: &[f64]) -> Result<Self> {
        if diag.len() != dims.total() {
            return Err(Error::WrongSize {
                what: "diagonal",
                expected: dims.total(),
                got: diag.len(),
            });
        }
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        Ok(HermitianOperator {
            dims,
            mat: DMatrix::from_diagonal(&v),
        })
    }

    /// Rank-one projector `|ψ⟩⟨ψ|` onto the normalized `psi`.
    pub fn pure_state(dims: BipartiteDims, psi: &[Complex64]) -> Result<Self> {
        if psi.len() != dims.total() {
            return Err(Error::WrongSize {
                what: "state vector",
                expected: dims.total(),
                got: psi.len(),
            });
        }
        let v = DVector::from_column_slice(psi);
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidParameter("state vector has zero norm".into()));
        }
        let v = v.unscale(norm);
        Ok(Self::hermitized(dims, &v * v.adjoint()))
    }

    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    /// Side length of the matrix.
    pub fn dim(&self) -> usize {
        self.dims.total()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    /// `Tr(A·B)`, real for Hermitian operands.
    pub fn inner(&self, other: &HermitianOperator) -> f64 {
        self.assert_same_dims(other);
        self.mat.iter().zip(other.mat.iter()).map(|(a, b)| (a * b.conj()).re).sum()
    }

    pub fn scaled(&self, factor: f64) -> HermitianOperator {
        HermitianOperator {
            dims: self.dims,
            mat: &self.mat * Complex64::new(factor, 0.0),
        }
    }

    pub fn spectrum(&self) -> Spectrum {
        let eig = self.mat.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = DMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        Spectrum { eigenvalues, eigenvectors }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.mat.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.mat
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.mat
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Applies `f` to the eigenvalues.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        Self::hermitized(self.dims, self.spectrum().map(f))
    }

    /// Transpose on Bob's factor: `⟨a b|A^PT|a' b'⟩ = ⟨a b'|A|a' b⟩`.
    pub fn partial_transpose(&self) -> HermitianOperator {
        let BipartiteDims { da, db } = self.dims;
        let d = self.dim();
        let mut out = DMatrix::from_element(d, d, ZERO);
        for a in 0..da {
            for b in 0..db {
                let row = a * db + b;
                for ap in 0..da {
                    for bp in 0..db {
                        out[(row, ap * db + bp)] = self.mat[(a * db + bp, ap * db + b)];
                    }
                }
            }
        }
        HermitianOperator { dims: self.dims, mat: out }
    }

    /// `|E| = Σ |λ_k| v_k v_k†`.
    pub fn abs(&self) -> HermitianOperator {
        self.spectral_map(f64::abs)
    }

    /// `Tr|E|`, the sum of absolute eigenvalues.
    pub fn trace_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|x| x.abs()).sum()
    }

    /// `E^(+) = (|E| + E)/2`.
    pub fn positive_part(&self) -> HermitianOperator {
        self.spectral_map(|x| x.max(0.0))
    }

    /// `E^(-) = (|E| - E)/2`.
    pub fn negative_part(&self) -> HermitianOperator {
        self.spectral_map(|x| (-x).max(0.0))
    }

    /// Default PSD tolerance `1e-9·(1 + ‖E‖_F)`.
    pub fn default_psd_tol(&self) -> f64 {
        1e-9 * (1.0 + self.frobenius_norm())
    }

    /// PSD iff `λ_min ≥ -tol`; `λ_min` is always reported.
    pub fn psd_check(&self, tol: f64) -> PsdCheck {
        let min_eigenvalue = self.min_eigenvalue();
        PsdCheck {
            psd: min_eigenvalue >= -tol,
            min_eigenvalue,
        }
    }

    pub fn is_psd(&self) -> bool {
        self.psd_check(self.default_psd_tol()).psd
    }

    /// `A ⊗ B` regrouped as (Alice factors | Bob factors), refusing results
    /// larger than `cap`.
    pub fn tensor(&self, other: &HermitianOperator, cap: usize) -> Result<HermitianOperator> {
        let dims = self.dims.compose(&other.dims);
        let d = dims.total();
        if d > cap {
            return Err(Error::DimensionCap { requested: d, cap });
        }
        let (da1, db1) = (self.dims.da, self.dims.db);
        let (da2, db2) = (other.dims.da, other.dims.db);
        // Output index (x1 x2 | y1 y2) -> (x1 y1) in A, (x2 y2) in B.
        let mut left = Vec::with_capacity(d);
        let mut right = Vec::with_capacity(d);
        for x1 in 0..da1 {
            for x2 in 0..da2 {
                for y1 in 0..db1 {
                    for y2 in 0..db2 {
                        left.push(x1 * db1 + y1);
                        right.push(x2 * db2 + y2);
                    }
                }
            }
        }
        let mat = DMatrix::from_fn(d, d, |r, c| self.mat[(left[r], left[c])] * other.mat[(right[r], right[c])]);
        Ok(HermitianOperator { dims, mat })
    }

    /// `A^{⊗L}` for `L ≥ 1`.
    pub fn tensor_power(&self, l: usize, cap: usize) -> Result<HermitianOperator> {
        if l == 0 {
            return Err(Error::InvalidParameter("tensor power needs L >= 1".into()));
        }
        let requested = (self.dim() as u128).checked_pow(l as u32).unwrap_or(u128::MAX);
        if requested > cap as u128 {
            return Err(Error::DimensionCap {
                requested: requested.min(usize::MAX as u128) as usize,
                cap,
            });
        }
        let mut out = self.clone();
        for _ in 1..l {
            out = out.tensor(self, cap)?;
        }
        Ok(out)
    }

    /// Hermitian part of a general matrix on these dims.
    pub fn hermitian_part_of(dims: BipartiteDims, mat: &DMatrix<Complex64>) -> HermitianOperator {
        Self::hermitized(dims, mat.clone())
    }

    pub fn checked_add(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        self.check_same_dims(other)?;
        Ok(HermitianOperator {
            dims: self.dims,
            mat: &self.mat + &other.mat,
        })
    }

    pub(crate) fn check_same_dims(&self, other: &HermitianOperator) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimsMismatch {
                left: self.dims,
                right: other.dims,
            });
        }
        Ok(())
    }

    fn assert_same_dims(&self, other: &HermitianOperator) {
        assert_eq!(self.dims, other.dims, "operator dims differ");
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;

    /// Panics when the operands have different dims.
    fn add(self, rhs: &HermitianOperator) -> HermitianOperator {
        self.assert_same_dims(rhs);
        HermitianOperator {
            dims: self.dims,
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;

    fn sub(self, rhs: &HermitianOperator) -> HermitianOperator {
        self.assert_same_dims(rhs);
        HermitianOperator {
            dims: self.dims,
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl Neg for &HermitianOperator {
    type Output = HermitianOperator;

    fn neg(self) -> HermitianOperator {
        self.scaled(-1.0)
    }
}

/// Identity matrix as complex entries.
pub(crate) fn complex_identity(d: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { ONE } else { ZERO })
}

/// Wire format `{dims:{dA,dB}, re:[[..]], im:[[..]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorJson {
    pub dims: BipartiteDims,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<HermitianOperator> for OperatorJson {
    fn from(op: HermitianOperator) -> Self {
        let d = op.dim();
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> { (0..d).map(|i| (0..d).map(|j| f(&op.mat[(i, j)])).collect()).collect() };
        OperatorJson {
            dims: op.dims,
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}

impl TryFrom<OperatorJson> for HermitianOperator {
    type Error = Error;

    fn try_from(json: OperatorJson) -> Result<Self> {
        let dims = BipartiteDims::new(json.dims.da, json.dims.db)?;
        let d = dims.total();
        let ragged = |m: &Vec<Vec<f64>>| m.len() != d || m.iter().any(|row| row.len() != d);
        if ragged(&json.re) || ragged(&json.im) {
            return Err(Error::ShapeMismatch {
                dims,
                rows: json.re.len(),
                cols: json.re.first().map_or(0, Vec::len),
                expected: d,
            });
        }
        let mat = DMatrix::from_fn(d, d, |i, j| Complex64::new(json.re[i][j], json.im[i][j]));
        HermitianOperator::new(dims, mat)
    }
}
