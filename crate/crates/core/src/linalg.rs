//! Dense complex Hermitian linear algebra.
//!
//! Everything in this crate is small (the largest operator is 16×16, or 32×32
//! after real embedding), so all matrices are dense `nalgebra` matrices over
//! `Complex<f64>`. Bipartite indices follow the row-major convention
//! `|i_A j_B⟩ ↔ i·d_B + j`, and partial transposes always act on the `B`
//! factor.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use thiserror::Error;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default tolerance on `max |M − M†|` when constructing a [`HermitianOperator`].
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Below this relative gap the logarithmic divided difference switches to its series form.
pub const DD_SWITCH: f64 = 1e-8;
/// Default relative eigenvalue cutoff for [`support_projector`].
pub const SUPPORT_REL_TOL: f64 = 1e-10;
/// Default eigenvalue floor for [`matrix_log`].
pub const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix must have dimension at least 1")]
    Empty,
    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("not Hermitian: max |M - M^dagger| = {residual:e} exceeds {tol:e}")]
    NotHermitian { residual: f64, tol: f64 },
    #[error("shape {da}x{db} does not match operator dimension {dim}")]
    ShapeMismatch { da: usize, db: usize, dim: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("eigenvalue {value:e} is at or below the floor {floor:e}")]
    Support { value: f64, floor: f64 },
    #[error("expected a one-dimensional kernel, found dimension {0}")]
    KernelDimension(usize),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("operator is zero")]
    Degenerate,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Subsystem dimensions of a bipartite Hilbert space `A ⊗ B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BipartiteShape {
    pub da: usize,
    pub db: usize,
}

impl BipartiteShape {
    pub fn new(da: usize, db: usize) -> Result<Self> {
        if da == 0 || db == 0 {
            return Err(LinalgError::Domain(format!(
                "subsystem dimensions must be positive, got {da}x{db}"
            )));
        }
        Ok(Self { da, db })
    }

    pub fn dim(&self) -> usize {
        self.da * self.db
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        if self.dim() == dim {
            Ok(())
        } else {
            Err(LinalgError::ShapeMismatch {
                da: self.da,
                db: self.db,
                dim,
            })
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.db + j
    }
}

impl fmt::Display for BipartiteShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.da, self.db)
    }
}

/// A validated square complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix(CMatrix);

impl SquareMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(LinalgError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(LinalgError::Empty);
        }
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(LinalgError::NonFinite(i, j));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// A dense Hermitian operator.
///
/// Construction symmetrizes the input as `(M + M†)/2` and keeps the
/// pre-symmetrization residual, so solver output with round-off asymmetry can
/// be carried without loss of the information that it was there.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
    asymmetry: f64,
}

impl HermitianOperator {
    /// Checked constructor using [`HERMITICITY_TOL`] (scaled by `max(1, max|M|)`).
    pub fn new(m: SquareMatrix) -> Result<Self> {
        Self::with_tolerance(m, HERMITICITY_TOL)
    }

    pub fn with_tolerance(m: SquareMatrix, tol: f64) -> Result<Self> {
        let scale = max_abs(&m.0).max(1.0);
        let h = Self::symmetrize(m.0);
        if h.asymmetry > tol * scale {
            return Err(LinalgError::NotHermitian {
                residual: h.asymmetry,
                tol: tol * scale,
            });
        }
        Ok(h)
    }

    /// Unconditionally symmetrizes `m`, recording `max |M − M†|`.
    pub fn symmetrize(m: CMatrix) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "symmetrize needs a square matrix");
        let adj = m.adjoint();
        let asymmetry = max_abs(&(&m - &adj));
        let m = (&m + &adj).map(|z| z * 0.5);
        Self { m, asymmetry }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: CMatrix::zeros(n, n),
            asymmetry: 0.0,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: CMatrix::identity(n, n),
            asymmetry: 0.0,
        }
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let v = DVector::from_iterator(d.len(), d.iter().map(|&x| C64::new(x, 0.0)));
        Self {
            m: CMatrix::from_diagonal(&v),
            asymmetry: 0.0,
        }
    }

    /// Builds a Hermitian matrix from a real symmetric row-major table.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0));
        Self::new(SquareMatrix::new(m)?)
    }

    /// The rank-one operator `|v⟩⟨v|`.
    pub fn outer(v: &CVector) -> Self {
        Self::symmetrize(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    /// Real inner product `tr(A B)`.
    pub fn inner(&self, other: &Self) -> f64 {
        self.m
            .iter()
            .zip(other.m.transpose().iter())
            .map(|(a, b)| (a * b).re)
            .sum()
    }

    pub fn eig(&self) -> EigenDecomposition {
        eig_hermitian(self)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig().values[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let e = self.eig();
        e.values[e.values.len() - 1]
    }

    pub fn partial_transpose(&self, shape: BipartiteShape) -> Result<Self> {
        shape.check(self.dim())?;
        Ok(Self {
            m: partial_transpose_raw(&self.m, shape),
            asymmetry: 0.0,
        })
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self::symmetrize(self.m.kronecker(&other.m))
    }

    pub fn trace_norm(&self) -> f64 {
        trace_norm(self)
    }

    pub fn op_norm(&self) -> f64 {
        op_norm(self)
    }

    /// Applies `f` to the spectrum.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Self {
        let e = self.eig();
        e.reconstruct_with(f)
    }

    /// `K H K†` for a (possibly rectangular) `K`.
    pub fn congruence(&self, k: &CMatrix) -> Self {
        Self::symmetrize(k * &self.m * k.adjoint())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            m: self.m.map(|z| z * s),
            asymmetry: self.asymmetry * s.abs(),
        }
    }

    /// `max |A − B|` over entries.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs(&(&self.m - &other.m))
    }
}

impl fmt::Display for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let z = self.m[(i, j)];
                write!(f, "{:>10.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        HermitianOperator {
            m: &self.m + &rhs.m,
            asymmetry: 0.0,
        }
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        HermitianOperator {
            m: &self.m - &rhs.m,
            asymmetry: 0.0,
        }
    }
}

impl Neg for &HermitianOperator {
    type Output = HermitianOperator;
    fn neg(self) -> HermitianOperator {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scale(rhs)
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors (columns).
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl EigenDecomposition {
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            scaled.column_mut(j).scale_mut(fj);
        }
        HermitianOperator::symmetrize(&scaled * self.vectors.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.reconstruct_with(|x| x)
    }

    pub fn column(&self, j: usize) -> CVector {
        self.vectors.column(j).into_owned()
    }
}

pub fn eig_hermitian(h: &HermitianOperator) -> EigenDecomposition {
    let n = h.dim();
    let eig = SymmetricEigen::new(h.m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    EigenDecomposition { values, vectors }
}

/// Checked variant of [`eig_hermitian`] for raw input.
pub fn eig_checked(m: CMatrix) -> Result<EigenDecomposition> {
    let h = HermitianOperator::new(SquareMatrix::new(m)?)?;
    Ok(eig_hermitian(&h))
}

fn partial_transpose_raw(m: &CMatrix, shape: BipartiteShape) -> CMatrix {
    let (da, db) = (shape.da, shape.db);
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for i in 0..da {
        for j in 0..db {
            for k in 0..da {
                for l in 0..db {
                    out[(i * db + l, k * db + j)] = m[(i * db + j, k * db + l)];
                }
            }
        }
    }
    out
}

/// `(|i_A j_B⟩⟨k_A l_B|)^{T_B} = |i_A l_B⟩⟨k_A j_B|`, extended linearly.
pub fn partial_transpose(m: &SquareMatrix, shape: BipartiteShape) -> Result<SquareMatrix> {
    shape.check(m.dim())?;
    Ok(SquareMatrix(partial_transpose_raw(&m.0, shape)))
}

pub fn kron(a: &SquareMatrix, b: &SquareMatrix) -> SquareMatrix {
    SquareMatrix(a.0.kronecker(&b.0))
}

pub fn trace_norm(h: &HermitianOperator) -> f64 {
    h.eig().values.iter().map(|v| v.abs()).sum()
}

pub fn op_norm(h: &HermitianOperator) -> f64 {
    h.eig().values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// Spectral natural logarithm; fails if any eigenvalue is `<= floor`.
pub fn matrix_log(h: &HermitianOperator, floor: f64) -> Result<HermitianOperator> {
    let e = h.eig();
    if e.values[0] <= floor {
        return Err(LinalgError::Support {
            value: e.values[0],
            floor,
        });
    }
    Ok(e.reconstruct_with(f64::ln))
}

pub fn matrix_exp(h: &HermitianOperator) -> HermitianOperator {
    h.spectral_map(f64::exp)
}

/// Logarithmic mean `(a − b)/(ln a − ln b)`, equal to `a` when `a = b`.
///
/// Close arguments use `√(ab)·sinh(h/2)/(h/2)` with `h = ln(b/a)`, expanded to
/// fourth order, which avoids the cancellation in the quotient.
pub fn divided_difference_log(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(LinalgError::Domain(format!(
            "logarithmic mean needs positive finite arguments, got ({a}, {b})"
        )));
    }
    if a == b {
        return Ok(a);
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    // ln(hi/lo) through ln_1p stays accurate when the arguments are close
    let h = ((hi - lo) / lo).ln_1p();
    if hi - lo > DD_SWITCH * hi {
        return Ok((hi - lo) / h);
    }
    let h2 = h * h;
    Ok((a * b).sqrt() * (1.0 + h2 / 24.0 + h2 * h2 / 1920.0))
}

/// Projector onto an eigenspace, along with an orthonormal basis for it and
/// for its orthogonal complement.
#[derive(Clone, Debug)]
pub struct SupportProjection {
    pub projector: HermitianOperator,
    pub basis: CMatrix,
    pub complement: CMatrix,
}

impl SupportProjection {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

/// Projector onto the eigenvectors with `λ > rel_tol·λ_max`.
pub fn support_projector(rho: &HermitianOperator, rel_tol: f64) -> Result<SupportProjection> {
    let e = rho.eig();
    let n = rho.dim();
    let lmax = e.values[n - 1];
    if lmax <= 0.0 {
        return Err(LinalgError::Degenerate);
    }
    let cut = rel_tol * lmax;
    let split = e.values.iter().position(|&v| v > cut).unwrap_or(n);
    let complement = e.vectors.columns(0, split).into_owned();
    let basis = e.vectors.columns(split, n - split).into_owned();
    let projector = HermitianOperator::symmetrize(&basis * basis.adjoint());
    Ok(SupportProjection {
        projector,
        basis,
        complement,
    })
}

/// The unique (up to phase) unit vector with `|λ| <= abs_tol`.
///
/// `abs_tol` defaults to `1e-9·‖H‖_∞`.
pub fn kernel_vector(h: &HermitianOperator, abs_tol: Option<f64>) -> Result<CVector> {
    let e = h.eig();
    let norm = e.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let tol = abs_tol.unwrap_or(1e-9 * norm);
    let hits: Vec<usize> = (0..e.values.len())
        .filter(|&k| e.values[k].abs() <= tol)
        .collect();
    if hits.len() != 1 {
        return Err(LinalgError::KernelDimension(hits.len()));
    }
    Ok(e.column(hits[0]))
}

/// Singular values of `v` reshaped to a `d_A × d_B` coefficient matrix, descending.
pub fn schmidt_coefficients(v: &CVector, shape: BipartiteShape) -> Result<Vec<f64>> {
    shape.check(v.len())?;
    let m = CMatrix::from_fn(shape.da, shape.db, |i, j| v[shape.index(i, j)]);
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Searches the span of the orthonormal columns of `basis` for a product vector
/// `a ⊗ b` by alternating maximization of `‖Π(a⊗b)‖²`.
///
/// Returns the best product vector found and its squared overlap with the
/// span (1 means the span contains it exactly). Starts are deterministic: each
/// computational basis vector of `B`, and the dominant Schmidt factor of each
/// basis column.
pub fn product_vector_in_span(basis: &CMatrix, shape: BipartiteShape) -> Result<(CVector, f64)> {
    shape.check(basis.nrows())?;
    let proj = basis * basis.adjoint();
    let (da, db) = (shape.da, shape.db);

    let mut starts: Vec<CVector> = (0..db)
        .map(|j| {
            let mut b = CVector::zeros(db);
            b[j] = C64::new(1.0, 0.0);
            b
        })
        .collect();
    for c in 0..basis.ncols() {
        let m = CMatrix::from_fn(da, db, |i, j| basis[(shape.index(i, j), c)]);
        let svd = m.svd(false, true);
        if let Some(vt) = svd.v_t {
            let k = (0..svd.singular_values.len())
                .max_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]))
                .unwrap_or(0);
            starts.push(vt.row(k).adjoint());
        }
    }

    let mut best: Option<(CVector, f64)> = None;
    for b0 in starts {
        let mut b = b0;
        let mut a = CVector::zeros(da);
        let mut value = -1.0;
        for _ in 0..500 {
            // maximize over a with b fixed
            let ma = CMatrix::from_fn(da, da, |i, k| {
                let mut s = C64::new(0.0, 0.0);
                for j in 0..db {
                    for l in 0..db {
                        s += b[j].conj() * proj[(shape.index(i, j), shape.index(k, l))] * b[l];
                    }
                }
                s
            });
            let ea = eig_hermitian(&HermitianOperator::symmetrize(ma));
            a = ea.column(da - 1);
            let mb = CMatrix::from_fn(db, db, |j, l| {
                let mut s = C64::new(0.0, 0.0);
                for i in 0..da {
                    for k in 0..da {
                        s += a[i].conj() * proj[(shape.index(i, j), shape.index(k, l))] * a[k];
                    }
                }
                s
            });
            let eb = eig_hermitian(&HermitianOperator::symmetrize(mb));
            b = eb.column(db - 1);
            let next = eb.values[db - 1];
            if (next - value).abs() <= 1e-15 {
                value = next;
                break;
            }
            value = next;
        }
        if best.as_ref().is_none_or(|(_, v)| value > *v) {
            best = Some((a.kronecker(&b), value));
        }
    }
    Ok(best.expect("at least one start"))
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn phi(d: usize) -> HermitianOperator {
        let mut v = CVector::zeros(d * d);
        for i in 0..d {
            v[i * d + i] = c(1.0 / (d as f64).sqrt());
        }
        HermitianOperator::outer(&v)
    }

    fn basis_op(n: usize, r: usize, s: usize) -> SquareMatrix {
        let mut m = CMatrix::zeros(n, n);
        m[(r, s)] = c(1.0);
        SquareMatrix::new(m).unwrap()
    }

    #[test]
    fn eig_diagonal() {
        let h = HermitianOperator::from_real_diagonal(&[3.0, 1.0, 2.0]);
        let e = h.eig();
        assert_eq!(e.values.as_slice(), &[1.0, 2.0, 3.0]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((e.vectors[(2, 1)].norm() - 1.0).abs() < 1e-14);
        assert!((e.vectors[(0, 2)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_pauli_x() {
        let h = HermitianOperator::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let e = h.eig();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_non_finite() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = C64::new(f64::NAN, 0.0);
        assert_eq!(eig_checked(m).unwrap_err(), LinalgError::NonFinite(0, 1));
    }

    #[test]
    fn hermitian_constructor_rejects_asymmetry() {
        let m = CMatrix::from_fn(2, 2, |i, j| if i < j { c(1.0) } else { c(0.0) });
        let err = HermitianOperator::new(SquareMatrix::new(m).unwrap()).unwrap_err();
        assert!(matches!(err, LinalgError::NotHermitian { .. }));
    }

    #[test]
    fn partial_transpose_basis_element() {
        let shape = BipartiteShape::new(2, 2).unwrap();
        // |0_A 1_B⟩⟨1_A 0_B| -> |0_A 0_B⟩⟨1_A 1_B|
        let m = basis_op(4, shape.index(0, 1), shape.index(1, 0));
        let t = partial_transpose(&m, shape).unwrap();
        assert_eq!(t, basis_op(4, shape.index(0, 0), shape.index(1, 1)));
    }

    #[test]
    fn partial_transpose_identity_and_shape_error() {
        let shape = BipartiteShape::new(2, 3).unwrap();
        let id = SquareMatrix::identity(6);
        assert_eq!(partial_transpose(&id, shape).unwrap(), id);
        let bad = SquareMatrix::identity(5);
        assert!(matches!(
            partial_transpose(&bad, shape),
            Err(LinalgError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn partial_transpose_of_phi2_spectrum() {
        let shape = BipartiteShape::new(2, 2).unwrap();
        let t = phi(2).partial_transpose(shape).unwrap();
        let v = t.eig().values;
        let expect = [-0.5, 0.5, 0.5, 0.5];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn kron_examples() {
        let i2 = SquareMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), SquareMatrix::identity(4));
        let a = HermitianOperator::from_real_diagonal(&[1.0, 2.0]);
        let b = HermitianOperator::from_real_diagonal(&[3.0, 4.0]);
        assert_eq!(
            a.kron(&b),
            HermitianOperator::from_real_diagonal(&[3.0, 4.0, 6.0, 8.0])
        );
    }

    #[test]
    fn norms() {
        let h = HermitianOperator::from_real_diagonal(&[1.0, -2.0, 0.0]);
        assert_eq!(trace_norm(&h), 3.0);
        let h = HermitianOperator::from_real_diagonal(&[1.0, -2.0]);
        assert_eq!(op_norm(&h), 2.0);
        let s2 = BipartiteShape::new(2, 2).unwrap();
        let t2 = phi(2).partial_transpose(s2).unwrap();
        assert!((trace_norm(&t2) - 2.0).abs() < 1e-13);
        assert!((op_norm(&t2) - 0.5).abs() < 1e-14);
        let s3 = BipartiteShape::new(3, 3).unwrap();
        let t3 = phi(3).partial_transpose(s3).unwrap();
        assert!((trace_norm(&t3) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn log_examples() {
        let z = matrix_log(&HermitianOperator::identity(3), LOG_FLOOR).unwrap();
        assert!(max_abs(z.matrix()) < 1e-15);
        let e = std::f64::consts::E;
        let l = matrix_log(&HermitianOperator::from_real_diagonal(&[e, e * e]), LOG_FLOOR).unwrap();
        assert!((l.matrix()[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!((l.matrix()[(1, 1)].re - 2.0).abs() < 1e-14);
        let singular = HermitianOperator::from_real_diagonal(&[1.0, 0.0]);
        assert!(matches!(
            matrix_log(&singular, LOG_FLOOR),
            Err(LinalgError::Support { .. })
        ));
    }

    #[test]
    fn divided_difference_examples() {
        assert_eq!(divided_difference_log(0.37, 0.37).unwrap(), 0.37);
        let e = std::f64::consts::E;
        assert!((divided_difference_log(1.0, e).unwrap() - (e - 1.0)).abs() < 1e-15);
        // 200-bit reference (mpmath, prec=200) for L(0.5, 0.5 + 1e-12), rounded to f64
        #[allow(clippy::excessive_precision)]
        let reference = 0.500_000_000_000_499_988_939_139_772_6_f64;
        let got = divided_difference_log(0.5, 0.5 + 1e-12).unwrap();
        assert!(((got - reference) / reference).abs() < 1e-9);
        assert!(divided_difference_log(0.0, 1.0).is_err());
        assert!(divided_difference_log(-1.0, 1.0).is_err());
    }

    #[test]
    fn divided_difference_is_continuous_across_switch() {
        let a: f64 = 0.3;
        for k in [0.9e-8, 1.1e-8] {
            let b = a * (1.0 + k);
            let exact = (b - a) / (b.ln() - a.ln());
            let got = divided_difference_log(a, b).unwrap();
            assert!(((got - exact) / exact).abs() < 1e-7, "k={k}");
        }
    }

    #[test]
    fn support_projector_examples() {
        let mut v = CVector::zeros(4);
        v[0] = c(1.0);
        let pure = HermitianOperator::outer(&v);
        let s = support_projector(&pure, SUPPORT_REL_TOL).unwrap();
        assert_eq!(s.rank(), 1);
        assert!(s.projector.max_abs_diff(&pure) < 1e-14);
        let mixed = HermitianOperator::identity(9).scale(1.0 / 9.0);
        let s = support_projector(&mixed, SUPPORT_REL_TOL).unwrap();
        assert_eq!(s.rank(), 9);
        assert!(s.projector.max_abs_diff(&HermitianOperator::identity(9)) < 1e-14);
        assert_eq!(
            support_projector(&HermitianOperator::zeros(2), SUPPORT_REL_TOL).unwrap_err(),
            LinalgError::Degenerate
        );
    }

    #[test]
    fn kernel_vector_errors() {
        assert_eq!(
            kernel_vector(&HermitianOperator::identity(3), None).unwrap_err(),
            LinalgError::KernelDimension(0)
        );
        let t = phi(2)
            .partial_transpose(BipartiteShape::new(2, 2).unwrap())
            .unwrap();
        assert_eq!(
            kernel_vector(&t, None).unwrap_err(),
            LinalgError::KernelDimension(0)
        );
        let h = HermitianOperator::from_real_diagonal(&[0.0, 0.0, 1.0]);
        assert_eq!(
            kernel_vector(&h, None).unwrap_err(),
            LinalgError::KernelDimension(2)
        );
    }

    #[test]
    fn product_vector_search() {
        let shape = BipartiteShape::new(2, 2).unwrap();
        // span{|00⟩+|11⟩, |01⟩} contains |01⟩
        let mut basis = CMatrix::zeros(4, 2);
        basis[(0, 0)] = c(0.5_f64.sqrt());
        basis[(3, 0)] = c(0.5_f64.sqrt());
        basis[(1, 1)] = c(1.0);
        let (_, overlap) = product_vector_in_span(&basis, shape).unwrap();
        assert!((overlap - 1.0).abs() < 1e-12);
        // span{Φ} alone: best overlap is 1/2
        let (_, overlap) = product_vector_in_span(&basis.columns(0, 1).into_owned(), shape).unwrap();
        assert!((overlap - 0.5).abs() < 1e-12);
    }
}
