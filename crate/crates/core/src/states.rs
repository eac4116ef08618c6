//! Bipartite states: validation, named families, tensor products and the
//! JSON state-file format.
//!
//! The two families that drive the experiments are
//!
//! * the two-qubit pair `σ_r`, `ρ_r` for which `σ_r` is the closest PPT state
//!   of `ρ_r` (so the Rains bound of `ρ_r` has a closed form), and
//! * the 3⊗3 orbit states `ρ^(α)`, generated from `√α|00⟩ + √(1−α)|11⟩` by the
//!   cyclic unitary `U = X†⊗X`.

use std::fmt::{self, Write as _};

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;
use thiserror::Error;

use crate::linalg::{
    BipartiteShape, CMatrix, CVector, HermitianOperator, LinalgError, SquareMatrix, C64,
};

pub const PSD_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;

/// Closed interval of `r` for which `σ_r ⪰ 0`: `[(5−√17)/16, (5+√17)/16]`.
pub fn sigma_window() -> (f64, f64) {
    let s = 17f64.sqrt();
    ((5.0 - s) / 16.0, (5.0 + s) / 16.0)
}

/// Closed interval of `r` used for `ρ_r`.
pub const RHO_WINDOW: (f64, f64) = (0.3125, 0.5480);

/// Which state invariant a validation failure refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Invariant {
    Shape,
    Hermitian,
    UnitTrace,
    PositiveSemidefinite,
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Invariant::Shape => "shape",
            Invariant::Hermitian => "hermiticity",
            Invariant::UnitTrace => "unit trace",
            Invariant::PositiveSemidefinite => "positive semidefiniteness",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("malformed state document: {0}")]
    Parse(String),
    #[error("invalid state: {invariant} violated ({detail})")]
    Invalid { invariant: Invariant, detail: String },
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl StateError {
    pub fn invariant(&self) -> Option<Invariant> {
        match self {
            StateError::Invalid { invariant, .. } => Some(*invariant),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, StateError>;

/// A density operator on `A ⊗ B`: Hermitian, unit trace, PSD.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteState {
    op: HermitianOperator,
    shape: BipartiteShape,
}

impl BipartiteState {
    pub fn new(op: HermitianOperator, shape: BipartiteShape) -> Result<Self> {
        if shape.dim() != op.dim() {
            return Err(StateError::Invalid {
                invariant: Invariant::Shape,
                detail: format!("shape {shape} needs dimension {}, got {}", shape.dim(), op.dim()),
            });
        }
        let tr = op.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(StateError::Invalid {
                invariant: Invariant::UnitTrace,
                detail: format!("trace is {tr}"),
            });
        }
        let min = op.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(StateError::Invalid {
                invariant: Invariant::PositiveSemidefinite,
                detail: format!("minimum eigenvalue is {min:e}"),
            });
        }
        Ok(Self { op, shape })
    }

    pub fn maximally_mixed(shape: BipartiteShape) -> Self {
        let n = shape.dim();
        Self {
            op: HermitianOperator::identity(n).scale(1.0 / n as f64),
            shape,
        }
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn shape(&self) -> BipartiteShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// `ρ^{T_B}`.
    pub fn partial_transpose(&self) -> HermitianOperator {
        self.op
            .partial_transpose(self.shape)
            .expect("shape checked at construction")
    }

    pub fn is_ppt(&self, tol: f64) -> bool {
        self.partial_transpose().min_eigenvalue() >= -tol
    }

    pub fn purity(&self) -> f64 {
        self.op.inner(&self.op)
    }

    pub fn to_json(&self) -> String {
        serialize_state(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        parse_state(text)
    }
}

/// `Φ(d) = (1/d) Σ_{i,j} |ii⟩⟨jj|`.
pub fn max_entangled(d: usize) -> Result<BipartiteState> {
    if d == 0 {
        return Err(StateError::Domain("dimension must be at least 1".into()));
    }
    let shape = BipartiteShape::new(d, d)?;
    let mut v = CVector::zeros(d * d);
    let amp = 1.0 / (d as f64).sqrt();
    for i in 0..d {
        v[shape.index(i, i)] = C64::new(amp, 0.0);
    }
    Ok(BipartiteState {
        op: HermitianOperator::outer(&v),
        shape,
    })
}

/// Schmidt coefficients `λ_1 ≥ λ_2 ≥ … > 0` with `Σ λ_i² = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtVector(Vec<f64>);

impl SchmidtVector {
    /// Sorts the coefficients into descending order and validates them.
    pub fn new(mut coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(StateError::Domain("empty Schmidt vector".into()));
        }
        if coefficients.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(StateError::Domain(
                "Schmidt coefficients must be positive".into(),
            ));
        }
        let norm: f64 = coefficients.iter().map(|c| c * c).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(StateError::Domain(format!(
                "squared Schmidt coefficients sum to {norm}, not 1"
            )));
        }
        coefficients.sort_by(|a, b| b.total_cmp(a));
        Ok(Self(coefficients))
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Random Schmidt vector with `m` terms.
    pub fn random<R: Rng>(m: usize, rng: &mut R) -> Result<Self> {
        let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 1e-3).collect();
        let norm = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
        Self::new(raw.into_iter().map(|c| c / norm).collect())
    }
}

/// The pure state `Σ λ_i |ii⟩`.
pub fn pure_from_schmidt(s: &SchmidtVector, shape: BipartiteShape) -> Result<BipartiteState> {
    if s.len() > shape.da.min(shape.db) {
        return Err(StateError::Invalid {
            invariant: Invariant::Shape,
            detail: format!("{} Schmidt coefficients do not fit shape {shape}", s.len()),
        });
    }
    let mut v = CVector::zeros(shape.dim());
    for (i, &l) in s.coefficients().iter().enumerate() {
        v[shape.index(i, i)] = C64::new(l, 0.0);
    }
    Ok(BipartiteState {
        op: HermitianOperator::outer(&v),
        shape,
    })
}

/// Parameter of the `σ_r` / `ρ_r` two-qubit pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RainsPairParams {
    pub r: f64,
}

impl RainsPairParams {
    pub fn new(r: f64) -> Result<Self> {
        if !r.is_finite() {
            return Err(StateError::Domain(format!("r must be finite, got {r}")));
        }
        Ok(Self { r })
    }

    /// `y(r) = (4r² − 5r/2 + 33/64)^{1/2}`.
    pub fn y(&self) -> f64 {
        let r = self.r;
        (4.0 * r * r - 2.5 * r + 33.0 / 64.0).sqrt()
    }

    /// The `|01⟩` population of `ρ_r`.
    ///
    /// The last term groups as `((16r−5)/y) / (32 ln(5/8−y) − 32 ln(5/8+y))`.
    pub fn x(&self) -> f64 {
        let r = self.r;
        let y = self.y();
        let rational = (32.0 * r * r - 10.0 * r + 1.0) / (256.0 * r * r - 160.0 * r + 33.0);
        let log_term =
            ((16.0 * r - 5.0) / y) / (32.0 * (0.625 - y).ln() - 32.0 * (0.625 + y).ln());
        r + rational + log_term
    }

    fn in_rho_window(&self) -> bool {
        (RHO_WINDOW.0..=RHO_WINDOW.1).contains(&self.r)
    }

    fn in_sigma_window(&self) -> bool {
        let (lo, hi) = sigma_window();
        (lo..=hi).contains(&self.r)
    }
}

fn two_qubit() -> BipartiteShape {
    BipartiteShape { da: 2, db: 2 }
}

fn real_matrix(n: usize, entries: &[(usize, usize, f64)]) -> HermitianOperator {
    let mut m = CMatrix::zeros(n, n);
    for &(i, j, v) in entries {
        m[(i, j)] += C64::new(v, 0.0);
    }
    HermitianOperator::symmetrize(m)
}

/// `σ_r = ¼|00⟩⟨00| + ⅛|11⟩⟨11| + r|01⟩⟨01| + (5/8−r)|10⟩⟨10| + (1/(4√2))(|01⟩⟨10| + h.c.)`.
pub fn sigma_r(p: RainsPairParams) -> Result<BipartiteState> {
    if !p.in_sigma_window() {
        let (lo, hi) = sigma_window();
        return Err(StateError::Domain(format!(
            "sigma_r needs {lo:.6} <= r <= {hi:.6}, got {}",
            p.r
        )));
    }
    let c = 1.0 / (4.0 * 2f64.sqrt());
    let op = real_matrix(
        4,
        &[
            (0, 0, 0.25),
            (3, 3, 0.125),
            (1, 1, p.r),
            (2, 2, 0.625 - p.r),
            (1, 2, c),
            (2, 1, c),
        ],
    );
    BipartiteState::new(op, two_qubit())
}

/// `ρ_r` with diagonal `(1/8, x, (7−8x)/8, 0)` and `|01⟩⟨10|` coherence
/// `(32r² − (6+32x)r + 10x + 1)/(4√2)`.
pub fn rho_r(p: RainsPairParams) -> Result<BipartiteState> {
    if !p.in_rho_window() {
        return Err(StateError::Domain(format!(
            "rho_r needs {} <= r <= {}, got {}",
            RHO_WINDOW.0, RHO_WINDOW.1, p.r
        )));
    }
    let r = p.r;
    let x = p.x();
    let c = (32.0 * r * r - (6.0 + 32.0 * x) * r + 10.0 * x + 1.0) / (4.0 * 2f64.sqrt());
    let op = real_matrix(
        4,
        &[
            (0, 0, 0.125),
            (1, 1, x),
            (2, 2, (7.0 - 8.0 * x) / 8.0),
            (1, 2, c),
            (2, 1, c),
        ],
    );
    BipartiteState::new(op, two_qubit())
}

/// Parameter `α ∈ (0, 1/2]` of the 3⊗3 orbit family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsoOrbitParams {
    pub alpha: f64,
}

impl IsoOrbitParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(StateError::Domain(format!(
                "alpha must lie in (0, 0.5], got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }
}

/// `U = X† ⊗ X` with the qutrit shift `X = Σ_j |j⊕1⟩⟨j|`.
pub fn orbit_unitary() -> CMatrix {
    let mut x = CMatrix::zeros(3, 3);
    for j in 0..3 {
        x[((j + 1) % 3, j)] = C64::new(1.0, 0.0);
    }
    x.adjoint().kronecker(&x)
}

/// `ρ^(α) = (1/3) Σ_{m=0}^{2} U^m |ψ₀⟩⟨ψ₀| U^{†m}`, `|ψ₀⟩ = √α|00⟩ + √(1−α)|11⟩`.
pub fn rho_alpha(p: IsoOrbitParams) -> Result<BipartiteState> {
    let shape = BipartiteShape::new(3, 3)?;
    let u = orbit_unitary();
    let mut psi = CVector::zeros(9);
    psi[shape.index(0, 0)] = C64::new(p.alpha.sqrt(), 0.0);
    psi[shape.index(1, 1)] = C64::new((1.0 - p.alpha).sqrt(), 0.0);
    let mut acc = CMatrix::zeros(9, 9);
    for _ in 0..3 {
        acc += &psi * psi.adjoint();
        psi = &u * psi;
    }
    BipartiteState::new(HermitianOperator::symmetrize(acc / C64::new(3.0, 0.0)), shape)
}

/// Index map from the `A B A′ B′` ordering of `ρ ⊗ σ` to `(A A′)(B B′)`.
pub fn tensor_permutation(s1: BipartiteShape, s2: BipartiteShape) -> Vec<usize> {
    let (da, db, da2, db2) = (s1.da, s1.db, s2.da, s2.db);
    let mut perm = vec![0; s1.dim() * s2.dim()];
    for a in 0..da {
        for b in 0..db {
            for a2 in 0..da2 {
                for b2 in 0..db2 {
                    let old = (a * db + b) * (da2 * db2) + a2 * db2 + b2;
                    let new = (a * da2 + a2) * (db * db2) + b * db2 + b2;
                    perm[old] = new;
                }
            }
        }
    }
    perm
}

/// Applies the regrouping of [`tensor_permutation`] to an operator on `A B A′ B′`.
pub fn regroup(m: &CMatrix, s1: BipartiteShape, s2: BipartiteShape) -> CMatrix {
    let perm = tensor_permutation(s1, s2);
    let n = perm.len();
    let mut out = CMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            out[(perm[r], perm[c])] = m[(r, c)];
        }
    }
    out
}

/// `ρ ⊗ σ` as a state on `(A A′) ⊗ (B B′)`.
pub fn tensor_states(rho: &BipartiteState, sigma: &BipartiteState) -> BipartiteState {
    let k = rho.op.matrix().kronecker(sigma.op.matrix());
    let shape = BipartiteShape {
        da: rho.shape.da * sigma.shape.da,
        db: rho.shape.db * sigma.shape.db,
    };
    BipartiteState {
        op: HermitianOperator::symmetrize(regroup(&k, rho.shape, sigma.shape)),
        shape,
    }
}

/// Random state of the given rank, `G G† / tr(G G†)` with complex Gaussian `G`.
pub fn random_state<R: Rng>(shape: BipartiteShape, rank: usize, rng: &mut R) -> BipartiteState {
    let n = shape.dim();
    let rank = rank.clamp(1, n);
    let g = CMatrix::from_fn(n, rank, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    BipartiteState {
        op: HermitianOperator::symmetrize(m / C64::new(tr, 0.0)),
        shape,
    }
}

/// Deterministic generator used by the test suites and the CLI.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Deserialize)]
struct StateDoc {
    #[serde(rename = "dA")]
    da: usize,
    #[serde(rename = "dB")]
    db: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

/// Parses `{"dA":…,"dB":…,"re":[[…]],"im":[[…]]}`.
pub fn parse_state(text: &str) -> Result<BipartiteState> {
    let doc: StateDoc = serde_json::from_str(text).map_err(|e| StateError::Parse(e.to_string()))?;
    let shape = BipartiteShape::new(doc.da, doc.db).map_err(|e| StateError::Invalid {
        invariant: Invariant::Shape,
        detail: e.to_string(),
    })?;
    let n = shape.dim();
    let rows_ok = |t: &Vec<Vec<f64>>| t.len() == n && t.iter().all(|row| row.len() == n);
    if !rows_ok(&doc.re) || !rows_ok(&doc.im) {
        return Err(StateError::Invalid {
            invariant: Invariant::Shape,
            detail: format!("re and im must both be {n}x{n} for shape {shape}"),
        });
    }
    let m = CMatrix::from_fn(n, n, |i, j| C64::new(doc.re[i][j], doc.im[i][j]));
    let m = SquareMatrix::new(m).map_err(|e| StateError::Invalid {
        invariant: Invariant::Shape,
        detail: e.to_string(),
    })?;
    let op = HermitianOperator::new(m).map_err(|e| StateError::Invalid {
        invariant: Invariant::Hermitian,
        detail: e.to_string(),
    })?;
    BipartiteState::new(op, shape)
}

fn write_table(out: &mut String, m: &CMatrix, part: impl Fn(C64) -> f64) {
    out.push('[');
    for i in 0..m.nrows() {
        if i > 0 {
            out.push(',');
        }
        out.push('[');
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{:.16e}", part(m[(i, j)])).unwrap();
        }
        out.push(']');
    }
    out.push(']');
}

/// Serializes with 17 significant digits per entry.
pub fn serialize_state(state: &BipartiteState) -> String {
    let m = state.op.matrix();
    let mut out = String::new();
    write!(out, "{{\"dA\":{},\"dB\":{},\"re\":", state.shape.da, state.shape.db).unwrap();
    write_table(&mut out, m, |z| z.re);
    out.push_str(",\"im\":");
    write_table(&mut out, m, |z| z.im);
    out.push_str("}\n");
    out
}

/// Vector of the computational basis state `|i j⟩`.
pub fn product_ket(shape: BipartiteShape, i: usize, j: usize) -> CVector {
    let mut v = DVector::zeros(shape.dim());
    v[shape.index(i, j)] = C64::new(1.0, 0.0);
    v
}
