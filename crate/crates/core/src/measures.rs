//! Entanglement quantities.
//!
//! * spectral: [`relative_entropy`], [`log_negativity`]
//! * semidefinite: [`e_w`], [`m_primal`], [`m_dual`], [`e_m`], [`w0_rate`]
//! * the closed-form Rains bound of the `ρ_r` family, [`rains_closed_form`],
//!   certified through the identity `ρ_r = σ_r − (3/2)·G(σ_r)` ([`g_map`])
//! * an upper bound on the PPT relative entropy of entanglement by
//!   conditional gradient over PPT states, [`ree_upper`]
//!
//! All logarithms are natural internally; reported values are converted to the
//! configured [`LogBase`]. The default is base 2, so one ebit is worth 1:
//! `S(ρ_0.547 ‖ σ_0.547)` equals 0.3891999 bits, or 0.2697728 nats.

use std::fmt;
use std::time::Duration;

use thiserror::Error;

use crate::conic::{
    AffineHermitian, ConicError, ConicProgram, ConicSolution, LinearMap, ProgramBuilder, Sense,
    SolveStatus, SolverConfig,
};
use crate::linalg::{
    divided_difference_log, kernel_vector, product_vector_in_span, support_projector,
    BipartiteShape, CMatrix, CVector, HermitianOperator, LinalgError, C64, SUPPORT_REL_TOL,
};
use crate::states::{
    rho_r, sigma_r, tensor_states, BipartiteState, RainsPairParams, StateError,
};

/// ρ-eigenvalues at or below this contribute nothing to `Σ p log p`.
pub const EIG_FLOOR: f64 = 1e-15;
/// Overlap of a supported ρ-eigenvector with ker σ beyond which `S(ρ‖σ) = +∞`.
pub const SUPPORT_OVERLAP_TOL: f64 = 1e-10;
/// Largest admissible `‖σ_r − (3/2)G(σ_r) − ρ_r‖₁` for the closed form.
pub const CSS_DEFECT_TOL: f64 = 1e-8;
/// Largest admissible `|M_primal − M_dual|` inside [`e_m`].
pub const DUALITY_TOL: f64 = 1e-6;
/// Two eigenvalues of `P^{T_B}` closer than this belong to the top eigenspace.
pub const TOP_EIGENSPACE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Program(#[from] ConicError),
    #[error("{measure}: solver returned {status:?} after {iterations} iterations ({message})")]
    Solver {
        measure: MeasureKind,
        status: SolveStatus,
        iterations: usize,
        message: String,
    },
    #[error("M(rho) primal {primal} and dual {dual} disagree by more than {DUALITY_TOL:e}")]
    Consistency { primal: f64, dual: f64 },
    #[error("CSS identity defect {defect:e} at r = {r} exceeds {CSS_DEFECT_TOL:e}")]
    Certification { r: f64, defect: f64 },
    #[error("shape mismatch: {0} vs {1}")]
    ShapeMismatch(BipartiteShape, BipartiteShape),
}

pub type Result<T> = std::result::Result<T, MeasureError>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum LogBase {
    #[default]
    Two,
    Natural,
}

impl LogBase {
    pub fn from_nats(self, v: f64) -> f64 {
        match self {
            LogBase::Two => v / std::f64::consts::LN_2,
            LogBase::Natural => v,
        }
    }

    pub fn to_nats(self, v: f64) -> f64 {
        match self {
            LogBase::Two => v * std::f64::consts::LN_2,
            LogBase::Natural => v,
        }
    }

    pub fn log(self, x: f64) -> f64 {
        self.from_nats(x.ln())
    }

    pub fn unit(self) -> &'static str {
        match self {
            LogBase::Two => "bits",
            LogBase::Natural => "nats",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MeasureKind {
    /// `log W(ρ)`.
    EW,
    /// `−log M(ρ)` from the primal/dual midpoint.
    EM,
    /// `M(ρ)` from the maximization program.
    MPrimal,
    /// `M(ρ)` from the minimization program.
    MDual,
    /// `−log W₀(ρ)`.
    W0Rate,
    LogNeg,
    RelEnt,
    RainsClosedForm,
    REEUpper,
}

impl MeasureKind {
    pub fn label(self) -> &'static str {
        match self {
            MeasureKind::EW => "e_w",
            MeasureKind::EM => "e_m",
            MeasureKind::MPrimal => "m_primal",
            MeasureKind::MDual => "m_dual",
            MeasureKind::W0Rate => "w0_rate",
            MeasureKind::LogNeg => "log_negativity",
            MeasureKind::RelEnt => "relative_entropy",
            MeasureKind::RainsClosedForm => "rains_closed_form",
            MeasureKind::REEUpper => "ree_upper",
        }
    }

    /// `M` values are plain numbers in (0, 1]; everything else is logarithmic.
    pub fn is_logarithmic(self) -> bool {
        !matches!(self, MeasureKind::MPrimal | MeasureKind::MDual)
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Summary of a conic solve backing a measure.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverStats {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub max_equality_residual: f64,
    pub min_psd_eigenvalue: f64,
    pub wall_time: Duration,
}

impl From<&ConicSolution> for SolverStats {
    fn from(s: &ConicSolution) -> Self {
        Self {
            status: s.status,
            iterations: s.iterations,
            primal_value: s.primal_value,
            dual_value: s.dual_value,
            gap: s.gap,
            max_equality_residual: s.max_equality_residual,
            min_psd_eigenvalue: s.min_psd_eigenvalue,
            wall_time: s.wall_time,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeasureResult {
    pub kind: MeasureKind,
    /// In `base` units for logarithmic kinds; `+∞` when `infinite` is set.
    pub value: f64,
    pub base: LogBase,
    pub infinite: bool,
    /// Half the spread between independent evaluations, when there are two.
    pub error_bar: f64,
    /// Optimal points backing the value, e.g. `("R", R)`.
    pub certificates: Vec<(String, HermitianOperator)>,
    pub solver: Vec<SolverStats>,
    pub notes: Vec<String>,
}

impl MeasureResult {
    fn new(kind: MeasureKind, value: f64, base: LogBase) -> Self {
        Self {
            kind,
            value,
            base,
            infinite: value == f64::INFINITY,
            error_bar: 0.0,
            certificates: Vec::new(),
            solver: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn certificate(&self, label: &str) -> Option<&HermitianOperator> {
        self.certificates
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, c)| c)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeasureConfig {
    pub solver: SolverConfig,
    pub base: LogBase,
}

fn solved(kind: MeasureKind, sol: ConicSolution) -> Result<ConicSolution> {
    if sol.is_optimal() {
        Ok(sol)
    } else {
        Err(MeasureError::Solver {
            measure: kind,
            status: sol.status,
            iterations: sol.iterations,
            message: sol.message,
        })
    }
}

// ---------------------------------------------------------------------------
// spectral quantities

fn relative_entropy_nats(rho: &HermitianOperator, sigma: &HermitianOperator) -> f64 {
    let er = rho.eig();
    let es = sigma.eig();
    let n = rho.dim();
    let overlaps = er.vectors.adjoint() * &es.vectors;
    let mut s = 0.0;
    for i in 0..n {
        let p = er.values[i];
        if p <= EIG_FLOOR {
            continue;
        }
        s += p * p.ln();
        let mut null_overlap = 0.0;
        for j in 0..n {
            let w = overlaps[(i, j)].norm_sqr();
            let q = es.values[j];
            if q <= EIG_FLOOR {
                null_overlap += w;
            } else {
                s -= w * p * q.ln();
            }
        }
        if null_overlap > SUPPORT_OVERLAP_TOL {
            return f64::INFINITY;
        }
    }
    s
}

/// `S(ρ‖σ) = tr ρ log ρ − tr ρ log σ`, `+∞` when `supp ρ ⊄ supp σ`.
pub fn relative_entropy(rho: &BipartiteState, sigma: &BipartiteState, base: LogBase) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(MeasureError::ShapeMismatch(rho.shape(), sigma.shape()));
    }
    Ok(base.from_nats(relative_entropy_nats(rho.op(), sigma.op())))
}

/// `log ‖ρ^{T_B}‖₁`.
pub fn log_negativity(rho: &BipartiteState, base: LogBase) -> MeasureResult {
    let norm = rho.partial_transpose().trace_norm();
    MeasureResult::new(MeasureKind::LogNeg, base.log(norm).max(0.0), base)
}

// ---------------------------------------------------------------------------
// semidefinite measures

fn identity(n: usize) -> HermitianOperator {
    HermitianOperator::identity(n)
}

/// `max tr(ρR)` s.t. `R ⪰ 0`, `−I ⪯ R^{T_B} ⪯ I`. Variable: `R`.
pub fn e_w_program(rho: &BipartiteState) -> Result<ConicProgram> {
    let (n, shape) = (rho.dim(), rho.shape());
    let mut b = ProgramBuilder::new(Sense::Maximize);
    let r = b.hermitian("R", n);
    b.objective(r, rho.op().clone());
    b.psd("R", AffineHermitian::new(n).term(r, 1.0));
    b.psd(
        "I-R^TB",
        AffineHermitian::new(n).constant(identity(n)).partial_transpose(r, shape, -1.0),
    );
    b.psd(
        "I+R^TB",
        AffineHermitian::new(n).constant(identity(n)).partial_transpose(r, shape, 1.0),
    );
    Ok(b.build()?)
}

/// `log W(ρ)` with certificate `R`.
pub fn e_w(rho: &BipartiteState, cfg: &MeasureConfig) -> Result<MeasureResult> {
    let sol = solved(MeasureKind::EW, e_w_program(rho)?.solve(&cfg.solver))?;
    let w = sol.primal_value;
    let mut res = MeasureResult::new(MeasureKind::EW, cfg.base.log(w), cfg.base);
    res.certificates.push(("R".into(), sol.variables[0].clone()));
    res.solver.push((&sol).into());
    Ok(res)
}

fn support(rho: &BipartiteState) -> Result<crate::linalg::SupportProjection> {
    Ok(support_projector(rho.op(), SUPPORT_REL_TOL)?)
}

/// `max tr(PZ)` s.t. `tr(X+Y) = 1`, `(X−Y)^{T_B} − Z ⪰ 0`, `X, Y, Z ⪰ 0`,
/// with `P` the support projector of ρ. Variables: `X, Y, Z`.
pub fn m_primal_program(rho: &BipartiteState) -> Result<ConicProgram> {
    let (n, shape) = (rho.dim(), rho.shape());
    let p = support(rho)?.projector;
    let mut b = ProgramBuilder::new(Sense::Maximize);
    let x = b.hermitian("X", n);
    let y = b.hermitian("Y", n);
    let z = b.hermitian("Z", n);
    b.objective(z, p);
    b.equality(vec![(x, identity(n)), (y, identity(n))], 1.0);
    b.psd("X", AffineHermitian::new(n).term(x, 1.0));
    b.psd("Y", AffineHermitian::new(n).term(y, 1.0));
    b.psd("Z", AffineHermitian::new(n).term(z, 1.0));
    b.psd(
        "(X-Y)^TB-Z",
        AffineHermitian::new(n)
            .partial_transpose(x, shape, 1.0)
            .partial_transpose(y, shape, -1.0)
            .term(z, -1.0),
    );
    Ok(b.build()?)
}

/// `min t` s.t. `R ⪰ P`, `−tI ⪯ R^{T_B} ⪯ tI`. Variables: `R, t`.
pub fn m_dual_program(rho: &BipartiteState) -> Result<ConicProgram> {
    let (n, shape) = (rho.dim(), rho.shape());
    let p = support(rho)?.projector;
    let mut b = ProgramBuilder::new(Sense::Minimize);
    let r = b.hermitian("R", n);
    let t = b.scalar("t");
    b.objective(t, identity(1));
    b.psd("R-P", AffineHermitian::new(n).term(r, 1.0).constant(-&p));
    b.psd(
        "tI-R^TB",
        AffineHermitian::new(n).scaled_identity(t, 1.0).partial_transpose(r, shape, -1.0),
    );
    b.psd(
        "tI+R^TB",
        AffineHermitian::new(n).scaled_identity(t, 1.0).partial_transpose(r, shape, 1.0),
    );
    Ok(b.build()?)
}

/// `M(ρ)` from [`m_primal_program`], certificates `X, Y, Z`.
pub fn m_primal(rho: &BipartiteState, cfg: &MeasureConfig) -> Result<MeasureResult> {
    let sol = solved(MeasureKind::MPrimal, m_primal_program(rho)?.solve(&cfg.solver))?;
    let mut res = MeasureResult::new(MeasureKind::MPrimal, sol.primal_value, cfg.base);
    for (label, v) in ["X", "Y", "Z"].iter().zip(&sol.variables) {
        res.certificates.push((label.to_string(), v.clone()));
    }
    res.solver.push((&sol).into());
    Ok(res)
}

/// `M(ρ)` from [`m_dual_program`], certificate `R`.
pub fn m_dual(rho: &BipartiteState, cfg: &MeasureConfig) -> Result<MeasureResult> {
    let sol = solved(MeasureKind::MDual, m_dual_program(rho)?.solve(&cfg.solver))?;
    let mut res = MeasureResult::new(MeasureKind::MDual, sol.primal_value, cfg.base);
    res.certificates.push(("R".into(), sol.variables[0].clone()));
    res.solver.push((&sol).into());
    Ok(res)
}

/// `E_M(ρ) = −log M(ρ)`, evaluated at the midpoint of the primal and dual
/// values. Fails if they disagree by more than [`DUALITY_TOL`].
pub fn e_m(rho: &BipartiteState, cfg: &MeasureConfig) -> Result<MeasureResult> {
    combine_m(m_primal(rho, cfg)?, m_dual(rho, cfg)?, cfg.base)
}

/// The [`e_m`] value from separately computed [`m_primal`] and [`m_dual`].
pub fn combine_m(p: MeasureResult, d: MeasureResult, base: LogBase) -> Result<MeasureResult> {
    if (p.value - d.value).abs() > DUALITY_TOL {
        return Err(MeasureError::Consistency {
            primal: p.value,
            dual: d.value,
        });
    }
    let mid = 0.5 * (p.value + d.value);
    // M ≤ 1 always; clip solver noise so that E_M ≥ 0
    let value = (-base.log(mid)).max(0.0);
    let mut res = MeasureResult::new(MeasureKind::EM, value, base);
    res.error_bar = 0.5 * (base.log(p.value) - base.log(d.value)).abs();
    res.notes.push(format!("M primal {:.12e}, M dual {:.12e}", p.value, d.value));
    res.certificates.extend(p.certificates);
    res.certificates.extend(d.certificates);
    res.solver.extend(p.solver);
    res.solver.extend(d.solver);
    Ok(res)
}

fn is_projector(p: &HermitianOperator) -> bool {
    let sq = HermitianOperator::symmetrize(p.matrix() * p.matrix());
    sq.max_abs_diff(p) <= 1e-9
}

/// `min ‖R^{T_B}‖_∞` s.t. `P ⪯ R ⪯ I`, in epigraph form.
///
/// For a projector `P` every feasible `R` is `P + K Q K†` with `K` an isometry
/// onto `ker P` and `0 ⪯ Q ⪯ I`, so that parametrization is used: it has
/// strictly feasible points while the direct one does not. Variables are then
/// `Q, t`; a full-rank `P` leaves `t` alone. Any other `P` gets the direct form
/// with variables `R, t`, which may well be infeasible.
pub fn w0_program(p: &HermitianOperator, shape: BipartiteShape) -> Result<ConicProgram> {
    shape.check(p.dim())?;
    let n = p.dim();
    let mut b = ProgramBuilder::new(Sense::Minimize);
    if is_projector(p) {
        let k = support_projector(p, SUPPORT_REL_TOL)?.complement;
        let ppt = p.partial_transpose(shape)?;
        let t = b.scalar("t");
        b.objective(t, identity(1));
        let mut upper = AffineHermitian::new(n).scaled_identity(t, 1.0).constant(-&ppt);
        let mut lower = AffineHermitian::new(n).scaled_identity(t, 1.0).constant(ppt);
        if k.ncols() > 0 {
            let q = b.hermitian("Q", k.ncols());
            b.psd("Q", AffineHermitian::new(k.ncols()).term(q, 1.0));
            b.psd(
                "I-Q",
                AffineHermitian::new(k.ncols()).constant(identity(k.ncols())).term(q, -1.0),
            );
            let maps = vec![LinearMap::Congruence(k), LinearMap::PartialTranspose(shape)];
            upper = upper.mapped(q, maps.clone(), -1.0);
            lower = lower.mapped(q, maps, 1.0);
        }
        b.psd("tI-R^TB", upper);
        b.psd("tI+R^TB", lower);
    } else {
        let r = b.hermitian("R", n);
        let t = b.scalar("t");
        b.objective(t, identity(1));
        b.psd("R-P", AffineHermitian::new(n).term(r, 1.0).constant(-p));
        b.psd("I-R", AffineHermitian::new(n).term(r, -1.0).constant(identity(n)));
        b.psd(
            "tI-R^TB",
            AffineHermitian::new(n).scaled_identity(t, 1.0).partial_transpose(r, shape, -1.0),
        );
        b.psd(
            "tI+R^TB",
            AffineHermitian::new(n).scaled_identity(t, 1.0).partial_transpose(r, shape, 1.0),
        );
    }
    Ok(b.build()?)
}

/// `−log W₀` for a given operator `P`; see [`w0_program`]. The certificate
/// is the optimal `R`.
pub fn w0_for_operator(
    p: &HermitianOperator,
    shape: BipartiteShape,
    cfg: &MeasureConfig,
) -> Result<MeasureResult> {
    let program = w0_program(p, shape)?;
    let sol = solved(MeasureKind::W0Rate, program.solve(&cfg.solver))?;
    let r = if is_projector(p) {
        match sol.variables.get(1) {
            Some(q) => {
                let k = support_projector(p, SUPPORT_REL_TOL)?.complement;
                p + &q.congruence(&k)
            }
            None => p.clone(),
        }
    } else {
        sol.variables[0].clone()
    };
    let w0 = sol.primal_value;
    let mut res = MeasureResult::new(MeasureKind::W0Rate, (-cfg.base.log(w0)).max(0.0), cfg.base);
    res.notes.push(format!("W0 {w0:.12e}"));
    res.certificates.push(("R".into(), r));
    res.solver.push((&sol).into());
    Ok(res)
}

/// One-copy zero-error PPT distillation rate `−log W₀(ρ)`.
pub fn w0_rate(rho: &BipartiteState, cfg: &MeasureConfig) -> Result<MeasureResult> {
    w0_for_operator(&support(rho)?.projector, rho.shape(), cfg)
}

/// Where the largest eigenvalue of `P^{T_B}` has a product eigenvector,
/// `E_M(ρ) = −log ‖P^{T_B}‖_∞`.
#[derive(Clone, Debug)]
pub struct TightCase {
    pub norm: f64,
    pub product_vector: CVector,
    /// Squared overlap of `product_vector` with the top eigenspace.
    pub overlap: f64,
    pub eigenspace_dim: usize,
}

impl TightCase {
    pub fn predicted_e_m(&self, base: LogBase) -> f64 {
        -base.log(self.norm)
    }
}

/// Looks for a product vector in the top eigenspace of `P^{T_B}`.
pub fn tight_case(rho: &BipartiteState) -> Result<Option<TightCase>> {
    let shape = rho.shape();
    let ppt = support(rho)?.projector.partial_transpose(shape)?;
    let e = ppt.eig();
    let n = ppt.dim();
    let top = e.values[n - 1];
    if -e.values[0] > top + TOP_EIGENSPACE_TOL {
        return Ok(None);
    }
    let start = (0..n)
        .find(|&k| e.values[k] >= top - TOP_EIGENSPACE_TOL)
        .unwrap_or(n - 1);
    let basis = e.vectors.columns(start, n - start).into_owned();
    let (v, overlap) = product_vector_in_span(&basis, shape)?;
    if overlap >= 1.0 - TOP_EIGENSPACE_TOL {
        Ok(Some(TightCase {
            norm: top,
            product_vector: v,
            overlap,
            eigenspace_dim: n - start,
        }))
    } else {
        Ok(None)
    }
}

// ---------------------------------------------------------------------------
// closed-form Rains bound

/// `G(σ) = Σ_ij L(λ_i, λ_j) |v_i⟩⟨v_i| (|φ⟩⟨φ|)^{T_B} |v_j⟩⟨v_j|`, with `L`
/// the logarithmic mean of eigenvalues of σ and `φ` spanning `ker σ^{T_B}`.
pub fn g_map(sigma: &BipartiteState) -> Result<HermitianOperator> {
    let e = sigma.op().eig();
    if e.values[0] <= 0.0 {
        return Err(LinalgError::Domain(format!(
            "G map needs a full-rank state, smallest eigenvalue {:e}",
            e.values[0]
        ))
        .into());
    }
    let phi = kernel_vector(&sigma.partial_transpose(), None)?;
    let w = HermitianOperator::outer(&phi).partial_transpose(sigma.shape())?;
    let v = &e.vectors;
    let mut wt = v.adjoint() * w.matrix() * v;
    let n = sigma.dim();
    for i in 0..n {
        for j in 0..n {
            wt[(i, j)] *= C64::new(divided_difference_log(e.values[i], e.values[j])?, 0.0);
        }
    }
    Ok(HermitianOperator::symmetrize(v * wt * v.adjoint()))
}

/// `‖σ_r − (3/2)G(σ_r) − ρ_r‖₁`.
pub fn css_defect(r: f64) -> Result<f64> {
    let p = RainsPairParams::new(r)?;
    let sigma = sigma_r(p)?;
    let rho = rho_r(p)?;
    let g = g_map(&sigma)?;
    let d = &(sigma.op() - &g.scale(1.5)) - rho.op();
    Ok(d.trace_norm())
}

/// `R(ρ_r) = S(ρ_r ‖ σ_r)`, valid once the CSS identity is confirmed at `r`.
pub fn rains_closed_form(r: f64, base: LogBase) -> Result<MeasureResult> {
    let defect = css_defect(r)?;
    if defect > CSS_DEFECT_TOL {
        return Err(MeasureError::Certification { r, defect });
    }
    let p = RainsPairParams::new(r)?;
    let sigma = sigma_r(p)?;
    let v = relative_entropy(&rho_r(p)?, &sigma, base)?;
    let mut res = MeasureResult::new(MeasureKind::RainsClosedForm, v, base);
    res.notes.push(format!("CSS defect {defect:.3e}"));
    res.certificates.push(("sigma".into(), sigma.op().clone()));
    Ok(res)
}

// ---------------------------------------------------------------------------
// conditional gradient upper bound on the PPT relative entropy

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FwConfig {
    /// Stop once the Frank–Wolfe gap is below this many bits.
    pub gap_bits: f64,
    pub max_iters: usize,
    /// Step lengths are capped at `1 − lambda_floor`.
    pub lambda_floor: f64,
    pub solver: SolverConfig,
    pub base: LogBase,
}

impl Default for FwConfig {
    fn default() -> Self {
        Self {
            gap_bits: 1e-4,
            max_iters: 500,
            lambda_floor: 1e-12,
            solver: SolverConfig::default(),
            base: LogBase::Two,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FwStep {
    /// `S(ρ‖σ_k)` before the step.
    pub value: f64,
    pub fw_gap: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct FwTrace {
    /// Values and gaps in the configured base.
    pub iterations: Vec<FwStep>,
    pub final_sigma: BipartiteState,
    pub converged: bool,
}

/// `argmin tr(GΔ)` over PPT states, with the minimum.
pub fn fw_oracle_program(g: &HermitianOperator, shape: BipartiteShape) -> Result<ConicProgram> {
    shape.check(g.dim())?;
    let n = g.dim();
    let mut b = ProgramBuilder::new(Sense::Minimize);
    let d = b.hermitian("Delta", n);
    b.objective(d, g.clone());
    b.equality(vec![(d, identity(n))], 1.0);
    b.psd("Delta", AffineHermitian::new(n).term(d, 1.0));
    b.psd("Delta^TB", AffineHermitian::new(n).partial_transpose(d, shape, 1.0));
    Ok(b.build()?)
}

/// Minimizes `tr(GΔ)` over PPT states Δ. The optimizer is nudged towards
/// `I/n` just enough to make it exactly PSD and PPT.
pub fn fw_linear_oracle(
    g: &HermitianOperator,
    shape: BipartiteShape,
    cfg: &SolverConfig,
) -> Result<(BipartiteState, f64)> {
    let n = g.dim();
    let scale = g.op_norm().max(f64::MIN_POSITIVE);
    let gs = g.scale(1.0 / scale);
    let sol = solved(MeasureKind::REEUpper, fw_oracle_program(&gs, shape)?.solve(cfg))?;
    let mut delta = sol.variables[0].clone();
    delta = delta.scale(1.0 / delta.trace());
    let low = delta
        .min_eigenvalue()
        .min(delta.partial_transpose(shape)?.min_eigenvalue());
    if low < 0.0 {
        let eps = -low * (1.0 + 1e-6) + 1e-15;
        delta = (&delta + &identity(n).scale(eps)).scale(1.0 / (1.0 + n as f64 * eps));
    }
    let value = g.inner(&delta);
    Ok((BipartiteState::new(delta, shape)?, value))
}

/// `tr(D · Dlog_σ[ρ])` computed in the eigenbasis of σ; the derivative of
/// `t ↦ S(ρ‖σ + tD)` is its negative.
fn log_derivative_pairing(
    sigma: &HermitianOperator,
    rho: &HermitianOperator,
    d: &HermitianOperator,
) -> Result<f64> {
    let e = sigma.eig();
    let v = &e.vectors;
    let rt = v.adjoint() * rho.matrix() * v;
    let dt = v.adjoint() * d.matrix() * v;
    let n = sigma.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let l = divided_difference_log(e.values[i], e.values[j])?;
            acc += (rt[(i, j)] * dt[(j, i)]).re / l;
        }
    }
    Ok(acc)
}

/// `∇_σ S(ρ‖σ) = −Dlog_σ[ρ]`.
fn gradient(sigma: &HermitianOperator, rho: &HermitianOperator) -> Result<HermitianOperator> {
    let e = sigma.eig();
    let v = &e.vectors;
    let mut rt: CMatrix = v.adjoint() * rho.matrix() * v;
    let n = sigma.dim();
    for i in 0..n {
        for j in 0..n {
            rt[(i, j)] /= C64::new(-divided_difference_log(e.values[i], e.values[j])?, 0.0);
        }
    }
    Ok(HermitianOperator::symmetrize(v * rt * v.adjoint()))
}

/// Exact minimization of the convex `t ↦ S(ρ‖σ + t·d)` on `[0, t_max]` by
/// bisection on the sign of the derivative.
fn line_search(
    sigma: &HermitianOperator,
    rho: &HermitianOperator,
    d: &HermitianOperator,
    t_max: f64,
) -> Result<f64> {
    let slope = |t: f64| -> Result<f64> {
        let s = sigma + &d.scale(t);
        Ok(-log_derivative_pairing(&s, rho, d)?)
    };
    if slope(0.0)? >= 0.0 {
        return Ok(0.0);
    }
    if slope(t_max)? <= 0.0 {
        return Ok(t_max);
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if slope(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Upper bound on the PPT relative entropy of entanglement by conditional
/// gradient from `I/n`. The returned value is `S(ρ‖σ)` for the PPT state in
/// the trace, so it is a valid upper bound whether or not the iteration
/// converged.
pub fn ree_upper(rho: &BipartiteState, cfg: &FwConfig) -> Result<(MeasureResult, FwTrace)> {
    let shape = rho.shape();
    let r = rho.op();
    let mut sigma = BipartiteState::maximally_mixed(shape);
    let mut value = relative_entropy_nats(r, sigma.op());
    let t_max = 1.0 - cfg.lambda_floor;
    let mut steps = Vec::new();
    let mut converged = false;
    let mut note = None;

    for _ in 0..cfg.max_iters {
        let grad = gradient(sigma.op(), r)?;
        let (delta, lmo) = fw_linear_oracle(&grad, shape, &cfg.solver)?;
        let gap = grad.inner(sigma.op()) - lmo;
        if LogBase::Two.from_nats(gap) <= cfg.gap_bits {
            steps.push(FwStep {
                value: cfg.base.from_nats(value),
                fw_gap: cfg.base.from_nats(gap),
                step: 0.0,
            });
            converged = true;
            break;
        }
        let d = delta.op() - sigma.op();
        let t = line_search(sigma.op(), r, &d, t_max)?;
        steps.push(FwStep {
            value: cfg.base.from_nats(value),
            fw_gap: cfg.base.from_nats(gap),
            step: t,
        });
        if t == 0.0 {
            note = Some("line search made no progress".to_string());
            break;
        }
        let next = HermitianOperator::symmetrize((sigma.op() + &d.scale(t)).into_matrix());
        let next_value = relative_entropy_nats(r, &next);
        if next_value > value + 1e-12 {
            note = Some(format!("step increased the objective by {:e}", next_value - value));
            break;
        }
        sigma = BipartiteState::new(next, shape)?;
        value = next_value;
    }

    let mut res = MeasureResult::new(MeasureKind::REEUpper, cfg.base.from_nats(value), cfg.base);
    res.notes.push(format!(
        "{} conditional gradient iterations, converged: {converged}",
        steps.len()
    ));
    res.notes.extend(note);
    res.certificates.push(("sigma".into(), sigma.op().clone()));
    Ok((
        res,
        FwTrace {
            iterations: steps,
            final_sigma: sigma,
            converged,
        },
    ))
}

/// Feasibility of a claimed PPT state: smallest eigenvalues of σ and
/// `σ^{T_B}` and the trace error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PptCheck {
    pub min_eigenvalue: f64,
    pub min_pt_eigenvalue: f64,
    pub trace_error: f64,
}

impl PptCheck {
    pub fn of(sigma: &HermitianOperator, shape: BipartiteShape) -> Result<Self> {
        Ok(Self {
            min_eigenvalue: sigma.min_eigenvalue(),
            min_pt_eigenvalue: sigma.partial_transpose(shape)?.min_eigenvalue(),
            trace_error: (sigma.trace() - 1.0).abs(),
        })
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.min_eigenvalue >= -tol && self.min_pt_eigenvalue >= -tol && self.trace_error <= tol
    }
}

#[derive(Clone, Debug)]
pub struct NonadditivityReport {
    pub r: f64,
    pub base: LogBase,
    /// `2·R(ρ_r)` from the closed form.
    pub two_r: f64,
    /// `S(ρ_r^{⊗2} ‖ σ)` for the PPT certificate σ.
    pub ree_upper_tensor2: f64,
    /// `two_r − ree_upper_tensor2`; positive means `R(ρ_r^{⊗2}) < 2R(ρ_r)`.
    pub gap: f64,
    pub certificate: BipartiteState,
    pub certificate_check: PptCheck,
    pub trace: FwTrace,
}

/// Compares `2R(ρ_r)` with an upper bound on `E_{R,PPT}(ρ_r^{⊗2})`, which in
/// turn bounds `R(ρ_r^{⊗2})` from above.
pub fn nonadditivity_experiment(r: f64, cfg: &FwConfig) -> Result<NonadditivityReport> {
    let a = rains_closed_form(r, cfg.base)?;
    let rho = rho_r(RainsPairParams::new(r)?)?;
    let rho2 = tensor_states(&rho, &rho);
    let (b, trace) = ree_upper(&rho2, cfg)?;
    let check = PptCheck::of(trace.final_sigma.op(), rho2.shape())?;
    Ok(NonadditivityReport {
        r,
        base: cfg.base,
        two_r: 2.0 * a.value,
        ree_upper_tensor2: b.value,
        gap: 2.0 * a.value - b.value,
        certificate: trace.final_sigma.clone(),
        certificate_check: check,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{
        max_entangled, pure_from_schmidt, random_state, rho_alpha, seeded_rng, IsoOrbitParams,
        SchmidtVector,
    };

    fn cfg() -> MeasureConfig {
        MeasureConfig::default()
    }

    fn qubits() -> BipartiteShape {
        BipartiteShape::new(2, 2).unwrap()
    }

    fn pure(v: &[f64], shape: BipartiteShape) -> BipartiteState {
        let v = CVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0)));
        BipartiteState::new(HermitianOperator::outer(&v.normalize()), shape).unwrap()
    }

    #[test]
    fn relative_entropy_examples() {
        let rho = rho_r(RainsPairParams::new(0.5).unwrap()).unwrap();
        assert!(relative_entropy(&rho, &rho, LogBase::Two).unwrap().abs() < 1e-10);
        let phi = max_entangled(2).unwrap();
        let mixed = BipartiteState::maximally_mixed(qubits());
        assert!((relative_entropy(&phi, &mixed, LogBase::Two).unwrap() - 2.0).abs() < 1e-12);
        assert!(
            (relative_entropy(&phi, &mixed, LogBase::Natural).unwrap() - 4f64.ln()).abs() < 1e-12
        );
        // support violation
        let prod = pure(&[1.0, 0.0, 0.0, 0.0], qubits());
        assert_eq!(relative_entropy(&phi, &prod, LogBase::Two).unwrap(), f64::INFINITY);
        assert_eq!(relative_entropy(&prod, &prod, LogBase::Two).unwrap(), 0.0);
        let big = BipartiteState::maximally_mixed(BipartiteShape::new(3, 3).unwrap());
        assert!(matches!(
            relative_entropy(&phi, &big, LogBase::Two),
            Err(MeasureError::ShapeMismatch(..))
        ));
    }

    #[test]
    fn log_base_resolution() {
        let p = RainsPairParams::new(0.547).unwrap();
        let rho = rho_r(p).unwrap();
        let sigma = sigma_r(p).unwrap();
        let bits = relative_entropy(&rho, &sigma, LogBase::Two).unwrap();
        let nats = relative_entropy(&rho, &sigma, LogBase::Natural).unwrap();
        assert!((bits - 0.3891999).abs() < 1e-4);
        assert!((nats - 0.3891999).abs() > 1e-4);
    }

    #[test]
    fn log_negativity_examples() {
        assert_eq!(log_negativity(&BipartiteState::maximally_mixed(qubits()), LogBase::Two).value, 0.0);
        for d in [2, 3, 4] {
            let v = log_negativity(&max_entangled(d).unwrap(), LogBase::Two).value;
            assert!((v - (d as f64).log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn e_w_examples() {
        let phi = max_entangled(2).unwrap();
        let r = e_w(&phi, &cfg()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-7, "{}", r.value);
        let prod = pure(&[1.0, 0.0, 0.0, 0.0], qubits());
        assert!(e_w(&prod, &cfg()).unwrap().value.abs() < 1e-7);
        let mixed = BipartiteState::maximally_mixed(qubits());
        assert!(e_w(&mixed, &cfg()).unwrap().value.abs() < 1e-7);
    }

    #[test]
    fn m_values_for_maximally_entangled() {
        let phi = max_entangled(2).unwrap();
        let p = m_primal(&phi, &cfg()).unwrap();
        let d = m_dual(&phi, &cfg()).unwrap();
        assert!((p.value - 0.5).abs() < 1e-7, "{}", p.value);
        assert!((d.value - 0.5).abs() < 1e-7, "{}", d.value);
        let mixed = BipartiteState::maximally_mixed(qubits());
        assert!((m_primal(&mixed, &cfg()).unwrap().value - 1.0).abs() < 1e-7);
        for d in [2usize, 3] {
            let v = e_m(&max_entangled(d).unwrap(), &cfg()).unwrap().value;
            assert!((v - (d as f64).log2()).abs() < 1e-6, "d={d}: {v}");
        }
    }

    #[test]
    fn m_dual_structure() {
        let phi = max_entangled(2).unwrap();
        let p = m_dual_program(&phi).unwrap();
        assert_eq!(p.variable_dims(), vec![4, 1]);
        assert_eq!(p.sense(), Sense::Minimize);
        assert_eq!(p.constraint_dims(), &[4, 4, 4]);
    }

    #[test]
    fn m_for_schmidt_state() {
        let s = SchmidtVector::new(vec![0.8f64.sqrt(), 0.2f64.sqrt()]).unwrap();
        let rho = pure_from_schmidt(&s, qubits()).unwrap();
        let d = m_dual(&rho, &cfg()).unwrap();
        assert!((d.value - 0.8).abs() < 1e-7, "{}", d.value);
    }

    #[test]
    fn orbit_family_tightness() {
        for alpha in [0.1, 0.2] {
            let rho = rho_alpha(IsoOrbitParams::new(alpha).unwrap()).unwrap();
            let p = m_primal(&rho, &cfg()).unwrap();
            assert!((p.value - (1.0 - alpha)).abs() < 1e-6, "{}", p.value);
            let em = e_m(&rho, &cfg()).unwrap();
            assert!((em.value + (1.0 - alpha).log2()).abs() < 1e-5);
            let tight = tight_case(&rho).unwrap().expect("product top eigenvector");
            assert!((tight.predicted_e_m(LogBase::Two) - em.value).abs() < 1e-6);
        }
    }

    #[test]
    fn full_rank_states_have_zero_e_m_and_w0() {
        let mut rng = seeded_rng(3);
        let rho = random_state(qubits(), 4, &mut rng);
        assert!(e_m(&rho, &cfg()).unwrap().value < 1e-7);
        assert!(w0_rate(&rho, &cfg()).unwrap().value.abs() < 1e-9);
    }

    #[test]
    fn w0_examples() {
        let phi = max_entangled(2).unwrap();
        let w = w0_rate(&phi, &cfg()).unwrap();
        assert!((w.value - 1.0).abs() < 1e-7, "{}", w.value);
        let r = w.certificate("R").unwrap();
        let p = support(&phi).unwrap().projector;
        assert!((r - &p).min_eigenvalue() > -1e-8);
        assert!((&identity(4) - r).min_eigenvalue() > -1e-8);

        let prod = pure(&[1.0, 0.0, 0.0, 0.0], qubits());
        assert!(w0_rate(&prod, &cfg()).unwrap().value.abs() < 1e-7);

        // P = 2|00⟩⟨00| admits no R with P ⪯ R ⪯ I
        let bad = HermitianOperator::from_real_diagonal(&[2.0, 0.0, 0.0, 0.0]);
        match w0_for_operator(&bad, qubits(), &cfg()) {
            Err(MeasureError::Solver { status, .. }) => assert_eq!(status, SolveStatus::Infeasible),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn g_map_examples() {
        let s = sigma_r(RainsPairParams::new(0.45).unwrap()).unwrap();
        let g = g_map(&s).unwrap();
        assert!(g.asymmetry() <= 1e-12);
        assert!(css_defect(0.5).unwrap() <= 1e-9);
        let mixed = BipartiteState::maximally_mixed(qubits());
        assert!(matches!(
            g_map(&mixed),
            Err(MeasureError::Linalg(LinalgError::KernelDimension(0)))
        ));
    }

    #[test]
    fn rains_closed_form_values() {
        let v = rains_closed_form(0.547, LogBase::Two).unwrap().value;
        assert!((v - 0.3891999).abs() < 1e-4);
        assert!((2.0 * v - 0.7783998).abs() < 2e-4);
        for k in 0..=10 {
            let r = 0.3125 + (0.548 - 0.3125) * k as f64 / 10.0;
            assert!(rains_closed_form(r, LogBase::Two).unwrap().value > 0.0);
        }
    }

    #[test]
    fn oracle_examples() {
        let shape = qubits();
        let (_, v) = fw_linear_oracle(&identity(4), shape, &SolverConfig::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-8);

        let g = HermitianOperator::from_real_diagonal(&[0.5, -0.3, 0.2, 0.9]);
        let (d, v) = fw_linear_oracle(&g, shape, &SolverConfig::default()).unwrap();
        assert!((v + 0.3).abs() < 1e-7);
        let target = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 0.0, 0.0]);
        assert!(d.op().max_abs_diff(&target) < 1e-6);

        let phi = max_entangled(2).unwrap();
        let (d, v) = fw_linear_oracle(&-phi.op(), shape, &SolverConfig::default()).unwrap();
        assert!((v + 0.5).abs() < 1e-7);
        assert!(d.is_ppt(0.0));
    }

    #[test]
    fn ree_upper_on_two_qubits() {
        let mixed = BipartiteState::maximally_mixed(qubits());
        let (res, trace) = ree_upper(&mixed, &FwConfig::default()).unwrap();
        assert!(res.value <= 1e-6);
        assert!(trace.converged);

        let rho = rho_r(RainsPairParams::new(0.547).unwrap()).unwrap();
        let (res, trace) = ree_upper(&rho, &FwConfig::default()).unwrap();
        assert!((res.value - 0.3891999).abs() < 1e-3, "{}", res.value);
        for w in trace.iterations.windows(2) {
            assert!(w[1].value <= w[0].value + 1e-12);
        }
        assert!(PptCheck::of(trace.final_sigma.op(), qubits()).unwrap().holds(1e-9));
    }
}
