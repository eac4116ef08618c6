//! Declarative semidefinite programs over Hermitian variables.
//!
//! A [`ConicProgram`] has Hermitian matrix variables (a scalar is a 1×1 block),
//! a real linear objective `Σ_k tr(C_k X_k)`, linear equalities and linear
//! matrix inequalities `F_0 + Σ maps(X_k) ⪰ 0`. Partial transposition,
//! identity scaling of a scalar and congruence `K X K†` are built-in maps.
//!
//! Programs are compiled to a real block-diagonal LMI by embedding every
//! Hermitian block `A + iB` as `[[A, −B], [B, A]]`; all factor-of-two trace
//! bookkeeping for that embedding lives in this module.

mod ipm;

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{BipartiteShape, CMatrix, HermitianOperator, C64};
use ipm::{IpmSettings, IpmStatus, LmiProblem, Triplets};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown variable id {0}")]
    UnknownVariable(usize),
    #[error("variable `{0}` does not appear in any PSD constraint")]
    UnconstrainedVariable(String),
    #[error("identity scaling needs a scalar (1x1) variable, `{0}` is {1}x{1}")]
    NotScalar(String, usize),
    #[error("program has no PSD constraints")]
    NoConstraints,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Handle to a variable block of a [`ProgramBuilder`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VarId(usize);

/// Linear maps applicable to a variable inside a PSD constraint.
#[derive(Clone, Debug, PartialEq)]
pub enum LinearMap {
    /// `X ↦ X^{T_B}`.
    PartialTranspose(BipartiteShape),
    /// Scalar `t ↦ t·I_n`.
    ScaledIdentity(usize),
    /// `X ↦ K X K†`.
    Congruence(CMatrix),
}

#[derive(Clone, Debug)]
struct Term {
    var: VarId,
    maps: Vec<LinearMap>,
    coeff: f64,
}

/// `constant + Σ coeff·maps(X)`, a Hermitian-valued affine expression.
#[derive(Clone, Debug)]
pub struct AffineHermitian {
    dim: usize,
    constant: Option<HermitianOperator>,
    terms: Vec<Term>,
}

impl AffineHermitian {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            constant: None,
            terms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant(mut self, c: HermitianOperator) -> Self {
        self.constant = Some(match self.constant.take() {
            Some(prev) => &prev + &c,
            None => c,
        });
        self
    }

    pub fn term(self, var: VarId, coeff: f64) -> Self {
        self.mapped(var, Vec::new(), coeff)
    }

    pub fn partial_transpose(self, var: VarId, shape: BipartiteShape, coeff: f64) -> Self {
        self.mapped(var, vec![LinearMap::PartialTranspose(shape)], coeff)
    }

    pub fn scaled_identity(self, var: VarId, coeff: f64) -> Self {
        let n = self.dim;
        self.mapped(var, vec![LinearMap::ScaledIdentity(n)], coeff)
    }

    /// Adds `coeff·(maps[k-1] ∘ … ∘ maps[0])(X)`.
    pub fn mapped(mut self, var: VarId, maps: Vec<LinearMap>, coeff: f64) -> Self {
        self.terms.push(Term { var, maps, coeff });
        self
    }
}

#[derive(Clone, Debug)]
struct Equality {
    terms: Vec<(VarId, HermitianOperator)>,
    rhs: f64,
}

/// Accumulates variables, objective and constraints; [`ProgramBuilder::build`]
/// validates and compiles.
#[derive(Clone, Debug)]
pub struct ProgramBuilder {
    sense: Sense,
    vars: Vec<(String, usize)>,
    objective: Vec<(VarId, HermitianOperator)>,
    equalities: Vec<Equality>,
    constraints: Vec<(String, AffineHermitian)>,
}

impl ProgramBuilder {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            vars: Vec::new(),
            objective: Vec::new(),
            equalities: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn hermitian(&mut self, name: &str, dim: usize) -> VarId {
        self.vars.push((name.to_string(), dim));
        VarId(self.vars.len() - 1)
    }

    pub fn scalar(&mut self, name: &str) -> VarId {
        self.hermitian(name, 1)
    }

    /// Adds `tr(C X)` to the objective.
    pub fn objective(&mut self, var: VarId, c: HermitianOperator) -> &mut Self {
        self.objective.push((var, c));
        self
    }

    /// `Σ tr(A_k X_k) = rhs`.
    pub fn equality(&mut self, terms: Vec<(VarId, HermitianOperator)>, rhs: f64) -> &mut Self {
        self.equalities.push(Equality { terms, rhs });
        self
    }

    /// `expr ⪰ 0`.
    pub fn psd(&mut self, name: &str, expr: AffineHermitian) -> &mut Self {
        self.constraints.push((name.to_string(), expr));
        self
    }

    pub fn build(self) -> Result<ConicProgram, ConicError> {
        ConicProgram::compile(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
    NumericalFailure,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    pub verbosity: u8,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
            verbosity: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Objective of the program as posed, at the returned variables.
    pub primal_value: f64,
    /// Lagrange dual bound at the returned multipliers.
    pub dual_value: f64,
    pub gap: f64,
    /// Gap relative to the objective magnitudes, as used for termination.
    pub relative_gap: f64,
    /// Residual of the constraints in the variables (Frobenius, real embedding).
    pub feasibility_residual: f64,
    /// Relative residual of the multiplier (dual) constraints.
    pub multiplier_residual: f64,
    /// Variable values, in declaration order.
    pub variables: Vec<HermitianOperator>,
    /// One multiplier per PSD constraint, in declaration order.
    pub multipliers: Vec<HermitianOperator>,
    pub equality_multipliers: Vec<f64>,
    pub max_equality_residual: f64,
    pub min_psd_eigenvalue: f64,
    pub iterations: usize,
    pub wall_time: Duration,
    pub message: String,
}

impl ConicSolution {
    pub fn var(&self, id: VarId) -> &HermitianOperator {
        &self.variables[id.0]
    }

    pub fn scalar(&self, id: VarId) -> f64 {
        self.variables[id.0].matrix()[(0, 0)].re
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// A validated, compiled program.
#[derive(Clone, Debug)]
pub struct ConicProgram {
    sense: Sense,
    vars: Vec<(String, usize)>,
    offsets: Vec<usize>,
    constraint_names: Vec<String>,
    constraint_dims: Vec<usize>,
    objective: Vec<(VarId, HermitianOperator)>,
    equalities: Vec<Equality>,
    lmi: LmiProblem,
}

type CTriplets = Vec<(usize, usize, C64)>;

/// Sparse basis element `q` of the Hermitian `d×d` matrices: diagonal
/// entries first, then `(E_kl + E_lk)` and `i(E_kl − E_lk)` for `k < l`.
fn hermitian_basis(d: usize) -> Vec<CTriplets> {
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let mut out: Vec<CTriplets> = (0..d).map(|k| vec![(k, k, one)]).collect();
    for k in 0..d {
        for l in k + 1..d {
            out.push(vec![(k, l, one), (l, k, one)]);
            out.push(vec![(k, l, i), (l, k, -i)]);
        }
    }
    out
}

fn coords_to_matrix(d: usize, coords: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    for (q, el) in hermitian_basis(d).into_iter().enumerate() {
        for (r, c, z) in el {
            m[(r, c)] += z * coords[q];
        }
    }
    m
}

fn apply_map(map: &LinearMap, t: CTriplets) -> CTriplets {
    match map {
        LinearMap::PartialTranspose(s) => t
            .into_iter()
            .map(|(r, c, z)| {
                let (i, j) = (r / s.db, r % s.db);
                let (k, l) = (c / s.db, c % s.db);
                (i * s.db + l, k * s.db + j, z)
            })
            .collect(),
        LinearMap::ScaledIdentity(n) => {
            let z: C64 = t.iter().map(|e| e.2).sum();
            (0..*n).map(|k| (k, k, z)).collect()
        }
        LinearMap::Congruence(k) => {
            let mut dense = CMatrix::zeros(k.nrows(), k.nrows());
            for (r, c, z) in t {
                // z·K[:,r]·K[:,c]†
                for a in 0..k.nrows() {
                    let kar = k[(a, r)] * z;
                    if kar == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for b in 0..k.nrows() {
                        dense[(a, b)] += kar * k[(b, c)].conj();
                    }
                }
            }
            dense_triplets(&dense)
        }
    }
}

fn map_output_dim(map: &LinearMap, input: usize) -> usize {
    match map {
        LinearMap::PartialTranspose(_) => input,
        LinearMap::ScaledIdentity(n) => *n,
        LinearMap::Congruence(k) => k.nrows(),
    }
}

fn dense_triplets(m: &CMatrix) -> CTriplets {
    let mut out = Vec::new();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let z = m[(r, c)];
            if z.re != 0.0 || z.im != 0.0 {
                out.push((r, c, z));
            }
        }
    }
    out
}

/// Real embedding of complex entries of an `n×n` block: `A + iB ↦ [[A, −B], [B, A]]`.
fn embed_triplets(n: usize, t: &CTriplets, scale: f64, out: &mut Triplets) {
    for &(r, c, z) in t {
        let (re, im) = (z.re * scale, z.im * scale);
        if re != 0.0 {
            out.push((r, c, re));
            out.push((r + n, c + n, re));
        }
        if im != 0.0 {
            out.push((r, c + n, -im));
            out.push((r + n, c, im));
        }
    }
}

fn merge(mut t: Triplets) -> Triplets {
    t.sort_by_key(|a| (a.0, a.1));
    let mut out: Triplets = Vec::with_capacity(t.len());
    for (r, c, v) in t {
        match out.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => out.push((r, c, v)),
        }
    }
    out.retain(|e| e.2 != 0.0);
    out
}

/// `[[A, −B], [B, A]]` for `H = A + iB`. PSD iff `H` is, with every eigenvalue doubled.
pub fn real_embedding(h: &HermitianOperator) -> DMatrix<f64> {
    let n = h.dim();
    let m = h.matrix();
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = m[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Inverse of [`real_embedding`], averaging the redundant copies.
fn complexify(x: &DMatrix<f64>) -> CMatrix {
    let n = x.nrows() / 2;
    CMatrix::from_fn(n, n, |r, c| {
        let a = 0.5 * (x[(r, c)] + x[(r + n, c + n)]);
        let b = 0.5 * (x[(r + n, c)] - x[(r, c + n)]);
        C64::new(a, b)
    })
}

fn real_tr(a: &HermitianOperator, el: &CTriplets) -> f64 {
    // Re tr(A B) = Σ Re(A[c,r]·B[r,c])
    el.iter().map(|&(r, c, z)| (a.matrix()[(c, r)] * z).re).sum()
}

impl ConicProgram {
    fn compile(b: ProgramBuilder) -> Result<Self, ConicError> {
        if b.constraints.is_empty() {
            return Err(ConicError::NoConstraints);
        }
        let check_var = |v: VarId| -> Result<usize, ConicError> {
            b.vars
                .get(v.0)
                .map(|x| x.1)
                .ok_or(ConicError::UnknownVariable(v.0))
        };
        let mut offsets = Vec::with_capacity(b.vars.len());
        let mut m = 0;
        for (_, d) in &b.vars {
            offsets.push(m);
            m += d * d;
        }
        let bases: Vec<Vec<CTriplets>> = b.vars.iter().map(|(_, d)| hermitian_basis(*d)).collect();

        // objective
        let mut obj = DVector::zeros(m);
        for (v, c) in &b.objective {
            let d = check_var(*v)?;
            if c.dim() != d {
                return Err(ConicError::Dimension {
                    context: format!("objective coefficient of `{}`", b.vars[v.0].0),
                    expected: d,
                    got: c.dim(),
                });
            }
            for (q, el) in bases[v.0].iter().enumerate() {
                obj[offsets[v.0] + q] += real_tr(c, el);
            }
        }
        let sign = match b.sense {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        };
        let bvec = obj * sign;

        // equalities
        let p = b.equalities.len();
        let mut e = DMatrix::zeros(p, m);
        let mut f = DVector::zeros(p);
        for (row, eq) in b.equalities.iter().enumerate() {
            f[row] = eq.rhs;
            for (v, a) in &eq.terms {
                let d = check_var(*v)?;
                if a.dim() != d {
                    return Err(ConicError::Dimension {
                        context: format!("equality {row} coefficient of `{}`", b.vars[v.0].0),
                        expected: d,
                        got: a.dim(),
                    });
                }
                for (q, el) in bases[v.0].iter().enumerate() {
                    e[(row, offsets[v.0] + q)] += real_tr(a, el);
                }
            }
        }

        // PSD constraints
        let nblocks = b.constraints.len();
        let mut block_dims = Vec::with_capacity(nblocks);
        let mut cmats = Vec::with_capacity(nblocks);
        let mut per_var: Vec<Vec<(usize, Triplets)>> = vec![Vec::new(); m];
        for (blk, (name, expr)) in b.constraints.iter().enumerate() {
            let n = expr.dim;
            block_dims.push(2 * n);
            let c = match &expr.constant {
                Some(c) if c.dim() != n => {
                    return Err(ConicError::Dimension {
                        context: format!("constant of constraint `{name}`"),
                        expected: n,
                        got: c.dim(),
                    })
                }
                Some(c) => real_embedding(c),
                None => DMatrix::zeros(2 * n, 2 * n),
            };
            cmats.push(c);
            let mut acc: Vec<Triplets> = vec![Vec::new(); m];
            for term in &expr.terms {
                let d = check_var(term.var)?;
                let mut out_dim = d;
                for map in &term.maps {
                    if let LinearMap::ScaledIdentity(_) = map {
                        if out_dim != 1 {
                            return Err(ConicError::NotScalar(b.vars[term.var.0].0.clone(), out_dim));
                        }
                    }
                    if let LinearMap::Congruence(k) = map {
                        if k.ncols() != out_dim {
                            return Err(ConicError::Dimension {
                                context: format!("congruence on `{}` in `{name}`", b.vars[term.var.0].0),
                                expected: out_dim,
                                got: k.ncols(),
                            });
                        }
                    }
                    if let LinearMap::PartialTranspose(s) = map {
                        if s.dim() != out_dim {
                            return Err(ConicError::Dimension {
                                context: format!("partial transpose on `{}` in `{name}`", b.vars[term.var.0].0),
                                expected: out_dim,
                                got: s.dim(),
                            });
                        }
                    }
                    out_dim = map_output_dim(map, out_dim);
                }
                if out_dim != n {
                    return Err(ConicError::Dimension {
                        context: format!("term `{}` in constraint `{name}`", b.vars[term.var.0].0),
                        expected: n,
                        got: out_dim,
                    });
                }
                for (q, el) in bases[term.var.0].iter().enumerate() {
                    let mut t = el.clone();
                    for map in &term.maps {
                        t = apply_map(map, t);
                    }
                    // LMI convention: C − Σ y A ⪰ 0, so A = −F.
                    embed_triplets(n, &t, -term.coeff, &mut acc[offsets[term.var.0] + q]);
                }
            }
            for (q, t) in acc.into_iter().enumerate() {
                let t = merge(t);
                if !t.is_empty() {
                    per_var[q].push((blk, t));
                }
            }
        }
        for (k, (name, d)) in b.vars.iter().enumerate() {
            if (0..d * d).any(|q| per_var[offsets[k] + q].is_empty()) {
                return Err(ConicError::UnconstrainedVariable(name.clone()));
            }
        }

        Ok(Self {
            sense: b.sense,
            constraint_names: b.constraints.iter().map(|c| c.0.clone()).collect(),
            constraint_dims: b.constraints.iter().map(|c| c.1.dim).collect(),
            vars: b.vars,
            offsets,
            objective: b.objective,
            equalities: b.equalities,
            lmi: LmiProblem {
                block_dims,
                c: cmats,
                a: per_var,
                b: bvec,
                e,
                f,
            },
        })
    }

    pub fn num_scalar_variables(&self) -> usize {
        self.lmi.m()
    }

    pub fn variable_dims(&self) -> Vec<usize> {
        self.vars.iter().map(|v| v.1).collect()
    }

    /// Complex dimensions of the PSD constraints.
    pub fn constraint_dims(&self) -> &[usize] {
        &self.constraint_dims
    }

    pub fn constraint_names(&self) -> &[String] {
        &self.constraint_names
    }

    pub fn num_equalities(&self) -> usize {
        self.lmi.p()
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    fn unpack(&self, y: &DVector<f64>) -> Vec<HermitianOperator> {
        self.vars
            .iter()
            .zip(&self.offsets)
            .map(|((_, d), &off)| {
                HermitianOperator::symmetrize(coords_to_matrix(*d, &y.as_slice()[off..off + d * d]))
            })
            .collect()
    }

    /// Objective `Σ tr(C_k X_k)` at the given variable values.
    pub fn objective_value(&self, vars: &[HermitianOperator]) -> f64 {
        self.objective
            .iter()
            .map(|(v, c)| c.inner(&vars[v.0]))
            .sum()
    }

    pub fn solve(&self, cfg: &SolverConfig) -> ConicSolution {
        let start = Instant::now();
        let res = ipm::solve(
            &self.lmi,
            IpmSettings {
                gap_tol: cfg.gap_tol,
                feas_tol: cfg.feas_tol,
                max_iter: cfg.max_iter,
                verbose: cfg.verbosity > 0,
            },
        );
        let status = match res.status {
            IpmStatus::Optimal => SolveStatus::Optimal,
            IpmStatus::Infeasible => SolveStatus::Infeasible,
            IpmStatus::Unbounded => SolveStatus::Unbounded,
            IpmStatus::MaxIter => SolveStatus::MaxIter,
            IpmStatus::NumericalFailure => SolveStatus::NumericalFailure,
        };
        let variables = self.unpack(&res.y);
        let sign = match self.sense {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        };
        let primal_value = self.objective_value(&variables);
        let dual_value = sign * res.dobj;

        let max_equality_residual = self
            .equalities
            .iter()
            .map(|eq| {
                let lhs: f64 = eq.terms.iter().map(|(v, a)| a.inner(&variables[v.0])).sum();
                (lhs - eq.rhs).abs()
            })
            .fold(0.0, f64::max);
        let min_psd_eigenvalue = self
            .lmi
            .slack(&res.y)
            .into_iter()
            .map(|f| {
                nalgebra::SymmetricEigen::new(f)
                    .eigenvalues
                    .iter()
                    .fold(f64::INFINITY, |a, &v| a.min(v))
            })
            .fold(f64::INFINITY, f64::min);
        // ⟨X_emb, F_emb⟩ = 2 Re tr(Z F), so the complex multiplier is 2Z.
        let multipliers = res
            .x
            .iter()
            .map(|x| HermitianOperator::symmetrize(complexify(x) * C64::new(2.0, 0.0)))
            .collect();

        ConicSolution {
            status,
            primal_value,
            dual_value,
            gap: (primal_value - dual_value).abs(),
            relative_gap: res.rel_gap,
            feasibility_residual: res.dinf,
            multiplier_residual: res.pinf,
            variables,
            multipliers,
            equality_multipliers: res.w.iter().copied().collect(),
            max_equality_residual,
            min_psd_eigenvalue,
            iterations: res.iterations,
            wall_time: start.elapsed(),
            message: res.message,
        }
    }

    /// Writes the compiled real program in SDPA sparse format.
    ///
    /// SDPA solves `min cᵀx s.t. Σ F_i x_i − F_0 ⪰ 0`; the internal form
    /// `max bᵀy s.t. C − Σ y_i A_i ⪰ 0` maps to `c = −b`, `F_i = −A_i`,
    /// `F_0 = −C`. Equalities `Ey = f` become a trailing diagonal (LP) block
    /// of size `2p` holding `Ey − f ≥ 0` and `f − Ey ≥ 0`. A minimization
    /// program therefore appears with its objective negated twice, i.e.
    /// unchanged.
    pub fn to_sdpa(&self) -> String {
        let lmi = &self.lmi;
        let p = lmi.p();
        let mut out = String::new();
        writeln!(out, "* entbound conic program: {} blocks, {} equalities", lmi.block_dims.len(), p).unwrap();
        writeln!(out, "{}", lmi.m()).unwrap();
        let nblocks = lmi.block_dims.len() + usize::from(p > 0);
        writeln!(out, "{nblocks}").unwrap();
        let mut sizes: Vec<String> = lmi.block_dims.iter().map(|d| d.to_string()).collect();
        if p > 0 {
            sizes.push(format!("-{}", 2 * p));
        }
        writeln!(out, "{}", sizes.join(" ")).unwrap();
        let c: Vec<String> = lmi.b.iter().map(|v| format!("{:.16e}", -v)).collect();
        writeln!(out, "{}", c.join(" ")).unwrap();

        let mut entry = |mat: usize, blk: usize, r: usize, c: usize, v: f64| {
            if r <= c && v != 0.0 {
                writeln!(out, "{mat} {} {} {} {v:.16e}", blk + 1, r + 1, c + 1).unwrap();
            }
        };
        for (blk, cm) in lmi.c.iter().enumerate() {
            for c in 0..cm.ncols() {
                for r in 0..=c {
                    entry(0, blk, r, c, -cm[(r, c)]);
                }
            }
        }
        let lp = lmi.block_dims.len();
        for k in 0..p {
            entry(0, lp, k, k, lmi.f[k]);
            entry(0, lp, p + k, p + k, -lmi.f[k]);
        }
        for (i, blocks) in lmi.a.iter().enumerate() {
            for (blk, t) in blocks {
                for &(r, c, v) in t {
                    entry(i + 1, *blk, r, c, -v);
                }
            }
            for k in 0..p {
                entry(i + 1, lp, k, k, lmi.e[(k, i)]);
                entry(i + 1, lp, p + k, p + k, -lmi.e[(k, i)]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{op_norm, CVector};

    fn diag(d: &[f64]) -> HermitianOperator {
        HermitianOperator::from_real_diagonal(d)
    }

    fn assert_feasible(sol: &ConicSolution, cfg: &SolverConfig) {
        assert!(sol.min_psd_eigenvalue >= -cfg.feas_tol, "min eig {}", sol.min_psd_eigenvalue);
        assert!(sol.max_equality_residual <= cfg.feas_tol, "eq res {}", sol.max_equality_residual);
    }

    #[test]
    fn identity_optimum() {
        for n in [1, 3, 5] {
            let mut b = ProgramBuilder::new(Sense::Maximize);
            let x = b.hermitian("X", n);
            b.objective(x, HermitianOperator::identity(n));
            b.psd("X>=0", AffineHermitian::new(n).term(x, 1.0));
            b.psd("I-X>=0", AffineHermitian::new(n).constant(HermitianOperator::identity(n)).term(x, -1.0));
            let p = b.build().unwrap();
            let cfg = SolverConfig::default();
            let sol = p.solve(&cfg);
            assert_eq!(sol.status, SolveStatus::Optimal);
            assert!((sol.primal_value - n as f64).abs() < 1e-7, "{}", sol.primal_value);
            assert!(sol.primal_value <= sol.dual_value + cfg.gap_tol);
            assert_feasible(&sol, &cfg);
        }
    }

    #[test]
    fn operator_norm_epigraph() {
        let h = diag(&[1.0, 3.0, 2.0]);
        let mut b = ProgramBuilder::new(Sense::Minimize);
        let t = b.scalar("t");
        b.objective(t, HermitianOperator::identity(1));
        b.psd("tI-H", AffineHermitian::new(3).scaled_identity(t, 1.0).constant(-&h));
        let p = b.build().unwrap();
        let cfg = SolverConfig::default();
        let sol = p.solve(&cfg);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.scalar(t) - 3.0).abs() < 1e-7);
        assert!(sol.primal_value >= sol.dual_value - cfg.gap_tol);
        assert_feasible(&sol, &cfg);
    }

    #[test]
    fn complex_data_is_respected() {
        // min t s.t. tI ⪰ H for H = [[0, -i],[i, 0]] (eigenvalues ±1)
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = C64::new(0.0, -1.0);
        m[(1, 0)] = C64::new(0.0, 1.0);
        let h = HermitianOperator::symmetrize(m);
        let mut b = ProgramBuilder::new(Sense::Minimize);
        let t = b.scalar("t");
        b.objective(t, HermitianOperator::identity(1));
        b.psd("tI-H", AffineHermitian::new(2).scaled_identity(t, 1.0).constant(-&h));
        let sol = b.build().unwrap().solve(&SolverConfig::default());
        assert!((sol.primal_value - 1.0).abs() < 1e-7);

        // max Re tr(H X) over density matrices picks the top eigenvector of H
        let mut b = ProgramBuilder::new(Sense::Maximize);
        let x = b.hermitian("X", 2);
        b.objective(x, h.clone());
        b.equality(vec![(x, HermitianOperator::identity(2))], 1.0);
        b.psd("X>=0", AffineHermitian::new(2).term(x, 1.0));
        let sol = b.build().unwrap().solve(&SolverConfig::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_value - 1.0).abs() < 1e-7);
        let xs = sol.var(x);
        assert!((xs.inner(&h) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn infeasible_and_unbounded_are_statuses() {
        // R ⪰ 2|0⟩⟨0| and R ⪯ I cannot both hold
        let mut b = ProgramBuilder::new(Sense::Minimize);
        let r = b.hermitian("R", 2);
        b.objective(r, HermitianOperator::identity(2));
        b.psd("R-P", AffineHermitian::new(2).term(r, 1.0).constant(diag(&[-2.0, 0.0])));
        b.psd("I-R", AffineHermitian::new(2).term(r, -1.0).constant(HermitianOperator::identity(2)));
        let sol = b.build().unwrap().solve(&SolverConfig::default());
        assert_eq!(sol.status, SolveStatus::Infeasible);

        let mut b = ProgramBuilder::new(Sense::Maximize);
        let t = b.scalar("t");
        b.objective(t, HermitianOperator::identity(1));
        b.psd("t>=0", AffineHermitian::new(1).term(t, 1.0));
        let sol = b.build().unwrap().solve(&SolverConfig::default());
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn build_errors() {
        let mut b = ProgramBuilder::new(Sense::Maximize);
        let x = b.hermitian("X", 3);
        b.psd("bad", AffineHermitian::new(2).term(x, 1.0));
        assert!(matches!(b.build(), Err(ConicError::Dimension { .. })));

        let mut b = ProgramBuilder::new(Sense::Maximize);
        let x = b.hermitian("X", 2);
        let y = b.hermitian("Y", 2);
        b.objective(y, HermitianOperator::identity(2));
        b.psd("X>=0", AffineHermitian::new(2).term(x, 1.0));
        assert_eq!(b.build().unwrap_err(), ConicError::UnconstrainedVariable("Y".into()));

        let mut b = ProgramBuilder::new(Sense::Maximize);
        let x = b.hermitian("X", 2);
        b.psd("sI", AffineHermitian::new(2).scaled_identity(x, 1.0));
        assert!(matches!(b.build(), Err(ConicError::NotScalar(..))));

        assert_eq!(ProgramBuilder::new(Sense::Maximize).build().unwrap_err(), ConicError::NoConstraints);
    }

    #[test]
    fn scaling_covariance() {
        // max tr(ρR) s.t. R ⪰ 0, I − R ⪰ 0 with objective scaled by 1 and 7
        let rho = diag(&[0.7, 0.2, 0.1]);
        let solve = |c: f64| {
            let mut b = ProgramBuilder::new(Sense::Maximize);
            let r = b.hermitian("R", 3);
            b.objective(r, rho.scale(c));
            b.psd("R", AffineHermitian::new(3).term(r, 1.0));
            b.psd("I-R", AffineHermitian::new(3).term(r, -1.0).constant(HermitianOperator::identity(3)));
            let sol = b.build().unwrap().solve(&SolverConfig::default());
            (sol.primal_value, sol.var(r).clone())
        };
        let (v1, r1) = solve(1.0);
        let (v7, r7) = solve(7.0);
        assert!((v7 - 7.0 * v1).abs() < 1e-6);
        assert!(r1.max_abs_diff(&r7) < 1e-6);
    }

    #[test]
    fn real_embedding_examples() {
        let h = diag(&[1.0, -2.0]);
        let e = real_embedding(&h);
        assert_eq!(e, DMatrix::from_row_slice(4, 4, &[
            1.0, 0.0, 0.0, 0.0,
            0.0, -2.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, -2.0,
        ]));
        // σ_y-type Hermitian: eigenvalues ±1, each doubled in the embedding
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = C64::new(0.0, -1.0);
        m[(1, 0)] = C64::new(0.0, 1.0);
        let h = HermitianOperator::symmetrize(m);
        let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(real_embedding(&h)).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        let back = HermitianOperator::symmetrize(complexify(&real_embedding(&h)));
        assert!(back.max_abs_diff(&h) < 1e-16);
    }

    #[test]
    fn congruence_map() {
        // min t s.t. tI ⪰ K X K†, X ⪰ diag(1, 2): optimum is ‖K diag(1,2) K†‖
        let k = CMatrix::from_fn(3, 2, |r, c| C64::new((r + 2 * c) as f64 * 0.3 - 0.2, 0.1 * r as f64));
        let mut b = ProgramBuilder::new(Sense::Minimize);
        let t = b.scalar("t");
        let x = b.hermitian("X", 2);
        b.objective(t, HermitianOperator::identity(1));
        b.psd("X-D", AffineHermitian::new(2).term(x, 1.0).constant(diag(&[-1.0, -2.0])));
        b.psd(
            "tI-KXK",
            AffineHermitian::new(3)
                .scaled_identity(t, 1.0)
                .mapped(x, vec![LinearMap::Congruence(k.clone())], -1.0),
        );
        let sol = b.build().unwrap().solve(&SolverConfig::default());
        let expect = op_norm(&diag(&[1.0, 2.0]).congruence(&k));
        assert!((sol.primal_value - expect).abs() < 1e-7, "{} vs {expect}", sol.primal_value);
    }

    #[test]
    fn solution_basis_round_trip() {
        let v = CVector::from_vec(vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.5), C64::new(0.7, 0.0)]);
        let h = HermitianOperator::outer(&v);
        let coords: Vec<f64> = hermitian_basis(3).iter().map(|el| {
            // coordinates of h: diagonal entries, then Re and Im of upper entries
            let (r, c, z) = el[0];
            if r == c || z.im == 0.0 { h.matrix()[(r, c)].re } else { h.matrix()[(r, c)].im }
        }).collect();
        let back = coords_to_matrix(3, &coords);
        assert!(HermitianOperator::symmetrize(back).max_abs_diff(&h) < 1e-15);
    }

    #[test]
    fn sdpa_dump_of_small_program() {
        let mut b = ProgramBuilder::new(Sense::Maximize);
        let t = b.scalar("t");
        b.objective(t, HermitianOperator::identity(1));
        b.equality(vec![(t, HermitianOperator::identity(1))], 0.5);
        b.psd("1-t", AffineHermitian::new(1).constant(HermitianOperator::identity(1)).term(t, -1.0));
        let text = b.build().unwrap().to_sdpa();
        let expect = "\
* entbound conic program: 1 blocks, 1 equalities
1
2
2 -2
-1.0000000000000000e0
0 1 1 1 -1.0000000000000000e0
0 1 2 2 -1.0000000000000000e0
0 2 1 1 5.0000000000000000e-1
0 2 2 2 -5.0000000000000000e-1
1 1 1 1 -1.0000000000000000e0
1 1 2 2 -1.0000000000000000e0
1 2 1 1 1.0000000000000000e0
1 2 2 2 -1.0000000000000000e0
";
        assert_eq!(text, expect);
    }
}
