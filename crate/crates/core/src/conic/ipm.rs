//! Primal-dual interior-point engine for real block-diagonal LMIs.
//!
//! Internal standard form, with free `y ∈ ℝ^m` and `w ∈ ℝ^p`:
//!
//! ```text
//!   (D)  max bᵀy   s.t.  Σ_i y_i A_i + S = C,  S ⪰ 0,  E y = f
//!   (P)  min ⟨C,X⟩ + fᵀw   s.t.  𝒜(X) + Eᵀw = b,  X ⪰ 0
//! ```
//!
//! `(D)` is the user's program after real embedding. Search directions use the
//! HKM scaling with a Mehrotra predictor-corrector; the Schur complement
//! `M_ij = tr(A_i X A_j S⁻¹)` is assembled from the sparse `A_i` directly.
//! Infeasibility and unboundedness are detected from diverging iterates.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

/// Sparse symmetric block data: both triangles stored.
pub(crate) type Triplets = Vec<(usize, usize, f64)>;

#[derive(Clone, Debug)]
pub(crate) struct LmiProblem {
    pub block_dims: Vec<usize>,
    pub c: Vec<DMatrix<f64>>,
    /// Per variable: the blocks it touches and its coefficient entries there.
    pub a: Vec<Vec<(usize, Triplets)>>,
    pub b: DVector<f64>,
    pub e: DMatrix<f64>,
    pub f: DVector<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
    NumericalFailure,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct IpmSettings {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    pub verbose: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct IpmResult {
    pub status: IpmStatus,
    pub y: DVector<f64>,
    pub w: DVector<f64>,
    pub x: Vec<DMatrix<f64>>,
    pub dobj: f64,
    pub pinf: f64,
    pub dinf: f64,
    pub rel_gap: f64,
    pub iterations: usize,
    pub message: String,
}

const INFEAS_TOL: f64 = 1e-8;
const BLOWUP: f64 = 1e13;

impl LmiProblem {
    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn p(&self) -> usize {
        self.f.len()
    }

    /// `(𝒜K)_i = ⟨A_i, K⟩`.
    pub fn apply_a(&self, k: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            self.a.iter().map(|blocks| {
                blocks
                    .iter()
                    .map(|(blk, t)| t.iter().map(|&(r, c, v)| v * k[*blk][(r, c)]).sum::<f64>())
                    .sum()
            }),
        )
    }

    /// `𝒜*y = Σ_i y_i A_i`.
    pub fn apply_at(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self
            .block_dims
            .iter()
            .map(|&n| DMatrix::zeros(n, n))
            .collect();
        for (i, blocks) in self.a.iter().enumerate() {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            for (blk, t) in blocks {
                for &(r, c, v) in t {
                    out[*blk][(r, c)] += yi * v;
                }
            }
        }
        out
    }

    /// `C − 𝒜*y`, the LMI value at `y`.
    pub fn slack(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let ay = self.apply_at(y);
        self.c.iter().zip(ay).map(|(c, a)| c - a).collect()
    }

    fn ident(&self, scale: f64) -> Vec<DMatrix<f64>> {
        self.block_dims
            .iter()
            .map(|&n| DMatrix::identity(n, n) * scale)
            .collect()
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn fro(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn axpy(x: &[DMatrix<f64>], alpha: f64, d: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    x.iter().zip(d).map(|(a, b)| a + b * alpha).collect()
}

/// Largest `α` with `X + α dX ⪰ 0` (may be infinite); zero if `X` is not PD.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(ch) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = ch.l();
    let Some(y) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(z) = l.solve_lower_triangular(&y.transpose()) else {
        return 0.0;
    };
    let z = sym(z);
    let min = SymmetricEigen::new(z)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v));
    if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    }
}

fn max_step_blocks(x: &[DMatrix<f64>], dx: &[DMatrix<f64>]) -> f64 {
    x.iter()
        .zip(dx)
        .map(|(a, b)| max_step(a, b))
        .fold(f64::INFINITY, f64::min)
}

fn inverse_spd(s: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(s.clone()).map(|c| {
        let inv = c.inverse();
        sym(inv)
    })
}

struct Factor {
    chol: Cholesky<f64, nalgebra::Dyn>,
    /// `M⁻¹ Eᵀ` and the LU of `E M⁻¹ Eᵀ`, when there are equalities.
    eq: Option<(DMatrix<f64>, nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)>,
}

impl Factor {
    fn new(mut m: DMatrix<f64>, e: &DMatrix<f64>) -> Option<Self> {
        let n = m.nrows();
        let scale = (0..n).fold(0.0_f64, |a, i| a.max(m[(i, i)].abs())).max(1e-300);
        let mut chol = Cholesky::new(m.clone());
        let mut reg = 1e-15 * scale;
        while chol.is_none() && reg < 1e-6 * scale {
            for i in 0..n {
                m[(i, i)] += reg;
            }
            chol = Cholesky::new(m.clone());
            reg *= 100.0;
        }
        let chol = chol?;
        let eq = if e.nrows() > 0 {
            let w = chol.solve(&e.transpose());
            let k = e * &w;
            Some((w, k.lu()))
        } else {
            None
        };
        Some(Self { chol, eq })
    }

    /// Solves `[M Eᵀ; E 0][dy; dw] = [h; re]`.
    fn solve(&self, e: &DMatrix<f64>, h: &DVector<f64>, re: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let u = self.chol.solve(h);
        match &self.eq {
            None => Some((u, DVector::zeros(0))),
            Some((w, lu)) => {
                let rhs = e * &u - re;
                let dw = lu.solve(&rhs)?;
                let dy = u - w * &dw;
                Some((dy, dw))
            }
        }
    }
}

struct Schur<'a> {
    prob: &'a LmiProblem,
    /// Per block: the variables touching it, in increasing order.
    users: Vec<Vec<(usize, usize)>>,
}

impl<'a> Schur<'a> {
    fn new(prob: &'a LmiProblem) -> Self {
        let mut users = vec![Vec::new(); prob.block_dims.len()];
        for (i, blocks) in prob.a.iter().enumerate() {
            for (k, (blk, _)) in blocks.iter().enumerate() {
                users[*blk].push((i, k));
            }
        }
        Self { prob, users }
    }

    fn assemble(&self, x: &[DMatrix<f64>], sinv: &[DMatrix<f64>]) -> DMatrix<f64> {
        let m = self.prob.m();
        let mut out = DMatrix::zeros(m, m);
        for (blk, users) in self.users.iter().enumerate() {
            let n = self.prob.block_dims[blk];
            let xb = &x[blk];
            let sb = &sinv[blk];
            let mut g = DMatrix::<f64>::zeros(n, n);
            for &(j, kj) in users {
                // G = X A_j S⁻¹
                g.fill(0.0);
                for &(c, d, u) in &self.prob.a[j][kj].1 {
                    for col in 0..n {
                        let sv = u * sb[(d, col)];
                        if sv == 0.0 {
                            continue;
                        }
                        for row in 0..n {
                            g[(row, col)] += xb[(row, c)] * sv;
                        }
                    }
                }
                for &(i, ki) in users {
                    if i > j {
                        break;
                    }
                    let val: f64 = self.prob.a[i][ki]
                        .1
                        .iter()
                        .map(|&(a, b, v)| v * g[(b, a)])
                        .sum();
                    out[(i, j)] += val;
                }
            }
        }
        for j in 0..m {
            for i in 0..j {
                out[(j, i)] = out[(i, j)];
            }
        }
        out
    }
}

pub(crate) fn solve(prob: &LmiProblem, cfg: IpmSettings) -> IpmResult {
    let start = Instant::now();
    let m = prob.m();
    let p = prob.p();
    let nsum: usize = prob.block_dims.iter().sum();

    let norm_b = prob.b.amax();
    let norm_c = fro(&prob.c);
    let norm_f = prob.f.amax();
    let a_norms: Vec<f64> = prob
        .a
        .iter()
        .map(|blocks| {
            blocks
                .iter()
                .flat_map(|(_, t)| t.iter().map(|e| e.2 * e.2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();

    let nf = nsum as f64;
    let mut xi = nf.sqrt().max(10.0);
    for (k, an) in a_norms.iter().enumerate() {
        xi = xi.max(nf * (1.0 + prob.b[k].abs()) / (1.0 + an));
    }
    let eta = nf
        .sqrt()
        .max(10.0)
        .max(norm_c)
        .max(a_norms.iter().fold(0.0_f64, |a, &v| a.max(v)));

    let mut x = prob.ident(xi);
    let mut s = prob.ident(eta);
    let mut y = DVector::zeros(m);
    let mut w = DVector::zeros(p);

    let schur = Schur::new(prob);
    let status;
    let mut message = String::new();
    let mut iterations = 0;
    let mut stalls = 0;

    let (mut pobj, mut dobj, mut pinf, mut dinf, mut rel_gap);
    loop {
        // residuals
        let ax = prob.apply_a(&x);
        let etw = prob.e.transpose() * &w;
        let rp = &prob.b - &ax - &etw;
        let aty = prob.apply_at(&y);
        let rd: Vec<DMatrix<f64>> = prob
            .c
            .iter()
            .zip(&s)
            .zip(&aty)
            .map(|((c, s), a)| c - s - a)
            .collect();
        let re = &prob.f - &prob.e * &y;
        pobj = prob.b.dot(&y);
        dobj = inner(&prob.c, &x) + prob.f.dot(&w);
        let xs = inner(&x, &s);
        let denom = 1.0 + pobj.abs() + dobj.abs();
        rel_gap = ((dobj - pobj).abs()).max(xs.max(0.0)) / denom;
        pinf = rp.amax() / (1.0 + norm_b);
        dinf = fro(&rd).max(if p > 0 { re.amax() / (1.0 + norm_f) } else { 0.0 });

        if cfg.verbose {
            eprintln!(
                "ipm {iterations:3}  pobj {pobj:+.10e}  dobj {dobj:+.10e}  gap {rel_gap:.2e}  pinf {pinf:.2e}  dinf {dinf:.2e}"
            );
        }
        if rel_gap <= cfg.gap_tol && pinf <= cfg.feas_tol && dinf <= cfg.feas_tol {
            status = IpmStatus::Optimal;
            break;
        }

        // certificates from diverging iterates
        let homog_x = (&ax + &etw).amax();
        if dobj < 0.0 && homog_x <= INFEAS_TOL * (-dobj) {
            status = IpmStatus::Infeasible;
            message = format!("primal infeasibility certificate: <C,X> + f'w = {dobj:e}");
            break;
        }
        if pobj > 0.0 {
            let dir: Vec<DMatrix<f64>> = aty.iter().zip(&s).map(|(a, s)| a + s).collect();
            let ey = if p > 0 { (&prob.e * &y).amax() } else { 0.0 };
            if fro(&dir) <= INFEAS_TOL * pobj && ey <= INFEAS_TOL * pobj {
                status = IpmStatus::Unbounded;
                message = format!("unbounded direction with b'y = {pobj:e}");
                break;
            }
        }
        let size = x.iter().chain(&s).fold(0.0_f64, |a, b| a.max(b.amax()));
        if size > BLOWUP || !size.is_finite() {
            status = IpmStatus::NumericalFailure;
            message = format!("iterates diverged (max entry {size:e}) without a certificate");
            break;
        }
        if iterations >= cfg.max_iter {
            status = IpmStatus::MaxIter;
            message = format!("stopped after {iterations} iterations");
            break;
        }

        let sinv: Option<Vec<DMatrix<f64>>> = s.iter().map(inverse_spd).collect();
        let Some(sinv) = sinv else {
            status = IpmStatus::NumericalFailure;
            message = "dual slack lost positive definiteness".into();
            break;
        };
        let mmat = schur.assemble(&x, &sinv);
        let Some(factor) = Factor::new(mmat, &prob.e) else {
            status = IpmStatus::NumericalFailure;
            message = "Schur complement factorization failed".into();
            break;
        };

        let mu = xs / nf;
        // 𝒜(X Rd S⁻¹) is shared by predictor and corrector
        let xrds: Vec<DMatrix<f64>> = x
            .iter()
            .zip(&rd)
            .zip(&sinv)
            .map(|((x, r), si)| x * r * si)
            .collect();
        let a_xrds = prob.apply_a(&xrds);
        let b_minus = &prob.b - &etw;

        let direction = |target: &[DMatrix<f64>]| -> Option<(DVector<f64>, DVector<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
            let h = &b_minus - prob.apply_a(target) + &a_xrds;
            let (dy, dw) = factor.solve(&prob.e, &h, &re)?;
            let ady = prob.apply_at(&dy);
            let ds: Vec<DMatrix<f64>> = rd.iter().zip(&ady).map(|(r, a)| r - a).collect();
            let dx: Vec<DMatrix<f64>> = target
                .iter()
                .zip(&x)
                .zip(&ds)
                .zip(&sinv)
                .map(|(((t, x), d), si)| t - x - sym(x * d * si))
                .collect();
            Some((dy, dw, dx, ds))
        };

        let zero: Vec<DMatrix<f64>> = prob.ident(0.0);
        let Some((_, _, dxp, dsp)) = direction(&zero) else {
            status = IpmStatus::NumericalFailure;
            message = "predictor solve failed".into();
            break;
        };
        let ap = max_step_blocks(&x, &dxp).min(1.0);
        let ad = max_step_blocks(&s, &dsp).min(1.0);
        let xs_pred = inner(&axpy(&x, ap, &dxp), &axpy(&s, ad, &dsp));
        let expon = (3.0 * ap.min(ad).powi(2)).max(1.0);
        let sigma = (xs_pred / xs).max(0.0).powf(expon).min(1.0);

        let target: Vec<DMatrix<f64>> = sinv
            .iter()
            .zip(&dxp)
            .zip(&dsp)
            .map(|((si, dx), ds)| si * (sigma * mu) - sym(dx * ds * si))
            .collect();
        let Some((dy, dw, dx, ds)) = direction(&target) else {
            status = IpmStatus::NumericalFailure;
            message = "corrector solve failed".into();
            break;
        };
        let gamma = 0.9 + 0.09 * ap.min(ad);
        let ap = (gamma * max_step_blocks(&x, &dx)).min(1.0);
        let ad = (gamma * max_step_blocks(&s, &ds)).min(1.0);

        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls >= 3 {
                status = IpmStatus::NumericalFailure;
                message = "step lengths collapsed".into();
                break;
            }
        } else {
            stalls = 0;
        }

        x = axpy(&x, ap, &dx);
        w += dw * ap;
        s = axpy(&s, ad, &ds);
        y += dy * ad;
        iterations += 1;
    }

    if cfg.verbose {
        eprintln!(
            "ipm done: {status:?} after {iterations} iterations in {:.3}s {message}",
            start.elapsed().as_secs_f64()
        );
    }
    IpmResult {
        status,
        y,
        w,
        x,
        dobj,
        pinf,
        dinf,
        rel_gap,
        iterations,
        message,
    }
}
