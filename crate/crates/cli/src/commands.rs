//! Command implementations. Each returns the report text and any side files;
//! writing them is left to `main`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use entbound::measures::{
    combine_m, e_w, log_negativity, m_dual, m_primal, nonadditivity_experiment,
    rains_closed_form, ree_upper, tight_case, w0_rate, MeasureResult, PptCheck,
};
use entbound::states::{
    parse_state, rho_alpha, serialize_state, BipartiteState, IsoOrbitParams, RHO_WINDOW,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::{Cli, Command, MeasureArg, RunConfig};
use crate::error::{CliError, EXIT_OK, EXIT_VERIFY};
use crate::family::Family;

/// Result of a successful command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: String,
    /// Extra files to write, e.g. certificate states.
    pub files: Vec<(PathBuf, String)>,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(report: String) -> Self {
        Self {
            report,
            files: Vec::new(),
            exit_code: EXIT_OK,
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = RunConfig::from_args(&cli.global)?;
    match &cli.command {
        Command::Measure { state, which } => cmd_measure(&read_state(state)?, which, &cfg),
        Command::SweepFig1 { rmin, rmax, steps } => cmd_sweep_fig1(*rmin, *rmax, *steps, &cfg),
        Command::SweepFig2 {
            amin,
            amax,
            steps,
            alphas,
        } => {
            let grid = match alphas {
                Some(a) => a.clone(),
                None => linear_grid(*amin, *amax, *steps)?,
            };
            cmd_sweep_fig2(&grid, &cfg)
        }
        Command::Verify { state, family } => {
            let (rho, fam) = match (state, family) {
                (Some(path), _) => (read_state(path)?, None),
                (None, Some(spec)) => {
                    let fam = Family::parse(spec)?;
                    (fam.build(cfg.seed)?, Some(fam))
                }
                (None, None) => return Err(CliError::Input("need --state or --family".into())),
            };
            cmd_verify(&rho, fam.as_ref().and_then(Family::rains_parameter), &cfg)
        }
        Command::Nonadditivity { r, certificate } => {
            let path = certificate.clone().unwrap_or_else(|| match &cfg.out {
                Some(out) => out.with_extension("sigma.json"),
                None => PathBuf::from("nonadditivity-sigma.json"),
            });
            cmd_nonadditivity(*r, &path, &cfg)
        }
    }
}

pub fn read_state(path: &Path) -> Result<BipartiteState, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(parse_state(&text)?)
}

/// `steps` evenly spaced points from `lo` to `hi`; a single step gives `lo`.
pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if steps == 0 {
        return Err(CliError::Input("--steps must be positive".into()));
    }
    if !(lo <= hi) {
        return Err(CliError::Input(format!("empty range [{lo}, {hi}]")));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..steps)
        .map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64)
        .collect())
}

fn header(command: &str, cfg: &RunConfig) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("tool".into(), json!("entbound"));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("command".into(), json!(command));
    m.insert(
        "config".into(),
        json!({
            "tol": cfg.tol,
            "max_iters": cfg.max_iters,
            "seed": cfg.seed,
            "base": cfg.base_name(),
            "jobs": cfg.jobs,
        }),
    );
    m
}

fn finish(m: serde_json::Map<String, Value>) -> String {
    let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("JSON values serialize");
    s.push('\n');
    s
}

fn unit(r: &MeasureResult) -> &'static str {
    if r.kind.is_logarithmic() {
        r.base.unit()
    } else {
        ""
    }
}

fn result_json(r: &MeasureResult, cfg: &RunConfig) -> Value {
    let solver: Vec<Value> = r
        .solver
        .iter()
        .map(|s| {
            let mut v = json!({
                "status": format!("{:?}", s.status),
                "iterations": s.iterations,
                "gap": s.gap,
                "max_equality_residual": s.max_equality_residual,
                "min_psd_eigenvalue": s.min_psd_eigenvalue,
            });
            if cfg.timings {
                v["wall_time_s"] = json!(s.wall_time.as_secs_f64());
            }
            v
        })
        .collect();
    json!({
        "measure": r.kind.label(),
        "value": if r.infinite { Value::Null } else { json!(r.value) },
        "infinite": r.infinite,
        "unit": unit(r),
        "error_bar": r.error_bar,
        "solver": solver,
        "notes": r.notes,
    })
}

pub fn cmd_measure(
    rho: &BipartiteState,
    which: &[MeasureArg],
    cfg: &RunConfig,
) -> Result<Outcome, CliError> {
    let mcfg = cfg.measure();
    let mut results = Vec::new();
    for w in which {
        let start = Instant::now();
        let mut v = match w {
            MeasureArg::Em => {
                let r = combine_m(m_primal(rho, &mcfg)?, m_dual(rho, &mcfg)?, cfg.base)?;
                result_json(&r, cfg)
            }
            MeasureArg::Ew => result_json(&e_w(rho, &mcfg)?, cfg),
            MeasureArg::W0 => result_json(&w0_rate(rho, &mcfg)?, cfg),
            MeasureArg::Logneg => result_json(&log_negativity(rho, cfg.base), cfg),
            MeasureArg::Mprimal => result_json(&m_primal(rho, &mcfg)?, cfg),
            MeasureArg::Mdual => result_json(&m_dual(rho, &mcfg)?, cfg),
            MeasureArg::Ree => {
                let (r, trace) = ree_upper(rho, &cfg.fw())?;
                let mut v = result_json(&r, cfg);
                v["fw_iterations"] = json!(trace.iterations.len());
                v["fw_converged"] = json!(trace.converged);
                v["fw_gap"] = json!(trace.iterations.last().map(|s| s.fw_gap));
                v
            }
        };
        if cfg.timings {
            v["wall_time_s"] = json!(start.elapsed().as_secs_f64());
        }
        results.push(v);
    }
    let mut m = header("measure", cfg);
    m.insert(
        "state".into(),
        json!({ "dA": rho.shape().da, "dB": rho.shape().db }),
    );
    m.insert("results".into(), Value::Array(results));
    Ok(Outcome::ok(finish(m)))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Input(format!("cannot start {jobs} workers: {e}")))
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_text(header: &[String], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

fn suffixed(cfg: &RunConfig, name: &str) -> String {
    format!("{name}_{}", cfg.base.unit())
}

pub fn cmd_sweep_fig1(rmin: f64, rmax: f64, steps: usize, cfg: &RunConfig) -> Result<Outcome, CliError> {
    if rmin < RHO_WINDOW.0 || rmax > RHO_WINDOW.1 {
        return Err(CliError::Input(format!(
            "r range [{rmin}, {rmax}] leaves [{}, {}]",
            RHO_WINDOW.0, RHO_WINDOW.1
        )));
    }
    let grid = linear_grid(rmin, rmax, steps)?;
    let fw = cfg.fw();
    let rows: Result<Vec<Vec<String>>, CliError> = pool(cfg.jobs)?.install(|| {
        grid.par_iter()
            .map(|&r| {
                let start = Instant::now();
                let rep = nonadditivity_experiment(r, &fw)?;
                let mut row = vec![
                    fmt(r),
                    fmt(rep.two_r),
                    fmt(rep.ree_upper_tensor2),
                    fmt(rep.gap),
                    rep.trace.converged.to_string(),
                ];
                if cfg.timings {
                    row.push(fmt(start.elapsed().as_secs_f64()));
                }
                Ok(row)
            })
            .collect()
    });
    let mut head = vec![
        "r".to_string(),
        suffixed(cfg, "two_R"),
        suffixed(cfg, "ree_upper_tensor2"),
        suffixed(cfg, "gap"),
        "fw_converged".to_string(),
    ];
    if cfg.timings {
        head.push("wall_time_s".into());
    }
    Ok(Outcome::ok(csv_text(&head, rows?)))
}

pub fn cmd_sweep_fig2(grid: &[f64], cfg: &RunConfig) -> Result<Outcome, CliError> {
    if grid.is_empty() {
        return Err(CliError::Input("empty alpha grid".into()));
    }
    if let Some(a) = grid.iter().find(|&&a| !(a > 0.0 && a <= 0.5)) {
        return Err(CliError::Input(format!("alpha {a} outside (0, 0.5]")));
    }
    let mcfg = cfg.measure();
    let rows: Result<Vec<Vec<String>>, CliError> = pool(cfg.jobs)?.install(|| {
        grid.par_iter()
            .map(|&alpha| {
                let start = Instant::now();
                let rho = rho_alpha(IsoOrbitParams::new(alpha)?)?;
                let ew = e_w(&rho, &mcfg)?;
                let w0 = w0_rate(&rho, &mcfg)?;
                let em = combine_m(m_primal(&rho, &mcfg)?, m_dual(&rho, &mcfg)?, cfg.base)?;
                let mut row = vec![fmt(alpha), fmt(ew.value), fmt(w0.value), fmt(em.value)];
                if cfg.timings {
                    row.push(fmt(start.elapsed().as_secs_f64()));
                }
                Ok(row)
            })
            .collect()
    });
    let mut head = vec![
        "alpha".to_string(),
        suffixed(cfg, "e_w"),
        suffixed(cfg, "e0_one_copy"),
        suffixed(cfg, "e_m"),
    ];
    if cfg.timings {
        head.push("wall_time_s".into());
    }
    Ok(Outcome::ok(csv_text(&head, rows?)))
}

/// Tolerance of each inequality checked by `verify`.
pub const CHAIN_TOL: f64 = 1e-6;
/// Tolerance of the primal/dual agreement checked by `verify`.
pub const DUALITY_CHECK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    /// Non-negative iff the check passes.
    pub margin: f64,
}

impl Check {
    fn le(name: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            tolerance,
            margin: rhs + tolerance - lhs,
        }
    }

    fn eq(name: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            tolerance,
            margin: tolerance - (lhs - rhs).abs(),
        }
    }

    pub fn passed(&self) -> bool {
        self.margin >= 0.0
    }
}

/// All checks `verify` runs on one state, plus the tight-case diagnostics.
pub fn verify_checks(
    rho: &BipartiteState,
    rains_r: Option<f64>,
    cfg: &RunConfig,
) -> Result<(Vec<Check>, Value), CliError> {
    let mcfg = cfg.measure();
    let ln = log_negativity(rho, cfg.base);
    let ew = e_w(rho, &mcfg)?;
    let mp = m_primal(rho, &mcfg)?;
    let md = m_dual(rho, &mcfg)?;
    let (mpv, mdv) = (mp.value, md.value);
    let em = combine_m(mp, md, cfg.base)?;
    let w0 = w0_rate(rho, &mcfg)?;

    let mut checks = vec![
        Check::le("w0_rate <= e_m", w0.value, em.value, CHAIN_TOL),
        Check::le("e_m <= e_w", em.value, ew.value, CHAIN_TOL),
        Check::le("e_w <= log_negativity", ew.value, ln.value, CHAIN_TOL),
        Check::eq("m_primal == m_dual", mpv, mdv, DUALITY_CHECK_TOL),
    ];
    let tight = tight_case(rho)?;
    let tight_json = match &tight {
        Some(t) => {
            checks.push(Check::eq(
                "e_m == -log ||P^TB||_inf",
                em.value,
                t.predicted_e_m(cfg.base),
                CHAIN_TOL,
            ));
            json!({
                "found": true,
                "norm": t.norm,
                "eigenspace_dim": t.eigenspace_dim,
                "overlap": t.overlap,
            })
        }
        None => json!({ "found": false }),
    };
    if let Some(r) = rains_r {
        let rains = rains_closed_form(r, cfg.base)?;
        checks.push(Check::le("e_m <= rains_closed_form", em.value, rains.value, CHAIN_TOL));
    }
    let values = json!({
        "w0_rate": w0.value,
        "e_m": em.value,
        "e_w": ew.value,
        "log_negativity": ln.value,
        "m_primal": mpv,
        "m_dual": mdv,
        "tight_case": tight_json,
    });
    Ok((checks, values))
}

pub fn cmd_verify(rho: &BipartiteState, rains_r: Option<f64>, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (checks, values) = verify_checks(rho, rains_r, cfg)?;
    let passed = checks.iter().all(Check::passed);
    let mut m = header("verify", cfg);
    m.insert(
        "state".into(),
        json!({ "dA": rho.shape().da, "dB": rho.shape().db }),
    );
    m.insert("values".into(), values);
    m.insert(
        "checks".into(),
        Value::Array(
            checks
                .iter()
                .map(|c| {
                    json!({
                        "name": c.name,
                        "lhs": c.lhs,
                        "rhs": c.rhs,
                        "tolerance": c.tolerance,
                        "margin": c.margin,
                        "passed": c.passed(),
                    })
                })
                .collect(),
        ),
    );
    m.insert("passed".into(), json!(passed));
    Ok(Outcome {
        report: finish(m),
        files: Vec::new(),
        exit_code: if passed { EXIT_OK } else { EXIT_VERIFY },
    })
}

/// Feasibility tolerance a certificate must meet on re-validation.
pub const CERTIFICATE_TOL: f64 = 1e-9;

pub fn cmd_nonadditivity(r: f64, certificate: &Path, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let rep = nonadditivity_experiment(r, &cfg.fw())?;
    let last = rep.trace.iterations.last();
    let check = PptCheck::of(rep.certificate.op(), rep.certificate.shape())?;
    let mut m = header("nonadditivity", cfg);
    m.insert("r".into(), json!(r));
    m.insert("unit".into(), json!(cfg.base.unit()));
    m.insert("two_R".into(), json!(rep.two_r));
    m.insert("ree_upper_tensor2".into(), json!(rep.ree_upper_tensor2));
    m.insert("gap".into(), json!(rep.gap));
    m.insert("nonadditive".into(), json!(rep.gap > 0.0));
    m.insert("fw_converged".into(), json!(rep.trace.converged));
    m.insert("fw_iterations".into(), json!(rep.trace.iterations.len()));
    m.insert("fw_gap".into(), json!(last.map(|s| s.fw_gap)));
    m.insert("certificate_file".into(), json!(certificate.display().to_string()));
    m.insert(
        "certificate_check".into(),
        json!({
            "min_eigenvalue": check.min_eigenvalue,
            "min_pt_eigenvalue": check.min_pt_eigenvalue,
            "trace_error": check.trace_error,
            "valid": check.holds(CERTIFICATE_TOL),
        }),
    );
    if cfg.timings {
        m.insert("wall_time_s".into(), json!(start.elapsed().as_secs_f64()));
    }
    Ok(Outcome {
        report: finish(m),
        files: vec![(certificate.to_path_buf(), serialize_state(&rep.certificate))],
        exit_code: EXIT_OK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        assert_eq!(linear_grid(0.45, 0.5, 1).unwrap(), vec![0.45]);
        let g = linear_grid(0.0, 1.0, 5).unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(linear_grid(0.5, 0.4, 3).is_err());
        assert!(linear_grid(0.4, 0.5, 0).is_err());
    }

    #[test]
    fn check_margins() {
        assert!(Check::le("a", 1.0, 1.0 - 5e-7, 1e-6).passed());
        assert!(!Check::le("a", 1.0, 1.0 - 2e-6, 1e-6).passed());
        assert!(Check::eq("b", 0.5, 0.5 + 5e-8, 1e-7).passed());
        assert!(!Check::eq("b", 0.5, 0.5 - 2e-7, 1e-7).passed());
    }
}
