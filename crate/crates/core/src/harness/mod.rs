//! Experiment runner: replica pool, identity reports, CSV persistence and the
//! drivers behind each CLI subcommand.

pub mod config;
pub mod identities;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::canonical::JumpConfiguration;
use crate::chaos::ProductKernel;
use crate::cho::{cho_reconstruct, ChoConfig, ChoReport};
use crate::error::{Error, Result};
use crate::sampler::{sample_config, substream};
use crate::volterra::{
    big_jump_sum, case_classify, default_truncation, dom_phi_check, hypotheses_check, vmav_integral,
    vmav_integral_pathwise, DomPhiReport, HypothesesReport, VmavSpec,
};

pub use config::{ExperimentConfig, OUTPUT_ENV};
pub use identities::{IdentityInfo, IdentityKind, Setup, REGISTRY};

/// Version tag written as the first line of every CSV.
pub const CSV_VERSION: &str = "jumpcalc-csv v1";

/// Truncation error target used when a Volterra run does not fix its cutoff.
const VOLTERRA_TRUNCATION_TARGET: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub identity: &'static str,
    pub anchor: &'static str,
    pub kind: IdentityKind,
    /// Human-readable pass rule with its constants filled in.
    pub criterion: String,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_stderr: f64,
    pub rhs_stderr: f64,
    pub abs_diff: f64,
    pub threshold: f64,
    /// Worst per-draw relative discrepancy (pathwise identities).
    pub max_rel_discrepancy: Option<f64>,
    pub oracle: Option<f64>,
    pub divergences: usize,
    pub replicas: usize,
    pub pass: bool,
    /// Seconds; reported on the console, never written to CSV.
    #[serde(skip)]
    pub wall_time: f64,
    #[serde(skip)]
    pub rows: Vec<(f64, f64)>,
}

fn mean_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Divergent quadratures and rejected evaluations count against a replica
/// instead of aborting the run.
fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::Divergent(_) | Error::Rejections { .. } | Error::DomainCheck { .. })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param(format!("cannot build worker pool: {e}")))
}

/// Base seed of one identity, so suite members never share streams.
fn identity_seed(seed: u64, info: &IdentityInfo) -> u64 {
    let idx = REGISTRY.iter().position(|i| i == info).unwrap_or(REGISTRY.len()) as u64;
    seed ^ (idx + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn build_setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let ctx = cfg.context()?;
    let chaos = cfg.chaos.clone().unwrap_or_else(|| cfg.default_chaos());
    Ok(Setup {
        f: cfg.functional.build(&ctx)?,
        g: cfg.second_functional.build(&ctx)?,
        u: cfg.field.build(&ctx)?,
        kernel: ProductKernel::with_extra(chaos.factors, chaos.extra, &ctx.measure)?,
        tol: cfg.tolerances.quadrature,
        cho_inner: cfg.cho.as_ref().map_or(16, |c| c.check_inner),
        ctx,
    })
}

/// Runs one registered identity under `cfg`.
pub fn verify_identity(name: &str, cfg: &ExperimentConfig) -> Result<IdentityReport> {
    let info = identities::lookup(name)?;
    let setup = build_setup(cfg)?;
    let pool = pool(cfg.workers)?;
    run_identity(info, &setup, cfg, &pool)
}

fn run_identity(
    info: &'static IdentityInfo,
    setup: &Setup,
    cfg: &ExperimentConfig,
    pool: &rayon::ThreadPool,
) -> Result<IdentityReport> {
    let start = Instant::now();
    let base = identity_seed(cfg.seed, info);
    let n = cfg.replicas as u64;
    let outcomes: Vec<Result<(f64, f64)>> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|r| match info.kind {
                // Common random numbers: one stream carries ω, θ and any
                // auxiliary draws.
                IdentityKind::Pathwise => {
                    let mut rng = substream(base, r);
                    let w = setup.sample_config(&mut rng)?;
                    let theta = setup.sample_theta(&mut rng)?;
                    identities::pathwise_sides(info, setup, &w, theta, &mut rng)
                }
                // Independent streams for the two sides.
                IdentityKind::Expectation => {
                    let wl = setup.sample_config(&mut substream(base, 2 * r))?;
                    let wr = setup.sample_config(&mut substream(base, 2 * r + 1))?;
                    Ok((
                        identities::expectation_lhs(info, setup, &wl)?,
                        identities::expectation_rhs(info, setup, &wr)?,
                    ))
                }
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut divergences = 0;
    for o in outcomes {
        match o {
            Ok(pair) => rows.push(pair),
            Err(e) if is_divergence(&e) => {
                divergences += 1;
                rows.push((f64::NAN, f64::NAN));
            }
            Err(e) => return Err(e),
        }
    }
    let good = || rows.iter().filter(|(l, r)| l.is_finite() && r.is_finite());
    let (lhs, lhs_stderr) = mean_stderr(good().map(|p| p.0));
    let (rhs, rhs_stderr) = mean_stderr(good().map(|p| p.1));
    let abs_diff = (lhs - rhs).abs();
    let tol = &cfg.tolerances;
    let oracle = cfg.oracles.get(info.name).copied();
    let (criterion, threshold, max_rel, mut pass) = match info.kind {
        IdentityKind::Pathwise => {
            let worst = good().map(|&(l, r)| identities::relative_discrepancy(l, r)).fold(0.0, f64::max);
            (
                format!("max relative discrepancy <= {:e}", tol.pathwise_rel),
                tol.pathwise_rel,
                Some(worst),
                worst <= tol.pathwise_rel,
            )
        }
        IdentityKind::Expectation => {
            let threshold = tol.sigma * lhs_stderr.hypot(rhs_stderr);
            let within = |diff: f64, se: f64| diff == 0.0 || diff <= tol.sigma * se;
            let mut pass = within(abs_diff, lhs_stderr.hypot(rhs_stderr));
            let mut criterion = format!("|lhs - rhs| <= {} * sqrt(se_lhs^2 + se_rhs^2)", tol.sigma);
            if let Some(o) = oracle {
                pass &= within((lhs - o).abs(), lhs_stderr) && within((rhs - o).abs(), rhs_stderr);
                criterion.push_str(&format!(" and each side within {} se of {o}", tol.sigma));
            }
            (criterion, threshold, None, pass)
        }
    };
    pass &= divergences == 0 && lhs.is_finite() && rhs.is_finite();
    Ok(IdentityReport {
        identity: info.name,
        anchor: info.anchor,
        kind: info.kind,
        criterion,
        lhs,
        rhs,
        lhs_stderr,
        rhs_stderr,
        abs_diff,
        threshold,
        max_rel_discrepancy: max_rel,
        oracle,
        divergences,
        replicas: cfg.replicas,
        pass,
        wall_time: start.elapsed().as_secs_f64(),
        rows,
    })
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Serialises `rows` as CSV below a version comment line.
fn csv_bytes<T: Serialize>(comment: &str, rows: &[T]) -> Result<Vec<u8>> {
    let mut out = format!("# {CSV_VERSION}; {comment}\n").into_bytes();
    let mut w = csv::Writer::from_writer(&mut out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::param(format!("csv: {e}")))?;
    }
    w.flush()?;
    drop(w);
    Ok(out)
}

fn write_csv<T: Serialize>(path: &Path, comment: &str, rows: &[T]) -> Result<()> {
    write_atomic(path, &csv_bytes(comment, rows)?)
}

#[derive(Serialize)]
struct ReplicaRow {
    replica: usize,
    lhs: f64,
    rhs: f64,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    identity: &'a str,
    kind: IdentityKind,
    lhs: f64,
    rhs: f64,
    lhs_stderr: f64,
    rhs_stderr: f64,
    abs_diff: f64,
    threshold: f64,
    max_rel_discrepancy: Option<f64>,
    oracle: Option<f64>,
    divergences: usize,
    replicas: usize,
    pass: bool,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub reports: Vec<IdentityReport>,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    pub fn diverged(&self) -> bool {
        self.reports.iter().any(|r| r.divergences > 0)
    }
}

/// Runs every selected identity, writing one CSV per identity plus
/// `summary.csv` into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let setup = build_setup(cfg)?;
    let pool = pool(cfg.workers)?;
    let mut reports = Vec::new();
    let mut files = Vec::new();
    for info in cfg.selected_identities() {
        let report = run_identity(info, &setup, cfg, &pool)?;
        let rows: Vec<ReplicaRow> = report
            .rows
            .iter()
            .enumerate()
            .map(|(replica, &(lhs, rhs))| ReplicaRow { replica, lhs, rhs })
            .collect();
        let path = dir.join(format!("{}.csv", info.name));
        let comment = format!(
            "identity={}; anchor={}; kind={:?}; seed={}; criterion={}",
            info.name, info.anchor, info.kind, cfg.seed, report.criterion
        );
        write_csv(&path, &comment, &rows)?;
        files.push(path);
        reports.push(report);
    }
    let summary: Vec<SummaryRow> = reports
        .iter()
        .map(|r| SummaryRow {
            identity: r.identity,
            kind: r.kind,
            lhs: r.lhs,
            rhs: r.rhs,
            lhs_stderr: r.lhs_stderr,
            rhs_stderr: r.rhs_stderr,
            abs_diff: r.abs_diff,
            threshold: r.threshold,
            max_rel_discrepancy: r.max_rel_discrepancy,
            oracle: r.oracle,
            divergences: r.divergences,
            replicas: r.replicas,
            pass: r.pass,
        })
        .collect();
    let path = dir.join("summary.csv");
    write_csv(&path, &format!("experiment={}; seed={}", cfg.name, cfg.seed), &summary)?;
    files.push(path);
    Ok(RunSummary { reports, files })
}

#[derive(Serialize)]
struct PointRow {
    replica: usize,
    time: f64,
    size: f64,
}

/// Samples `replicas` configurations and writes their points to `paths.csv`.
pub fn simulate(cfg: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let pool = pool(cfg.workers)?;
    let configs: Vec<Result<JumpConfiguration>> = pool.install(|| {
        (0..cfg.replicas as u64)
            .into_par_iter()
            .map(|r| sample_config(&cfg.measure, cfg.horizon, cfg.eps, &mut substream(cfg.seed, r)))
            .collect()
    });
    let mut rows = Vec::new();
    for (replica, c) in configs.into_iter().enumerate() {
        rows.extend(c?.iter().map(|p| PointRow {
            replica,
            time: p.time,
            size: p.size,
        }));
    }
    let path = dir.join("paths.csv");
    let comment = format!("horizon={}; eps={}; seed={}", cfg.horizon, cfg.eps, cfg.seed);
    write_csv(&path, &comment, &rows)?;
    Ok(path)
}

#[derive(Clone, Debug)]
pub struct ChoRun {
    pub report: ChoReport,
    pub max_l1_relative_error: f64,
    pub files: Vec<PathBuf>,
}

impl ChoRun {
    pub fn pass(&self) -> bool {
        self.report.l1_relative_error <= self.max_l1_relative_error
    }
}

#[derive(Serialize)]
struct ChoCsvRow {
    path_id: usize,
    #[serde(rename = "F_value")]
    f_value: f64,
    reconstruction: f64,
    abs_error: f64,
}

/// Reconstruction of the configured functional on `cho.outer` paths.
pub fn run_cho(cfg: &ExperimentConfig, dir: &Path) -> Result<ChoRun> {
    cfg.validate()?;
    let section = cfg.cho.clone().ok_or_else(|| Error::Config {
        line: None,
        message: "verify-cho needs a [cho] section".into(),
    })?;
    let ctx = cfg.context()?;
    let spec = section.functional.clone().unwrap_or_else(|| cfg.functional.clone());
    let f = spec.build(&ctx)?;
    let mut cc = ChoConfig::new(cfg.horizon, cfg.eps, section.outer, section.inner, cfg.seed);
    cc.time_nodes = section.time_nodes;
    cc.size_nodes = section.size_nodes;
    cc.mean = section.mean.or_else(|| spec.mean(&ctx));
    cc.l1_check = section.l1_eps;
    let report = pool(cfg.workers)?.install(|| cho_reconstruct(&f, &cfg.measure, &cc))?;
    let rows: Vec<ChoCsvRow> = report
        .rows
        .iter()
        .map(|r| ChoCsvRow {
            path_id: r.path_id,
            f_value: r.f_value,
            reconstruction: r.reconstruction,
            abs_error: r.abs_error,
        })
        .collect();
    let paths_file = dir.join("cho.csv");
    let comment = format!(
        "mean_f={}; mean_is_exact={}; outer={}; inner={}; seed={}",
        report.mean_f, report.mean_is_exact, section.outer, section.inner, cfg.seed
    );
    write_csv(&paths_file, &comment, &rows)?;
    #[derive(Serialize)]
    struct Summary {
        mean_f: f64,
        mean_abs_f: f64,
        mean_abs_error: f64,
        l1_relative_error: f64,
        max_abs_error: f64,
        integrability_change: Option<f64>,
        integrability_stable: Option<bool>,
        pass: bool,
    }
    let run = ChoRun {
        max_l1_relative_error: section.max_l1_relative_error,
        files: Vec::new(),
        report,
    };
    let r = &run.report;
    let summary = Summary {
        mean_f: r.mean_f,
        mean_abs_f: r.mean_abs_f,
        mean_abs_error: r.mean_abs_error,
        l1_relative_error: r.l1_relative_error,
        max_abs_error: r.max_abs_error,
        integrability_change: r.integrability.as_ref().map(|c| c.relative_change),
        integrability_stable: r.integrability.as_ref().map(|c| c.stable),
        pass: run.pass(),
    };
    let summary_file = dir.join("cho_summary.csv");
    write_csv(&summary_file, &format!("criterion=l1_relative_error <= {}", section.max_l1_relative_error), &[summary])?;
    Ok(ChoRun {
        files: vec![paths_file, summary_file],
        ..run
    })
}

#[derive(Clone, Debug)]
pub struct VolterraRun {
    pub truncation: f64,
    pub dom_phi: DomPhiReport,
    pub hypotheses: HypothesesReport,
    pub max_gap: f64,
    pub consistency: f64,
    pub files: Vec<PathBuf>,
}

impl VolterraRun {
    pub fn pass(&self) -> bool {
        self.max_gap <= self.consistency
    }
}

#[derive(Serialize)]
struct VolterraRow {
    path_id: usize,
    phi_kg: f64,
    phi_psi_kg: f64,
    ecal_psi_kg: f64,
    small_jumps: f64,
    collapsed: f64,
    big_jumps: f64,
    total: f64,
}

/// Anticipative integral on `replicas` paths. The `L¹` ladder check of both
/// fields runs first and aborts the run with the failing field named.
pub fn run_volterra(cfg: &ExperimentConfig, dir: &Path) -> Result<VolterraRun> {
    cfg.validate()?;
    let v = cfg.volterra.clone().ok_or_else(|| Error::Config {
        line: None,
        message: "volterra needs a [volterra] section".into(),
    })?;
    let spec = VmavSpec::new(cfg.measure.clone(), v.kernel.clone(), v.sigma.clone(), v.integrand.clone())?;
    let eps = match v.truncation {
        Some(e) => e,
        None => default_truncation(&cfg.measure, v.t, VOLTERRA_TRUNCATION_TARGET)?,
    };
    let dom_phi = dom_phi_check(&spec, v.t, v.ladder, v.ladder_paths, cfg.seed)?;
    if let Some(field) = dom_phi.failing_field() {
        return Err(Error::DomainCheck {
            field: field.into(),
            detail: "L1 norm did not stabilise along the truncation ladder".into(),
        });
    }
    let hypotheses = hypotheses_check(&spec, v.t, v.tol);
    let rows: Vec<Result<VolterraRow>> = pool(cfg.workers)?.install(|| {
        (0..cfg.replicas)
            .into_par_iter()
            .map(|r| {
                let w = sample_config(&cfg.measure, v.t, eps, &mut substream(cfg.seed, r as u64))?;
                let terms = vmav_integral(&spec, v.t, &w, eps, v.tol)?;
                let collapsed = vmav_integral_pathwise(&spec, v.t, &w, eps, 1e-2 * v.tol)?;
                let big = big_jump_sum(&spec, v.t, &w);
                Ok(VolterraRow {
                    path_id: r,
                    phi_kg: terms.phi_kg,
                    phi_psi_kg: terms.phi_psi_kg,
                    ecal_psi_kg: terms.ecal_psi_kg,
                    small_jumps: terms.total,
                    collapsed,
                    big_jumps: big,
                    total: terms.total + big,
                })
            })
            .collect()
    });
    let rows: Vec<VolterraRow> = rows.into_iter().collect::<Result<_>>()?;
    let max_gap = rows
        .iter()
        .map(|r| (r.small_jumps - r.collapsed).abs())
        .fold(0.0, f64::max);
    let path = dir.join("volterra.csv");
    let comment = format!("t={}; truncation={eps}; seed={}", v.t, cfg.seed);
    write_csv(&path, &comment, &rows)?;
    #[derive(Serialize)]
    struct Check<'a> {
        check: &'a str,
        status: String,
        value: Option<f64>,
    }
    let status = |name: &'static str, s: &crate::volterra::HypothesisStatus| Check {
        check: name,
        status: match s {
            crate::volterra::HypothesisStatus::Finite(_) => "finite".into(),
            crate::volterra::HypothesisStatus::Divergent => "divergent".into(),
            crate::volterra::HypothesisStatus::Inconclusive(why) => format!("inconclusive: {why}"),
        },
        value: match s {
            crate::volterra::HypothesisStatus::Finite(v) => Some(*v),
            _ => None,
        },
    };
    let h = &hypotheses;
    let stability = |name: &'static str, c: &crate::cho::StabilityCheck| Check {
        check: name,
        status: if c.stable { "stable".into() } else { "unstable".into() },
        value: Some(c.relative_change),
    };
    let checks = vec![
        status("H1", &h.h1),
        status("H2", &h.h2),
        status("H3", &h.h3),
        status("L1", &h.l1),
        status("L2", &h.l2),
        stability("dom-phi kg", &dom_phi.kg),
        stability("dom-phi psi-kg", &dom_phi.psi_kg),
        Check {
            check: "three-term vs collapsed",
            status: if max_gap <= v.consistency { "pass".into() } else { "fail".into() },
            value: Some(max_gap),
        },
    ];
    let checks_path = dir.join("volterra_checks.csv");
    write_csv(&checks_path, &format!("consistency={}", v.consistency), &checks)?;
    Ok(VolterraRun {
        truncation: eps,
        dom_phi,
        hypotheses,
        max_gap,
        consistency: v.consistency,
        files: vec![path, checks_path],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassifyRow {
    pub alpha: f64,
    pub beta: f64,
    pub in_l1: bool,
    pub in_l2: bool,
    pub case: u8,
}

/// The `(α, β)` case table over the configured grid.
pub fn run_classify(cfg: &ExperimentConfig, dir: &Path) -> Result<(Vec<ClassifyRow>, PathBuf)> {
    cfg.validate()?;
    let grid = cfg.classify.clone().unwrap_or_default();
    let mut rows = Vec::new();
    for &alpha in &grid.alphas {
        for &beta in &grid.betas {
            let c = case_classify(alpha, beta)?;
            rows.push(ClassifyRow {
                alpha,
                beta,
                in_l1: c.in_l1,
                in_l2: c.in_l2,
                case: c.case,
            });
        }
    }
    let path = dir.join("classify.csv");
    write_csv(&path, "gamma kernel with symmetric stable driver", &rows)?;
    Ok((rows, path))
}

/// Process exit code for an error: 2 for configuration and I/O problems,
/// 3 for numerical divergence.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergent(_) | Error::Rejections { .. } | Error::DomainCheck { .. } | Error::InfiniteMass(_) => 3,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"
name = "unit"
replicas = 200
seed = 11
{extra}

[measure]
kind = "compound-poisson"
rate = 0.5
jumps = {{ kind = "dirac", at = 1.0 }}
"#
        );
        ExperimentConfig::parse(&text).unwrap()
    }

    #[test]
    fn suite_runs_and_is_deterministic_across_worker_counts() {
        let dir = tempfile::tempdir().unwrap();
        let a = run_experiment(&cfg(""), &dir.path().join("a")).unwrap();
        // Expectation identities are only checked at acceptance-scale replica counts.
        for r in a.reports.iter().filter(|r| r.kind == IdentityKind::Pathwise) {
            assert!(r.pass, "{r:#?}");
        }
        let b = run_experiment(&cfg("workers = 3"), &dir.path().join("b")).unwrap();
        for (fa, fb) in a.files.iter().zip(&b.files) {
            assert_eq!(std::fs::read(fa).unwrap(), std::fs::read(fb).unwrap(), "{}", fa.display());
        }
        let head = std::fs::read_to_string(&a.files[0]).unwrap();
        assert!(head.starts_with(&format!("# {CSV_VERSION}; identity=prop-elau; anchor=")));
    }

    #[test]
    fn oracle_mismatch_fails_the_identity() {
        let c = cfg("identities = [\"prop-elau\"]\noracles = { prop-elau = 0.9 }");
        let r = verify_identity("prop-elau", &c).unwrap();
        assert!(!r.pass);
        let c = cfg("identities = [\"prop-elau\"]\noracles = { prop-elau = 0.5 }");
        assert!(verify_identity("prop-elau", &c).unwrap().pass);
    }

    #[test]
    fn unknown_identity_is_an_error() {
        assert!(matches!(verify_identity("nope", &cfg("")), Err(Error::UnknownIdentity(_))));
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x/y.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config { line: Some(1), message: String::new() }), 2);
        assert_eq!(exit_code(&Error::DomainCheck { field: "f".into(), detail: String::new() }), 3);
    }
}
