use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jumpcalc::harness::{self, ExperimentConfig};
use jumpcalc::Error;

#[derive(Parser)]
#[command(name = "jumpcalc", version, about = "Jump-process calculus experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample configurations and dump their jump points.
    Simulate(Common),
    /// Run the identity suite (or the identities named with --identity).
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long = "identity")]
        identities: Vec<String>,
    },
    /// Reconstruct a functional from its estimated representation integrand.
    VerifyCho(Common),
    /// Anticipative Volterra integral on sampled paths.
    Volterra(Common),
    /// Print the integrability case table.
    Classify(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; overrides the config and the JUMPCALC_OUT variable.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicas: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), Error> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.replicas {
            cfg.replicas = r;
        }
        cfg.validate()?;
        let dir = cfg.output_dir(self.out.as_deref());
        Ok((cfg, dir))
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate(c) => {
            let (cfg, dir) = c.load()?;
            let path = harness::simulate(&cfg, &dir)?;
            println!("wrote {}", path.display());
            Ok(0)
        }
        Command::Verify { common, identities } => {
            let (mut cfg, dir) = common.load()?;
            if !identities.is_empty() {
                cfg.identities = identities;
                cfg.validate()?;
            }
            let summary = harness::run_experiment(&cfg, &dir)?;
            for r in &summary.reports {
                println!("== {} [{}]", r.identity, r.anchor);
                println!(
                    "   lhs {:.10} (se {:.3e})  rhs {:.10} (se {:.3e})  |diff| {:.3e}  {}",
                    r.lhs, r.lhs_stderr, r.rhs, r.rhs_stderr, r.abs_diff, r.criterion
                );
                if let Some(m) = r.max_rel_discrepancy {
                    println!("   max relative discrepancy {m:.3e}");
                }
                println!(
                    "   {} replicas, {} divergent, {:.2}s: {}",
                    r.replicas,
                    r.divergences,
                    r.wall_time,
                    verdict(r.pass)
                );
            }
            println!("results in {}", dir.display());
            Ok(if summary.diverged() {
                3
            } else if summary.pass() {
                0
            } else {
                1
            })
        }
        Command::VerifyCho(c) => {
            let (cfg, dir) = c.load()?;
            let run = harness::run_cho(&cfg, &dir)?;
            let r = &run.report;
            println!(
                "E F = {} ({}), L1 relative error {:.4e}, max abs error {:.3e}",
                r.mean_f,
                if r.mean_is_exact { "closed form" } else { "estimated" },
                r.l1_relative_error,
                r.max_abs_error
            );
            if let Some(c) = &r.integrability {
                println!("integrability ladder change {:.3e} (stable: {})", c.relative_change, c.stable);
            }
            for w in &r.warnings {
                println!("warning: {w}");
            }
            println!("{}", verdict(run.pass()));
            Ok(if run.pass() { 0 } else { 1 })
        }
        Command::Volterra(c) => {
            let (cfg, dir) = c.load()?;
            let run = harness::run_volterra(&cfg, &dir)?;
            println!("truncation {}", run.truncation);
            println!("hypotheses {:?}", run.hypotheses);
            println!(
                "ladder: kg change {:.3e}, psi-kg change {:.3e}",
                run.dom_phi.kg.relative_change, run.dom_phi.psi_kg.relative_change
            );
            println!("three-term vs collapsed max gap {:.3e}: {}", run.max_gap, verdict(run.pass()));
            Ok(if run.pass() { 0 } else { 1 })
        }
        Command::Classify(c) => {
            let (cfg, dir) = c.load()?;
            let (rows, path) = harness::run_classify(&cfg, &dir)?;
            println!("{:>6} {:>6} {:>5} {:>5} {:>4}", "alpha", "beta", "L1", "L2", "case");
            for r in rows {
                println!("{:>6} {:>6} {:>5} {:>5} {:>4}", r.alpha, r.beta, r.in_l1, r.in_l2, r.case);
            }
            println!("wrote {}", path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
