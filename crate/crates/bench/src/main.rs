use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use specalloc::backends::BackendRegistry;
use specalloc::harness::{
    compare_context_budgets, context_csv, repair_fuzz, run_benchmark, run_training, BenchConfig, ContextRow,
};
use specalloc::solvers::SolverRegistry;

/// Spectrum-access benchmark harness.
#[derive(Parser)]
#[command(name = "bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios x methods x seeds and write CSV + JSON tables.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// GRPO training traces for the `train` section of a config.
    Train {
        config: PathBuf,
        #[arg(long, default_value = "results/train")]
        out: PathBuf,
    },
    /// Generative path at each budget of the `context` section.
    Context {
        config: PathBuf,
        #[arg(long, default_value = "results/context")]
        out: PathBuf,
    },
    /// Check repair on `n` random raw mappings.
    RepairFuzz {
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<BenchConfig> {
    let cfg = BenchConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    for w in cfg.validate()? {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn report_files(files: &[PathBuf]) {
    for f in files {
        eprintln!("wrote {}", f.display());
    }
}

fn run(config: &Path, out: &Path) -> Result<bool> {
    let cfg = load(config)?;
    let report = run_benchmark(&cfg, &SolverRegistry::default(), &BackendRegistry::default())?;
    println!(
        "{:<20} {:<20} {:>5} {:>16} {:>14} {:>8} {:>12}",
        "scenario", "method", "runs", "mean_throughput", "stderr", "valid", "latency_s"
    );
    for s in &report.summary {
        println!(
            "{:<20} {:<20} {:>5} {:>16.6e} {:>14.4e} {:>8.4} {:>12.3e}",
            s.scenario, s.method, s.runs, s.mean_throughput, s.stderr_throughput, s.mean_valid_rate, s.mean_latency
        );
    }
    report_files(&report.write_to(out)?);
    let a = report.audit;
    println!(
        "audit: infeasible_deployments={} solver_valid_rate_violations={} budget_overruns={} -> {}",
        a.infeasible_deployments,
        a.solver_valid_rate_violations,
        a.budget_overruns,
        if a.passed() { "pass" } else { "FAIL" }
    );
    Ok(a.passed())
}

fn train(config: &Path, out: &Path) -> Result<bool> {
    let cfg = load(config)?;
    let report = run_training(&cfg)?;
    println!("scenario {}", report.scenario);
    println!("{:>6} {:>10} {:>10} {:>12} {:>12}", "seed", "head", "tail", "eval_init", "eval_final");
    for r in &report.runs {
        println!(
            "{:>6} {:>10.4} {:>10.4} {:>12.4} {:>12.4}",
            r.seed, r.head_mean, r.tail_mean, r.eval_initial, r.eval_final
        );
    }
    report_files(&report.write_to(out)?);
    let ok = report.audit_passed();
    println!("audit: finite traces -> {}", if ok { "pass" } else { "FAIL" });
    Ok(ok)
}

fn context_audit(rows: &[ContextRow]) -> bool {
    let evaluated: Vec<_> = rows.iter().filter(|r| r.detail.is_some()).collect();
    let monotone = evaluated.windows(2).all(|w| {
        w[0].scenario != w[1].scenario
            || w[0].method != w[1].method
            || w[0].budget > w[1].budget
            || w[0].detail <= w[1].detail
    });
    let within = evaluated
        .iter()
        .all(|r| r.mean_prompt_tokens.is_none_or(|t| t <= r.budget as f64));
    monotone && within && rows.iter().all(|r| r.infeasible_deployments == 0)
}

fn context(config: &Path, out: &Path) -> Result<bool> {
    let cfg = load(config)?;
    let scenarios = cfg.resolve_scenarios()?;
    let methods = cfg.build_methods(&SolverRegistry::default(), &BackendRegistry::default())?;
    let seeds = cfg.seeds.seeds();
    let mut budgets = cfg.context.budgets.clone();
    budgets.sort_unstable();
    let mut rows = Vec::new();
    for s in &scenarios {
        for m in methods.iter().filter(|m| m.is_generative()) {
            rows.extend(compare_context_budgets(s, m, &budgets, &seeds, cfg.generation).map_err(anyhow::Error::msg)?);
        }
    }
    anyhow::ensure!(!rows.is_empty(), "context needs at least one scenario and one backend method");
    println!(
        "{:<16} {:<12} {:>7} {:>12} {:>10} {:>16} {:>8}  {}",
        "scenario", "method", "budget", "detail", "tokens", "mean_throughput", "valid", "status"
    );
    for r in &rows {
        println!(
            "{:<16} {:<12} {:>7} {:>12} {:>10} {:>16} {:>8}  {}",
            r.scenario,
            r.method,
            r.budget,
            r.detail.map(|d| d.to_string()).unwrap_or_else(|| "-".into()),
            r.mean_prompt_tokens.map_or("-".into(), |t| format!("{t:.1}")),
            r.mean_throughput.map_or("-".into(), |t| format!("{t:.6e}")),
            r.mean_valid_rate.map_or("-".into(), |v| format!("{v:.4}")),
            r.status.as_str()
        );
    }
    std::fs::create_dir_all(out)?;
    let files = [
        (out.join("context.csv"), context_csv(&rows)),
        (out.join("context.json"), serde_json::to_string_pretty(&rows)? + "\n"),
    ];
    for (path, body) in &files {
        std::fs::write(path, body)?;
    }
    report_files(&files.map(|(p, _)| p));
    let ok = context_audit(&rows);
    println!("audit: budget respected, detail monotone, deployments feasible -> {}", if ok { "pass" } else { "FAIL" });
    Ok(ok)
}

fn fuzz(n: u64, seed: u64, out: Option<&Path>) -> Result<bool> {
    let report = repair_fuzz(n, seed);
    println!(
        "cases={} contended_channels={} infeasible={} not_idempotent={} winner_mismatches={} dropped_valid_pairs={} underfilled={}",
        report.cases,
        report.contended_channels,
        report.infeasible,
        report.not_idempotent,
        report.winner_mismatches,
        report.dropped_valid_pairs,
        report.underfilled
    );
    if let Some(f) = &report.first_failure {
        println!("first failure: {f}");
    }
    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        let path = out.join("repair_fuzz.json");
        std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
        report_files(&[path]);
    }
    println!("audit -> {}", if report.passed() { "pass" } else { "FAIL" });
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out } => run(config, out),
        Command::Train { config, out } => train(config, out),
        Command::Context { config, out } => context(config, out),
        Command::RepairFuzz { n, seed, out } => fuzz(*n, *seed, out.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
