//! Command-line front end: parses experiment suites, dispatches the
//! pipelines on a worker pool, and writes reports.

pub mod emit;
pub mod load;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hyperstab_core::fitting::{identity_nullspace_dim, DEFAULT_TOL_RANK};
use hyperstab_core::pipelines::ORACLE_MAX_N;
use hyperstab_core::{
    derivation_nullspace_dim, fit_inner_derivation, jordan_triple_nullspace_dim, mix_seed, run_experiment,
    FitResult, IdentityKernel, LabError, NullspaceResult, RunOptions, StabilityReport,
};
use rayon::prelude::*;
use serde::Serialize;

pub use emit::{Format, ManifestEntry, RunManifest, SUMMARY_HEADER};
pub use load::{build_suite, git_blob_hash, load_suite, parse_suite, substream, BuiltExperiment, ConfigError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "hyperstab", version, about = "Numerical hyperstability experiments on matrix algebras")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every experiment and write reports.
    Run(SuiteArgs),
    /// Run the hypothesis checks only.
    Check(SuiteArgs),
    /// Fit inner derivations and run the nullspace oracles.
    Fit(SuiteArgs),
    /// Standalone oracles.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Debug, Args)]
struct SuiteArgs {
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 picks one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Run conclusion checks even after a failed hypothesis; the verdict stays capped.
    #[arg(long)]
    force_conclusions: bool,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
    /// Print diagnostics only.
    #[arg(short, long)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// Dimension of the solution space of the Jordan triple or derivation identity on M_n.
    Nullspace(NullspaceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelChoice {
    Triple,
    Derivation,
    Both,
}

#[derive(Debug, Args)]
struct NullspaceArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value_t = KernelChoice::Both)]
    kernel: KernelChoice,
    /// Sample pairs; defaults to 3n⁴.
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TOL_RANK)]
    tol_rank: f64,
}

/// Runs the command line and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run(a) => suite_command("run", &a, RunOptions { force_conclusions: a.force_conclusions, hypotheses_only: false }),
        Command::Check(a) => suite_command("check", &a, RunOptions { force_conclusions: false, hypotheses_only: true }),
        Command::Fit(a) => fit_command(&a),
        Command::Oracle(OracleCommand::Nullspace(a)) => nullspace_command(&a),
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn prepare(a: &SuiteArgs) -> Result<(load::LoadedSuite, Vec<BuiltExperiment>), i32> {
    let loaded = load_suite(&a.config).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    let built = build_suite(&loaded).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    std::fs::create_dir_all(&a.out).map_err(|e| {
        eprintln!("error: cannot create output directory {}: {e}", a.out.display());
        EXIT_CONFIG
    })?;
    Ok((loaded, built))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, i32> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| {
        eprintln!("error: cannot start worker pool: {e}");
        EXIT_CONFIG
    })
}

fn manifest(command: &str, a: &SuiteArgs, loaded: &load::LoadedSuite, started: String) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        config_path: loaded.path.display().to_string(),
        config_hash: git_blob_hash(&loaded.bytes),
        tool_version: VERSION.to_string(),
        global_seed: loaded.suite.seed,
        jobs: a.jobs,
        force_conclusions: a.force_conclusions,
        started,
        finished: String::new(),
        experiments: Vec::new(),
    }
}

fn write_manifest(dir: &Path, mut m: RunManifest) -> i32 {
    m.finished = now();
    match emit::write_json(&dir.join("manifest.json"), &m) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: cannot write manifest: {e}");
            EXIT_CONFIG
        }
    }
}

fn describe(r: &StabilityReport) -> String {
    let mut line = format!("{:<32} {}", r.name, r.verdict);
    for h in r.hypothesis_results.iter().filter(|h| !h.passed) {
        line.push_str(&format!("\n    hypothesis {} failed, worst ratio {:.3e}", h.name, h.worst_ratio));
        if let Some(w) = &h.witness {
            line.push_str(&format!(" at ‖x‖ = {:.3e}", w.x_norm));
            if let Some(y) = w.y_norm {
                line.push_str(&format!(", ‖y‖ = {y:.3e}"));
            }
        }
    }
    for c in r.conclusion_checks.iter().filter(|c| !c.passed) {
        line.push_str(&format!("\n    conclusion {} = {:.3e} exceeds {:.1e}", c.name, c.value, c.tolerance));
    }
    line
}

fn suite_command(command: &str, a: &SuiteArgs, opts: RunOptions) -> i32 {
    let started = now();
    let (loaded, built) = match prepare(a) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let pool = match pool(a.jobs) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let results: Vec<_> = pool.install(|| built.par_iter().map(|b| run_experiment(&b.experiment, &opts)).collect());

    let mut m = manifest(command, a, &loaded, started);
    let mut code = EXIT_OK;
    let mut ok_reports = Vec::new();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (b, res) in built.iter().zip(&results) {
        let name = b.experiment.config.name.clone();
        let mut entry = ManifestEntry { name: name.clone(), substream: b.stream, verdict: None, report: None, error: None };
        match res {
            Ok(r) => {
                if !a.quiet {
                    let _ = writeln!(out, "{}", describe(r));
                }
                if !r.verdict.is_success() {
                    code = code.max(EXIT_FAIL);
                }
                entry.verdict = Some(r.verdict);
                if a.format.objects() {
                    match emit::write_report(&a.out, &b.experiment.config, b.stream, r) {
                        Ok(p) => entry.report = p.file_name().map(|f| f.to_string_lossy().into_owned()),
                        Err(e) => {
                            eprintln!("error: cannot write report for {name}: {e}");
                            return EXIT_CONFIG;
                        }
                    }
                }
                ok_reports.push(r);
            }
            Err(e) => {
                eprintln!("error: {name}: {e}");
                code = code.max(if matches!(e, LabError::RejectedConfig { .. }) { EXIT_CONFIG } else { EXIT_FAIL });
                entry.error = Some(e.to_string());
            }
        }
        m.experiments.push(entry);
    }
    if a.format.table() {
        if let Err(e) = emit::write_summary(&a.out.join("summary.csv"), &ok_reports) {
            eprintln!("error: cannot write summary.csv: {e}");
            return EXIT_CONFIG;
        }
    }
    code.max(write_manifest(&a.out, m))
}

#[derive(Debug, Serialize)]
struct FitFile {
    name: String,
    algebra: String,
    substream: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit_skipped: Option<String>,
    oracles: Vec<NullspaceResult>,
}

fn fit_one(b: &BuiltExperiment) -> Result<FitFile, LabError> {
    let e = &b.experiment;
    let (fit, fit_skipped) = match fit_inner_derivation(&e.map, &e.algebra) {
        Ok(f) => (Some(f), None),
        Err(LabError::Unsupported(why)) => (None, Some(why)),
        Err(err) => return Err(err),
    };
    let mut oracles = Vec::new();
    if e.algebra.is_full_matrix() && e.algebra.n() <= ORACLE_MAX_N {
        let pairs = 3 * e.algebra.n().pow(4);
        let seed = mix_seed(b.stream, 0x0bac1e);
        oracles.push(jordan_triple_nullspace_dim(&e.algebra, pairs, seed, DEFAULT_TOL_RANK)?);
        oracles.push(derivation_nullspace_dim(&e.algebra, pairs, seed, DEFAULT_TOL_RANK)?);
    }
    Ok(FitFile {
        name: e.config.name.clone(),
        algebra: e.algebra.label(),
        substream: b.stream,
        fit,
        fit_skipped,
        oracles,
    })
}

fn fit_command(a: &SuiteArgs) -> i32 {
    let started = now();
    let (loaded, built) = match prepare(a) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let pool = match pool(a.jobs) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let results: Vec<_> = pool.install(|| built.par_iter().map(fit_one).collect());
    let mut m = manifest("fit", a, &loaded, started);
    let mut code = EXIT_OK;
    for (b, res) in built.iter().zip(results) {
        let name = b.experiment.config.name.clone();
        let mut entry = ManifestEntry { name: name.clone(), substream: b.stream, verdict: None, report: None, error: None };
        match res {
            Ok(f) => {
                let oracle_ok = f.oracles.iter().all(|o| o.matches_expected() && !o.inconclusive);
                if !oracle_ok {
                    code = code.max(EXIT_FAIL);
                }
                match &f.fit {
                    _ if a.quiet => {}
                    Some(fr) => println!("{name:<32} sup gap {:.3e}, oracles {}", fr.sup_gap, if oracle_ok { "ok" } else { "FAILED" }),
                    None => println!("{name:<32} fit skipped, oracles {}", if oracle_ok { "ok" } else { "FAILED" }),
                }
                let file = format!("{name}.fit.json");
                if let Err(e) = emit::write_json(&a.out.join(&file), &f) {
                    eprintln!("error: cannot write {file}: {e}");
                    return EXIT_CONFIG;
                }
                entry.report = Some(file);
            }
            Err(e) => {
                eprintln!("error: {name}: {e}");
                code = code.max(EXIT_FAIL);
                entry.error = Some(e.to_string());
            }
        }
        m.experiments.push(entry);
    }
    code.max(write_manifest(&a.out, m))
}

fn nullspace_command(a: &NullspaceArgs) -> i32 {
    let pairs = a.pairs.unwrap_or(3 * a.n.pow(4));
    let kernels: &[IdentityKernel] = match a.kernel {
        KernelChoice::Triple => &[IdentityKernel::JordanTriple],
        KernelChoice::Derivation => &[IdentityKernel::Derivation],
        KernelChoice::Both => &[IdentityKernel::JordanTriple, IdentityKernel::Derivation],
    };
    let mut code = EXIT_OK;
    for &k in kernels {
        match identity_nullspace_dim(a.n, k, pairs, a.seed, a.tol_rank) {
            Ok(r) => {
                let ok = r.matches_expected() && !r.inconclusive;
                println!(
                    "{} n={} dimension={} expected={} gap={:.3e} threshold={:.3e}{}",
                    match r.kernel {
                        IdentityKernel::JordanTriple => "jordan-triple",
                        IdentityKernel::Derivation => "derivation",
                    },
                    r.n,
                    r.dimension,
                    r.expected,
                    r.singular_value_gap,
                    r.threshold,
                    if r.inconclusive { " inconclusive" } else { "" }
                );
                if !ok {
                    code = code.max(EXIT_FAIL);
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        }
    }
    code
}
