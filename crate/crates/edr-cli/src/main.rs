//! `edr` — experiment front end for the tensor dimension-reduction library.
//!
//! Commands: `fit`, `transform`, `eval`, `sweep`, `oracle-check`. All take a
//! JSON config (`--config`); `--out`, `--seed`, `--threads`, `--method` and
//! `--d` override the corresponding config keys. Verbosity is controlled by
//! the `EDR_LOG` environment variable.
//!
//! Exit codes: 0 success, 64 config error, 65 data error, 70 numerical
//! failure, 1 oracle-check threshold breach, 2 sweep with failed cells.

mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use edr_core::error::{EdrError, Result};
use edr_core::eval::{emit_csv, emit_svg, sweep};

use config::{load_config, Overrides, RunConfig};
use runner::{
    apply_threads, eval_cell, fit_method, load_model, oracle_reports, parse_method,
    prepare, report_max, save_embedding, save_model, FittedModel,
};

#[derive(Parser)]
#[command(
    name = "edr",
    version,
    about = "Graph-based tensor dimension reduction via the Einstein product"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// output directory (overrides `out_dir`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed`)
    #[arg(long)]
    seed: Option<u64>,
    /// sweep-internal thread count (overrides `threads`)
    #[arg(long)]
    threads: Option<usize>,
    /// method id (overrides `method`)
    #[arg(long)]
    method: Option<String>,
    /// target dimension (overrides `d`)
    #[arg(long)]
    d: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a projection model and write it to `<out>/model.edr`
    Fit(Common),
    /// Apply a fitted model to the configured dataset
    Transform {
        /// model file written by `fit`
        model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit on the training split, classify the test split, print the
    /// recognition rate
    Eval(Common),
    /// Run methods × dims, writing `sweep.csv` and `sweep.svg`
    Sweep(Common),
    /// Compare each method against its matricized oracle
    OracleCheck(Common),
}

fn overrides(c: &Common) -> Overrides {
    Overrides {
        out: c.out.clone(),
        seed: c.seed,
        threads: c.threads,
        method: c.method.clone(),
        d: c.d,
    }
}

fn exit_code(e: &EdrError) -> u8 {
    match e {
        EdrError::Config(_) => 64,
        EdrError::Io(_) | EdrError::Format(_) | EdrError::Shape(_) | EdrError::Range(_) => 65,
        EdrError::Numerical(_) | EdrError::Definiteness(_) | EdrError::RankDeficient(_) => 70,
    }
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn need_method(cfg: &RunConfig) -> Result<String> {
    cfg.method.clone().ok_or_else(|| EdrError::Config("config key 'method' is required".into()))
}

fn need_d(cfg: &RunConfig) -> Result<usize> {
    cfg.d.ok_or_else(|| EdrError::Config("config key 'd' is required".into()))
}

fn method_list(cfg: &RunConfig) -> Result<Vec<String>> {
    match &cfg.methods {
        Some(m) if !m.is_empty() => Ok(m.clone()),
        _ => Ok(vec![need_method(cfg)?]),
    }
}

fn cmd_fit(cfg: &RunConfig) -> Result<u8> {
    let method = parse_method(&need_method(cfg)?)?;
    let d = need_d(cfg)?;
    let (train, _) = prepare(cfg)?;
    let model = match fit_method(cfg, &method, &train, d)? {
        FittedModel::Linear(m) => m,
        FittedModel::Nonlinear(_) => {
            return Err(EdrError::Config(
                "fit persists linear projection models; run le/lle through eval or sweep".into(),
            ))
        }
    };
    let path = out_dir(cfg)?.join("model.edr");
    save_model(&path, &model, cfg)?;
    println!(
        "fit method={} d={} n={} -> {}",
        model.method,
        model.d,
        train.n_samples(),
        path.display()
    );
    Ok(0)
}

fn cmd_transform(cfg: &RunConfig, model_path: &PathBuf) -> Result<u8> {
    let model = load_model(model_path)?;
    let (data, _) = prepare(cfg)?;
    let emb = edr_core::dr_linear::transform(&model, &data)?;
    let path = out_dir(cfg)?.join("embedding.eten");
    save_embedding(&path, &emb)?;
    println!(
        "transform method={} d={} n={} -> {}",
        model.method,
        model.d,
        emb.n_samples(),
        path.display()
    );
    Ok(0)
}

fn cmd_eval(cfg: &RunConfig) -> Result<u8> {
    let method = need_method(cfg)?;
    let d = need_d(cfg)?;
    let (train, test) = prepare(cfg)?;
    let test = test.ok_or_else(|| EdrError::Config("eval needs a test split".into()))?;
    let ir = eval_cell(cfg, &method, &train, &test, d)?;
    println!(
        "eval method={method} d={d} train={} test={} ir={ir:.2}",
        train.n_samples(),
        test.n_samples()
    );
    Ok(0)
}

fn cmd_sweep(cfg: &RunConfig) -> Result<u8> {
    let methods = method_list(cfg)?;
    let dims = cfg
        .dims
        .clone()
        .ok_or_else(|| EdrError::Config("config key 'dims' is required for sweep".into()))?;
    let (train, test) = prepare(cfg)?;
    let test = test.ok_or_else(|| EdrError::Config("sweep needs a test split".into()))?;
    let cells = sweep(&methods, &dims, cfg.seed, |method, d| {
        eval_cell(cfg, method, &train, &test, d)
    })?;
    let dir = out_dir(cfg)?;
    let csv = dir.join("sweep.csv");
    let svg = dir.join("sweep.svg");
    emit_csv(&cells, &csv, cfg.record_timing)?;
    emit_svg(&cells, &svg)?;
    let failed = cells.iter().filter(|c| c.ir.is_err()).count();
    for c in cells.iter().filter(|c| c.ir.is_err()) {
        log::warn!("cell {} d={} failed: {}", c.method, c.d, c.ir.as_ref().unwrap_err());
    }
    println!(
        "sweep methods={} dims={} cells={} failed={failed} -> {}",
        methods.len(),
        dims.len(),
        cells.len(),
        csv.display()
    );
    Ok(if failed > 0 { 2 } else { 0 })
}

fn cmd_oracle_check(cfg: &RunConfig) -> Result<u8> {
    let methods = method_list(cfg)?;
    let d = need_d(cfg)?;
    let (train, test) = prepare(cfg)?;
    let reports = oracle_reports(cfg, &train, test.as_ref(), &methods, d)?;
    println!("{:<18} {:>14} {:>14} {:>10}", "pair", "subspace", "embedding", "ir-delta");
    let mut worst = 0.0f64;
    for r in &reports {
        println!(
            "{:<18} {:>14.3e} {:>14.3e} {:>10.3e}",
            r.pair, r.subspace_distance, r.embedding_distance, r.ir_delta
        );
        if !r.is_finite() {
            return Err(EdrError::Numerical(format!("non-finite report for {}", r.pair)));
        }
        worst = worst.max(report_max(r));
    }
    if worst > cfg.oracle_tol {
        println!("oracle-check FAIL: worst distance {worst:.3e} > tol {:.1e}", cfg.oracle_tol);
        Ok(1)
    } else {
        println!("oracle-check ok: worst distance {worst:.3e} <= tol {:.1e}", cfg.oracle_tol);
        Ok(0)
    }
}

fn run(cli: Cli) -> Result<u8> {
    let (common, model) = match &cli.cmd {
        Cmd::Fit(c) | Cmd::Eval(c) | Cmd::Sweep(c) | Cmd::OracleCheck(c) => (c, None),
        Cmd::Transform { model, common } => (common, Some(model.clone())),
    };
    let cfg = load_config(&common.config, &overrides(common))?;
    apply_threads(cfg.threads);
    match &cli.cmd {
        Cmd::Fit(_) => cmd_fit(&cfg),
        Cmd::Transform { .. } => cmd_transform(&cfg, model.as_ref().unwrap()),
        Cmd::Eval(_) => cmd_eval(&cfg),
        Cmd::Sweep(_) => cmd_sweep(&cfg),
        Cmd::OracleCheck(_) => cmd_oracle_check(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EDR_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
