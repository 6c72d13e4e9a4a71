//! `conjkge` command-line entry point.
//!
//! Exit status: 0 on success, 1 on numerical failure (divergence, non-finite
//! values), 2 on usage or input errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use conjkge::account::{account, account_table, render_table};
use conjkge::checkpoint::{self, Checkpoint};
use conjkge::report::{all_pairs, emit_report, pairwise_tests, Report};
use conjkge::stats::{RunMetrics, RunSet, ABLATION_REPEATS, DEFAULT_ALPHA};
use conjkge::synth::{generate_synthetic_kg, RelationFamily, SynthConfig};
use conjkge::train::{fit, grid_search, prepare_dataset, Grid};
use conjkge::{build_filter_index, evaluate, load_dataset, Dataset, Family, Layout, ModelConfig, RegMode, Split};

const OUT_DIR_ENV: &str = "CONJKGE_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "conjkge-out";

#[derive(Parser)]
#[command(
    name = "conjkge",
    version,
    about = "Complex-valued KG embeddings with conjugate parameter sharing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration, keeping the checkpoint with the best validation MRR.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Evaluate(EvaluateArgs),
    /// Train every conjugation placement of the configured family.
    Ablate(AblateArgs),
    /// Grid search over hyperparameters by validation MRR.
    Grid(GridArgs),
    /// Aggregate run files and run pairwise Welch t-tests.
    Stats(StatsArgs),
    /// Parameter and memory table per layout.
    Account(AccountArgs),
    /// Write a seeded synthetic knowledge graph.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunOpts {
    /// Config file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding train.txt, valid.txt and test.txt.
    #[arg(long)]
    data: PathBuf,
    /// Override a config key; applied after the file, in order.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [env: CONJKGE_OUT_DIR] [default: conjkge-out]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunOpts,
    /// Number of runs; seeds are seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    /// Reuse the same seed for every repeat.
    #[arg(long)]
    fixed_seed: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: Split,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    run: RunOpts,
    #[arg(long, default_value_t = ABLATION_REPEATS)]
    repeat: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    run: RunOpts,
    /// JSON grid file; defaults to the full published grid.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
}

#[derive(Args)]
struct StatsArgs {
    /// Run files written by `train` (runs.json); one row each.
    #[arg(long = "runs", required = true)]
    runs: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AccountArgs {
    /// Take entity and relation counts from a dataset directory.
    #[arg(long, conflicts_with_all = ["entities", "relations"])]
    data: Option<PathBuf>,
    #[arg(long)]
    entities: Option<u64>,
    #[arg(long, default_value_t = 0)]
    relations: u64,
    /// Complex rank (real dimension is twice this).
    #[arg(long)]
    rank: u64,
    /// Restrict to one family.
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    entities: usize,
    /// Comma-separated relation families: symmetric, antisymmetric, inverse.
    #[arg(long, default_value = "symmetric,antisymmetric,inverse", value_delimiter = ',')]
    families: Vec<RelationFamily>,
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long, default_value_t = 1)]
    relations_per_family: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let numerical = err
                .chain()
                .filter_map(|e| e.downcast_ref::<conjkge::Error>())
                .any(conjkge::Error::is_numerical);
            ExitCode::from(if numerical { 1 } else { 2 })
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Account(a) => cmd_account(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn out_dir(flag: Option<&Path>) -> anyhow::Result<PathBuf> {
    let dir = match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUT_DIR), PathBuf::from),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

/// File values first, then `--set` overrides in order, then `--seed`.
fn resolve_config(opts: &RunOpts) -> anyhow::Result<ModelConfig> {
    let mut cfg = match &opts.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ModelConfig::parse_unvalidated(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => ModelConfig::default(),
    };
    for kv in &opts.overrides {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {kv:?}");
        };
        cfg.set(k.trim(), v.trim()).map_err(anyhow::Error::msg)?;
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_data(dir: &Path) -> anyhow::Result<Dataset> {
    load_dataset(dir).with_context(|| format!("loading dataset from {}", dir.display()))
}

fn dataset_name(dir: &Path) -> String {
    dir.file_name()
        .map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Trains one run and returns its test-split record.
fn train_one(raw: &Dataset, cfg: &ModelConfig, out: Option<&Path>) -> anyhow::Result<RunMetrics> {
    let data = prepare_dataset(raw, cfg)?;
    let filter = build_filter_index(&data);
    let result = fit(&data, &filter, cfg)?;
    let test = evaluate(&result.model, &data, Split::Test, &filter)?;
    let metrics = RunMetrics {
        seed: cfg.seed,
        mrr: test.mrr,
        hits1: test.hits_at(1),
        hits3: test.hits_at(3),
        hits10: test.hits_at(10),
        seconds_per_epoch: result.mean_epoch_seconds(),
    };
    eprintln!(
        "{} seed {}: best epoch {} valid MRR {:.4} test MRR {:.4} ({:.3}s/epoch)",
        cfg.label(),
        cfg.seed,
        result.best_epoch,
        result.best_valid.mrr,
        test.mrr,
        metrics.seconds_per_epoch
    );
    if let Some(dir) = out {
        let stem = format!("seed{}", cfg.seed);
        checkpoint::save(
            &Checkpoint {
                params: result.model.clone(),
                seed: cfg.seed,
            },
            &dir.join(format!("{stem}.ckge")),
        )?;
        let mut log = String::new();
        for e in &result.epochs {
            let valid = result
                .valid_history
                .iter()
                .find(|(ep, _)| *ep == e.epoch + 1)
                .map(|(_, m)| *m);
            log.push_str(&serde_json::to_string(&json!({
                "epoch": e.epoch + 1,
                "mean_loss": e.mean_loss,
                "seconds": e.seconds,
                "valid_mrr": valid,
            }))?);
            log.push('\n');
        }
        write(&dir.join(format!("{stem}.epochs.jsonl")), &log)?;
        let record = json!({
            "config": cfg.to_string(),
            "seed": cfg.seed,
            "best_epoch": result.best_epoch,
            "valid": result.best_valid,
            "test": test,
        });
        write(
            &dir.join(format!("{stem}.metrics.json")),
            &serde_json::to_string_pretty(&record)?,
        )?;
    }
    Ok(metrics)
}

fn cmd_train(a: TrainArgs) -> anyhow::Result<()> {
    if a.repeat == 0 {
        bail!("--repeat must be at least 1");
    }
    let cfg = resolve_config(&a.run)?;
    let raw = load_data(&a.run.data)?;
    let dir = out_dir(a.run.out.as_deref())?;
    write(&dir.join("config.conf"), &cfg.to_string())?;
    let mut runs = RunSet::new(cfg.label(), dataset_name(&a.run.data));
    for k in 0..a.repeat {
        let mut c = cfg.clone();
        if !a.fixed_seed {
            c.seed = cfg.seed.wrapping_add(k as u64);
        }
        // Repeats with a fixed seed overwrite the same artifacts, which are identical.
        runs.samples.push(train_one(&raw, &c, Some(&dir))?);
    }
    write(&dir.join("runs.json"), &serde_json::to_string_pretty(&runs)?)?;
    println!("{}", dir.display());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let ckpt = checkpoint::load(&a.checkpoint)?;
    let raw = load_data(&a.data)?;
    let data = if !raw.is_reciprocal() && ckpt.params.n_relations() == 2 * raw.n_relations() {
        raw.augment_reciprocal()?
    } else {
        raw
    };
    let filter = build_filter_index(&data);
    let m = evaluate(&ckpt.params, &data, a.split, &filter)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "checkpoint": a.checkpoint,
            "family": ckpt.params.family(),
            "layout": ckpt.params.layout(),
            "seed": ckpt.seed,
            "split": a.split.name(),
            "metrics": m,
        }))?
    );
    Ok(())
}

/// Ablation rows for a family: every layout, then the default conjugate
/// layout with the half-only penalty.
fn ablation_configs(base: &ModelConfig) -> Vec<ModelConfig> {
    let mut rows: Vec<ModelConfig> = base
        .family
        .layouts()
        .iter()
        .map(|&layout| ModelConfig {
            layout,
            reg_mode: RegMode::default_for(layout),
            ..base.clone()
        })
        .collect();
    let conj = base.family.default_conjugate();
    rows.push(ModelConfig {
        layout: conj,
        reg_mode: RegMode::HalfOnly,
        ..base.clone()
    });
    rows
}

fn cmd_ablate(a: AblateArgs) -> anyhow::Result<()> {
    if a.repeat == 0 {
        bail!("--repeat must be at least 1");
    }
    let base = resolve_config(&a.run)?;
    let raw = load_data(&a.run.data)?;
    let dir = out_dir(a.run.out.as_deref())?;
    let name = dataset_name(&a.run.data);
    let mut sets = Vec::new();
    for cfg in ablation_configs(&base) {
        cfg.validate()?;
        let mut rs = RunSet::new(cfg.label(), name.clone());
        for k in 0..a.repeat {
            let c = ModelConfig {
                seed: base.seed.wrapping_add(k as u64),
                ..cfg.clone()
            };
            rs.samples.push(train_one(&raw, &c, None)?);
        }
        sets.push(rs);
    }
    // compare every row against the full layout
    let pairs: Vec<(usize, usize)> = (1..sets.len()).map(|j| (0, j)).collect();
    let tests = pairwise_tests(&sets, &pairs, a.alpha)?;
    let report = emit_report(
        &sets,
        tests,
        &name,
        a.alpha,
        json!({ "config": base.to_string(), "seed": base.seed }),
    )?;
    finish_report(&report, &dir)
}

fn finish_report(report: &Report, dir: &Path) -> anyhow::Result<()> {
    write(&dir.join("report.json"), &report.to_json())?;
    let text = report.render_text();
    write(&dir.join("report.txt"), &text)?;
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_grid(a: GridArgs) -> anyhow::Result<()> {
    let base = resolve_config(&a.run)?;
    let grid: Grid = match &a.grid {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing grid {}", p.display()))?,
        None => Grid::default(),
    };
    let raw = load_data(&a.run.data)?;
    let data = prepare_dataset(&raw, &base)?;
    let filter = build_filter_index(&data);
    let dir = out_dir(a.run.out.as_deref())?;
    let result = grid_search(&data, &filter, &base, &grid, a.repeats)?;
    write(&dir.join("grid.json"), &serde_json::to_string_pretty(&result)?)?;
    write(&dir.join("best.conf"), &result.best.to_string())?;
    println!("{}", result.best);
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> anyhow::Result<()> {
    let mut sets = Vec::new();
    for p in &a.runs {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let rs: RunSet = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        sets.push(rs);
    }
    let dataset = sets[0].dataset.clone();
    let tests = pairwise_tests(&sets, &all_pairs(sets.len()), a.alpha)?;
    let report = emit_report(&sets, tests, &dataset, a.alpha, json!({ "runs": a.runs }))?;
    let dir = out_dir(a.out.as_deref())?;
    finish_report(&report, &dir)
}

fn cmd_account(a: AccountArgs) -> anyhow::Result<()> {
    let (n_e, n_r) = match (&a.data, a.entities) {
        (Some(dir), _) => {
            let d = load_data(dir)?;
            (d.n_entities() as u64, d.n_relations() as u64)
        }
        (None, Some(n_e)) => (n_e, a.relations),
        (None, None) => bail!("either --data or --entities is required"),
    };
    let families: Vec<Family> = a.family.map_or_else(|| Family::ALL.to_vec(), |f| vec![f]);
    // odd ranks drop ConjHalf instead of failing the whole table
    let rows = if a.rank % 2 == 1 {
        let mut rows = Vec::new();
        for &f in &families {
            for &l in f.layouts().iter().filter(|&&l| l != Layout::ConjHalf) {
                rows.push(account(f, l, n_e, n_r, a.rank)?);
            }
        }
        rows
    } else {
        account_table(&families, n_e, n_r, a.rank)?
    };
    if a.json {
        let rows: Vec<_> = rows
            .iter()
            .map(|r| json!({ "row": r, "bytes_f64": r.bytes(8), "bytes_f32": r.bytes(4) }))
            .collect();
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        print!("{}", render_table(&rows));
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> anyhow::Result<()> {
    let mut cfg = SynthConfig::new(a.entities, &a.families, a.density, a.seed);
    cfg.relations_per_family = a.relations_per_family;
    let d = generate_synthetic_kg(&cfg)?;
    d.save(&a.out)?;
    write(&a.out.join("synth.json"), &serde_json::to_string_pretty(&cfg)?)?;
    let s = d.stats();
    println!(
        "{}: {} entities, {} relations, {}/{}/{} train/valid/test",
        a.out.display(),
        s.entities,
        s.relations,
        s.train,
        s.valid,
        s.test
    );
    Ok(())
}
