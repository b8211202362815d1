//! Command-line entry point: task generation, training, reports and the heatmap benchmark.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dagrpo::harness::{self, DataSource, ExperimentConfig, Mode, ReportInput};
use dagrpo::heatmap::bench::{run_bench, BenchConfig};
use dagrpo::heatmap::io::{heatmap_csv, heatmap_pgm};
use dagrpo::taskgen::{
    derive_seed, emit_samples, generate, load_records, DistractorPools, KnowledgeBase, TaskKind,
};

#[derive(Parser)]
#[command(version, about = "Difficulty-aware GRPO experiments on a toy policy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build multiple-choice samples from annotation records, or synthetic ones from a config.
    GenTasks {
        /// Experiment config (JSON); its synthetic spec is used when no records are given.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Annotation records (JSON Lines).
        #[arg(long)]
        records: Option<PathBuf>,
        /// Directory of `<object_type>.txt` domain-knowledge files.
        #[arg(long)]
        knowledge: Option<PathBuf>,
        /// Comma-separated task kinds; all four by default.
        #[arg(long, value_delimiter = ',')]
        tasks: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "tasks")]
        out_dir: PathBuf,
    },
    /// Run one training experiment and write metrics, checkpoint and resolved config.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// sft, grpo_plain or grpo_difficulty_aware.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Plot learning curves and summarise one or more metrics files (`label=path` or `path`).
    Report {
        #[arg(required = true)]
        inputs: Vec<String>,
        #[arg(long, default_value = "report")]
        out_dir: PathBuf,
    },
    /// Planted-defect heatmap localisation on synthetic feature grids.
    HeatmapBench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "heatmap-bench")]
        out_dir: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn gen_tasks(
    config: Option<PathBuf>,
    records: Option<PathBuf>,
    knowledge: Option<PathBuf>,
    tasks: Vec<String>,
    seed: Option<u64>,
    out_dir: PathBuf,
) -> Result<()> {
    fs::create_dir_all(&out_dir)?;
    let samples_path = out_dir.join("samples.jsonl");
    if let Some(records_path) = records {
        let records = load_records(&records_path)?;
        let kinds = if tasks.is_empty() {
            TaskKind::ALL.to_vec()
        } else {
            tasks
                .iter()
                .map(|t| TaskKind::parse(t.trim()).with_context(|| format!("unknown task kind {t:?}")))
                .collect::<Result<Vec<_>>>()?
        };
        let kb = match knowledge {
            Some(dir) => KnowledgeBase::load_dir(&dir)?,
            None => KnowledgeBase::default(),
        };
        let pools = DistractorPools::from_records(&records);
        let samples = generate(&records, &kinds, &pools, &kb, seed.unwrap_or(0))?;
        emit_samples(&samples, &samples_path)?;
        println!("wrote {} samples to {}", samples.len(), samples_path.display());
        return Ok(());
    }
    if !tasks.is_empty() || knowledge.is_some() {
        bail!("--tasks and --knowledge need --records");
    }
    let mut cfg = load_config(config.as_deref())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let spec = match &cfg.data {
        DataSource::Synthetic(spec) => *spec,
        DataSource::Dataset(p) => bail!("config points at dataset {}; nothing to generate", p.display()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "tasks"));
    let set = harness::make_synthetic_tasks(&spec, &mut rng)?;
    emit_samples(&set.samples, &samples_path)?;
    let tiers_path = out_dir.join("tiers.json");
    fs::write(&tiers_path, serde_json::to_string(&set.tiers)? + "\n")?;
    println!(
        "wrote {} synthetic samples to {} and tiers to {}",
        set.len(),
        samples_path.display(),
        tiers_path.display()
    );
    Ok(())
}

fn train(
    config: Option<PathBuf>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    mode: Option<String>,
    steps: Option<usize>,
) -> Result<()> {
    let mut cfg = load_config(config.as_deref())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = out_dir {
        cfg.out_dir = d;
    }
    if let Some(m) = mode {
        cfg.mode = Mode::parse(&m).with_context(|| format!("unknown mode {m:?}"))?;
    }
    if let Some(n) = steps {
        cfg.steps = n;
    }
    cfg.validate()?;
    let art = harness::run_experiment(&cfg)?;
    let rows = harness::read_metrics(&art.metrics)?;
    if let Some(last) = rows.last() {
        println!(
            "{} seed {}: step {} accuracy {:.4} (easy {:.4}, hard {:.4}) format {:.4}",
            cfg.mode, cfg.seed, last.step, last.accuracy, last.accuracy_easy, last.accuracy_hard, last.format_rate
        );
    }
    println!("metrics: {}", art.metrics.display());
    println!("checkpoint: {}", art.checkpoint.display());
    Ok(())
}

fn heatmap_bench(config: Option<PathBuf>, seed: u64, out_dir: PathBuf) -> Result<()> {
    let cfg: BenchConfig = match config {
        Some(p) => serde_json::from_str(&fs::read_to_string(&p)?)
            .with_context(|| format!("reading bench config {}", p.display()))?,
        None => BenchConfig::default(),
    };
    let result = run_bench(&cfg, seed)?;
    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("bench.json"), serde_json::to_string_pretty(&result)? + "\n")?;
    fs::write(out_dir.join("example_heatmap.csv"), heatmap_csv(&result.example))?;
    fs::write(out_dir.join("example_heatmap.pgm"), heatmap_pgm(&result.example))?;
    println!(
        "argmax inside planted defect: {}/{} (embeddings {}x{})",
        result.hits,
        result.fixtures.len(),
        result.embedding_shape.0,
        result.embedding_shape.1
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenTasks {
            config,
            records,
            knowledge,
            tasks,
            seed,
            out_dir,
        } => gen_tasks(config, records, knowledge, tasks, seed, out_dir),
        Command::Train {
            config,
            seed,
            out_dir,
            mode,
            steps,
        } => train(config, seed, out_dir, mode, steps),
        Command::Report { inputs, out_dir } => {
            let inputs: Vec<ReportInput> = inputs.iter().map(|s| ReportInput::parse(s)).collect();
            let out = harness::report(&inputs, &out_dir)?;
            print!("{}", out.summary);
            Ok(())
        }
        Command::HeatmapBench {
            config,
            seed,
            out_dir,
        } => heatmap_bench(config, seed, out_dir),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
