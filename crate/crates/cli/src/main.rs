use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hyre_core::active::{run_adaptation, Pool, QueryCriterion};
use hyre_core::analysis::{explained_variance_ratio, function_pca, PredictionMatrix};
use hyre_core::experiment::{
    checkpoint_load, checkpoint_save, emit_report, prepare_task, read_metrics, read_summary, run_experiment,
    train_model, ExperimentConfig, Scoring,
};
use hyre_core::hyre::{BeliefState, PointLoss};
use hyre_core::{Error, Result};

#[derive(Parser)]
#[command(name = "hyre", version, about = "Diverse ensembles with test-time hypothesis reweighting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `out_dir`, then `runs/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated query budgets, e.g. `0,1,4,16`.
    #[arg(long, value_delimiter = ',')]
    budget: Option<Vec<usize>>,
    /// Query criterion: entropy, bald, variance, random or random:<seed>.
    #[arg(long)]
    criterion: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train an ensemble per seed and write `model_seed<N>.ckpt`.
    Train(Common),
    /// Reweight a trained checkpoint on its task's query pool.
    Adapt {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to adapt; defaults to `<out>/model_seed<N>.ckpt`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run the full experiment and emit report files.
    Bench(Common),
    /// Export function-space PCA of a checkpoint's predictions on the evaluation inputs.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Number of principal components.
        #[arg(long, default_value_t = 3)]
        components: usize,
    },
    /// Summarize an emitted report directory.
    Report {
        /// Report directory containing `metrics.csv` and `summary.json`.
        #[arg(long)]
        out: PathBuf,
    },
}

struct Ctx {
    cfg: ExperimentConfig,
    out: PathBuf,
}

fn load(c: &Common) -> Result<Ctx> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(b) = &c.budget {
        cfg.budgets = b.clone();
    }
    if let Some(crit) = &c.criterion {
        cfg.adapt.criterion = Some(crit.clone());
    }
    cfg.validate()?;
    let out = c
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| Path::new("runs").join(if cfg.name.is_empty() { "experiment" } else { &cfg.name }));
    std::fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    Ok(Ctx { cfg, out })
}

fn checkpoint_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("model_seed{seed}.ckpt"))
}

fn point_loss(cfg: &ExperimentConfig) -> PointLoss {
    if cfg.is_regression() {
        PointLoss::SquaredError
    } else {
        PointLoss::ZeroOne(cfg.adapt.tie_policy)
    }
}

fn train(c: &Common) -> Result<()> {
    let ctx = load(c)?;
    for &seed in &ctx.cfg.seeds {
        let data = prepare_task(&ctx.cfg, seed)?;
        let model = train_model(&ctx.cfg, &data.train, seed)?;
        let path = checkpoint_path(&ctx.out, seed);
        checkpoint_save(&model, &BeliefState::uniform(model.heads())?, &path)?;
        println!("seed {seed}: wrote {} (config {})", path.display(), &ctx.cfg.hash()[..12]);
    }
    Ok(())
}

fn adapt(c: &Common, checkpoint: Option<&Path>) -> Result<()> {
    let ctx = load(c)?;
    let scoring = Scoring::for_config(&ctx.cfg);
    for &seed in &ctx.cfg.seeds {
        let path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| checkpoint_path(&ctx.out, seed));
        let (model, _) = checkpoint_load(&path)?;
        let data = prepare_task(&ctx.cfg, seed)?;
        let budget = ctx.cfg.budgets.iter().copied().max().unwrap_or(0);
        let criterion: QueryCriterion = ctx.cfg.criterion(seed);
        let mut pool = Pool::new(data.pool.clone(), budget)?;
        let run = run_adaptation(&model, &mut pool, budget, criterion, point_loss(&ctx.cfg))?;
        let eval_out = model.forward(&data.eval.x)?;
        let k = model.heads();
        let before = scoring.score(&eval_out, &vec![1.0 / k as f64; k], &data.eval)?;
        let after = scoring.score(&eval_out, &run.belief.weights(), &data.eval)?;
        let log_path = ctx.out.join(format!("queries_seed{seed}.csv"));
        run.log.save(&log_path)?;
        let adapted = ctx.out.join(format!("adapted_seed{seed}.ckpt"));
        checkpoint_save(&model, &run.belief, &adapted)?;
        println!(
            "seed {seed}: budget {budget}, {:?} uniform {before:.4} -> reweighted {after:.4}; wrote {} and {}",
            scoring.metric,
            log_path.display(),
            adapted.display()
        );
    }
    Ok(())
}

fn bench(c: &Common) -> Result<()> {
    let ctx = load(c)?;
    let report = run_experiment(&ctx.cfg)?;
    for path in emit_report(&report, &ctx.out)? {
        println!("wrote {}", path.display());
    }
    print_summary(&report);
    Ok(())
}

fn analyze(c: &Common, checkpoint: Option<&Path>, components: usize) -> Result<()> {
    let ctx = load(c)?;
    for &seed in &ctx.cfg.seeds {
        let data = prepare_task(&ctx.cfg, seed)?;
        let model = match checkpoint {
            Some(p) => checkpoint_load(p)?.0,
            None => {
                let p = checkpoint_path(&ctx.out, seed);
                if p.exists() {
                    checkpoint_load(&p)?.0
                } else {
                    train_model(&ctx.cfg, &data.train, seed)?
                }
            }
        };
        let preds = PredictionMatrix::from_outputs(&model.forward(&data.eval.x)?, data.eval.kind())?;
        let pca = function_pca(&preds, components.min(preds.heads()).min(preds.len()))?;
        let dir = ctx.out.join(format!("pca_seed{seed}"));
        pca.write_csv(&dir, Some(&data.eval.x))?;
        let ratio: Vec<String> = explained_variance_ratio(&pca).iter().map(|r| format!("{r:.3}")).collect();
        println!("seed {seed}: explained variance ratio [{}]; wrote {}", ratio.join(", "), dir.display());
    }
    Ok(())
}

fn print_summary(report: &hyre_core::experiment::RunReport) {
    let a = &report.aggregate;
    println!(
        "{} ({:?}, {} seeds, config {})",
        if report.name.is_empty() { "experiment" } else { &report.name },
        report.metric,
        report.seeds.len(),
        &report.config_hash[..12]
    );
    println!(
        "  uniform   {:.4} ± {:.4}\n  best head {:.4} ± {:.4}",
        a.uniform.mean, a.uniform.std, a.best_head.mean, a.best_head.std
    );
    println!("  budget  hyre             finetune");
    for (b, &budget) in report.budgets.iter().enumerate() {
        let ft = a.finetune[b]
            .map(|s| format!("{:.4} ± {:.4}", s.mean, s.std))
            .unwrap_or_else(|| "-".into());
        println!("  {budget:>6}  {:.4} ± {:.4}  {ft}", a.hyre[b].mean, a.hyre[b].std);
    }
}

fn report(out: &Path) -> Result<()> {
    let summary = read_summary(&out.join("summary.json"))?;
    let rows = read_metrics(&out.join("metrics.csv"))?;
    if rows.len() != summary.seeds.len() * summary.budgets.len() {
        return Err(Error::Format(format!(
            "metrics.csv has {} rows, expected {}",
            rows.len(),
            summary.seeds.len() * summary.budgets.len()
        )));
    }
    print_summary(&summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(c) => train(c),
        Command::Adapt { common, checkpoint } => adapt(common, checkpoint.as_deref()),
        Command::Bench(c) => bench(c),
        Command::Analyze {
            common,
            checkpoint,
            components,
        } => analyze(common, checkpoint.as_deref(), *components),
        Command::Report { out } => report(out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
