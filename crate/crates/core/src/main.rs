use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oodhull::bounds::{risk_bound, BoundConfig};
use oodhull::divergence::pairwise_divergence_matrix;
use oodhull::envsim::{sample_environment, LabeledBatch};
use oodhull::harness::{
    emit_records, plot_script, read_records, run_sweep_full, trend_stats, write_trend_csv, ExperimentConfig, GroupKey,
};
use oodhull::hull::{classify_unseen, write_hull_text, Target};
use oodhull::nnet::{init_predictor, train, Predictor, TrainConfig};
use oodhull::select::{run_rl_selection, write_reward_csv};
use oodhull::{rng, Error, Result};

#[derive(Parser)]
#[command(name = "oodhull", version, about = "Convex-hull OOD analysis toolkit")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long, short)]
    config: PathBuf,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample every environment and write the rows to CSV.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Samples per environment.
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Pairwise divergence matrix between the sources.
    Divergence {
        #[command(flatten)]
        common: Common,
    },
    /// Epsilon, delta, mixture weights and ID/OOD verdict for the target.
    Hull {
        #[command(flatten)]
        common: Common,
    },
    /// Train on the sources and report the risk bound.
    Bound {
        #[command(flatten)]
        common: Common,
    },
    /// Train on the sources, then run RL-guided data selection.
    Select {
        #[command(flatten)]
        common: Common,
    },
    /// Run the full experiment grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Also write a plotting script next to the CSV.
        #[arg(long)]
        plot_script: bool,
    },
    /// Trend statistics from a records CSV.
    Stats {
        /// Records CSV written by `sweep`.
        #[arg(long, short)]
        input: PathBuf,
        /// Comma-separated grouping keys.
        #[arg(long, default_value = "experiment_id,arm,shift_param")]
        group_by: String,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(o) = &self.out {
            cfg.output_path = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_path(&self, cfg: &ExperimentConfig, default: &str) -> PathBuf {
        cfg.output_path.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

fn first_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.seeds[0]
}

fn training_pool(cfg: &ExperimentConfig, seed: u64) -> Result<LabeledBatch> {
    let n = cfg.n_train.unwrap_or(*cfg.n_grid.last().expect("validated"));
    let parts = cfg
        .envs
        .sources
        .iter()
        .zip(cfg.split(n))
        .enumerate()
        .filter(|(_, (_, c))| *c > 0)
        .map(|(i, (e, c))| sample_environment(e, c, rng::derive(seed, &[0x636c69, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    LabeledBatch::concat(&parts.iter().collect::<Vec<_>>())
}

fn train_vanilla(cfg: &ExperimentConfig, data: &LabeledBatch, seed: u64) -> Result<Predictor> {
    let init = init_predictor(&cfg.layer_sizes(), rng::derive(seed, &[0x696e6974]))?;
    let tc = TrainConfig {
        seed: rng::derive(seed, &[0x74726e]),
        ..cfg.train.clone()
    };
    Ok(train(&init, data, &tc)?.0)
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => std::fs::create_dir_all(d).map_err(|e| Error::io(d, e)),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    }
    match cli.command {
        Command::Gen { common, n } => {
            let cfg = common.load()?;
            let seed = first_seed(&cfg);
            let mut parts = Vec::new();
            for (i, e) in cfg.envs.sources.iter().chain(cfg.envs.target.iter()).enumerate() {
                parts.push(sample_environment(e, n, rng::derive(seed, &[0x67656e, i as u64]))?);
            }
            let batch = LabeledBatch::concat(&parts.iter().collect::<Vec<_>>())?;
            let out = common.out_path(&cfg, "samples.csv");
            create_parent(&out)?;
            batch.write_csv(&out)
        }
        Command::Divergence { common } => {
            let cfg = common.load()?;
            let est = cfg.hull.clone().unwrap_or_default().estimate.with_seed(first_seed(&cfg));
            let m = pairwise_divergence_matrix(&cfg.envs, &est)?;
            let out = common.out_path(&cfg, "divergence.csv");
            create_parent(&out)?;
            m.write_csv(&out)
        }
        Command::Hull { common } => {
            let cfg = common.load()?;
            let mut solver = cfg.hull.clone().unwrap_or_default();
            solver.estimate = solver.estimate.with_seed(first_seed(&cfg));
            let (_, stats) = classify_unseen(&Target::Spec(cfg.target()?.clone()), &cfg.envs, &solver)?;
            let out = common.out_path(&cfg, "hull.csv");
            create_parent(&out)?;
            stats.write_csv(&out)?;
            write_hull_text(&stats, &mut std::io::stdout()).map_err(|e| Error::io("<stdout>", e))
        }
        Command::Bound { common } => {
            let cfg = common.load()?;
            let seed = first_seed(&cfg);
            let f = train_vanilla(&cfg, &training_pool(&cfg, seed)?, seed)?;
            let bc = BoundConfig {
                solver: cfg.hull.clone().unwrap_or_default(),
                n: cfg.bound_samples.unwrap_or(2000),
                seed,
            };
            let (report, _) = risk_bound(&f, &cfg.envs, None, &bc)?;
            let out = common.out_path(&cfg, "bound.csv");
            create_parent(&out)?;
            report.write_csv(&out)?;
            report.render(&mut std::io::stdout()).map_err(|e| Error::io("<stdout>", e))
        }
        Command::Select { common } => {
            let cfg = common.load()?;
            let seed = first_seed(&cfg);
            let data = training_pool(&cfg, seed)?;
            let f = train_vanilla(&cfg, &data, seed)?;
            let sc = oodhull::select::SelectConfig {
                seed,
                ..cfg.select_config()
            };
            let outcome = run_rl_selection(&data, &f, &sc)?;
            let out = common.out_path(&cfg, "rewards.csv");
            create_parent(&out)?;
            write_reward_csv(&outcome.rewards, &out)
        }
        Command::Sweep { common, plot_script: plot } => {
            let cfg = common.load()?;
            let out = common.out_path(&cfg, "records.csv");
            create_parent(&out)?;
            let result = run_sweep_full(&cfg)?;
            emit_records(&result.records, &out)?;
            if !result.bound_reports.is_empty() {
                write_bounds(&out, &cfg, &result.bound_reports)?;
            }
            if plot {
                let name = out.file_name().and_then(|s| s.to_str()).unwrap_or("records.csv");
                let script = out.with_extension("plot.py");
                std::fs::write(&script, plot_script(name)).map_err(|e| Error::io(&script, e))?;
            }
            Ok(())
        }
        Command::Stats { input, group_by, out } => {
            let keys = group_by.split(',').map(|k| GroupKey::parse(k.trim())).collect::<Result<Vec<_>>>()?;
            let records = read_records(&input)?;
            let rows = trend_stats(&records, &keys);
            let out = out.unwrap_or_else(|| input.with_extension("trend.csv"));
            create_parent(&out)?;
            write_trend_csv(&rows, &keys, &out)
        }
    }
}

/// `<stem>.bounds.csv` next to the records file.
fn write_bounds(
    out: &Path,
    cfg: &ExperimentConfig,
    reports: &[(u64, usize, oodhull::bounds::BoundReport)],
) -> Result<()> {
    let path = out.with_extension("bounds.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    let mut header = vec!["experiment_id".to_string(), "seed".into(), "n_train".into()];
    header.extend(oodhull::bounds::BoundReport::csv_header(cfg.envs.num_sources()));
    w.write_record(&header).map_err(|e| Error::csv(&path, e))?;
    let mut sorted: Vec<_> = reports.iter().collect();
    sorted.sort_by_key(|(s, n, _)| (*s, *n));
    for (s, n, r) in sorted {
        let mut row = vec![cfg.experiment_id.clone(), s.to_string(), n.to_string()];
        row.extend(r.csv_row());
        w.write_record(&row).map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    let line = serde_json::json!({ "error": kind, "message": message });
    let _ = writeln!(std::io::stderr(), "{line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim(), 2),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string(), 1),
    }
}
