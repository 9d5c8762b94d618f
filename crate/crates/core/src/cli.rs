//! Command-line front end. The binary is a thin wrapper around [`run`].

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::eval::{bas_baseline, community_detect, evaluate_forecast, score_matrix, AucReport};
use crate::experiment::rolling_forecast;
use crate::inference::{extract_embeddings, forecast, full_elbo, train};
use crate::io::{
    aggregate_windows, format_auc_report, format_communities_csv, format_embeddings_csv, format_interactions_csv,
    format_latents_csv, format_matrix_csv, parse_events, parse_matrix_csv, read_snapshots, read_text, write_snapshots,
    write_text, Checkpoint, NodeDictionary, RunConfig, WindowSpec,
};
use crate::model::{sample_network, SnapshotSequence};

#[derive(Debug, Parser)]
#[command(name = "dlaim", version, about = "Latent attribute interaction models for evolving networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic network sequence from the generative model.
    Simulate(SimulateArgs),
    /// Fit an inference network to a snapshot file and write a checkpoint.
    Train(TrainArgs),
    /// Edge probabilities for the timestep after the training horizon.
    Forecast(ForecastArgs),
    /// AUC of a probability matrix (or the baseline) against one snapshot.
    Evaluate(EvaluateArgs),
    /// Spectral communities from learned embeddings at one timestep.
    Communities(CommunitiesArgs),
    /// Dump per-timestep attributes and interaction matrices.
    Embed(EmbedArgs),
    /// Bin a timestamped event stream into snapshots.
    Aggregate(AggregateArgs),
    /// Rolling forecast protocol over a range of target timesteps.
    RunExperiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Bas,
}

/// Model and optimiser settings; flags override `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// JSON run configuration to start from.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub s_theta: Option<f64>,
    #[arg(long)]
    pub s_psi: Option<f64>,
    #[arg(long)]
    pub sigma_theta: Option<f64>,
    #[arg(long)]
    pub sigma_psi: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Number of optimiser steps.
    #[arg(long)]
    pub batches: Option<usize>,
    /// Nodes per batch; 0 means min(N, 256).
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub directed: bool,
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_json(&read_text(p)?)?,
            None => RunConfig::default(),
        };
        macro_rules! over {
            ($($f:ident => $g:ident),*) => { $(if let Some(v) = self.$f { c.$g = v; })* };
        }
        over!(k => k, s_theta => s_theta, s_psi => s_psi, sigma_theta => sigma_theta,
              sigma_psi => sigma_psi, lr => lr, batches => n_batches, batch_size => batch_size, seed => seed);
        c.directed |= self.directed;
        c.hyperparams()?;
        c.train_config().validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub nodes: usize,
    #[arg(long)]
    pub t: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory for `snapshots.txt`, `latent_psi.csv`, `latent_theta.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Snapshot file.
    #[arg(long)]
    pub input: PathBuf,
    /// Train on the first H snapshots only.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Checkpoint to warm-start from.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Optional CSV of the per-step ELBO estimates.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Snapshot file holding the truth.
    #[arg(long)]
    pub truth: PathBuf,
    /// 1-based timestep of the truth snapshot.
    #[arg(long)]
    pub t: usize,
    /// Probability matrix CSV (required unless `--baseline` is given).
    #[arg(long)]
    pub prob: Option<PathBuf>,
    /// Score the baseline fitted to snapshots `1..t-1` of the truth file.
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    #[arg(long)]
    pub directed: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CommunitiesArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// 1-based timestep.
    #[arg(long)]
    pub t: usize,
    #[arg(long, default_value_t = 2)]
    pub clusters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Node dictionary CSV (`index,label`) for readable output.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Number of timesteps to dump; defaults to the trained horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Output directory for `embeddings.csv` and `interactions.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Event file: `timestamp source target` per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub width: f64,
    #[arg(long, default_value_t = 0.0)]
    pub start: f64,
    #[arg(long)]
    pub windows: Option<usize>,
    #[arg(long)]
    pub directed: bool,
    /// Output directory for `snapshots.txt` and `nodes.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// First target timestep (>= 2).
    #[arg(long)]
    pub first: Option<usize>,
    /// Last target timestep; defaults to the final snapshot.
    #[arg(long)]
    pub last: Option<usize>,
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// AUC report path; the baseline report goes next to it with a `_bas` suffix.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `argv` and runs the command. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli.command) {
        Ok(msg) => {
            print!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_snapshots(path: &Path, directed: bool) -> Result<SnapshotSequence> {
    let parsed = read_snapshots(path, directed.then_some(true))?;
    if parsed.self_loops > 0 {
        eprintln!("warning: dropped {} self-loop(s) from {}", parsed.self_loops, path.display());
    }
    Ok(parsed.snapshots)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let ext = path.extension().map_or_else(String::new, |e| format!(".{}", e.to_string_lossy()));
    path.with_file_name(format!("{stem}{suffix}{ext}"))
}

/// Runs one command and returns a human-readable summary.
pub fn dispatch(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Simulate(a) => {
            let cfg = a.model.resolve()?;
            let hp = cfg.hyperparams()?;
            let (seq, traj) = sample_network(&hp, a.nodes, a.t, cfg.seed)?;
            write_snapshots(&a.out.join("snapshots.txt"), &seq)?;
            let (psi, theta) = format_latents_csv(&traj)?;
            write_text(&a.out.join("latent_psi.csv"), &psi)?;
            write_text(&a.out.join("latent_theta.csv"), &theta)?;
            write_text(&a.out.join("config.json"), &cfg.to_json()?)?;
            Ok(format!(
                "simulated {} snapshots of {} nodes into {}\n",
                a.t,
                a.nodes,
                a.out.display()
            ))
        }
        Command::Train(a) => {
            let mut cfg = a.model.resolve()?;
            let warm = a.warm_start.as_deref().map(Checkpoint::load).transpose()?;
            if let Some(w) = &warm {
                cfg.k = w.config.k;
                cfg.directed = w.config.directed;
            }
            let mut seq = load_snapshots(&a.input, cfg.directed)?;
            cfg.directed = seq.directed();
            if let Some(h) = a.horizon {
                if h == 0 || h > seq.horizon() {
                    return Err(Error::InvalidConfig(format!("horizon {h} outside 1..={}", seq.horizon())));
                }
                seq = seq.truncated(h);
            }
            cfg.input = Some(a.input.clone());
            cfg.output = Some(a.out.clone());
            let hp = cfg.hyperparams()?;
            let warm_net = warm.as_ref().map(Checkpoint::network).transpose()?;
            let report = train(&seq, &hp, &cfg.train_config(), warm_net.as_ref())?;
            let elbo = full_elbo(&report.network, &seq, &hp)?;
            Checkpoint::new(&cfg, &report.network, seq.horizon()).save(&a.out)?;
            if let Some(trace) = &a.trace {
                let mut text = String::from("step,elbo\n");
                for (i, v) in report.batch_elbo.iter().enumerate() {
                    text.push_str(&format!("{},{}\n", i + 1, crate::io::fmt_value(*v)));
                }
                write_text(trace, &text)?;
            }
            Ok(format!(
                "trained on {} snapshots, {} steps; full ELBO {elbo:.6}\n",
                seq.horizon(),
                cfg.n_batches
            ))
        }
        Command::Forecast(a) => {
            let ck = Checkpoint::load(&a.checkpoint)?;
            let probs = forecast(&ck.network()?, ck.trained_horizon)?;
            write_text(&a.out, &format_matrix_csv(&probs))?;
            Ok(format!(
                "forecast for timestep {} written to {}\n",
                ck.trained_horizon + 1,
                a.out.display()
            ))
        }
        Command::Evaluate(a) => {
            let seq = load_snapshots(&a.truth, a.directed)?;
            if a.t == 0 || a.t > seq.horizon() {
                return Err(Error::InvalidConfig(format!("timestep {} outside 1..={}", a.t, seq.horizon())));
            }
            let probs = match (a.baseline, &a.prob) {
                (Some(Baseline::Bas), _) => {
                    if a.t < 2 {
                        return Err(Error::InvalidConfig("the baseline needs at least one earlier snapshot".into()));
                    }
                    bas_baseline(&seq.truncated(a.t - 1))?
                }
                (None, Some(p)) => parse_matrix_csv(&read_text(p)?)?,
                (None, None) => return Err(Error::InvalidConfig("give --prob or --baseline".into())),
            };
            let auc = evaluate_forecast(&probs, seq.get(a.t - 1), seq.directed())?;
            let report = AucReport { rows: vec![(a.t, auc)] };
            write_text(&a.out, &format_auc_report(&report))?;
            Ok(format!("AUC at timestep {}: {auc:.6}\n", a.t))
        }
        Command::Communities(a) => {
            let ck = Checkpoint::load(&a.checkpoint)?;
            let net = ck.network()?;
            if a.t == 0 {
                return Err(Error::InvalidConfig("timesteps are 1-based".into()));
            }
            let emb = extract_embeddings(&net, a.t)?;
            let logits = score_matrix(&emb.z[a.t - 1], &emb.theta[a.t - 1], net.directed());
            let assignment = community_detect(&logits, a.clusters, a.t, a.seed)?;
            let dict = a
                .dictionary
                .as_deref()
                .map(|p| read_text(p).and_then(|t| NodeDictionary::from_csv(&t)))
                .transpose()?;
            write_text(&a.out, &format_communities_csv(&assignment, dict.as_ref())?)?;
            Ok(format!(
                "{} nodes in {} communities at timestep {}\n",
                assignment.n_nodes(),
                assignment.n_used(),
                a.t
            ))
        }
        Command::Embed(a) => {
            let ck = Checkpoint::load(&a.checkpoint)?;
            let horizon = a.horizon.unwrap_or(ck.trained_horizon);
            let emb = extract_embeddings(&ck.network()?, horizon)?;
            write_text(&a.out.join("embeddings.csv"), &format_embeddings_csv(&emb)?)?;
            write_text(&a.out.join("interactions.csv"), &format_interactions_csv(&emb)?)?;
            Ok(format!("embeddings for {horizon} timesteps written to {}\n", a.out.display()))
        }
        Command::Aggregate(a) => {
            let mut dict = NodeDictionary::new();
            let events = parse_events(&read_text(&a.input)?, &mut dict, &a.input.display().to_string())?;
            let spec = WindowSpec {
                start: a.start,
                width: a.width,
                n_windows: a.windows,
            };
            let seq = aggregate_windows(&events, dict.len(), a.directed, spec)?;
            write_snapshots(&a.out.join("snapshots.txt"), &seq)?;
            write_text(&a.out.join("nodes.csv"), &dict.to_csv()?)?;
            Ok(format!(
                "{} events, {} nodes, {} snapshots\n",
                events.len(),
                dict.len(),
                seq.horizon()
            ))
        }
        Command::RunExperiment(a) => {
            let mut cfg = a.model.resolve()?;
            let seq = load_snapshots(&a.input, cfg.directed)?;
            cfg.directed = seq.directed();
            let first = a.first.or(cfg.first).unwrap_or(2);
            let last = a.last.or(cfg.last).unwrap_or(seq.horizon());
            let hp = cfg.hyperparams()?;
            let res = rolling_forecast(&seq, &hp, &cfg.train_config(), first, last, a.baseline.is_some())?;
            write_text(&a.out, &format_auc_report(&res.model))?;
            let mut msg = format!(
                "trained {} networks ({} warm-started); mean AUC {:.6}\n",
                res.networks_trained,
                res.warm_starts,
                res.model.mean()
            );
            if let Some(b) = &res.baseline {
                let path = sibling(&a.out, "_bas");
                write_text(&path, &format_auc_report(b))?;
                msg.push_str(&format!("baseline mean AUC {:.6} ({})\n", b.mean(), path.display()));
            }
            if !res.skipped.is_empty() {
                msg.push_str(&format!("skipped single-class targets: {:?}\n", res.skipped));
            }
            Ok(msg)
        }
    }
}
