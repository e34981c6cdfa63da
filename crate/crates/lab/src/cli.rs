//! Argument parsing and dispatch for the `rrm` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rrm_core::models::Arch;
use rrm_core::oracles::OracleName;
use rrm_core::training::{OptimizerKind, Scheme};

use crate::commands::{self, Demo};
use crate::config::{load_config_file, resolve, Flags};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "rrm", version, about = "Learning-to-optimize experiments for wireless resource management")]
pub struct Cli {
    /// TOML file with one table per command, e.g. `[sweep_k]`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: <root>/<command>, with the root taken
    /// from $RRM_OUT_DIR or else `out`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for sweep cells.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Optim {
    Sgd,
    Adam,
}

impl From<Optim> for OptimizerKind {
    fn from(o: Optim) -> Self {
        match o {
            Optim::Sgd => OptimizerKind::Sgd,
            Optim::Adam => OptimizerKind::AdaptiveMoment,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample network instances and label them with an oracle.
    GenData(GenDataArgs),
    /// Train an MLP or GNN power-control model on a dataset.
    Train(TrainArgs),
    /// Measure train/generalization gaps of a checkpoint.
    EvalGap(EvalGapArgs),
    /// Gap of MLP and GNN as the number of users grows.
    SweepK(SweepKArgs),
    /// GNN generalization gap as the training set grows.
    SweepM(SweepMArgs),
    /// Small self-contained demonstrations.
    Demos(DemosArgs),
    /// Unrolled OAMP MIMO detection: SER against baselines.
    Oamp(OampArgs),
    /// Re-run an experiment from its manifest and compare artifacts.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// rayleigh_iid or geometric.
    #[arg(long)]
    pub channel: Option<String>,
    /// wmmse, brute_force or none.
    #[arg(long)]
    pub oracle: Option<OracleName>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset file; its parent becomes the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SharedTrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long, value_enum)]
    pub optimizer: Option<Optim>,
    /// Comma-separated MLP hidden widths.
    #[arg(long, value_delimiter = ',')]
    pub mlp_hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub gnn_rounds: Option<usize>,
    #[arg(long)]
    pub gnn_hidden: Option<usize>,
}

impl SharedTrainArgs {
    fn apply(&self, f: Flags) -> Flags {
        f.set("epochs", self.epochs)
            .set("batch_size", self.batch_size)
            .set("learning_rate", self.learning_rate)
            .set("optimizer", self.optimizer.map(OptimizerKind::from))
            .set("mlp_hidden", self.mlp_hidden.clone())
            .set("gnn.num_rounds", self.gnn_rounds)
            .set("gnn.hidden_dim", self.gnn_hidden)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// mlp or mpgnn.
    #[arg(long)]
    pub arch: Option<Arch>,
    /// supervised or unsupervised.
    #[arg(long)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub early_stop_tol: Option<f64>,
    /// Output directory; same as --out-dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub shared: SharedTrainArgs,
}

#[derive(Debug, Args)]
pub struct EvalGapArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub train_data: Option<PathBuf>,
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    #[arg(long)]
    pub oracle: Option<OracleName>,
    /// Fresh training sets for the PAC estimate (0 skips it).
    #[arg(long)]
    pub pac_trials: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Number of seeds (1..=n).
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub channel: Option<String>,
    #[arg(long)]
    pub oracle: Option<OracleName>,
    #[command(flatten)]
    pub shared: SharedTrainArgs,
}

impl SweepArgs {
    fn apply(&self, f: Flags) -> Flags {
        self.shared.apply(
            f.set("seeds", self.seeds)
                .set("n_test", self.n_test)
                .set("channel", self.channel.clone())
                .set("oracle", self.oracle),
        )
    }
}

#[derive(Debug, Args)]
pub struct SweepKArgs {
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    #[arg(long)]
    pub m: Option<usize>,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Debug, Args)]
pub struct SweepMArgs {
    #[arg(long, value_delimiter = ',')]
    pub ms: Option<Vec<usize>>,
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Debug, Args)]
pub struct DemosArgs {
    #[arg(long, value_enum)]
    pub which: Option<Demo>,
}

#[derive(Debug, Args)]
pub struct OampArgs {
    #[arg(long)]
    pub ntx: Option<usize>,
    #[arg(long)]
    pub mrx: Option<usize>,
    /// Comma-separated SNR values in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub snr: Option<Vec<f64>>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Learn the step sizes before evaluating.
    #[arg(long)]
    pub train: bool,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Include exhaustive ML detection.
    #[arg(long)]
    pub ml: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A manifest.json or the directory holding it.
    pub manifest: PathBuf,
}

fn out_dir(given: Option<PathBuf>, command: &str) -> PathBuf {
    given
        .unwrap_or_else(|| std::env::var_os("RRM_OUT_DIR").map(PathBuf::from).unwrap_or_else(|| "out".into()).join(command))
}

/// Runs a parsed command line and returns the text to print.
pub fn run(cli: Cli) -> Result<String> {
    let file = cli.config.as_deref().map(load_config_file).transpose()?;
    let file = file.as_ref();
    let jobs = cli.jobs as usize;
    match cli.command {
        Command::GenData(a) => {
            let (dir, name) = match &a.out {
                Some(p) => {
                    let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
                    (parent.to_path_buf(), p.file_name().map(|n| n.to_string_lossy().into_owned()))
                }
                None => (out_dir(cli.out_dir, "gen-data"), None),
            };
            let flags = Flags::default()
                .set("k", a.k)
                .set("n", a.n)
                .set("channel", a.channel)
                .set("oracle", a.oracle)
                .set("seed", a.seed)
                .set("out", name);
            let cfg: commands::GenDataConfig = resolve("gen_data", file, flags.into_map())?;
            commands::gen_data(&cfg, &dir)
        }
        Command::Train(a) => {
            let flags = a.shared.apply(
                Flags::default()
                    .set("arch", a.arch)
                    .set("scheme", a.scheme)
                    .set("data", a.data)
                    .set("seed", a.seed)
                    .set("early_stop_tol", a.early_stop_tol),
            );
            let cfg: commands::TrainCmdConfig = resolve("train", file, flags.into_map())?;
            commands::train_cmd(&cfg, &out_dir(a.out.or(cli.out_dir), "train"))
        }
        Command::EvalGap(a) => {
            let flags = Flags::default()
                .set("checkpoint", a.checkpoint)
                .set("train_data", a.train_data)
                .set("test_data", a.test_data)
                .set("oracle", a.oracle)
                .set("pac.trials", a.pac_trials)
                .set("pac.delta", a.delta);
            let cfg: commands::EvalGapConfig = resolve("eval_gap", file, flags.into_map())?;
            commands::eval_gap(&cfg, &out_dir(cli.out_dir, "eval-gap"))
        }
        Command::SweepK(a) => {
            let flags = a.sweep.apply(Flags::default().set("ks", a.ks).set("m", a.m));
            let cfg: commands::SweepKConfig = resolve("sweep_k", file, flags.into_map())?;
            let r = commands::sweep_k(&cfg, &out_dir(cli.out_dir, "sweep-k"), jobs)?;
            let mut s = String::from("k     gap_mlp   gap_gnn   ratio\n");
            for row in &r.rows {
                s.push_str(&format!("{:<5} {:<9.5} {:<9.5} {:.3}\n", row.k, row.gap_mlp, row.gap_gnn, row.ratio));
            }
            s.push_str(&format!("fitted ratio exponent: {:?}", r.fitted_ratio_exponent));
            if !r.failures.is_empty() {
                s.push_str(&format!("\nfailed cells: {}", r.failures.len()));
            }
            Ok(s)
        }
        Command::SweepM(a) => {
            let flags = a.sweep.apply(Flags::default().set("ms", a.ms).set("k", a.k));
            let cfg: commands::SweepMConfig = resolve("sweep_m", file, flags.into_map())?;
            let r = commands::sweep_m(&cfg, &out_dir(cli.out_dir, "sweep-m"), jobs)?;
            let mut s = String::from("m      gen_gap\n");
            for row in &r.rows {
                s.push_str(&format!("{:<6} {:.5}\n", row.m, row.gen_gap));
            }
            s.push_str(&format!("fitted log-log slope: {:?}", r.fitted_slope));
            Ok(s)
        }
        Command::Demos(a) => {
            let cfg: commands::DemosConfig = resolve("demos", file, Flags::default().set("which", a.which).into_map())?;
            commands::demos(&cfg, &out_dir(cli.out_dir, "demos"))
        }
        Command::Oamp(a) => {
            let flags = Flags::default()
                .set("ntx", a.ntx)
                .set("mrx", a.mrx)
                .set("snr", a.snr)
                .set("layers", a.layers)
                .set("train", a.train.then_some(true))
                .set("trials", a.trials)
                .set("ml", a.ml.then_some(true))
                .set("seed", a.seed);
            let cfg: commands::OampCmdConfig = resolve("oamp", file, flags.into_map())?;
            let dir = out_dir(cli.out_dir, "oamp");
            let r = commands::oamp_cmd(&cfg, &dir)?;
            let mut s = std::fs::read_to_string(dir.join("ser.csv")).unwrap_or_default();
            if let Some(p) = &r.learned {
                s.push_str(&format!("learned gamma {:?}\nlearned theta {:?}\n", p.gamma, p.theta));
            }
            for c in &r.comparisons {
                s.push_str(&format!(
                    "snr {} dB: learned - fixed SER = {:.2e} +/- {:.2e}\n",
                    c.snr_db, c.learned_vs_fixed.difference, c.learned_vs_fixed.ci_half_width
                ));
            }
            Ok(s.trim_end().to_string())
        }
        Command::Replay(a) => {
            let dir = out_dir(cli.out_dir, "replay");
            let r = commands::replay(&a.manifest, &dir, jobs)?;
            if r.identical() {
                Ok(format!("{}: {} artifacts identical", r.command, r.matched.len()))
            } else {
                Err(crate::error::LabError::Runtime(format!("{}: artifacts differ: {}", r.command, r.mismatched.join(", "))))
            }
        }
    }
}
