use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use canopy::{Error, Result};
use canopy_cli::commands::{self, Outcome};
use canopy_cli::{exit_code, Method, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "canopy", version, about = "Tree canopy color analysis from colored point clouds")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Tree manifest (TOML).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    method: Option<Method>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all CPUs).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Segment every manifest cloud and write the foreground trees.
    Segment,
    /// Train the point classifier (single config or sweep).
    Train {
        /// Label dataset CSV.
        #[arg(long)]
        labels: PathBuf,
    },
    /// Yellowness index per tree and week.
    Index,
    /// Banded indices against ground truth, plus method timing.
    Validate {
        /// Trained model; overrides gbm.model_path.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Weekly correlation, ANOVA and Tukey tables.
    Stats {
        /// Observations CSV written by `index`.
        #[arg(long)]
        observations: PathBuf,
    },
    /// Generate a synthetic season with manifest, truth and labels.
    Synth,
    /// Run the labeling service.
    Serve {
        /// Label dataset to append to.
        #[arg(long)]
        dataset: PathBuf,
        /// Directory of PLY clouds (used when no manifest is given).
        #[arg(long)]
        clouds: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value_t = canopy_labelsvc::DEFAULT_DISPLAY_STRIDE)]
        stride: usize,
    },
}

fn config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = common.method {
        cfg.method = m;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
        cfg.synth.seed = s;
        cfg.gbm.hyperparams.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    } else if let Some(p) = &common.config {
        // Relative output directories follow the config file.
        if cfg.out_dir.is_relative() {
            let base = p.parent().unwrap_or(Path::new(""));
            cfg.out_dir = base.join(&cfg.out_dir);
        }
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let (Some(p), Some(model)) = (&common.config, cfg.gbm.model_path.clone()) {
        if model.is_relative() {
            cfg.gbm.model_path = Some(p.parent().unwrap_or(Path::new("")).join(model));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn manifest(common: &Common) -> Result<canopy::TreeManifest> {
    let path = common
        .manifest
        .as_ref()
        .ok_or_else(|| Error::Validation("--manifest is required".into()))?;
    commands::load_manifest(path)
}

fn serve(cfg: &RunConfig, common: &Common, dataset: &Path, clouds: Option<&Path>, addr: SocketAddr, stride: usize) -> Result<Outcome> {
    use canopy_labelsvc::{AppState, CloudRegistry, ServiceConfig};
    let registry = match (&common.manifest, clouds) {
        (Some(_), _) => CloudRegistry::from_manifest(&manifest(common)?),
        (None, Some(dir)) => CloudRegistry::from_dir(dir).map_err(|e| Error::io(dir, e))?,
        (None, None) => return Err(Error::Validation("serve needs --manifest or --clouds".into())),
    };
    let svc = ServiceConfig {
        display_stride: stride.max(1),
        k_neighbors: cfg.schema.k_neighbors,
    };
    let state = Arc::new(AppState::new(registry, dataset, svc)?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
    rt.block_on(canopy_labelsvc::serve(addr, state))
        .map_err(|e| Error::io(addr.to_string(), e))?;
    Ok(Outcome::default())
}

fn run(cli: &Cli) -> Result<Outcome> {
    let mut cfg = config(&cli.common)?;
    match &cli.command {
        Command::Segment => commands::cmd_segment(&cfg, &manifest(&cli.common)?),
        Command::Train { labels } => commands::cmd_train(&cfg, labels),
        Command::Index => commands::cmd_index(&cfg, &manifest(&cli.common)?),
        Command::Validate { model } => {
            if let Some(m) = model {
                cfg.gbm.model_path = Some(m.clone());
            }
            commands::cmd_validate(&cfg, &manifest(&cli.common)?)
        }
        Command::Stats { observations } => {
            let m = match &cli.common.manifest {
                Some(_) => Some(manifest(&cli.common)?),
                None => None,
            };
            commands::cmd_stats(&cfg, observations, m.as_ref())
        }
        Command::Synth => commands::cmd_synth(&cfg),
        Command::Serve {
            dataset,
            clouds,
            addr,
            stride,
        } => serve(&cfg, &cli.common, dataset, clouds.as_deref(), *addr, *stride),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = run(&cli);
    match &result {
        Ok(o) => {
            for f in &o.failures {
                eprintln!("failed: {} week {} [{}]: {}", f.tree_id, canopy_cli::tables::opt(f.week), f.stage, f.error);
            }
            log::info!("wrote {} outputs, {} failures", o.outputs.len(), o.failures.len());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    std::process::exit(exit_code(&result));
}
