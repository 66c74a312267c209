use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use segtest::backends::{external, Ports};
use segtest::campaign::{
    cmd_calibrate, cmd_export, cmd_report, cmd_run, parse_seeds, CampaignConfig, Pooling, ReportOptions,
    DEFAULT_EXPORT_LIMIT,
};
use segtest::features::DistanceMetric;
use segtest::search::Variant;
use segtest::{Error, Profile, Result};

#[derive(Parser)]
#[command(name = "segtest", version, about = "Search simulator poses for inputs that break a segmentation model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Campaign {
    /// Campaign config (JSON); profile defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    profile: Option<Profile>,
    #[arg(long)]
    workers: Option<usize>,
}

impl Campaign {
    fn load(&self) -> Result<CampaignConfig> {
        let mut config = match (&self.config, self.profile) {
            (Some(path), profile) => {
                let c = CampaignConfig::load(path)?;
                if profile.is_some_and(|p| p != c.profile) {
                    return Err(Error::Config(format!("--profile disagrees with {}", path.display())));
                }
                c
            }
            (None, Some(p)) => CampaignConfig::new(p),
            (None, None) => return Err(Error::Config("pass --config or --profile".into())),
        };
        if self.workers.is_some() {
            config.workers = self.workers;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate T_diversity (and T_relevance where the delta gate is on).
    Calibrate {
        #[command(flatten)]
        campaign: Campaign,
        /// Number of calibration images [default: from config, 1000]
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value = "feature")]
        metric: DistanceMetric,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one variant for each seed.
    Run {
        #[command(flatten)]
        campaign: Campaign,
        #[arg(long)]
        variant: Variant,
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// N..M (exclusive) or N..=M; 0..repetitions by default
        #[arg(long)]
        seeds: Option<String>,
        /// Campaign root [default: output_root from the config]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy and diversity tables over run directories.
    Report {
        /// Run directories or campaign roots
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "within-run")]
        pooling: Pooling,
        /// Skip pixel-based diversity
        #[arg(long)]
        no_pixel: bool,
    },
    /// Export a retraining set sampled from archives.
    Export {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_EXPORT_LIMIT)]
        max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the built-in ports over the backend protocol on stdin/stdout.
    Serve {
        #[command(flatten)]
        campaign: Campaign,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Calibrate {
            campaign,
            samples,
            metric,
            out,
        } => {
            let t = cmd_calibrate(&campaign.load()?, samples, metric, &out)?;
            print!("{}", t.to_text());
        }
        Command::Run {
            campaign,
            variant,
            seed,
            seeds,
            out,
        } => {
            let config = campaign.load()?;
            let seeds = match (seed, seeds) {
                (Some(s), _) => vec![s],
                (None, Some(r)) => parse_seeds(&r)?,
                (None, None) => (0..config.repetitions).collect(),
            };
            let out = out.unwrap_or_else(|| config.output_root.clone());
            for dir in cmd_run(&config, variant, &seeds, &out)? {
                println!("{}", dir.display());
            }
        }
        Command::Report {
            runs,
            out,
            pooling,
            no_pixel,
        } => {
            let options = ReportOptions {
                pooling,
                pixel_diversity: !no_pixel,
            };
            for f in cmd_report(&runs, &out, options)?.files {
                println!("{}", f.display());
            }
        }
        Command::Export { runs, max, seed, out } => {
            let s = cmd_export(&runs, max, seed, &out)?;
            println!("exported {} of {} members to {}", s.exported, s.pool, out.display());
        }
        Command::Serve { campaign } => {
            let config = campaign.load()?;
            let ports = Ports::builtin(config.profile, config.image_size);
            external::serve(&ports, std::io::stdin().lock(), std::io::stdout().lock())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
