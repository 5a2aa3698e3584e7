use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use viewplan::heatmap::DEFAULT_ALPHA;
use viewplan::phantom::PhantomConfig;
use viewplan::prescribe::{Aggregation, SamplingMode, SearchConfig};
use viewplan::workflow::{
    cmd_evaluate, cmd_gen_labels, cmd_loss, cmd_phantom, cmd_prescribe, PrescribeOptions, ReportFormat, WorkflowError,
};

/// Cardiac MR view planning from localizer intersections.
#[derive(Parser)]
#[command(name = "viewplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic exam with ground truth and labels.
    Phantom(PhantomArgs),
    /// Render intersecting-line labels for every source view of a manifest.
    GenLabels {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prescribe target planes from label heatmaps.
    Prescribe(PrescribeArgs),
    /// Compare prescribed planes with ground-truth manifests.
    Evaluate {
        /// Planes file; repeat together with --manifest for several exams.
        #[arg(long, required = true)]
        planes: Vec<PathBuf>,
        #[arg(long, required = true)]
        manifest: Vec<PathBuf>,
        /// Report file; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// L2 loss between two label directories.
    Loss {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON phantom configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    blur_radius: Option<usize>,
    /// p4C from p2C alone, pSA from p2C and p4C.
    #[arg(long)]
    alternative_protocol: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PrescribeArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory of HMAP label files, one per source view.
    #[arg(long)]
    labels: PathBuf,
    /// Target view; repeat for several. All targets when absent.
    #[arg(long = "target")]
    targets: Vec<String>,
    #[arg(long, value_enum, default_value_t = Sampling::Bilinear)]
    sampling: Sampling,
    #[arg(long, value_enum, default_value_t = Aggregate::Sum)]
    aggregation: Aggregate,
    /// Pyramid levels as position:angle pairs, coarse first.
    #[arg(long, default_value = "15:15,5:5,1:1")]
    steps: String,
    /// Incumbents kept after each level, coarse first.
    #[arg(long, default_value = "64,4")]
    beam: String,
    /// Source indices of the anchor pair, e.g. 0,2.
    #[arg(long)]
    anchor_pair: Option<String>,
    #[arg(long)]
    no_overlays: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampling {
    Bilinear,
    Nearest,
}

#[derive(Clone, Copy, ValueEnum)]
enum Aggregate {
    Sum,
    Mean,
}

fn invalid(msg: String) -> WorkflowError {
    WorkflowError::Validation(msg)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, WorkflowError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| invalid(format!("bad {what}: {text}"))))
        .collect()
}

fn search_config(args: &PrescribeArgs) -> Result<SearchConfig, WorkflowError> {
    let steps = args
        .steps
        .split(',')
        .map(|pair| {
            let (p, a) = pair
                .split_once(':')
                .ok_or_else(|| invalid(format!("bad step {pair}, expected position:angle")))?;
            let p = p
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad position step {p}")))?;
            let a = a.trim().parse().map_err(|_| invalid(format!("bad angle step {a}")))?;
            Ok((p, a))
        })
        .collect::<Result<Vec<(usize, f64)>, WorkflowError>>()?;
    let mut config = SearchConfig::default().with_steps(&steps);
    config.beam_widths = parse_list(&args.beam, "beam")?;
    config.sampling = match args.sampling {
        Sampling::Bilinear => SamplingMode::Bilinear,
        Sampling::Nearest => SamplingMode::Nearest,
    };
    config.aggregation = match args.aggregation {
        Aggregate::Sum => Aggregation::Sum,
        Aggregate::Mean => Aggregation::SegmentMean,
    };
    if let Some(pair) = &args.anchor_pair {
        match parse_list::<usize>(pair, "anchor pair")?[..] {
            [i, j] => config.anchor_pair = Some((i, j)),
            _ => return Err(invalid(format!("anchor pair needs two indices, got {pair}"))),
        }
    }
    config.validate().map_err(|e| invalid(e.to_string()))?;
    Ok(config)
}

fn phantom_config(args: &PhantomArgs) -> Result<PhantomConfig, WorkflowError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?
        }
        None => PhantomConfig::default(),
    };
    config.seed = args.seed;
    config.alternative_protocol |= args.alternative_protocol;
    if let Some(a) = args.alpha {
        config.alpha = a;
    }
    if let Some(s) = args.noise_std {
        config.noise.std = s;
    }
    if let Some(r) = args.blur_radius {
        config.noise.blur_radius = r;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), WorkflowError> {
    match cli.command {
        Command::Phantom(args) => {
            let manifest = cmd_phantom(&phantom_config(&args)?, &args.out)?;
            println!("{}", manifest.display());
        }
        Command::GenLabels { manifest, alpha, out } => {
            let labels = cmd_gen_labels(&manifest, alpha, &out)?;
            for (view, v) in &labels.views {
                println!(
                    "{view}\t{} slice(s)\t{} channel(s): {}",
                    v.slices.len(),
                    v.targets.len(),
                    v.targets.join(",")
                );
            }
        }
        Command::Prescribe(args) => {
            let options = PrescribeOptions {
                targets: args.targets.clone(),
                search: search_config(&args)?,
                overlays: !args.no_overlays,
            };
            let planes = cmd_prescribe(&args.manifest, &args.labels, &options, &args.out)?;
            for p in &planes.planes {
                let flag = if p.degenerate { "\tdegenerate" } else { "" };
                println!("{}\tscore {:.4}{flag}", p.target, p.score);
            }
        }
        Command::Evaluate {
            planes,
            manifest,
            out,
            format,
        } => {
            if planes.len() != manifest.len() {
                return Err(invalid(format!(
                    "{} planes files but {} manifests",
                    planes.len(),
                    manifest.len()
                )));
            }
            let format = match format {
                Format::Json => ReportFormat::Json,
                Format::Csv => ReportFormat::Csv,
            };
            let pairs: Vec<_> = planes.into_iter().zip(manifest).collect();
            let report = cmd_evaluate(&pairs, out.as_deref(), format)?;
            if out.is_none() {
                let text = match format {
                    ReportFormat::Json => viewplan::io::report::metrics_json(&report),
                    ReportFormat::Csv => viewplan::io::report::metrics_csv(&report.cases)?,
                };
                print!("{text}");
            }
        }
        Command::Loss { truth, pred } => {
            for (name, loss) in cmd_loss(&truth, &pred)? {
                println!("{name}\t{loss:e}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
