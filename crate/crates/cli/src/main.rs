use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter};

use vesselxai::blob::{detect_blobs, BlobDetectorParams};
use vesselxai::graph::{build_graph, select_pois, skeletonize, write_poi_table};
use vesselxai::io::{read_f32, read_mask, write_volume, Format};
use vesselxai::patch::PatchGrid;
use vesselxai::phantom::{generate_phantom, write_dataset, PhantomSpec};
use vesselxai::pipeline::{run_stages, validate_config, PathsConfig, PipelineConfig, RunManifest, Stages};
use vesselxai::Error;

const CONFIG_ERROR: u8 = 2;
const INPUT_ERROR: u8 = 3;
const INTERNAL_ERROR: u8 = 4;

#[derive(Parser)]
#[command(name = "vesselxai", version, about = "Vessel graph, blob and feature analysis of attribution maps")]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `paths.output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides `workers`.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Info)]
    log_level: LogLevel,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl From<LogLevel> for LevelFilter {
    fn from(l: LogLevel) -> Self {
        match l {
            LogLevel::Error => LevelFilter::Error,
            LogLevel::Warn => LevelFilter::Warn,
            LogLevel::Info => LevelFilter::Info,
            LogLevel::Debug => LevelFilter::Debug,
            LogLevel::Trace => LevelFilter::Trace,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Three-arm junction in a 64³ volume.
    Y,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and print it with every default filled in.
    ValidateConfig,
    /// Skeletonize the ground truth and write graph.json and skeleton.nii.
    ExtractGraph,
    /// Write graph.json and the POI table pois.csv.
    SelectPois,
    /// Detect blobs in standalone attribution maps and write blobs.csv.
    DetectBlobs {
        /// Attribution volumes (.nii, .nii.gz or RAW .json).
        #[arg(required = true)]
        maps: Vec<PathBuf>,
    },
    /// Vessel features for every (POI, patch) pair.
    Features,
    /// Blob detection and attribution statistics for pairs passing the status filter.
    Stats,
    /// Every stage, all reports and the run manifest.
    RunAll,
    /// Generate a synthetic dataset from a phantom spec.
    GenPhantom {
        /// Phantom spec (JSON); with an `attribution` block a full pipeline dataset is written.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        spec: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Write attribution maps and a config for the preset.
        #[arg(long, requires = "preset")]
        with_attributions: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: CONFIG_ERROR,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::InvalidGrid(_) | Error::InvalidParameter(_) => CONFIG_ERROR,
            Error::Io { .. }
            | Error::MalformedHeader { .. }
            | Error::UnsupportedDataType { .. }
            | Error::PayloadSize { .. }
            | Error::NonFinite { .. }
            | Error::UnsupportedFormat(_)
            | Error::NotBinary(_)
            | Error::DimensionMismatch(_)
            | Error::OutOfBounds { .. }
            | Error::Csv(_) => INPUT_ERROR,
            _ => INTERNAL_ERROR,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn write_file(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Failure {
        code: INPUT_ERROR,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

fn create_dir(path: &Path) -> CliResult {
    fs::create_dir_all(path).map_err(|e| Failure {
        code: INPUT_ERROR,
        message: format!("cannot create {}: {e}", path.display()),
    })
}

fn to_json<T: serde::Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Failure {
            code: INTERNAL_ERROR,
            message: e.to_string(),
        })
}

impl Cli {
    /// The validated config with command-line overrides applied.
    fn load_config(&self) -> CliResult<PipelineConfig> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| Failure::config("this command needs --config <file>"))?;
        let mut config = validate_config(path).map_err(|e| Failure::config(e.to_string()))?;
        if let Some(out) = &self.out {
            config.paths.output = out.clone();
        }
        if self.workers.is_some() {
            config.workers = self.workers;
        }
        config.check_values()?;
        Ok(config)
    }

    fn out_dir(&self) -> CliResult<PathBuf> {
        self.out.clone().ok_or_else(|| Failure::config("this command needs --out <dir>"))
    }

    fn pool(&self) -> CliResult {
        if let Some(n) = self.workers {
            if n == 0 {
                return Err(Failure::config("--workers must be >= 1"));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::config(format!("cannot start {n} workers: {e}")))?;
        }
        Ok(())
    }
}

fn graph_outputs(config: &PipelineConfig, with_pois: bool) -> CliResult {
    let gt = read_mask(&config.paths.gt)?;
    let out = &config.paths.output;
    create_dir(out)?;
    let skeleton = skeletonize(&gt);
    let graph = build_graph(&skeleton);
    graph.write(out.join("graph.json"))?;
    info!("{} nodes, {} edges", graph.nodes.len(), graph.edges.len());
    if with_pois {
        let grid = PatchGrid::new(gt.dims(), config.patch.size, config.patch.overlap)?;
        let pois = select_pois(&graph, &gt, &grid)?;
        write_poi_table(&pois, out.join("pois.csv"))?;
        info!("{} POIs over {} patches", pois.len(), grid.len());
    } else {
        write_volume(&skeleton, out.join("skeleton.nii"), Format::Nifti)?;
    }
    Ok(())
}

fn detect(cli: &Cli, maps: &[PathBuf]) -> CliResult {
    let params = match &cli.config {
        Some(_) => cli.load_config()?.detector,
        None => BlobDetectorParams::default(),
    };
    params.validate()?;
    let out = cli.out_dir()?;
    create_dir(&out)?;
    let path = out.join("blobs.csv");
    let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
    w.write_record(["map", "blob_label", "size_voxels", "cx", "cy", "cz"])
        .map_err(Error::from)?;
    for map in maps {
        let attr = read_f32(map)?;
        let blobs = detect_blobs(&attr, &params)?;
        info!("{}: {} blobs", map.display(), blobs.len());
        let name = map.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        for b in &blobs.blobs {
            let [x, y, z] = b.centroid;
            w.write_record([
                name.clone(),
                b.label.to_string(),
                b.size.to_string(),
                x.to_string(),
                y.to_string(),
                z.to_string(),
            ])
            .map_err(Error::from)?;
        }
    }
    w.flush().map_err(|e| Failure {
        code: INPUT_ERROR,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

fn stages(cli: &Cli, stages: Stages) -> CliResult {
    let config = cli.load_config()?;
    let manifest: RunManifest = run_stages(&config, stages)?;
    let c = &manifest.counts;
    println!(
        "{} POIs, {} pairs ({} passing), {} maps analyzed, {} with blobs, {} skipped -> {}",
        c.pois,
        c.pairs,
        c.pairs_passing_filter,
        c.maps_analyzed,
        c.maps_with_blobs,
        c.skipped,
        config.paths.output.display()
    );
    Ok(())
}

fn gen_phantom(cli: &Cli, spec: Option<&Path>, preset: Option<Preset>, with_attributions: bool) -> CliResult {
    let out = cli.out_dir()?;
    let mut spec: PhantomSpec = match (spec, preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Failure {
                code: INPUT_ERROR,
                message: format!("cannot read {}: {e}", path.display()),
            })?;
            serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
        }
        (None, Some(Preset::Y)) => PhantomSpec::y_phantom(),
        (None, None) => return Err(Failure::config("gen-phantom needs --spec or --preset")),
    };
    if with_attributions {
        spec.attribution.get_or_insert_with(Default::default);
    }
    let phantom = generate_phantom(&spec)?;
    create_dir(&out)?;
    write_file(&out.join("phantom.json"), &to_json(&phantom.descriptor)?)?;
    match &spec.attribution {
        None => {
            write_volume(&phantom.image, out.join("image.nii"), Format::Nifti)?;
            write_volume(&phantom.gt, out.join("gt.nii"), Format::Nifti)?;
            println!("{} foreground voxels -> {}", phantom.descriptor.foreground_voxels, out.display());
        }
        Some(fixture) => {
            let ds = write_dataset(&phantom, fixture, spec.seed, &out)?;
            let rel = |p: &Path| p.strip_prefix(&out).unwrap_or(p).to_path_buf();
            let mut config = PipelineConfig::new(PathsConfig {
                gt: rel(&ds.gt),
                image: Some(rel(&ds.image)),
                prediction: rel(&ds.prediction),
                attributions: rel(&ds.attribution_dir),
                output: PathBuf::from("results"),
            });
            config.patch.size = fixture.patch_size;
            config.patch.overlap = fixture.overlap;
            write_file(&out.join("config.json"), &to_json(&config)?)?;
            println!(
                "{} POIs, {} attribution maps -> {}",
                ds.pois.len(),
                ds.maps_written,
                out.display()
            );
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::ValidateConfig => {
            let config = cli.load_config()?;
            print!("{}", to_json(&config)?);
            Ok(())
        }
        Command::ExtractGraph => graph_outputs(&cli.load_config()?, false),
        Command::SelectPois => graph_outputs(&cli.load_config()?, true),
        Command::DetectBlobs { maps } => {
            cli.pool()?;
            detect(cli, maps)
        }
        Command::Features => stages(
            cli,
            Stages {
                features: true,
                attributions: false,
            },
        ),
        Command::Stats => stages(
            cli,
            Stages {
                features: false,
                attributions: true,
            },
        ),
        Command::RunAll => stages(cli, Stages::ALL),
        Command::GenPhantom {
            spec,
            preset,
            with_attributions,
        } => gen_phantom(cli, spec.as_deref(), *preset, *with_attributions),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level.into())
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
