//! Command line surface for the moment pipeline: moment generation,
//! reconstruction and study runners with reproducible file based I/O.
//!
//! Every run writes its outputs plus exactly one `manifest.json` next to
//! them, recording the resolved configuration, input and output digests,
//! the tool version and the wall time. Exit codes: 0 success, 2 input or
//! validation error, 3 solver budget exhausted (the result is still
//! written).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use legmoments::{
    cell_medians, medians_to_csv, perturb_detailed, reconstruct, rows_to_csv, run_study,
    shape_legendre_moments, DirectionSet, MomentGrid, NoiseSchedule, NoisySpec, ShapeModel,
    SolverConfig, StudyConfig,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Core(#[from] legmoments::Error),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what} file {path}: {source}")]
    Parse {
        what: &'static str,
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "legmoments", version, about = "moments of planar convex bodies and their reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the Legendre moment grid of a shape, optionally noisy.
    GenMoments(GenMomentsArgs),
    /// Reconstruct a convex polygon from a Legendre moment grid.
    Reconstruct(ReconstructArgs),
    /// Run a convergence or noise study from a config file.
    Study(StudyArgs),
}

#[derive(Args)]
struct GenMomentsArgs {
    /// Shape JSON file (tagged polygon or ellipse inside the unit square).
    #[arg(long)]
    shape: PathBuf,
    /// Moment grid order.
    #[arg(long = "N", value_name = "ORDER")]
    order: usize,
    /// Noise schedule applied to the exact grid.
    #[arg(long, value_enum, default_value_t = ScheduleArg::None)]
    schedule: ScheduleArg,
    /// Exponent offset of the decaying schedules.
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Constant in front of the noise schedule.
    #[arg(long, default_value_t = 0.0)]
    scale: f64,
    /// Noise generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Legendre moment grid JSON file.
    #[arg(long)]
    moments: PathBuf,
    /// Use n equidistant outer normals; n must be a multiple of 4 so the
    /// axis directions are present.
    #[arg(long, requires = "n")]
    equidistant: bool,
    /// Number of equidistant directions.
    #[arg(long, value_name = "INT")]
    n: Option<usize>,
    /// Direction set JSON file with explicit angles.
    #[arg(long, conflicts_with_all = ["equidistant", "n"])]
    directions: Option<PathBuf>,
    /// Number of solver starts.
    #[arg(long, default_value_t = 8)]
    starts: usize,
    /// Iteration budget per start.
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    /// Stationarity tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Solver seed for the random starts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Common positive factor on model and target moments.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    /// Study kind; convergence forces the exact (schedule none) pipeline.
    #[arg(value_enum)]
    kind: StudyKind,
    /// Study config JSON file.
    config: PathBuf,
    /// Override the a0 bound constant from the config.
    #[arg(long)]
    a0: Option<f64>,
    /// Override the a1 bound constant from the config.
    #[arg(long)]
    a1: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScheduleArg {
    None,
    Mean,
    As,
    Fixed,
}

impl From<ScheduleArg> for NoiseSchedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::None => NoiseSchedule::None,
            ScheduleArg::Mean => NoiseSchedule::MeanConsistent,
            ScheduleArg::As => NoiseSchedule::AsConsistent,
            ScheduleArg::Fixed => NoiseSchedule::Fixed,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StudyKind {
    Convergence,
    Noise,
}

/// Digest record for one file the run read or wrote.
#[derive(Serialize)]
struct FileRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: serde_json::Value,
    inputs: BTreeMap<String, FileRecord>,
    outputs: BTreeMap<String, FileRecord>,
    version: String,
    wall_time_s: f64,
}

/// Collects digests while a command runs and writes the single manifest at
/// the end, so output digests always describe the files as written.
struct ManifestBuilder {
    command: &'static str,
    config: serde_json::Value,
    inputs: BTreeMap<String, FileRecord>,
    outputs: BTreeMap<String, FileRecord>,
    started: Instant,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl ManifestBuilder {
    fn new(command: &'static str) -> Self {
        Self {
            command,
            config: serde_json::Value::Null,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            started: Instant::now(),
        }
    }

    fn config<T: Serialize>(&mut self, config: &T) {
        self.config = serde_json::to_value(config).expect("config serializes");
    }

    fn read_input(&mut self, role: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path)
            .map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
        self.inputs.insert(
            role.to_string(),
            FileRecord { path: path.display().to_string(), sha256: sha256_hex(&bytes) },
        );
        Ok(bytes)
    }

    fn write_output(&mut self, dir: &Path, name: &str, contents: &str) -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|source| CliError::Write { path: path.clone(), source })?;
        self.outputs.insert(
            name.to_string(),
            FileRecord { path: path.display().to_string(), sha256: sha256_hex(contents.as_bytes()) },
        );
        Ok(())
    }

    fn finish(self, dir: &Path) -> Result<()> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
            version: legmoments::VERSION.to_string(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|source| CliError::Write { path, source })
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    text
}

fn parse_json<T: serde::de::DeserializeOwned>(
    what: &'static str,
    path: &Path,
    bytes: &[u8],
) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|source| CliError::Parse {
        what,
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|source| CliError::Write { path: dir.to_path_buf(), source })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenMoments(args) => cmd_gen_moments(args),
        Command::Reconstruct(args) => cmd_reconstruct(args),
        Command::Study(args) => cmd_study(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

#[derive(Serialize)]
struct GenMomentsConfig {
    shape: ShapeModel,
    order: usize,
    noise: NoisySpec,
    /// Variance the schedule prescribed at this order and realized total
    /// squared perturbation; both zero for the exact pipeline.
    sigma2: f64,
    sum_eps2: f64,
}

fn cmd_gen_moments(args: GenMomentsArgs) -> Result<ExitCode> {
    ensure_out_dir(&args.out)?;
    let mut manifest = ManifestBuilder::new("gen-moments");
    let bytes = manifest.read_input("shape", &args.shape)?;
    let parsed: ShapeModel = parse_json("shape", &args.shape, &bytes)?;
    // rebuild through the validating constructors so a hand-written file
    // cannot smuggle in a shape the library would reject
    let shape = match parsed {
        ShapeModel::Polygon(p) => ShapeModel::polygon(p.vertices().to_vec())?,
        ShapeModel::Ellipse(e) => ShapeModel::ellipse(e.center, e.semi_axes, e.rotation_rad)?,
    };
    let exact = shape_legendre_moments(&shape, args.order)?;
    let spec = NoisySpec {
        schedule: args.schedule.into(),
        epsilon: args.eps,
        scale: args.scale,
        seed: args.seed,
    };
    let outcome = perturb_detailed(&exact, &spec)?;
    manifest.config(&GenMomentsConfig {
        shape,
        order: args.order,
        noise: spec,
        sigma2: outcome.sigma2,
        sum_eps2: outcome.sum_eps2,
    });
    manifest.write_output(&args.out, "moments.json", &to_json(&outcome.grid))?;
    manifest.finish(&args.out)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ReconstructConfig {
    directions: DirectionSet,
    solver: SolverConfig,
}

fn cmd_reconstruct(args: ReconstructArgs) -> Result<ExitCode> {
    ensure_out_dir(&args.out)?;
    let mut manifest = ManifestBuilder::new("reconstruct");
    let bytes = manifest.read_input("moments", &args.moments)?;
    let target: MomentGrid = parse_json("moment", &args.moments, &bytes)?;

    let directions = if let Some(path) = &args.directions {
        let bytes = manifest.read_input("directions", path)?;
        parse_json::<DirectionSet>("direction", path, &bytes)?
    } else if args.equidistant {
        let n = args.n.expect("clap enforces --n with --equidistant");
        if n % 4 != 0 {
            return Err(CliError::Invalid(format!(
                "--equidistant needs a direction count divisible by 4 so the axis \
                 normals at angles 0, pi/2, pi and 3pi/2 are present; got {n}"
            )));
        }
        DirectionSet::equidistant(n)?
    } else {
        return Err(CliError::Invalid(
            "no direction set: pass --equidistant with --n, or --directions FILE".into(),
        ));
    };

    let solver = SolverConfig {
        starts: args.starts,
        max_iters: args.max_iters,
        tol: args.tol,
        seed: args.seed,
        scale: args.scale,
    };
    manifest.config(&ReconstructConfig { directions: directions.clone(), solver });

    let result = reconstruct(&target, &directions, &solver)?;
    manifest.write_output(&args.out, "result.json", &to_json(&result))?;
    manifest.write_output(&args.out, "polygon.json", &to_json(&result.polygon))?;
    manifest.finish(&args.out)?;
    if result.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        // budget exhausted: the files above are still in place
        Ok(ExitCode::from(3))
    }
}

#[derive(Serialize)]
struct StudyRunConfig {
    kind: &'static str,
    study: StudyConfig,
}

fn cmd_study(args: StudyArgs) -> Result<ExitCode> {
    ensure_out_dir(&args.out)?;
    let mut manifest = ManifestBuilder::new("study");
    let bytes = manifest.read_input("config", &args.config)?;
    let mut config: StudyConfig = parse_json("study config", &args.config, &bytes)?;
    let kind = match args.kind {
        StudyKind::Convergence => {
            // a convergence study is the noise study pinned to the exact
            // pipeline, same seeds and all
            config.noise = NoisySpec::exact(config.noise.seed);
            "convergence"
        }
        StudyKind::Noise => "noise",
    };
    if let Some(a0) = args.a0 {
        config.bounds.a0 = a0;
    }
    if let Some(a1) = args.a1 {
        config.bounds.a1 = a1;
    }
    manifest.config(&StudyRunConfig { kind, study: config.clone() });

    let rows = run_study(&config)?;
    let medians = cell_medians(&rows);
    manifest.write_output(&args.out, "rows.csv", &rows_to_csv(&rows))?;
    manifest.write_output(&args.out, "medians.csv", &medians_to_csv(&medians))?;
    manifest.finish(&args.out)?;
    Ok(ExitCode::SUCCESS)
}
