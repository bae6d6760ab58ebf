use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use traverse_core::actions::ActionSpace;
use traverse_core::dataset::{self, DatasetOptions, MapFormat, Split, SplitRatios};
use traverse_core::metrics::{self, PredictionRow, PREDICTIONS_HEADER};
use traverse_core::parallel::with_workers;
use traverse_core::plot::{render_fans, Image};
use traverse_core::robot::RobotConfig;
use traverse_core::sim::{self, LabelRow, LABELS_HEADER};
use traverse_core::terrain::{self, load_presets, ElevationMap};
use traverse_core::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_DATA: u8 = 4;

#[derive(Parser)]
#[command(name = "traverse-sim", version, about = "Procedural terrain, traverse labelling and dataset tools")]
struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RobotArg {
    /// Robot description (TOML); the built-in default when omitted.
    #[arg(long)]
    robot_config: Option<PathBuf>,
}

impl RobotArg {
    fn load(&self) -> traverse_core::Result<RobotConfig> {
        let cfg = match &self.robot_config {
            Some(p) => RobotConfig::load(p)?,
            None => RobotConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Emap,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Generate elevation maps from one preset as EMAP files.
    GenMaps {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value = "smooth")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label every trajectory of the action space on one map.
    Simulate {
        /// EMAP file, or a whitespace text grid spanning 8 m.
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 0)]
        map_id: u32,
        #[command(flatten)]
        robot: RobotArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate, label, split, balance and export a dataset.
    BuildDataset {
        #[arg(long, default_value_t = 500)]
        n_maps: usize,
        /// Preset to cycle over (repeatable); the default mix when omitted.
        #[arg(long)]
        preset: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Train, validation and test fractions.
        #[arg(long, value_delimiter = ',', default_values_t = [0.9, 0.08, 0.02])]
        split: Vec<f64>,
        /// Keep every safe sample in train and validation.
        #[arg(long)]
        no_balance: bool,
        /// Largest safe:failure ratio kept by balancing.
        #[arg(long, default_value_t = 2.0)]
        safe_cap: f64,
        /// Safe samples kept per balanced split even without failures.
        #[arg(long, default_value_t = 64)]
        min_safe: usize,
        /// Write labels and manifest only.
        #[arg(long)]
        labels_only: bool,
        #[command(flatten)]
        robot: RobotArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted probabilities against labels.
    Evaluate {
        /// CSV with header map_id,traj_id,p_step,p_obstacle,p_tilt.
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Probabilities at or above the threshold count as predicted failures.
        #[arg(long, default_value_t = metrics::DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Text report; a CSV table is written beside it with a .csv extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw the action-space fan colored by failure probability.
    ///
    /// Bands: green below 0.25, yellow from 0.25 up to and including 0.5,
    /// red above 0.5. Binary labels plot as 0 or 1.
    PlotFan {
        #[arg(long)]
        map: PathBuf,
        /// Predictions CSV or labels CSV, told apart by header.
        #[arg(long)]
        probs: PathBuf,
        /// Rows to plot when the CSV covers several maps.
        #[arg(long)]
        map_id: Option<u32>,
        /// Output directory for fan_{step,obstacle,tilt,composite}.ppm.
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert an external map to a 129 x 129 EMAP.
    ImportMap {
        #[arg(long)]
        input: PathBuf,
        /// Input format; guessed from the extension when omitted.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the trajectory manifest (index rotation_deg curvature1 curvature2).
    DumpActions {
        /// Standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParams(_) | Error::InvalidConfig(_) | Error::InvalidRatios(_) => EXIT_USAGE,
            Error::LengthMismatch { .. } | Error::DataMismatch(_) => EXIT_DATA,
            Error::Io(_) | Error::Parse(_) | Error::NonSquareGrid { .. } | Error::NegativeBase { .. } | Error::OutOfBounds { .. } => {
                EXIT_IO
            }
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn data_error(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_DATA, message: message.into() }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = with_workers(cli.workers, || run(cli.command)).map_err(Failure::from).and_then(|r| r);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::GenMaps { n, preset, seed, out } => gen_maps(n, &preset, seed, &out),
        Command::Simulate { map, map_id, robot, out } => simulate(&map, map_id, &robot, &out),
        Command::BuildDataset { n_maps, preset, seed, split, no_balance, safe_cap, min_safe, labels_only, robot, out } => {
            if split.len() != 3 {
                return Err(Error::InvalidRatios(format!("--split needs 3 values, got {}", split.len())).into());
            }
            let opts = DatasetOptions {
                n_maps,
                presets: preset,
                ratios: SplitRatios { train: split[0], val: split[1], test: split[2] },
                balance: !no_balance,
                safe_cap,
                min_safe,
                seed,
                labels_only,
                ..DatasetOptions::default()
            };
            build_dataset(&opts, &robot, &out)
        }
        Command::Evaluate { predictions, labels, threshold, out } => evaluate(&predictions, &labels, threshold, &out),
        Command::PlotFan { map, probs, map_id, out } => plot_fan(&map, &probs, map_id, &out),
        Command::ImportMap { input, format, out } => import_map(&input, format, &out),
        Command::DumpActions { out } => dump_actions(out.as_deref()),
    }
}

fn gen_maps(n: usize, preset: &str, seed: u64, out: &Path) -> CmdResult {
    let library = load_presets()?;
    let preset = library.get(preset)?;
    let paths = dataset::generate_maps(preset, n, seed, out)?;
    println!("wrote {} maps ({}) to {}", paths.len(), preset.name, out.display());
    Ok(())
}

fn open(path: &Path) -> std::io::Result<File> {
    File::open(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn load_map(path: &Path) -> traverse_core::Result<ElevationMap> {
    let input = BufReader::new(open(path)?);
    match MapFormat::from_path(path) {
        MapFormat::Emap => terrain::read_emap(input),
        MapFormat::Text => terrain::read_text_grid(input, terrain::default_text_extent()),
    }
}

fn simulate(map_path: &Path, map_id: u32, robot: &RobotArg, out: &Path) -> CmdResult {
    let cfg = robot.load()?;
    let map = load_map(map_path)?;
    let space = ActionSpace::standard();
    let results = sim::simulate_all(&cfg, &map, &space.trajectories);
    let rows: Vec<LabelRow> = results.iter().enumerate().map(|(t, r)| LabelRow::new(map_id, t as u32, r)).collect();
    let mut w = BufWriter::new(File::create(out)?);
    sim::write_labels_csv(&mut w, rows.iter().copied())?;
    w.flush()?;
    let count = |f: fn(&LabelRow) -> bool| rows.iter().filter(|r| f(r)).count();
    println!(
        "{} trajectories: step {} obstacle {} tilt {} any {} invalid {}",
        rows.len(),
        count(|r| r.label.step),
        count(|r| r.label.obstacle),
        count(|r| r.label.tilt),
        count(|r| r.label.any()),
        count(|r| !r.valid)
    );
    Ok(())
}

fn build_dataset(opts: &DatasetOptions, robot: &RobotArg, out: &Path) -> CmdResult {
    let cfg = robot.load()?;
    let library = load_presets()?;
    let m = dataset::build_dataset(opts, &library, &cfg, out)?;
    println!(
        "population: {} safe, {} failure ({:.1}% safe), {} invalid",
        m.population.safe,
        m.population.failure,
        100.0 * m.population.safe_fraction(),
        m.invalid
    );
    for s in Split::ALL {
        let x = m.split(s);
        println!(
            "{:<5} maps {:>4}  kept {:>8} safe {:>8} failure  shards {}",
            s.name(),
            x.maps,
            x.kept.safe,
            x.kept.failure,
            x.shards.len()
        );
    }
    println!("manifest: {}", out.join(dataset::MANIFEST_FILE).display());
    Ok(())
}

fn read_labels(path: &Path) -> traverse_core::Result<Vec<LabelRow>> {
    sim::read_labels_csv(BufReader::new(open(path)?))
}

fn evaluate(predictions: &Path, labels: &Path, threshold: f64, out: &Path) -> CmdResult {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidConfig(format!("threshold {threshold} outside [0, 1]")).into());
    }
    let preds = metrics::read_predictions_csv(BufReader::new(open(predictions)?))?;
    let labels = read_labels(labels)?;
    let report = metrics::evaluate(&preds, &labels, threshold)?;
    let text = report.to_text();
    fs::write(out, &text)?;
    fs::write(out.with_extension("csv"), report.to_csv())?;
    print!("{text}");
    Ok(())
}

/// Per-trajectory probabilities of one map from a predictions or labels CSV.
fn read_fan_probs(path: &Path, map_id: Option<u32>, expected: usize) -> Result<Vec<[f64; 3]>, Failure> {
    let mut header = String::new();
    BufReader::new(open(path)?).read_line(&mut header)?;
    let rows: Vec<(u32, u32, [f64; 3])> = match header.trim() {
        PREDICTIONS_HEADER => metrics::read_predictions_csv(BufReader::new(open(path)?))?
            .into_iter()
            .map(|r: PredictionRow| (r.map_id, r.traj_id, r.p))
            .collect(),
        LABELS_HEADER => read_labels(path)?
            .into_iter()
            .map(|r| (r.map_id, r.traj_id, r.label.as_array().map(|b| if b { 1.0 } else { 0.0 })))
            .collect(),
        other => return Err(Error::Parse(format!("{}: unrecognized header {other:?}", path.display())).into()),
    };
    let map_id = match map_id {
        Some(id) => id,
        None => {
            let first = rows.first().map_or(0, |r| r.0);
            if rows.iter().any(|r| r.0 != first) {
                return Err(data_error("CSV covers several maps; choose one with --map-id"));
            }
            first
        }
    };
    let mut probs = vec![None; expected];
    for (m, t, p) in rows.into_iter().filter(|r| r.0 == map_id) {
        let slot = probs
            .get_mut(t as usize)
            .ok_or_else(|| data_error(format!("traj_id {t} outside the action space")))?;
        if slot.replace(p).is_some() {
            return Err(data_error(format!("duplicate row for map {m} trajectory {t}")));
        }
    }
    let missing = probs.iter().filter(|p| p.is_none()).count();
    if missing > 0 {
        return Err(data_error(format!("map {map_id}: {missing} of {expected} trajectories have no row")));
    }
    Ok(probs.into_iter().map(Option::unwrap).collect())
}

fn plot_fan(map_path: &Path, probs_path: &Path, map_id: Option<u32>, out: &Path) -> CmdResult {
    let map = load_map(map_path)?;
    let space = ActionSpace::standard();
    let probs = read_fan_probs(probs_path, map_id, space.len())?;
    let images = render_fans(&map, &space, &probs)?;
    fs::create_dir_all(out)?;
    for (name, img) in ["step", "obstacle", "tilt", "composite"].iter().zip(&images) {
        write_image(img, &out.join(format!("fan_{name}.ppm")))?;
    }
    println!("wrote 4 fans to {}", out.display());
    Ok(())
}

fn write_image(img: &Image, path: &Path) -> CmdResult {
    let mut w = BufWriter::new(File::create(path)?);
    img.write_ppm(&mut w)?;
    Ok(())
}

fn import_map(input: &Path, format: Option<FormatArg>, out: &Path) -> CmdResult {
    let format = match format {
        Some(FormatArg::Emap) => MapFormat::Emap,
        Some(FormatArg::Text) => MapFormat::Text,
        None => MapFormat::from_path(input),
    };
    let imported = dataset::import_map(input, format)?;
    let mut w = BufWriter::new(File::create(out)?);
    terrain::write_emap(&imported.map, &mut w)?;
    w.flush()?;
    println!(
        "{} ({} x {}) -> {} ({} x {})",
        imported.source.display(),
        imported.source_side,
        imported.source_side,
        out.display(),
        imported.map.side_cells(),
        imported.map.side_cells()
    );
    Ok(())
}

fn dump_actions(out: Option<&Path>) -> CmdResult {
    let manifest = ActionSpace::standard().manifest();
    match out {
        Some(p) => fs::write(p, manifest)?,
        None => std::io::stdout().lock().write_all(manifest.as_bytes())?,
    }
    Ok(())
}
