//! `music`: train maps, invert activations, run and score trajectories, and
//! reproduce the experiments.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use music_core::data::{gmm_sample, triangle_gmm_spec};
use music_core::inversion::invert_activations;
use music_core::metrics::{MetricsSummary, Path as StatePath, TrajectoryMetrics};
use music_core::music::{run_trajectory, Mode, MusicConfig};
use music_core::som::{label_prototypes, train_som, SomTrainConfig};
use music_core::stats::median;
use music_core::{Lattice, Topology};
use music_lab::config::resolve;
use music_lab::experiments::{self as exp, GmmTrajectoriesConfig};
use music_lab::formats::{
    open_file, read_activations, read_json, read_trajectory, write_columns, write_file, write_json,
    write_records, write_trajectory, PrototypeFile, RunManifest,
};
use music_lab::DATA_DIR_ENV;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "music",
    version,
    about = "Activation-space navigation on self-organizing maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a map on a CSV of points or on a synthetic mixture sample.
    TrainSom(TrainSomArgs),
    /// Recover inputs from rows of squared-distance activations.
    Invert(InvertArgs),
    /// Run one trajectory and write it as CSV.
    Trajectory(TrajectoryArgs),
    /// Score one trajectory CSV, or summarize several.
    Metrics(MetricsArgs),
    /// Run a named experiment and write its tables.
    Experiment(ExperimentArgs),
}

/// Defaults, then `--config`, then each `--set` in order.
#[derive(Args)]
struct ConfigArgs {
    /// JSON file merged over the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one field, e.g. `--set music.gamma=0.9`; values are JSON.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve<T: Serialize + serde::de::DeserializeOwned + Default>(&self) -> Result<T> {
        Ok(resolve(self.config.as_deref(), &self.overrides)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MapSettings {
    rows: usize,
    cols: usize,
    topology: Topology,
    som: SomTrainConfig,
}

impl Default for MapSettings {
    fn default() -> Self {
        let bench = exp::GmmBenchConfig::default();
        Self {
            rows: bench.rows,
            cols: bench.cols,
            topology: bench.topology,
            som: bench.som,
        }
    }
}

#[derive(Args)]
struct TrainSomArgs {
    /// CSV of points with a header row.
    #[arg(long, conflicts_with = "gmm", required_unless_present = "gmm")]
    input: Option<PathBuf>,
    /// Name of an integer label column in `--input`; units get majority labels.
    #[arg(long, requires = "input")]
    label_column: Option<String>,
    /// Train on this many draws from the three-component benchmark mixture.
    #[arg(long)]
    gmm: Option<usize>,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    /// Seed of the mixture draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long, value_enum)]
    topology: Option<TopologyArg>,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Rectangular,
    Toroidal,
}

impl From<TopologyArg> for Topology {
    fn from(t: TopologyArg) -> Self {
        match t {
            TopologyArg::Rectangular => Topology::Rectangular,
            TopologyArg::Toroidal => Topology::Toroidal,
        }
    }
}

#[derive(Args)]
struct InvertArgs {
    #[arg(long)]
    prototypes: PathBuf,
    /// CSV with one activation vector per row.
    #[arg(long)]
    activations: PathBuf,
    /// Comma-separated units to invert from; all units by default.
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<usize>>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrajectoryArgs {
    #[arg(long)]
    prototypes: PathBuf,
    /// CSV whose first data row is the start point.
    #[arg(long)]
    start: PathBuf,
    #[arg(long, value_enum, default_value = "free")]
    mode: ModeArg,
    /// Target unit of informed mode.
    #[arg(long, required_if_eq("mode", "informed"))]
    target: Option<usize>,
    /// Target units of cluster mode, or perturbed units of baseline mode.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<usize>>,
    /// Step length of baseline mode.
    #[arg(long, default_value_t = 0.01)]
    step_len: f64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Overrides `seed` of the MUSIC config.
    #[arg(long)]
    seed: Option<u64>,
    /// Config fields are those of the MUSIC hyperparameters.
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Free,
    Informed,
    Cluster,
    Baseline,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(required = true)]
    trajectories: Vec<PathBuf>,
    /// Output JSON; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    name: ExperimentName,
    /// Directory for tables, summary and manifest.
    #[arg(long)]
    out: PathBuf,
    /// Print PASS/FAIL for each criterion and fail if any does.
    #[arg(long)]
    check: bool,
    /// Directory of the MNIST IDX files.
    #[arg(long, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentName {
    InversionVsN,
    NoiseScaling,
    MseIdentity,
    GmmTrajectories,
    MnistTransition,
    BaselineCompare,
}

impl ExperimentName {
    fn as_str(self) -> &'static str {
        match self {
            Self::InversionVsN => "inversion-vs-n",
            Self::NoiseScaling => "noise-scaling",
            Self::MseIdentity => "mse-identity",
            Self::GmmTrajectories => "gmm-trajectories",
            Self::MnistTransition => "mnist-transition",
            Self::BaselineCompare => "baseline-compare",
        }
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn train_som_cmd(args: TrainSomArgs) -> Result<()> {
    let mut settings: MapSettings = args.config.resolve()?;
    settings.rows = args.rows.unwrap_or(settings.rows);
    settings.cols = args.cols.unwrap_or(settings.cols);
    if let Some(t) = args.topology {
        settings.topology = t.into();
    }

    let (data, labels) = match (&args.input, args.gmm) {
        (Some(path), _) => read_points(path, args.label_column.as_deref())?,
        (None, Some(n)) => {
            let spec = triangle_gmm_spec(args.dim)?;
            let (data, comps) = gmm_sample(&spec, n, args.seed)?;
            (data, Some(comps.into_iter().map(|c| c as u32).collect()))
        }
        (None, None) => bail!("either --input or --gmm is required"),
    };
    let lattice = Lattice::new(settings.rows, settings.cols, settings.topology)?;
    let protos = train_som(&data, lattice, &settings.som)?;
    let unit_labels = labels
        .map(|l: Vec<u32>| label_prototypes(&protos, &data, &l))
        .transpose()?;
    write_json(&args.out, &PrototypeFile::new(&protos, unit_labels))?;
    let run = serde_json::json!({
        "input": args.input,
        "label_column": args.label_column,
        "gmm": args.gmm.map(|n| serde_json::json!({ "n": n, "dim": args.dim, "seed": args.seed })),
        "map": settings,
    });
    write_json(
        &manifest_path(&args.out),
        &RunManifest::new("train-som", settings.som.seed, &run)?,
    )?;
    Ok(())
}

/// Rows of a points file and, when requested, their integer labels.
type LabelledPoints = (Vec<Vec<f64>>, Option<Vec<u32>>);

/// Numeric CSV with a header; the optional label column is split off.
fn read_points(path: &Path, label_column: Option<&str>) -> Result<LabelledPoints> {
    let mut rdr = csv::Reader::from_reader(open_file(path)?);
    let header = rdr.headers()?.clone();
    let label_at = label_column
        .map(|name| {
            header
                .iter()
                .position(|h| h == name)
                .with_context(|| format!("{}: no column named {name:?}", path.display()))
        })
        .transpose()?;
    let (mut data, mut labels) = (Vec::new(), Vec::new());
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(record.len());
        for (k, field) in record.iter().enumerate() {
            let field = field.trim();
            if Some(k) == label_at {
                labels.push(
                    field
                        .parse()
                        .with_context(|| format!("row {i}: bad label {field:?}"))?,
                );
            } else {
                row.push(
                    field
                        .parse()
                        .with_context(|| format!("row {i}: not a number {field:?}"))?,
                );
            }
        }
        data.push(row);
    }
    Ok((data, label_at.map(|_| labels)))
}

fn invert_cmd(args: InvertArgs) -> Result<()> {
    let protos = read_json::<PrototypeFile>(&args.prototypes)?.to_set()?;
    let rows = read_activations(open_file(&args.activations)?)?;
    let subset = args.subset.unwrap_or_else(|| (0..protos.len()).collect());
    let write = |w: Box<dyn Write>| -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..protos.dim()).map(|k| format!("z{k}")).collect();
        header.extend(["rank", "sigma_min", "sigma_max"].map(String::from));
        out.write_record(&header)?;
        for a in &rows {
            let (z, diag) = invert_activations(&protos, a, &subset)?;
            let mut record: Vec<String> = z.iter().map(f64::to_string).collect();
            record.push(diag.rank.to_string());
            record.push(diag.sigma_min.to_string());
            record.push(diag.sigma_max.to_string());
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    };
    match &args.out {
        Some(path) => write(Box::new(
            fs::File::create(path).with_context(|| path.display().to_string())?,
        )),
        None => write(Box::new(io::stdout().lock())),
    }
}

fn trajectory_cmd(args: TrajectoryArgs) -> Result<()> {
    let protos = read_json::<PrototypeFile>(&args.prototypes)?.to_set()?;
    let (starts, _) = read_points(&args.start, None)?;
    let z0 = starts.first().context("start CSV has no rows")?;
    let mut music: MusicConfig = args.config.resolve()?;
    if let Some(seed) = args.seed {
        music.seed = seed;
    }
    let targets = || {
        args.targets
            .clone()
            .context("--targets is required for this mode")
    };
    let mode = match args.mode {
        ModeArg::Free => Mode::Free,
        ModeArg::Informed => Mode::Informed {
            target: args
                .target
                .context("--target is required for informed mode")?,
        },
        ModeArg::Cluster => Mode::Cluster {
            targets: targets()?,
        },
        ModeArg::Baseline => Mode::Baseline {
            units: targets()?,
            step_len: args.step_len,
        },
    };
    let traj = run_trajectory(z0, &protos, &mode, &music, args.steps)?;
    write_file(&args.out, |w| write_trajectory(w, &traj))?;

    #[derive(Serialize)]
    struct TrajectoryRun<'a> {
        mode: &'a Mode,
        steps: usize,
        music: &'a MusicConfig,
    }
    let run = TrajectoryRun {
        mode: &mode,
        steps: args.steps,
        music: &music,
    };
    write_json(
        &manifest_path(&args.out),
        &RunManifest::new("trajectory", music.seed, &run)?,
    )?;
    Ok(())
}

fn metrics_for(path: &Path) -> Result<TrajectoryMetrics> {
    let table = read_trajectory(open_file(path)?)?;
    let states = StatePath::new(&table.states, &table.bmus)?;
    Ok(TrajectoryMetrics::compute(&states))
}

fn metrics_cmd(args: MetricsArgs) -> Result<()> {
    let value = if let [single] = args.trajectories.as_slice() {
        serde_json::to_value(metrics_for(single)?)?
    } else {
        let trajectories = args
            .trajectories
            .iter()
            .map(|p| metrics_for(p))
            .collect::<Result<Vec<_>>>()?;
        let summary = MetricsSummary::aggregate(&trajectories);
        serde_json::json!({ "trajectories": trajectories, "summary": summary })
    };
    match &args.out {
        Some(path) => write_json(path, &value)?,
        None => {
            let mut out = io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &value)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Named pass/fail criteria of one experiment.
type Checks = Vec<(String, bool)>;

fn experiment_cmd(args: ExperimentArgs) -> Result<bool> {
    fs::create_dir_all(&args.out).with_context(|| args.out.display().to_string())?;
    let out = args.out.as_path();
    let name = args.name.as_str();
    let checks = match args.name {
        ExperimentName::InversionVsN => {
            let cfg: exp::InversionVsNConfig = args.config.resolve()?;
            write_manifest(out, name, cfg.seed, &cfg)?;
            inversion_vs_n(out, &cfg)?
        }
        ExperimentName::NoiseScaling => {
            let cfg: exp::NoiseScalingConfig = args.config.resolve()?;
            write_manifest(out, name, cfg.seed, &cfg)?;
            noise_scaling(out, &cfg)?
        }
        ExperimentName::MseIdentity => {
            let cfg: exp::MseIdentityConfig = args.config.resolve()?;
            write_manifest(out, name, cfg.seed, &cfg)?;
            mse_identity(out, &cfg)?
        }
        ExperimentName::GmmTrajectories => {
            let cfg: GmmTrajectoriesConfig = args.config.resolve()?;
            write_manifest(out, name, cfg.informed.seed, &cfg)?;
            gmm_trajectories(out, &cfg)?
        }
        ExperimentName::MnistTransition => {
            let cfg: exp::MnistConfig = args.config.resolve()?;
            let dir = args.data_dir.as_deref().with_context(|| {
                format!("--data-dir or {DATA_DIR_ENV} must name the MNIST directory")
            })?;
            write_manifest(out, name, cfg.music.seed, &cfg)?;
            mnist_transition(out, dir, &cfg)?
        }
        ExperimentName::BaselineCompare => {
            let cfg: exp::BaselineExperimentConfig = args.config.resolve()?;
            write_manifest(out, name, cfg.run.seed, &cfg)?;
            baseline_compare(out, &cfg)?
        }
    };
    let mut passed = true;
    if args.check {
        for (label, ok) in &checks {
            println!("{} {name}: {label}", if *ok { "PASS" } else { "FAIL" });
            passed &= ok;
        }
    }
    Ok(passed)
}

fn write_manifest<C: Serialize>(out: &Path, name: &str, seed: u64, cfg: &C) -> Result<()> {
    Ok(write_json(
        &out.join("manifest.json"),
        &RunManifest::new(name, seed, cfg)?,
    )?)
}

fn inversion_vs_n(out: &Path, cfg: &exp::InversionVsNConfig) -> Result<Checks> {
    let rows = exp::run_inversion_vs_n(cfg)?;
    write_file(&out.join("inversion_vs_n.csv"), |w| write_records(w, &rows))?;
    let d = cfg.bench.dim;
    let determined = rows.iter().filter(|r| r.n >= d).all(|r| r.median < 1e-9);
    let under = rows
        .iter()
        .filter(|r| r.n + 2 <= d)
        .all(|r| r.median > 1e-2);
    Ok(vec![
        (format!("median error < 1e-9 for N >= {d}"), determined),
        (
            format!("median error > 1e-2 for N <= {}", d.saturating_sub(2)),
            under,
        ),
    ])
}

fn noise_scaling(out: &Path, cfg: &exp::NoiseScalingConfig) -> Result<Checks> {
    let report = exp::noise_scaling(cfg)?;
    write_file(&out.join("noise_trials.csv"), |w| {
        write_records(w, &report.trials)
    })?;
    write_file(&out.join("noise_bins.csv"), |w| {
        write_records(w, &report.bins)
    })?;
    let summary = serde_json::json!({
        "slope": report.slope,
        "intercept": report.intercept,
        "max_clean_error": report.max_clean_error,
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(vec![
        (
            format!("log-log slope {:.3} in [-1.3, -0.7]", report.slope),
            (-1.3..=-0.7).contains(&report.slope),
        ),
        (
            format!("noiseless error {:.2e} < 1e-9", report.max_clean_error),
            report.max_clean_error < 1e-9,
        ),
    ])
}

fn mse_identity(out: &Path, cfg: &exp::MseIdentityConfig) -> Result<Checks> {
    let rows = exp::mse_identity(cfg)?;
    write_file(&out.join("mse_identity.csv"), |w| write_records(w, &rows))?;
    let worst = rows.iter().map(|r| r.relative_error()).fold(0.0, f64::max);
    Ok(vec![(
        format!("worst relative MSE gap {worst:.3} <= 0.1"),
        worst <= 0.1,
    )])
}

fn gmm_trajectories(out: &Path, cfg: &GmmTrajectoriesConfig) -> Result<Checks> {
    let report = exp::run_gmm_trajectories(cfg)?;
    for run in [&report.informed, &report.cluster] {
        let dir = out.join(match run.regime {
            exp::Regime::InformedConvergence => "informed",
            exp::Regime::ClusterExploration => "cluster",
        });
        fs::create_dir_all(&dir).with_context(|| dir.display().to_string())?;
        for (i, traj) in run.trajectories.iter().enumerate() {
            write_file(&dir.join(format!("traj_{i:03}.csv")), |w| {
                write_trajectory(w, traj)
            })?;
        }
        write_json(&dir.join("metrics.json"), &run.metrics)?;
    }
    let c = &report.comparison;
    let convergence = report.convergence.monotone_fraction();
    let summary = serde_json::json!({
        "comparison": c,
        "convergence": {
            "target": report.convergence.target,
            "monotone_fraction": convergence,
        },
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(vec![
        (
            format!(
                "transition rate lower under informed in {:.2} of pairs (>= 0.9)",
                c.transition_win_rate
            ),
            c.transition_win_rate >= 0.9,
        ),
        (
            format!(
                "median dwell longer under informed in {:.2} of pairs (>= 0.9)",
                c.dwell_win_rate
            ),
            c.dwell_win_rate >= 0.9,
        ),
        (
            format!(
                "geodesic efficiency higher under informed in {:.2} of pairs (>= 0.9)",
                c.efficiency_win_rate
            ),
            c.efficiency_win_rate >= 0.9,
        ),
        (
            format!("noiseless informed runs monotone in {convergence:.2} (>= 0.95)"),
            convergence >= 0.95,
        ),
    ])
}

fn mnist_transition(out: &Path, dir: &Path, cfg: &exp::MnistConfig) -> Result<Checks> {
    let train = exp::load_split(dir, true)?;
    let test = exp::load_split(dir, false)?;
    let map = exp::build_map(&train, cfg)?;
    write_json(
        &out.join("prototypes.json"),
        &PrototypeFile::new(&map.protos, Some(map.labels.clone())),
    )?;
    let result = exp::mnist_transition(&map, &test, cfg)?;
    write_file(&out.join("trajectory.csv"), |w| {
        write_trajectory(w, &result.trajectory)
    })?;
    let pixels = map.decode(&result.trajectory.states)?;
    write_file(&out.join("decoded.csv"), |w| write_columns(w, "p", &pixels))?;
    let local = median(&result.step_continuity);
    let global = result.global_continuity.last().copied();
    let summary = serde_json::json!({
        "source_image": result.source_image,
        "target_unit": result.target_unit,
        "reached_at": result.reached_at,
        "median_step_continuity": local,
        "final_global_continuity": global,
    });
    write_json(&out.join("summary.json"), &summary)?;
    let continuity_holds = matches!((local, global), (Some(l), Some(g)) if l > g);
    Ok(vec![
        (
            format!(
                "target unit {} reached (step {:?})",
                result.target_unit, result.reached_at
            ),
            result.reached_at.is_some(),
        ),
        (
            format!("median local continuity {local:?} above final global continuity {global:?}"),
            continuity_holds,
        ),
    ])
}

fn baseline_compare(out: &Path, cfg: &exp::BaselineExperimentConfig) -> Result<Checks> {
    let report = exp::run_baseline_experiment(cfg)?;
    #[derive(Serialize)]
    struct DriftRow {
        seed: usize,
        step: usize,
        music: f64,
        baseline: f64,
    }
    let rows: Vec<DriftRow> = report
        .runs
        .iter()
        .enumerate()
        .flat_map(|(seed, run)| {
            run.music_drift
                .iter()
                .zip(&run.baseline_drift)
                .enumerate()
                .map(move |(step, (&music, &baseline))| DriftRow {
                    seed,
                    step,
                    music,
                    baseline,
                })
        })
        .collect();
    write_file(&out.join("drift.csv"), |w| write_records(w, &rows))?;
    let win = report.win_fraction();
    let gap = report
        .runs
        .iter()
        .map(|r| r.max_norm_gap)
        .fold(0.0, f64::max);
    let summary = serde_json::json!({
        "preserved": report.preserved,
        "win_fraction": win,
        "max_norm_gap": gap,
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(vec![
        (
            format!("MUSIC drift lower in {win:.2} of seeds (>= 0.8)"),
            win >= 0.8,
        ),
        (format!("step norm gap {gap:.1e} <= 1e-10"), gap <= 1e-10),
    ])
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::TrainSom(args) => train_som_cmd(args).map(|()| true),
        Command::Invert(args) => invert_cmd(args).map(|()| true),
        Command::Trajectory(args) => trajectory_cmd(args).map(|()| true),
        Command::Metrics(args) => metrics_cmd(args).map(|()| true),
        Command::Experiment(args) => experiment_cmd(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
