//! Subcommand implementations.

use std::path::{Path, PathBuf};

use difflab::datasets::{generate_with, split};
use difflab::eval::{
    covariance_distance, default_scaling_grid, loss_estimate, mean_distance, scaling_curves,
    MetricsRow,
};
use difflab::experiment::{sweep as run_sweep, train_to_dir, ExperimentConfig};
use difflab::io;
use difflab::sampler::sample as draw_samples;
use difflab::trainer::TrainConfig;
use difflab::{
    DatasetKind, Error, GeneratorParams, LossForm, PointCloud, SampleConfig, TargetSpace,
};

use crate::args::{
    ClipRange, EvalArgs, GenDataArgs, PlotArgs, SampleArgs, SweepArgs, TrainArgs, TrainingFlags,
};
use crate::config::ConfigFile;
use crate::plot::{line_svg, scatter_svg, Series};
use crate::{CliError, EXIT_PARTIAL};

type CliResult<T = ()> = Result<T, CliError>;

const DEFAULT_POINTS: usize = 100_000;
const DEFAULT_TEST_FRACTION: f64 = 0.1;

fn required_path(flag: &Option<PathBuf>, cfg: &ConfigFile, key: &str) -> CliResult<PathBuf> {
    match flag {
        Some(p) => Ok(p.clone()),
        None => cfg
            .raw(key)
            .map(PathBuf::from)
            .ok_or_else(|| CliError::usage(format!("--{key} is required"))),
    }
}

fn clip(flag: Option<ClipRange>, cfg: &ConfigFile) -> CliResult<Option<(f64, f64)>> {
    match flag {
        Some(c) => Ok(Some((c.0, c.1))),
        None => match cfg.raw("clip") {
            Some(s) => {
                let c: ClipRange = s.parse().map_err(CliError::usage)?;
                Ok(Some((c.0, c.1)))
            }
            None => Ok(None),
        },
    }
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}

fn create_parent(path: &Path) -> CliResult {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

/// Generator shape parameters; only settable from a config file.
pub fn generator_params(cfg: &ConfigFile) -> CliResult<GeneratorParams> {
    let d = GeneratorParams::default();
    Ok(GeneratorParams {
        cluster_count: cfg.pick(None, "cluster-count", d.cluster_count)?,
        cluster_radius: cfg.pick(None, "cluster-radius", d.cluster_radius)?,
        cluster_std: cfg.pick(None, "cluster-std", d.cluster_std)?,
        ring_radius: cfg.pick(None, "ring-radius", d.ring_radius)?,
        ring_noise: cfg.pick(None, "ring-noise", d.ring_noise)?,
        swiss_turns: (
            cfg.pick(None, "swiss-turn-start", d.swiss_turns.0)?,
            cfg.pick(None, "swiss-turn-end", d.swiss_turns.1)?,
        ),
        swiss_noise: cfg.pick(None, "swiss-noise", d.swiss_noise)?,
        wave_offsets: cfg.pick_list(None, "wave-offsets", d.wave_offsets.clone())?,
        wave_amplitude: cfg.pick(None, "wave-amplitude", d.wave_amplitude)?,
        wave_frequency: cfg.pick(None, "wave-frequency", d.wave_frequency)?,
        wave_half_width: cfg.pick(None, "wave-half-width", d.wave_half_width)?,
        wave_noise: cfg.pick(None, "wave-noise", d.wave_noise)?,
    })
}

pub fn gen_data(a: &GenDataArgs) -> CliResult {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let kind = cfg.pick(a.kind, "kind", DatasetKind::Ring)?;
    let n = cfg.pick(a.n, "n", DEFAULT_POINTS)?;
    let seed = cfg.pick(a.seed, "seed", 0u64)?;
    let out = required_path(&a.out, &cfg, "out")?;
    let cloud = generate_with(kind, n, seed, &generator_params(&cfg)?)?;
    create_parent(&out)?;
    io::write_points(&out, &cloud)?;
    println!("wrote {} {kind} points to {}", cloud.len(), out.display());
    Ok(())
}

/// Train settings from flags, then the config file, then the defaults.
fn train_config(
    cfg: &ConfigFile,
    f: &TrainingFlags,
    space: Option<TargetSpace>,
    form: Option<LossForm>,
    dataset: Option<DatasetKind>,
    seed: Option<u64>,
) -> CliResult<TrainConfig> {
    let d = TrainConfig::default();
    let config = TrainConfig {
        space: cfg.pick(space, "space", d.space)?,
        form: cfg.pick(form, "form", d.form)?,
        dataset: cfg.pick(dataset, "dataset", d.dataset)?,
        epochs: cfg.pick(f.epochs, "epochs", d.epochs)?,
        batch_size: cfg.pick(f.batch_size, "batch-size", d.batch_size)?,
        learning_rate: cfg.pick(f.lr, "lr", d.learning_rate)?,
        seed: cfg.pick(seed, "seed", d.seed)?,
        t_min: cfg.pick(f.t_min, "t-min", d.t_min)?,
        eval_draws_per_point: cfg.pick(f.eval_draws, "eval-draws", d.eval_draws_per_point)?,
        hidden_width: cfg.pick(f.width, "width", d.hidden_width)?,
        bins: cfg.pick(f.bins, "bins", d.bins)?,
    };
    config.validate()?;
    Ok(config)
}

pub fn train(a: &TrainArgs) -> CliResult {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let tc = train_config(&cfg, &a.training, a.space, a.form, a.dataset, a.seed)?;
    let test_fraction = cfg.pick(
        a.training.test_fraction,
        "test-fraction",
        DEFAULT_TEST_FRACTION,
    )?;
    let out = required_path(&a.out, &cfg, "out")?;
    let cloud = match a
        .data
        .clone()
        .or_else(|| cfg.raw("data").map(PathBuf::from))
    {
        Some(path) => io::read_points(&path)?,
        None => {
            let n = cfg.pick(a.training.n, "n", DEFAULT_POINTS)?;
            generate_with(tc.dataset, n, tc.seed, &generator_params(&cfg)?)?
        }
    };
    let (train_set, test_set) = split(&cloud, test_fraction)?;
    create_dir(&out)?;
    train_to_dir(&tc, &train_set, &test_set, &out, |r| {
        eprintln!(
            "epoch {:>4}  train {:.6}  test nelbo {:.6}  weighted {:.6}",
            r.epoch, r.train_loss, r.test_nelbo, r.test_weighted
        );
    })?;
    println!(
        "wrote model.bin, epochs.csv and bins.csv to {}",
        out.display()
    );
    Ok(())
}

pub fn sample(a: &SampleArgs) -> CliResult {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let checkpoint = required_path(&a.checkpoint, &cfg, "checkpoint")?;
    let out = required_path(&a.out, &cfg, "out")?;
    let d = SampleConfig::default();
    let sc = SampleConfig {
        num_steps: cfg.pick(a.steps, "steps", d.num_steps)?,
        num_samples: cfg.pick(a.samples, "samples", d.num_samples)?,
        seed: cfg.pick(a.seed, "seed", d.seed)?,
        clip_range: clip(a.clip, &cfg)?,
    };
    if sc.num_steps == 0 || sc.num_samples == 0 {
        return Err(CliError::usage("--steps and --samples must be at least 1"));
    }
    let ck = io::read_checkpoint(&checkpoint)?;
    let cloud = draw_samples(&ck.model, &sc)?;
    create_parent(&out)?;
    io::write_points(&out, &cloud)?;
    println!(
        "wrote {} samples ({} steps) to {}",
        cloud.len(),
        sc.num_steps,
        out.display()
    );
    Ok(())
}

pub fn eval(a: &EvalArgs) -> CliResult {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let checkpoint = required_path(&a.checkpoint, &cfg, "checkpoint")?;
    let test_path = required_path(&a.test, &cfg, "test")?;
    let samples_path = required_path(&a.samples, &cfg, "samples")?;
    let out = required_path(&a.out, &cfg, "out")?;
    let d = TrainConfig::default();
    let dataset = cfg.pick(a.dataset.clone(), "dataset", "custom".to_string())?;
    let seed = cfg.pick(a.seed, "seed", d.seed)?;
    let draws = cfg.pick(a.draws, "draws", d.eval_draws_per_point)?;
    let t_min = cfg.pick(a.t_min, "t-min", d.t_min)?;
    if draws == 0 || !(t_min > 0.0 && t_min < 0.5) {
        return Err(CliError::usage(
            "--draws must be positive and --t-min in (0, 0.5)",
        ));
    }

    let ck = io::read_checkpoint(&checkpoint)?;
    let test = io::read_points(&test_path)?;
    let samples = io::read_points(&samples_path)?;
    for cloud in [&test, &samples] {
        if cloud.dim() != ck.model.arch.data_dim {
            return Err(Error::DimensionMismatch {
                expected: ck.model.arch.data_dim,
                got: cloud.dim(),
            }
            .into());
        }
    }
    let row = MetricsRow {
        space: ck.model.predict_space,
        form: ck.form,
        dataset,
        seed,
        loss: loss_estimate(&ck.model, &test, ck.form, draws, seed, t_min)?.mean,
        mean_dist: mean_distance(&samples, &test)?,
        covar_dist: covariance_distance(&samples, &test)?,
    };
    create_parent(&out)?;
    io::append_metrics(&out, &row)?;
    println!(
        "{} {} loss {} mean_dist {} covar_dist {}",
        row.space,
        row.form,
        io::fmt_sig(row.loss),
        io::fmt_sig(row.mean_dist),
        io::fmt_sig(row.covar_dist)
    );
    Ok(())
}

/// Cell parallelism from `DLL_THREADS` (default 1).
pub fn threads_from_env() -> CliResult<usize> {
    match std::env::var("DLL_THREADS") {
        Ok(s) if !s.trim().is_empty() => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::usage(format!(
                "DLL_THREADS must be a positive integer, got '{s}'"
            ))),
        },
        _ => Ok(1),
    }
}

pub fn sweep_config(a: &SweepArgs, cfg: &ConfigFile) -> CliResult<ExperimentConfig> {
    let d = ExperimentConfig::default();
    let config = ExperimentConfig {
        train: train_config(cfg, &a.training, None, None, None, None)?,
        num_points: cfg.pick(a.training.n, "n", d.num_points)?,
        test_fraction: cfg.pick(a.training.test_fraction, "test-fraction", d.test_fraction)?,
        sample_steps: cfg.pick(a.steps, "steps", d.sample_steps)?,
        sample_count: cfg.pick(a.samples, "samples", d.sample_count)?,
        clip_range: clip(a.clip, cfg)?,
        generator: generator_params(cfg)?,
        out_dir: cfg.pick(a.out.clone(), "out", d.out_dir)?,
        spaces: cfg.pick_list(a.spaces.clone(), "spaces", d.spaces)?,
        forms: cfg.pick_list(a.forms.clone(), "forms", d.forms)?,
        datasets: cfg.pick_list(a.datasets.clone(), "datasets", d.datasets)?,
        seeds: cfg.pick_list(a.seeds.clone(), "seeds", d.seeds)?,
        threads: threads_from_env()?,
    };
    if config.spaces.is_empty()
        || config.forms.is_empty()
        || config.datasets.is_empty()
        || config.seeds.is_empty()
    {
        return Err(CliError::usage(
            "spaces, forms, datasets and seeds must be non-empty",
        ));
    }
    if config.forms.contains(&LossForm::Rescaled) {
        return Err(CliError::usage(
            "rescaled loss is evaluation-only; sweep nelbo and/or weighted",
        ));
    }
    if config.sample_steps == 0 || config.sample_count == 0 {
        return Err(CliError::usage("--steps and --samples must be at least 1"));
    }
    Ok(config)
}

pub fn sweep(a: &SweepArgs) -> CliResult {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let config = sweep_config(a, &cfg)?;
    create_dir(&config.out_dir)?;
    let total = config.cells().len();
    let report = run_sweep(&config, |cell, res| match res {
        Ok(row) => eprintln!(
            "{}: loss {} mean_dist {} covar_dist {}",
            cell.dir_name(),
            io::fmt_sig(row.loss),
            io::fmt_sig(row.mean_dist),
            io::fmt_sig(row.covar_dist)
        ),
        Err(e) => eprintln!("{}: FAILED: {e}", cell.dir_name()),
    })?;
    println!(
        "{} of {total} cells succeeded; metrics in {}",
        report.rows.len(),
        report.metrics_path.display()
    );
    if report.failures.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = report
        .failures
        .iter()
        .map(|(cell, e)| format!("{}: {e}", cell.dir_name()))
        .collect();
    Err(CliError::new(
        EXIT_PARTIAL,
        format!("{} cell(s) failed:\n  {}", list.len(), list.join("\n  ")),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Scatter,
    Epochs,
    Bins,
    Scaling,
}

impl std::str::FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scatter" => Ok(PlotKind::Scatter),
            "epochs" => Ok(PlotKind::Epochs),
            "bins" => Ok(PlotKind::Bins),
            "scaling" => Ok(PlotKind::Scaling),
            other => Err(format!(
                "unknown plot kind '{other}' (expected scatter, epochs, bins or scaling)"
            )),
        }
    }
}

/// Series label: the file stem, or the run directory for the fixed
/// per-run file names.
fn label_for(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if matches!(stem.as_str(), "epochs" | "bins" | "samples") {
        if let Some(dir) = path.parent().and_then(Path::file_name) {
            return dir.to_string_lossy().into_owned();
        }
    }
    stem
}

fn epoch_column(r: &difflab::trainer::EpochRecord, name: &str) -> Option<f64> {
    match name {
        "train_loss" => Some(r.train_loss),
        "test_nelbo" => Some(r.test_nelbo),
        "test_weighted" => Some(r.test_weighted),
        "test_rescaled" => Some(r.test_rescaled),
        _ => None,
    }
}

fn scatter_series(path: &Path) -> CliResult<Series> {
    let cloud: PointCloud = io::read_points(path)?;
    if cloud.dim() < 2 {
        return Err(CliError::io(format!(
            "{}: scatter needs at least 2 columns",
            path.display()
        )));
    }
    let pts = (0..cloud.len())
        .map(|i| (cloud.point(i)[0], cloud.point(i)[1]))
        .collect();
    Ok(Series::new(label_for(path), pts))
}

pub fn plot(a: &PlotArgs) -> CliResult {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let kind_str = cfg.pick(a.kind.clone(), "kind", String::new())?;
    if kind_str.is_empty() {
        return Err(CliError::usage("--kind is required"));
    }
    let kind: PlotKind = kind_str.parse().map_err(CliError::usage)?;
    let out = required_path(&a.out, &cfg, "out")?;
    let log_y = a.log_y || cfg.pick(None, "log-y", false)?;
    if kind != PlotKind::Scaling && a.inputs.is_empty() {
        return Err(CliError::usage("at least one --input file is required"));
    }
    let svg = match kind {
        PlotKind::Scatter => {
            let clouds = a
                .inputs
                .iter()
                .map(|p| scatter_series(p))
                .collect::<CliResult<Vec<_>>>()?;
            scatter_svg(a.title.as_deref().unwrap_or("samples"), &clouds)
        }
        PlotKind::Epochs => {
            let columns =
                cfg.pick_list(a.columns.clone(), "columns", vec!["train_loss".to_string()])?;
            let mut series = Vec::new();
            for path in &a.inputs {
                let rows = io::read_epochs(path)?;
                if rows.is_empty() {
                    return Err(CliError::io(format!("{}: no epoch rows", path.display())));
                }
                for col in &columns {
                    if epoch_column(&rows[0], col).is_none() {
                        return Err(CliError::usage(format!("unknown epochs column '{col}'")));
                    }
                    let pts = rows
                        .iter()
                        .map(|r| (r.epoch as f64, epoch_column(r, col).unwrap_or(f64::NAN)))
                        .collect();
                    series.push(Series::new(format!("{} {col}", label_for(path)), pts));
                }
            }
            line_svg(
                a.title.as_deref().unwrap_or("loss per epoch"),
                "epoch",
                "loss",
                &series,
                log_y,
            )
        }
        PlotKind::Bins => {
            let mut series = Vec::new();
            for path in &a.inputs {
                let rows = io::read_bins(path)?;
                let Some(last) = rows.iter().map(|(e, _)| *e).max() else {
                    return Err(CliError::io(format!("{}: no bin rows", path.display())));
                };
                let epoch = cfg.pick(a.epoch, "epoch", last)?;
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|(e, _)| *e == epoch)
                    .map(|(_, b)| (0.5 * (b.lo + b.hi), b.mean_loss.unwrap_or(f64::NAN)))
                    .collect();
                if pts.is_empty() {
                    return Err(CliError::usage(format!(
                        "{}: no bins for epoch {epoch}",
                        path.display()
                    )));
                }
                series.push(Series::new(label_for(path), pts));
            }
            line_svg(
                a.title.as_deref().unwrap_or("loss vs timestep"),
                "t",
                "mean loss",
                &series,
                log_y,
            )
        }
        PlotKind::Scaling => {
            let rows = scaling_curves(&default_scaling_grid())?;
            if let Some(data_out) = &a.data_out {
                create_parent(data_out)?;
                io::write_scaling(data_out, &rows)?;
            }
            let series: Vec<Series> = TargetSpace::ALL
                .iter()
                .map(|&s| Series::new(s.name(), rows.iter().map(|r| (r.t, r.get(s))).collect()))
                .collect();
            line_svg(
                a.title.as_deref().unwrap_or("1 / w(t)"),
                "t",
                "1 / w(t)",
                &series,
                true,
            )
        }
    };
    create_parent(&out)?;
    std::fs::write(&out, svg)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", out.display())))?;
    println!("wrote {}", out.display());
    Ok(())
}
