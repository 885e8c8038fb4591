//! Experiment cells and sweeps over (space, form, dataset, seed).
//!
//! A cell generates its dataset, splits it, trains one model, samples from
//! it and scores the samples against held-out points. Cell outputs live in
//! `<out>/<dataset>_<space>_<form>_s<seed>/`; a cell whose checkpoint and
//! `epochs.csv` already exist is not retrained.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::datasets::{generate_with, split, DatasetKind, GeneratorParams, PointCloud};
use crate::error::{Error, Result};
use crate::eval::{covariance_distance, loss_estimate, mean_distance, MetricsRow};
use crate::io::{self, Checkpoint};
use crate::losses::LossForm;
use crate::sampler::{sample, SampleConfig};
use crate::targetspace::TargetSpace;
use crate::trainer::{train_with, EpochRecord, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Template for every cell; space, form, dataset and seed are overridden.
    pub train: TrainConfig,
    pub num_points: usize,
    pub test_fraction: f64,
    pub sample_steps: usize,
    pub sample_count: usize,
    pub clip_range: Option<(f64, f64)>,
    pub generator: GeneratorParams,
    pub out_dir: PathBuf,
    pub spaces: Vec<TargetSpace>,
    pub forms: Vec<LossForm>,
    pub datasets: Vec<DatasetKind>,
    pub seeds: Vec<u64>,
    /// Maximum cells trained concurrently.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            num_points: 100_000,
            test_fraction: 0.1,
            sample_steps: 512,
            sample_count: 2000,
            clip_range: None,
            generator: GeneratorParams::default(),
            out_dir: PathBuf::from("runs"),
            spaces: TargetSpace::ALL.to_vec(),
            forms: vec![LossForm::Nelbo, LossForm::Weighted],
            datasets: vec![DatasetKind::Ring],
            seeds: vec![1],
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub dataset: DatasetKind,
    pub space: TargetSpace,
    pub form: LossForm,
    pub seed: u64,
}

impl Cell {
    pub fn dir_name(&self) -> String {
        format!(
            "{}_{}_{}_s{}",
            self.dataset, self.space, self.form, self.seed
        )
    }
}

impl ExperimentConfig {
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &dataset in &self.datasets {
            for &seed in &self.seeds {
                for &form in &self.forms {
                    for &space in &self.spaces {
                        cells.push(Cell {
                            dataset,
                            space,
                            form,
                            seed,
                        });
                    }
                }
            }
        }
        cells
    }

    pub fn cell_dir(&self, cell: &Cell) -> PathBuf {
        self.out_dir.join(cell.dir_name())
    }

    pub fn train_config(&self, cell: &Cell) -> TrainConfig {
        TrainConfig {
            space: cell.space,
            form: cell.form,
            dataset: cell.dataset,
            seed: cell.seed,
            ..self.train.clone()
        }
    }

    pub fn sample_config(&self, seed: u64) -> SampleConfig {
        SampleConfig {
            num_steps: self.sample_steps,
            num_samples: self.sample_count,
            seed,
            clip_range: self.clip_range,
        }
    }

    /// Normalised cloud of `kind` split into `(train, test)`.
    pub fn data(&self, kind: DatasetKind, seed: u64) -> Result<(PointCloud, PointCloud)> {
        let cloud = generate_with(kind, self.num_points, seed, &self.generator)?;
        split(&cloud, self.test_fraction)
    }
}

/// Paths written by one cell.
#[derive(Debug, Clone)]
pub struct CellFiles {
    pub dir: PathBuf,
    pub checkpoint: PathBuf,
    pub epochs: PathBuf,
    pub bins: PathBuf,
    pub samples: PathBuf,
}

impl CellFiles {
    pub fn in_dir(dir: &Path) -> Self {
        CellFiles {
            dir: dir.to_path_buf(),
            checkpoint: dir.join("model.bin"),
            epochs: dir.join("epochs.csv"),
            bins: dir.join("bins.csv"),
            samples: dir.join("samples.csv"),
        }
    }

    pub fn trained(&self) -> bool {
        self.checkpoint.is_file() && self.epochs.is_file()
    }
}

/// Trains one model and writes its checkpoint, `epochs.csv` and `bins.csv`.
pub fn train_to_dir<F>(
    config: &TrainConfig,
    train: &PointCloud,
    test: &PointCloud,
    dir: &Path,
    on_epoch: F,
) -> Result<Checkpoint>
where
    F: FnMut(&EpochRecord),
{
    let files = CellFiles::in_dir(dir);
    let record = train_with(config, train, test, on_epoch)?;
    io::write_epochs(&files.epochs, &record.epochs)?;
    io::write_bins(
        &files.bins,
        record
            .bins
            .iter()
            .enumerate()
            .map(|(e, b)| (e + 1, b.as_slice())),
    )?;
    let ck = Checkpoint {
        model: record.model,
        form: config.form,
    };
    // Checkpoint last: its presence marks the cell as trained.
    io::write_checkpoint(&files.checkpoint, &ck)?;
    Ok(ck)
}

/// Test loss in the model's training form on `test`, plus moment distances
/// between `samples` and `reference`.
pub fn score(
    ck: &Checkpoint,
    test: &PointCloud,
    reference: &PointCloud,
    samples: &PointCloud,
    draws_per_point: usize,
    seed: u64,
    t_min: f64,
) -> Result<(f64, f64, f64)> {
    let loss = loss_estimate(&ck.model, test, ck.form, draws_per_point, seed, t_min)?.mean;
    Ok((
        loss,
        mean_distance(samples, reference)?,
        covariance_distance(samples, reference)?,
    ))
}

/// Runs or resumes one cell and returns its metrics row.
pub fn run_cell<F>(config: &ExperimentConfig, cell: &Cell, on_epoch: F) -> Result<MetricsRow>
where
    F: FnMut(&EpochRecord),
{
    let tc = config.train_config(cell);
    tc.validate()?;
    let files = CellFiles::in_dir(&config.cell_dir(cell));
    let (train, test) = config.data(cell.dataset, cell.seed)?;
    let ck = if files.trained() {
        let ck = io::read_checkpoint(&files.checkpoint)?;
        if ck.model.predict_space != cell.space || ck.form != cell.form {
            return Err(Error::format(
                &files.checkpoint,
                "checkpoint does not match its cell",
            ));
        }
        ck
    } else {
        train_to_dir(&tc, &train, &test, &files.dir, on_epoch)?
    };
    let samples = sample(&ck.model, &config.sample_config(cell.seed))?;
    io::write_points(&files.samples, &samples)?;
    let reference = test.head(config.sample_count);
    let (loss, mean_dist, covar_dist) = score(
        &ck,
        &test,
        &reference,
        &samples,
        tc.eval_draws_per_point,
        tc.seed,
        tc.t_min,
    )?;
    Ok(MetricsRow {
        space: cell.space,
        form: cell.form,
        dataset: cell.dataset.to_string(),
        seed: cell.seed,
        loss,
        mean_dist,
        covar_dist,
    })
}

#[derive(Debug)]
pub struct SweepReport {
    /// Successful rows in cell order.
    pub rows: Vec<MetricsRow>,
    pub failures: Vec<(Cell, Error)>,
    pub metrics_path: PathBuf,
}

/// Runs every cell (up to `config.threads` at a time), continuing past
/// failures, and writes `<out>/metrics.csv` in cell order.
pub fn sweep<F>(config: &ExperimentConfig, on_cell: F) -> Result<SweepReport>
where
    F: Fn(&Cell, &Result<MetricsRow>) + Sync,
{
    let cells = config.cells();
    let results: Vec<Mutex<Option<Result<MetricsRow>>>> =
        cells.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.threads.clamp(1, cells.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cell) = cells.get(i) else { break };
                let res = run_cell(config, cell, |_| {});
                on_cell(cell, &res);
                *results[i].lock().expect("result slot") = Some(res);
            });
        }
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (cell, slot) in cells.iter().zip(results) {
        match slot
            .into_inner()
            .expect("result slot")
            .expect("every cell ran")
        {
            Ok(row) => rows.push(row),
            Err(e) => failures.push((*cell, e)),
        }
    }
    let metrics_path = config.out_dir.join("metrics.csv");
    io::write_metrics(&metrics_path, &rows)?;
    Ok(SweepReport {
        rows,
        failures,
        metrics_path,
    })
}
