use difflab::datasets::{generate, split};
use difflab::experiment::{run_cell, Cell, CellFiles, ExperimentConfig};
use difflab::io;
use difflab::trainer::{train, TrainConfig};
use difflab::{DatasetKind, LossForm, TargetSpace};

/// Full-size ring, weighted eps loss, 50 epochs.
#[test]
fn ring_eps_smoke_run_reduces_train_loss() {
    let cloud = generate(DatasetKind::Ring, 100_000, 1).unwrap();
    let (train_set, test_set) = split(&cloud, 0.1).unwrap();
    let config = TrainConfig {
        space: TargetSpace::Eps,
        form: LossForm::Weighted,
        dataset: DatasetKind::Ring,
        epochs: 50,
        seed: 1,
        ..TrainConfig::default()
    };
    let record = train(&config, &train_set, &test_set).unwrap();
    let first = record.epochs[0].train_loss;
    let last = record.epochs.last().unwrap().train_loss;
    eprintln!("epoch 1 train loss {first}, epoch 50 train loss {last}");
    assert!(last < 0.2 * first, "final {last} vs first {first}");
}

#[test]
fn cell_pipeline_trains_once_and_resumes() {
    let dir = tempfile::TempDir::new().unwrap();
    let mut config = ExperimentConfig {
        num_points: 1200,
        sample_steps: 16,
        sample_count: 150,
        out_dir: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    config.train.epochs = 2;
    config.train.hidden_width = 16;
    let cell = Cell {
        dataset: DatasetKind::Cluster,
        space: TargetSpace::S,
        form: LossForm::Nelbo,
        seed: 5,
    };
    let first = run_cell(&config, &cell, |_| {}).unwrap();
    let files = CellFiles::in_dir(&config.cell_dir(&cell));
    assert!(files.trained());
    assert_eq!(io::read_epochs(&files.epochs).unwrap().len(), 2);
    assert_eq!(io::read_points(&files.samples).unwrap().len(), 150);
    let model_bytes = std::fs::read(&files.checkpoint).unwrap();

    let mut epochs_seen = 0;
    let again = run_cell(&config, &cell, |_| epochs_seen += 1).unwrap();
    assert_eq!(epochs_seen, 0, "a trained cell must not be retrained");
    assert_eq!(first, again);
    assert_eq!(std::fs::read(&files.checkpoint).unwrap(), model_bytes);

    let ck = io::read_checkpoint(&files.checkpoint).unwrap();
    assert_eq!(ck.model.predict_space, TargetSpace::S);
    assert_eq!(ck.form, LossForm::Nelbo);
    assert_eq!(io::encode_checkpoint(&ck), model_bytes);
}
