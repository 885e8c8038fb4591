use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn difflab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_difflab"))
        .args(args)
        .env_remove("DLL_THREADS")
        .output()
        .expect("spawn difflab")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(args: &[&str]) -> Output {
    let out = difflab(args);
    assert_eq!(
        code(&out),
        0,
        "difflab {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(str::to_string)
        .collect()
}

/// One-epoch ring model on 1000 points, trained into `dir/run`.
fn tiny_model(dir: &Path, space: &str) -> PathBuf {
    let out = dir.join(format!("run_{space}"));
    ok(&[
        "train",
        "--space",
        space,
        "--form",
        "weighted",
        "--dataset",
        "ring",
        "--epochs",
        "1",
        "--n",
        "1000",
        "--width",
        "16",
        "--seed",
        "4",
        "--out",
        s(&out),
    ]);
    out
}

#[test]
fn gen_data_writes_rows_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&[
        "gen-data",
        "--kind",
        "ring",
        "--n",
        "2500",
        "--seed",
        "1",
        "--out",
        s(&a),
    ]);
    ok(&[
        "gen-data",
        "--kind",
        "ring",
        "--n",
        "2500",
        "--seed",
        "1",
        "--out",
        s(&b),
    ]);
    assert_eq!(rows(&a).len(), 2500);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        std::fs::read_to_string(&a).unwrap().lines().next(),
        Some("x1,x2")
    );
}

#[test]
fn gen_data_full_size() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("ring.csv");
    ok(&[
        "gen-data",
        "--kind",
        "ring",
        "--n",
        "100000",
        "--seed",
        "1",
        "--out",
        s(&a),
    ]);
    assert_eq!(rows(&a).len(), 100_000);
}

#[test]
fn usage_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    assert_eq!(
        code(&difflab(&[
            "gen-data",
            "--kind",
            "ring",
            "--n",
            "1",
            "--out",
            s(&a)
        ])),
        1
    );
    assert_eq!(
        code(&difflab(&["gen-data", "--kind", "moons", "--out", s(&a)])),
        1
    );
    assert_eq!(code(&difflab(&["gen-data", "--n", "10"])), 1);
    assert_eq!(code(&difflab(&["frobnicate"])), 1);
    assert_eq!(
        code(&difflab(&["plot", "--kind", "heatmap", "--out", s(&a)])),
        1
    );
    assert_eq!(code(&difflab(&["--help"])), 0);
}

#[test]
fn io_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o.csv");
    let missing = dir.path().join("nope.bin");
    assert_eq!(
        code(&difflab(&[
            "sample",
            "--checkpoint",
            s(&missing),
            "--out",
            s(&out)
        ])),
        2
    );
    let bad = dir.path().join("bad.bin");
    std::fs::write(&bad, b"NOPEjunkjunkjunk").unwrap();
    assert_eq!(
        code(&difflab(&[
            "sample",
            "--checkpoint",
            s(&bad),
            "--out",
            s(&out)
        ])),
        2
    );

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let svg = dir.path().join("p.svg");
    assert_eq!(
        code(&difflab(&[
            "plot",
            "--kind",
            "scatter",
            "--input",
            s(&empty),
            "--out",
            s(&svg)
        ])),
        2
    );
    std::fs::write(&empty, "x1,x2\n").unwrap();
    assert_eq!(
        code(&difflab(&[
            "plot",
            "--kind",
            "scatter",
            "--input",
            s(&empty),
            "--out",
            s(&svg)
        ])),
        2
    );
}

#[test]
fn train_schema_and_determinism() {
    let dir = TempDir::new().unwrap();
    let a = tiny_model(dir.path(), "eps");
    let b = dir.path().join("again");
    ok(&[
        "train",
        "--space",
        "eps",
        "--form",
        "weighted",
        "--dataset",
        "ring",
        "--epochs",
        "1",
        "--n",
        "1000",
        "--width",
        "16",
        "--seed",
        "4",
        "--out",
        s(&b),
    ]);
    let header = |p: &Path| {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(
        header(&a.join("epochs.csv")),
        "epoch,train_loss,test_nelbo,test_weighted,test_rescaled"
    );
    assert_eq!(
        header(&a.join("bins.csv")),
        "epoch,bin_lo,bin_hi,count,mean_loss"
    );
    assert_eq!(rows(&a.join("epochs.csv")).len(), 1);
    assert_eq!(rows(&a.join("bins.csv")).len(), 20);
    for f in ["model.bin", "epochs.csv", "bins.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_file_supplies_values_and_flags_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "# tiny run\nkind = waves\nn = 300\nseed = 9\n").unwrap();
    let a = dir.path().join("a.csv");
    ok(&["gen-data", "--config", s(&cfg), "--out", s(&a)]);
    assert_eq!(rows(&a).len(), 300);
    ok(&["gen-data", "--config", s(&cfg), "--n", "50", "--out", s(&a)]);
    assert_eq!(rows(&a).len(), 50);
}

#[test]
fn sample_step_counts() {
    let dir = TempDir::new().unwrap();
    let run = tiny_model(dir.path(), "v");
    let ck = run.join("model.bin");
    for steps in ["1", "8", "64", "512"] {
        let out = dir.path().join(format!("s{steps}.csv"));
        ok(&[
            "sample",
            "--checkpoint",
            s(&ck),
            "--steps",
            steps,
            "--samples",
            "300",
            "--seed",
            "2",
            "--out",
            s(&out),
        ]);
        assert_eq!(rows(&out).len(), 300, "{steps} steps");
    }
    let again = dir.path().join("again.csv");
    ok(&[
        "sample",
        "--checkpoint",
        s(&ck),
        "--steps",
        "8",
        "--samples",
        "300",
        "--seed",
        "2",
        "--out",
        s(&again),
    ]);
    assert_eq!(
        std::fs::read(&again).unwrap(),
        std::fs::read(dir.path().join("s8.csv")).unwrap()
    );
    let zero = dir.path().join("zero.csv");
    assert_eq!(
        code(&difflab(&[
            "sample",
            "--checkpoint",
            s(&ck),
            "--steps",
            "0",
            "--out",
            s(&zero)
        ])),
        1
    );
}

#[test]
fn eval_against_itself_and_dimension_mismatch() {
    let dir = TempDir::new().unwrap();
    let run = tiny_model(dir.path(), "x");
    let ck = run.join("model.bin");
    let test = dir.path().join("test.csv");
    ok(&[
        "gen-data",
        "--kind",
        "ring",
        "--n",
        "500",
        "--seed",
        "3",
        "--out",
        s(&test),
    ]);
    let metrics = dir.path().join("metrics.csv");
    ok(&[
        "eval",
        "--checkpoint",
        s(&ck),
        "--test",
        s(&test),
        "--samples",
        s(&test),
        "--dataset",
        "ring",
        "--out",
        s(&metrics),
    ]);
    let text = std::fs::read_to_string(&metrics).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("space,form,dataset,seed,loss,mean_dist,covar_dist")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..4], &["x", "weighted", "ring", "0"]);
    assert_eq!(row[5].parse::<f64>().unwrap(), 0.0);
    assert_eq!(row[6].parse::<f64>().unwrap(), 0.0);

    // A second eval appends rather than rewriting the header.
    ok(&[
        "eval",
        "--checkpoint",
        s(&ck),
        "--test",
        s(&test),
        "--samples",
        s(&test),
        "--out",
        s(&metrics),
    ]);
    assert_eq!(rows(&metrics).len(), 2);

    let three = dir.path().join("three.csv");
    std::fs::write(&three, "x1,x2,x3\n1,2,3\n4,5,6\n").unwrap();
    let out = difflab(&[
        "eval",
        "--checkpoint",
        s(&ck),
        "--test",
        s(&test),
        "--samples",
        s(&three),
        "--out",
        s(&metrics),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_cross_product_and_resume() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep");
    let args = [
        "sweep",
        "--datasets",
        "ring",
        "--seeds",
        "1",
        "--epochs",
        "1",
        "--n",
        "600",
        "--width",
        "8",
        "--samples",
        "200",
        "--steps",
        "16",
        "--out",
        s(&out),
    ];
    ok(&args);
    let metrics = out.join("metrics.csv");
    let first = std::fs::read(&metrics).unwrap();
    assert_eq!(rows(&metrics).len(), 8);
    assert!(out.join("ring_eps_nelbo_s1").join("model.bin").is_file());

    // Completed cells are not retrained: a tampered epochs.csv survives.
    let epochs = out.join("ring_x_weighted_s1").join("epochs.csv");
    std::fs::write(
        &epochs,
        "epoch,train_loss,test_nelbo,test_weighted,test_rescaled\n",
    )
    .unwrap();
    ok(&args);
    assert_eq!(rows(&epochs).len(), 0);
    assert_eq!(std::fs::read(&metrics).unwrap(), first);
}

#[test]
fn sweep_reports_partial_failure() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep");
    // A corrupt checkpoint makes exactly one cell fail.
    let cell = out.join("ring_s_nelbo_s1");
    std::fs::create_dir_all(&cell).unwrap();
    std::fs::write(cell.join("model.bin"), b"garbage").unwrap();
    std::fs::write(
        cell.join("epochs.csv"),
        "epoch,train_loss,test_nelbo,test_weighted,test_rescaled\n",
    )
    .unwrap();
    let res = difflab(&[
        "sweep",
        "--forms",
        "nelbo",
        "--spaces",
        "x,s",
        "--epochs",
        "1",
        "--n",
        "400",
        "--width",
        "8",
        "--samples",
        "100",
        "--steps",
        "8",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&res), 4, "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(rows(&out.join("metrics.csv")).len(), 1);
}

#[test]
fn plots() {
    let dir = TempDir::new().unwrap();
    let pts = dir.path().join("pts.csv");
    ok(&[
        "gen-data",
        "--kind",
        "cluster",
        "--n",
        "100",
        "--seed",
        "5",
        "--out",
        s(&pts),
    ]);
    let svg = dir.path().join("scatter.svg");
    ok(&[
        "plot",
        "--kind",
        "scatter",
        "--input",
        s(&pts),
        "--out",
        s(&svg),
    ]);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<circle").count(), 100);
    assert!(text.contains(r#"width="800" height="600""#));

    let run = tiny_model(dir.path(), "s");
    let epochs_svg = dir.path().join("epochs.svg");
    ok(&[
        "plot",
        "--kind",
        "epochs",
        "--input",
        s(&run.join("epochs.csv")),
        "--columns",
        "train_loss,test_nelbo",
        "--out",
        s(&epochs_svg),
    ]);
    let bins_svg = dir.path().join("bins.svg");
    ok(&[
        "plot",
        "--kind",
        "bins",
        "--input",
        s(&run.join("bins.csv")),
        "--log-y",
        "--out",
        s(&bins_svg),
    ]);
    assert!(std::fs::read_to_string(&bins_svg)
        .unwrap()
        .contains("<polyline"));

    let scaling_svg = dir.path().join("scaling.svg");
    let scaling_csv = dir.path().join("scaling.csv");
    ok(&[
        "plot",
        "--kind",
        "scaling",
        "--out",
        s(&scaling_svg),
        "--data-out",
        s(&scaling_csv),
    ]);
    let text = std::fs::read_to_string(&scaling_svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 4);
    let rows = rows(&scaling_csv);
    assert_eq!(rows.len(), 99);
    assert!(rows[0].starts_with("0.01,"));
    assert!(rows[98].starts_with("0.99,"));
}
