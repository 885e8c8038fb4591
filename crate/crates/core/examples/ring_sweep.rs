//! Runs (or resumes) the default ring sweep: 4 spaces x {nelbo, weighted}
//! for the seeds given on the command line.
//!
//! cargo run --release -p difflab-core --example ring_sweep -- <out_dir> 1 2 3

use std::path::PathBuf;

use difflab::experiment::{sweep, ExperimentConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let out_dir = PathBuf::from(args.next().expect("usage: ring_sweep <out_dir> <seed>..."));
    let seeds: Vec<u64> = args.map(|s| s.parse().expect("integer seed")).collect();
    let config = ExperimentConfig {
        out_dir,
        seeds,
        ..ExperimentConfig::default()
    };
    let report = sweep(&config, |cell, res| match res {
        Ok(row) => println!(
            "{} loss={} mean={} cov={}",
            cell.dir_name(),
            row.loss,
            row.mean_dist,
            row.covar_dist
        ),
        Err(e) => println!("{} FAILED: {e}", cell.dir_name()),
    })
    .expect("sweep");
    println!("wrote {}", report.metrics_path.display());
}
