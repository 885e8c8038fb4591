//! Shared fixtures for the benchmarks.

use difflab::datasets::generate;
use difflab::{Architecture, DatasetKind, DenoiserModel, PointCloud, TargetSpace};
use ndarray::Array2;

/// Freshly initialised denoiser of the given hidden width on 2D data.
pub fn model(width: usize, space: TargetSpace) -> DenoiserModel {
    DenoiserModel::init(Architecture::new(2, width), space, 7).expect("valid architecture")
}

/// Normalised ring points.
pub fn ring(n: usize) -> PointCloud {
    generate(DatasetKind::Ring, n, 3).expect("n >= 2")
}

/// A batch of latents and times spread over (0, 1).
pub fn batch(n: usize) -> (Array2<f64>, Vec<f64>) {
    let z = Array2::from_shape_fn((n, 2), |(i, k)| ((i * 7 + k * 3) % 17) as f64 / 8.0 - 1.0);
    let t = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    (z, t)
}
