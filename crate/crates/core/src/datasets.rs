//! Synthetic 2D point clouds: cluster, ring, swiss roll and waves.
//!
//! Raw samples are drawn from the parameterisations in [`GeneratorParams`]
//! and then standardised to zero mean and unit per-dimension std.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DatasetKind {
    Cluster,
    Ring,
    Swiss,
    Waves,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [
        DatasetKind::Cluster,
        DatasetKind::Ring,
        DatasetKind::Swiss,
        DatasetKind::Waves,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Cluster => "cluster",
            DatasetKind::Ring => "ring",
            DatasetKind::Swiss => "swiss",
            DatasetKind::Waves => "waves",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cluster" => Ok(DatasetKind::Cluster),
            "ring" => Ok(DatasetKind::Ring),
            "swiss" | "swissroll" | "swiss_roll" => Ok(DatasetKind::Swiss),
            "waves" => Ok(DatasetKind::Waves),
            other => Err(Error::InvalidArgument(format!("unknown dataset '{other}'"))),
        }
    }
}

/// Shape parameters of the raw generators.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub cluster_count: usize,
    pub cluster_radius: f64,
    pub cluster_std: f64,
    pub ring_radius: f64,
    pub ring_noise: f64,
    /// Angle range of the spiral, in units of pi.
    pub swiss_turns: (f64, f64),
    pub swiss_noise: f64,
    pub wave_offsets: Vec<f64>,
    pub wave_amplitude: f64,
    pub wave_frequency: f64,
    pub wave_half_width: f64,
    pub wave_noise: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            cluster_count: 6,
            cluster_radius: 1.5,
            cluster_std: 0.12,
            ring_radius: 1.0,
            ring_noise: 0.05,
            swiss_turns: (1.5, 4.5),
            swiss_noise: 0.02,
            wave_offsets: vec![-1.0, 0.0, 1.0],
            wave_amplitude: 0.4,
            wave_frequency: 3.0,
            wave_half_width: 2.0,
            wave_noise: 0.05,
        }
    }
}

impl GeneratorParams {
    pub fn cluster_center(&self, k: usize) -> [f64; 2] {
        let angle = 2.0 * PI * k as f64 / self.cluster_count as f64;
        [
            self.cluster_radius * angle.cos(),
            self.cluster_radius * angle.sin(),
        ]
    }
}

/// An `N x d` point set.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Array2<f64>,
    /// `None` for generated samples or clouds read from disk.
    pub kind: Option<DatasetKind>,
    pub seed: u64,
    pub normalized: bool,
}

impl PointCloud {
    pub fn from_points(points: Array2<f64>) -> Self {
        PointCloud {
            points,
            kind: None,
            seed: 0,
            normalized: false,
        }
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points
            .row(i)
            .to_slice()
            .expect("point clouds are stored row-major")
    }

    /// Rows `range` as a new cloud with the same metadata.
    pub fn head(&self, n: usize) -> PointCloud {
        let n = n.min(self.len());
        PointCloud {
            points: self.points.slice(ndarray::s![..n, ..]).to_owned(),
            ..self.clone()
        }
    }
}

/// Raw (unnormalised) samples and the mixture component each came from.
/// The component is the cluster index, the wave index, or 0.
pub fn generate_raw(
    kind: DatasetKind,
    n: usize,
    seed: u64,
    params: &GeneratorParams,
) -> (Array2<f64>, Vec<usize>) {
    let rng = RngState::new(seed);
    let mut points = Array2::zeros((n, 2));
    let mut component = vec![0; n];
    let label = format!("data/{}", kind.name());
    for i in 0..n {
        let mut d = rng.stream(&label, i as u64);
        let (p, c) = match kind {
            DatasetKind::Cluster => {
                let k = d.below(params.cluster_count);
                let c = params.cluster_center(k);
                let s = params.cluster_std;
                ([c[0] + s * d.normal(), c[1] + s * d.normal()], k)
            }
            DatasetKind::Ring => {
                let theta = d.uniform_in(0.0, 2.0 * PI);
                let r = params.ring_radius + params.ring_noise * d.normal();
                ([r * theta.cos(), r * theta.sin()], 0)
            }
            DatasetKind::Swiss => {
                let (lo, hi) = params.swiss_turns;
                let u = d.uniform_in(lo * PI, hi * PI);
                let scale = hi * PI;
                let s = params.swiss_noise;
                (
                    [
                        u * u.cos() / scale + s * d.normal(),
                        u * u.sin() / scale + s * d.normal(),
                    ],
                    0,
                )
            }
            DatasetKind::Waves => {
                let k = d.below(params.wave_offsets.len());
                let x = d.uniform_in(-params.wave_half_width, params.wave_half_width);
                let y = params.wave_amplitude * (params.wave_frequency * x).sin()
                    + params.wave_offsets[k]
                    + params.wave_noise * d.normal();
                ([x, y], k)
            }
        };
        points[[i, 0]] = p[0];
        points[[i, 1]] = p[1];
        component[i] = c;
    }
    (points, component)
}

/// Standardises columns in place to zero mean and unit (population) std.
pub fn normalize(points: &mut Array2<f64>) {
    let n = points.nrows() as f64;
    for mut col in points.axis_iter_mut(Axis(1)) {
        let mean = col.sum() / n;
        col.mapv_inplace(|v| v - mean);
        let std = (col.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        if std > 0.0 {
            col.mapv_inplace(|v| v / std);
        }
    }
}

pub fn generate(kind: DatasetKind, n: usize, seed: u64) -> Result<PointCloud> {
    generate_with(kind, n, seed, &GeneratorParams::default())
}

pub fn generate_with(
    kind: DatasetKind,
    n: usize,
    seed: u64,
    params: &GeneratorParams,
) -> Result<PointCloud> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "dataset needs at least 2 points, got {n}"
        )));
    }
    let (mut points, _) = generate_raw(kind, n, seed, params);
    normalize(&mut points);
    Ok(PointCloud {
        points,
        kind: Some(kind),
        seed,
        normalized: true,
    })
}

/// Deterministic shuffle-split keyed by the cloud seed.
pub fn split(cloud: &PointCloud, test_fraction: f64) -> Result<(PointCloud, PointCloud)> {
    let (train_idx, test_idx) = split_indices(cloud.len(), cloud.seed, test_fraction)?;
    Ok((select(cloud, &train_idx), select(cloud, &test_idx)))
}

/// Index sets of [`split`]: `round(n * test_fraction)` test indices.
pub fn split_indices(n: usize, seed: u64, test_fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    let n_test = ((n as f64) * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} leaves an empty side for {n} points"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    RngState::new(seed).stream("split", 0).shuffle(&mut idx);
    let test = idx.split_off(n - n_test);
    Ok((idx, test))
}

fn select(cloud: &PointCloud, idx: &[usize]) -> PointCloud {
    PointCloud {
        points: cloud.points.select(Axis(0), idx),
        ..cloud.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_stats(p: &Array2<f64>) -> Vec<(f64, f64)> {
        let n = p.nrows() as f64;
        p.axis_iter(Axis(1))
            .map(|c| {
                let m = c.sum() / n;
                let v = c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
                (m, v.sqrt())
            })
            .collect()
    }

    #[test]
    fn normalized_for_every_kind() {
        for kind in DatasetKind::ALL {
            for seed in [0, 17] {
                let c = generate(kind, 20_000, seed).unwrap();
                assert_eq!(c.len(), 20_000);
                assert!(c.normalized);
                for (m, s) in column_stats(&c.points) {
                    assert!(m.abs() < 1e-6, "{kind} mean {m}");
                    assert!((s - 1.0).abs() < 1e-3, "{kind} std {s}");
                }
            }
        }
    }

    #[test]
    fn full_size_cloud() {
        let c = generate(DatasetKind::Waves, 100_000, 1).unwrap();
        assert_eq!(c.len(), 100_000);
        assert!(c.normalized);
    }

    #[test]
    fn deterministic() {
        for kind in DatasetKind::ALL {
            assert_eq!(
                generate(kind, 500, 4).unwrap(),
                generate(kind, 500, 4).unwrap()
            );
        }
        assert_ne!(
            generate(DatasetKind::Ring, 500, 4).unwrap().points,
            generate(DatasetKind::Ring, 500, 5).unwrap().points
        );
    }

    #[test]
    fn too_few_points() {
        assert!(generate(DatasetKind::Ring, 1, 0).is_err());
        assert!(generate(DatasetKind::Ring, 2, 0).is_ok());
    }

    #[test]
    fn ring_radius_concentrated() {
        let p = GeneratorParams::default();
        let (raw, _) = generate_raw(DatasetKind::Ring, 100_000, 3, &p);
        let radii: Vec<f64> = raw.rows().into_iter().map(|r| r[0].hypot(r[1])).collect();
        let n = radii.len() as f64;
        let m = radii.iter().sum::<f64>() / n;
        let sd = (radii.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / n).sqrt();
        assert!(sd / m < 0.15);
        assert!(radii.iter().all(|r| (r - m).abs() <= 5.0 * p.ring_noise));
    }

    #[test]
    fn raw_shapes() {
        let p = GeneratorParams::default();
        let n = 50_000;

        let (raw, comp) = generate_raw(DatasetKind::Cluster, n, 8, &p);
        for (r, &k) in raw.rows().into_iter().zip(&comp) {
            let c = p.cluster_center(k);
            assert!((r[0] - c[0]).hypot(r[1] - c[1]) <= 5.0 * p.cluster_std * 2f64.sqrt());
        }

        let (raw, _) = generate_raw(DatasetKind::Swiss, n, 8, &p);
        let (lo, hi) = (p.swiss_turns.0 / p.swiss_turns.1, 1.0);
        let slack = 5.0 * p.swiss_noise * 2f64.sqrt();
        for r in raw.rows() {
            let rad = r[0].hypot(r[1]);
            assert!(rad >= lo - slack && rad <= hi + slack, "radius {rad}");
        }

        let (raw, comp) = generate_raw(DatasetKind::Waves, n, 8, &p);
        for (r, &k) in raw.rows().into_iter().zip(&comp) {
            let curve = p.wave_amplitude * (p.wave_frequency * r[0]).sin() + p.wave_offsets[k];
            assert!((r[1] - curve).abs() <= 5.0 * p.wave_noise);
            assert!(r[0].abs() <= p.wave_half_width);
        }
    }

    #[test]
    fn split_examples() {
        let c = generate(DatasetKind::Ring, 100_000, 2).unwrap();
        let (train, test) = split(&c, 0.1).unwrap();
        assert_eq!((train.len(), test.len()), (90_000, 10_000));

        let (a, b) = split_indices(1000, 2, 0.1).unwrap();
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert_eq!(split_indices(1000, 2, 0.1).unwrap(), (a, b));

        assert!(split(&c, 0.0).is_err());
        assert!(split(&c, 1.0).is_err());
        assert!(split(&c, f64::NAN).is_err());
    }
}
