//! File formats: point-cloud and result CSVs, model checkpoints.
//!
//! Every CSV number is written with 9 significant digits. Checkpoints are
//! `"DLLM"`, a little-endian `u32` version, the architecture and training
//! tags as `u32`s, then all parameters as little-endian `f64` in layer order
//! (weights row-major, then biases).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::datasets::PointCloud;
use crate::denoiser::{Activation, Architecture, DenoiserModel};
use crate::error::{Error, Result};
use crate::eval::{BinStat, MetricsRow, ScalingRow};
use crate::losses::LossForm;
use crate::targetspace::TargetSpace;
use crate::trainer::EpochRecord;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DLLM";
pub const CHECKPOINT_VERSION: u32 = 1;

pub const EPOCHS_HEADER: [&str; 5] = [
    "epoch",
    "train_loss",
    "test_nelbo",
    "test_weighted",
    "test_rescaled",
];
pub const BINS_HEADER: [&str; 5] = ["epoch", "bin_lo", "bin_hi", "count", "mean_loss"];
pub const METRICS_HEADER: [&str; 7] = [
    "space",
    "form",
    "dataset",
    "seed",
    "loss",
    "mean_dist",
    "covar_dist",
];
pub const SCALING_HEADER: [&str; 5] = ["t", "x", "eps", "v", "s"];

/// Decimal rendering with 9 significant digits, like C's `%.9g`.
pub fn fmt_sig(v: f64) -> String {
    const DIGITS: i32 = 9;
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

fn point_header(d: usize) -> Vec<String> {
    (1..=d).map(|k| format!("x{k}")).collect()
}

pub fn write_points(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(point_header(cloud.dim()))
        .map_err(|e| csv_err(path, e))?;
    for row in cloud.points.rows() {
        w.write_record(row.iter().map(|v| fmt_sig(*v)))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads an `x1,...,xd` point CSV. An empty file or one without data rows is
/// a format error.
pub fn read_points(path: &Path) -> Result<PointCloud> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let d = header.len();
    if d == 0
        || header
            .iter()
            .enumerate()
            .any(|(k, h)| h.trim() != format!("x{}", k + 1))
    {
        return Err(Error::format(
            path,
            format!("expected header x1..xd, got {header:?}"),
        ));
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != d {
            return Err(Error::format(
                path,
                format!("row {} has {} fields, expected {d}", rows + 1, rec.len()),
            ));
        }
        for field in rec.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::format(path, format!("bad number '{field}' in row {}", rows + 1))
            })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::format(path, "no data rows"));
    }
    let points = Array2::from_shape_vec((rows, d), data).expect("rows x d values");
    Ok(PointCloud::from_points(points))
}

pub fn write_epochs(path: &Path, epochs: &[EpochRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(EPOCHS_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for e in epochs {
        w.write_record([
            e.epoch.to_string(),
            fmt_sig(e.train_loss),
            fmt_sig(e.test_nelbo),
            fmt_sig(e.test_weighted),
            fmt_sig(e.test_rescaled),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_epochs(path: &Path) -> Result<Vec<EpochRecord>> {
    let rows = read_table(path, &EPOCHS_HEADER)?;
    rows.iter()
        .map(|r| {
            Ok(EpochRecord {
                epoch: parse_field(path, &r[0])?,
                train_loss: parse_field(path, &r[1])?,
                test_nelbo: parse_field(path, &r[2])?,
                test_weighted: parse_field(path, &r[3])?,
                test_rescaled: parse_field(path, &r[4])?,
            })
        })
        .collect()
}

/// Writes `(epoch, bins)` pairs; empty bins get an empty `mean_loss` field.
pub fn write_bins<'a>(
    path: &Path,
    bins: impl IntoIterator<Item = (usize, &'a [BinStat])>,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(BINS_HEADER).map_err(|e| csv_err(path, e))?;
    for (epoch, row) in bins {
        for b in row {
            w.write_record([
                epoch.to_string(),
                fmt_sig(b.lo),
                fmt_sig(b.hi),
                b.count.to_string(),
                b.mean_loss.map(fmt_sig).unwrap_or_default(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_bins(path: &Path) -> Result<Vec<(usize, BinStat)>> {
    let rows = read_table(path, &BINS_HEADER)?;
    rows.iter()
        .map(|r| {
            let mean_loss = if r[4].trim().is_empty() {
                None
            } else {
                Some(parse_field(path, &r[4])?)
            };
            Ok((
                parse_field(path, &r[0])?,
                BinStat {
                    lo: parse_field(path, &r[1])?,
                    hi: parse_field(path, &r[2])?,
                    count: parse_field(path, &r[3])?,
                    mean_loss,
                },
            ))
        })
        .collect()
}

fn metrics_record(m: &MetricsRow) -> [String; 7] {
    [
        m.space.to_string(),
        m.form.to_string(),
        m.dataset.clone(),
        m.seed.to_string(),
        fmt_sig(m.loss),
        fmt_sig(m.mean_dist),
        fmt_sig(m.covar_dist),
    ]
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(METRICS_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for m in rows {
        w.write_record(metrics_record(m))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Appends one row, writing the header first if the file is new or empty.
pub fn append_metrics(path: &Path, row: &MetricsRow) -> Result<()> {
    let fresh = std::fs::metadata(path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    if fresh {
        w.write_record(METRICS_HEADER)
            .map_err(|e| csv_err(path, e))?;
    }
    w.write_record(metrics_record(row))
        .map_err(|e| csv_err(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let rows = read_table(path, &METRICS_HEADER)?;
    rows.iter()
        .map(|r| {
            Ok(MetricsRow {
                space: r[0]
                    .parse()
                    .map_err(|e: Error| Error::format(path, e.to_string()))?,
                form: r[1]
                    .parse()
                    .map_err(|e: Error| Error::format(path, e.to_string()))?,
                dataset: r[2].clone(),
                seed: parse_field(path, &r[3])?,
                loss: parse_field(path, &r[4])?,
                mean_dist: parse_field(path, &r[5])?,
                covar_dist: parse_field(path, &r[6])?,
            })
        })
        .collect()
}

pub fn write_scaling(path: &Path, rows: &[ScalingRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SCALING_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        let mut rec = vec![fmt_sig(r.t)];
        rec.extend(r.values.iter().map(|v| fmt_sig(*v)));
        w.write_record(rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads any headed CSV as strings: `(header, rows)`.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn read_table(path: &Path, expected: &[&str]) -> Result<Vec<Vec<String>>> {
    let (header, rows) = read_csv(path)?;
    if header != expected {
        return Err(Error::format(
            path,
            format!("expected header {expected:?}, got {header:?}"),
        ));
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(path: &Path, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::format(path, format!("bad field '{s}'")))
}

/// A trained model plus the loss form it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: DenoiserModel,
    pub form: LossForm,
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let arch = &ck.model.arch;
    let mut out = Vec::with_capacity(40 + 8 * ck.model.parameter_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    let activation = match arch.activation {
        Activation::Relu => 0u32,
    };
    for v in [
        CHECKPOINT_VERSION,
        arch.data_dim as u32,
        arch.time_feature_dim as u32,
        arch.hidden_width as u32,
        arch.num_layers as u32,
        activation,
        ck.model.predict_space.code(),
        ck.form.code(),
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for block in ck.model.slices() {
        for p in block {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let bad = |msg: String| Error::format(path, msg);
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(bad("bad checkpoint magic".into()));
    }
    let mut words = bytes[4..]
        .chunks_exact(4)
        .take(8)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")));
    let mut next = || {
        words
            .next()
            .ok_or_else(|| bad("truncated checkpoint header".into()))
    };
    let version = next()?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let data_dim = next()? as usize;
    let time_feature_dim = next()? as usize;
    let hidden_width = next()? as usize;
    let num_layers = next()? as usize;
    let activation = match next()? {
        0 => Activation::Relu,
        other => return Err(bad(format!("unknown activation code {other}"))),
    };
    let space_code = next()?;
    let space = TargetSpace::from_code(space_code)
        .ok_or_else(|| bad(format!("unknown space code {space_code}")))?;
    let form_code = next()?;
    let form = LossForm::from_code(form_code)
        .ok_or_else(|| bad(format!("unknown form code {form_code}")))?;
    let arch = Architecture {
        data_dim,
        time_feature_dim,
        hidden_width,
        num_layers,
        activation,
    };
    arch.validate().map_err(|e| bad(e.to_string()))?;
    let mut model = DenoiserModel::zeros(arch, space)?;
    let body = &bytes[36..];
    if body.len() != 8 * model.parameter_count() {
        return Err(bad(format!(
            "expected {} parameter bytes, found {}",
            8 * model.parameter_count(),
            body.len()
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for block in model.slices_mut() {
        for p in block {
            *p = values.next().expect("length checked");
        }
    }
    Ok(Checkpoint { model, form })
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(&encode_checkpoint(ck))
        .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
