//! On-disk formats.
//!
//! Every binary file is a small container:
//!
//! ```text
//! STP1 <type> <header-bytes>\n     magic, format version, file type, header length
//! <header>                          TOML text, exactly <header-bytes> bytes
//! <payload>                         little-endian f64 values
//! ```
//!
//! `<type>` is `ensemble`, `series` or `model`. The header records the payload
//! size in bytes and a CRC-32 (IEEE) of the payload as `crc32:<8 hex digits>`.
//!
//! * ensemble payload: `k` episodes back to back, each snapshot-major.
//! * series payload: `len` snapshots of `p` values.
//! * model payload, in order: eigenvalues (`r`), STP modes column by column
//!   (`(n+m)p * r`), mean values (`0`, `p` or `(n+m)p`), weights (`p`), total
//!   energy (`1`). The hindcast modes are the first `np` rows of the STP modes
//!   and are not stored separately.
//!
//! Report tables are plain CSV with `#` comment lines.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use stp_core::linalg::DenseMatrix;
use stp_core::metrics::{ErrorReport, SpectrumReport};
use stp_core::preprocess::SnapshotSeries;
use stp_core::stp::{Prediction, StpModel};
use stp_core::types::{DataKind, Ensemble, HorizonSpec, MeanField, MeanKind, WeightVector};

pub const MAGIC: &str = "STP";
pub const VERSION: &str = "1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an STP file")]
    BadMagic,
    #[error("unsupported format version {found:?} (expected {VERSION:?})")]
    Version { found: String },
    #[error("expected a {expected} file, found {found}")]
    WrongType { expected: &'static str, found: String },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("payload size mismatch: header implies {expected} bytes, found {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("checksum mismatch: header {expected}, payload {actual}")]
    Checksum { expected: String, actual: String },
    #[error("invalid CSV at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Core(#[from] stp_core::Error),
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

fn checksum(payload: &[u8]) -> String {
    format!("crc32:{:08x}", crc32fast::hash(payload))
}

fn encode(values: &[&[f64]]) -> Vec<u8> {
    let total: usize = values.iter().map(|v| v.len()).sum();
    let mut out = Vec::with_capacity(total * 8);
    for block in values {
        for x in *block {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

fn decode(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect()
}

fn write_container<H: Serialize>(path: &Path, kind: &str, header: &H, payload: &[u8]) -> Result<()> {
    let text = toml::to_string(header).map_err(|e| FormatError::Header(e.to_string()))?;
    let mut file = BufWriter::new(fs::File::create(path)?);
    writeln!(file, "{MAGIC}{VERSION} {kind} {}", text.len())?;
    file.write_all(text.as_bytes())?;
    file.write_all(payload)?;
    file.flush()?;
    Ok(())
}

/// Splits a container into its type, header text and payload bytes.
fn read_container(bytes: &[u8]) -> Result<(String, &str, &[u8])> {
    let eol = bytes.iter().take(128).position(|&b| b == b'\n').ok_or(FormatError::BadMagic)?;
    let first = std::str::from_utf8(&bytes[..eol]).map_err(|_| FormatError::BadMagic)?;
    let mut parts = first.split(' ');
    let magic = parts.next().unwrap_or_default();
    let version = magic.strip_prefix(MAGIC).ok_or(FormatError::BadMagic)?;
    if version != VERSION {
        return Err(FormatError::Version {
            found: version.to_string(),
        });
    }
    let kind = parts.next().ok_or_else(|| FormatError::Header("missing file type".into()))?;
    let header_len: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| FormatError::Header("missing header length".into()))?;
    let start = eol + 1;
    if bytes.len() < start + header_len {
        return Err(FormatError::Truncated {
            expected: start + header_len,
            actual: bytes.len(),
        });
    }
    let header = std::str::from_utf8(&bytes[start..start + header_len])
        .map_err(|_| FormatError::Header("header is not UTF-8".into()))?;
    Ok((kind.to_string(), header, &bytes[start + header_len..]))
}

fn check_payload(payload: &[u8], expected_bytes: usize, recorded: &str) -> Result<()> {
    if payload.len() < expected_bytes {
        return Err(FormatError::Truncated {
            expected: expected_bytes,
            actual: payload.len(),
        });
    }
    if payload.len() > expected_bytes {
        return Err(FormatError::SizeMismatch {
            expected: expected_bytes,
            actual: payload.len(),
        });
    }
    let actual = checksum(payload);
    if actual != recorded {
        return Err(FormatError::Checksum {
            expected: recorded.to_string(),
            actual,
        });
    }
    Ok(())
}

fn parse_header<H: serde::de::DeserializeOwned>(text: &str) -> Result<H> {
    toml::from_str(text).map_err(|e| FormatError::Header(e.message().to_string()))
}

fn expect_kind(found: String, expected: &'static str) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(FormatError::WrongType { expected, found })
    }
}

fn parse_kind(s: &str) -> Result<DataKind> {
    match s {
        "transient" => Ok(DataKind::Transient),
        "stationary" => Ok(DataKind::Stationary),
        other => Err(FormatError::Header(format!("unknown data kind {other:?}"))),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EnsembleHeader {
    k: usize,
    n: usize,
    m: usize,
    p: usize,
    kind: String,
    centered: bool,
    payload_bytes: usize,
    checksum: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time_indices: Option<Vec<f64>>,
}

/// Writes an ensemble; `provenance` is free text (e.g. the generator call).
pub fn save_ensemble(ensemble: &Ensemble, path: &Path, provenance: Option<&str>) -> Result<()> {
    let h = ensemble.horizon();
    let payload = encode(&[ensemble.data()]);
    let header = EnsembleHeader {
        k: ensemble.k(),
        n: h.n(),
        m: h.m(),
        p: h.p(),
        kind: ensemble.kind().as_str().to_string(),
        centered: ensemble.is_centered(),
        payload_bytes: payload.len(),
        checksum: checksum(&payload),
        provenance: provenance.map(str::to_string),
        time_indices: ensemble.time_indices().map(<[f64]>::to_vec),
    };
    write_container(path, "ensemble", &header, &payload)
}

pub fn load_ensemble(path: &Path) -> Result<Ensemble> {
    let bytes = fs::read(path)?;
    let (kind, text, payload) = read_container(&bytes)?;
    expect_kind(kind, "ensemble")?;
    let header: EnsembleHeader = parse_header(text)?;
    let horizon = HorizonSpec::new(header.n, header.m, header.p)?;
    let expected = header.k * horizon.episode_len() * 8;
    check_payload(payload, expected, &header.checksum)?;
    Ok(Ensemble::from_flat(
        decode(payload),
        horizon,
        parse_kind(&header.kind)?,
        header.centered,
        header.time_indices,
    )?)
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesHeader {
    len: usize,
    p: usize,
    centered: bool,
    payload_bytes: usize,
    checksum: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
}

pub fn save_series(series: &SnapshotSeries, path: &Path, provenance: Option<&str>) -> Result<()> {
    let payload = encode(&[series.data()]);
    let header = SeriesHeader {
        len: series.len(),
        p: series.p(),
        centered: series.is_centered(),
        payload_bytes: payload.len(),
        checksum: checksum(&payload),
        provenance: provenance.map(str::to_string),
    };
    write_container(path, "series", &header, &payload)
}

pub fn load_series(path: &Path) -> Result<SnapshotSeries> {
    let bytes = fs::read(path)?;
    let (kind, text, payload) = read_container(&bytes)?;
    expect_kind(kind, "series")?;
    let header: SeriesHeader = parse_header(text)?;
    check_payload(payload, header.len * header.p * 8, &header.checksum)?;
    Ok(SnapshotSeries::with_centering(header.p, decode(payload), header.centered)?)
}

/// Contents of a data file whose type is not known in advance.
#[derive(Debug, Clone)]
pub enum DataFile {
    Ensemble(Ensemble),
    Series(SnapshotSeries),
}

/// Loads an ensemble or series container, or a CSV series (one snapshot per row).
pub fn load_data(path: &Path) -> Result<DataFile> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return Ok(DataFile::Series(read_series_csv(path)?));
    }
    let bytes = fs::read(path)?;
    let (kind, _, _) = read_container(&bytes)?;
    drop(bytes);
    match kind.as_str() {
        "ensemble" => Ok(DataFile::Ensemble(load_ensemble(path)?)),
        "series" => Ok(DataFile::Series(load_series(path)?)),
        _ => Err(FormatError::WrongType {
            expected: "ensemble or series",
            found: kind,
        }),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    n: usize,
    m: usize,
    p: usize,
    rank: usize,
    requested_rank: usize,
    k_train: usize,
    mean_kind: String,
    mean_len: usize,
    weights_uniform: bool,
    weight_min: f64,
    weight_max: f64,
    payload_bytes: usize,
    checksum: String,
}

pub fn save_model(model: &StpModel, path: &Path) -> Result<()> {
    let h = model.horizon();
    let (mean_kind, mean_values): (&str, &[f64]) = match model.mean() {
        None => ("none", &[]),
        Some(mean) => (mean.kind().as_str(), mean.values()),
    };
    let w = model.weights().as_slice();
    let energy = [model.total_energy()];
    let payload = encode(&[model.eigenvalues(), model.stp_modes().data(), mean_values, w, &energy]);
    let header = ModelHeader {
        n: h.n(),
        m: h.m(),
        p: h.p(),
        rank: model.rank(),
        requested_rank: model.requested_rank(),
        k_train: model.k_train(),
        mean_kind: mean_kind.to_string(),
        mean_len: mean_values.len(),
        weights_uniform: model.weights().is_unit(),
        weight_min: w.iter().cloned().fold(f64::INFINITY, f64::min),
        weight_max: w.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        payload_bytes: payload.len(),
        checksum: checksum(&payload),
    };
    write_container(path, "model", &header, &payload)
}

/// Loads a model and re-checks every model invariant before returning it.
pub fn load_model(path: &Path) -> Result<StpModel> {
    let bytes = fs::read(path)?;
    let (kind, text, payload) = read_container(&bytes)?;
    expect_kind(kind, "model")?;
    let header: ModelHeader = parse_header(text)?;
    let horizon = HorizonSpec::new(header.n, header.m, header.p)?;
    let r = header.rank;
    let len = horizon.episode_len();
    let sizes = [r, len * r, header.mean_len, horizon.p(), 1];
    let expected: usize = sizes.iter().sum::<usize>() * 8;
    check_payload(payload, expected, &header.checksum)?;
    let values = decode(payload);
    let mut blocks = Vec::with_capacity(sizes.len());
    let mut offset = 0;
    for size in sizes {
        blocks.push(&values[offset..offset + size]);
        offset += size;
    }
    let mean = match header.mean_kind.as_str() {
        "none" => None,
        "ensemble" => Some(MeanField::ensemble(blocks[2].to_vec(), horizon)?),
        "temporal" => Some(MeanField::temporal(blocks[2].to_vec())?),
        other => return Err(FormatError::Header(format!("unknown mean kind {other:?}"))),
    };
    if mean.is_none() && header.mean_len != 0 {
        return Err(FormatError::Header("mean values present without a mean kind".into()));
    }
    let modes = DenseMatrix::from_col_major(len, r, blocks[1].to_vec())?;
    let weights = WeightVector::new(blocks[3].to_vec())?;
    Ok(StpModel::from_parts(
        horizon,
        header.requested_rank,
        blocks[0].to_vec(),
        modes,
        weights,
        mean,
        header.k_train,
        blocks[4][0],
    )?)
}

/// Shortest text that is unambiguous to 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Error table: one row per step with `index, mean, std` and one column per
/// episode. The first line marks the forecast start; without a spread (one
/// episode) the std column is dropped and a warning line added.
pub fn error_csv(report: &ErrorReport) -> String {
    let mut out = String::new();
    writeln!(out, "# forecast_start={}", report.forecast_start).unwrap();
    if report.std.is_none() {
        writeln!(out, "# warning: std omitted, it needs at least 2 episodes").unwrap();
    }
    out.push_str("index,mean");
    if report.std.is_some() {
        out.push_str(",std");
    }
    for j in 0..report.episodes() {
        write!(out, ",episode_{j}").unwrap();
    }
    out.push('\n');
    for i in 0..report.steps() {
        write!(out, "{i},{}", fmt_f64(report.mean[i])).unwrap();
        if let Some(std) = &report.std {
            write!(out, ",{}", fmt_f64(std[i])).unwrap();
        }
        for row in &report.per_episode {
            write!(out, ",{}", fmt_f64(row[i])).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Spectrum table: `index` (1-based mode number), `eigenvalue`, `cumulative_fraction`.
pub fn spectrum_csv(report: &SpectrumReport) -> String {
    let mut out = String::from("index,eigenvalue,cumulative_fraction\n");
    for (i, (l, c)) in report.eigenvalues.iter().zip(&report.cumulative_fraction).enumerate() {
        writeln!(out, "{},{},{}", i + 1, fmt_f64(*l), fmt_f64(*c)).unwrap();
    }
    out
}

pub fn export_error_csv(report: &ErrorReport, path: &Path) -> Result<()> {
    Ok(fs::write(path, error_csv(report))?)
}

pub fn export_spectrum_csv(report: &SpectrumReport, path: &Path) -> Result<()> {
    Ok(fs::write(path, spectrum_csv(report))?)
}

/// Coefficients table: one row per trajectory, `episode, a_1 .. a_r`.
pub fn export_coefficients_csv(predictions: &[Prediction], path: &Path) -> Result<()> {
    let r = predictions.first().map_or(0, |p| p.coefficients.len());
    let mut out = String::from("episode");
    for l in 1..=r {
        write!(out, ",a_{l}").unwrap();
    }
    out.push('\n');
    for (j, p) in predictions.iter().enumerate() {
        write!(out, "{j}").unwrap();
        for a in &p.coefficients {
            write!(out, ",{}", fmt_f64(*a)).unwrap();
        }
        out.push('\n');
    }
    Ok(fs::write(path, out)?)
}

/// Reads a series from CSV, one snapshot per row. Blank lines and lines
/// starting with `#` are skipped, as is a first row that does not parse as
/// numbers (a column header).
pub fn read_series_csv(path: &Path) -> Result<SnapshotSeries> {
    let text = fs::read_to_string(path)?;
    let mut p = None;
    let mut data = Vec::new();
    let mut seen_row = false;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if !seen_row => {
                seen_row = true;
                continue;
            }
            Err(e) => {
                return Err(FormatError::Csv {
                    line: idx + 1,
                    message: e.to_string(),
                })
            }
        };
        seen_row = true;
        match p {
            None => p = Some(row.len()),
            Some(p) if p != row.len() => {
                return Err(FormatError::Csv {
                    line: idx + 1,
                    message: format!("expected {p} values, found {}", row.len()),
                })
            }
            _ => {}
        }
        data.extend(row);
    }
    let p = p.ok_or(FormatError::Csv {
        line: 0,
        message: "no data rows".into(),
    })?;
    Ok(SnapshotSeries::new(p, data)?)
}

/// Reads a weight vector: one value per line or comma separated.
pub fn read_weights(path: &Path) -> Result<WeightVector> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for field in line.split(',') {
            values.push(field.trim().parse::<f64>().map_err(|e| FormatError::Csv {
                line: idx + 1,
                message: e.to_string(),
            })?);
        }
    }
    Ok(WeightVector::new(values)?)
}

/// Mean kind recorded for a model, for display.
pub fn mean_kind_name(kind: Option<MeanKind>) -> &'static str {
    kind.map_or("none", |k| k.as_str())
}
