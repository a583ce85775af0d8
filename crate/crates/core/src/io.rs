//! Data file formats.
//!
//! CSV outputs start with `#` comment lines describing how they were
//! produced, then a header row. Complex matrices are written one matrix row
//! per CSV row as alternating `re,im` columns. Snapshot sets also have a
//! binary form: three little-endian `u64` (M, T, seed) followed by the
//! `M x T` samples in row-major order as interleaved little-endian `f64`
//! real and imaginary parts.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::array::SnapshotSet;
use crate::distortion::{AlphaObservation, Histogram};
use crate::doa::SpectrumResult;
use crate::error::{Error, Result};
use crate::experiment::{Method, RbRecoveryRow, RmseRecord};
use crate::linalg::CMatrix;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Comment lines identifying the producing version and the full settings.
pub fn provenance<T: Serialize + ?Sized>(settings: &T) -> Result<Vec<String>> {
    Ok(vec![format!("raindoa {VERSION}"), format!("spec: {}", serde_json::to_string(settings)?)])
}

/// JSON envelope carrying the same provenance as the CSV comment lines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document<T> {
    pub version: String,
    pub spec: serde_json::Value,
    pub data: T,
}

impl<T> Document<T> {
    pub fn new<S: Serialize + ?Sized>(settings: &S, data: T) -> Result<Self> {
        Ok(Document { version: VERSION.to_string(), spec: serde_json::to_value(settings)?, data })
    }
}

fn write_comments<W: Write>(w: &mut W, header: &[String]) -> Result<()> {
    for line in header {
        for part in line.lines() {
            writeln!(w, "# {part}")?;
        }
    }
    Ok(())
}

fn csv_writer<W: Write>(mut w: W, header: &[String]) -> Result<csv::Writer<W>> {
    write_comments(&mut w, header)?;
    Ok(csv::Writer::from_writer(w))
}

pub fn write_covariance_csv<W: Write>(w: W, m: &CMatrix, header: &[String]) -> Result<()> {
    let mut out = csv_writer(w, header)?;
    let names: Vec<String> = (0..m.ncols()).flat_map(|j| [format!("c{j}_re"), format!("c{j}_im")]).collect();
    out.write_record(&names)?;
    for i in 0..m.nrows() {
        out.write_record((0..m.ncols()).flat_map(|j| [m[(i, j)].re.to_string(), m[(i, j)].im.to_string()]))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_covariance_csv<R: Read>(r: R) -> Result<CMatrix> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).has_headers(true).from_reader(r);
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() % 2 != 0 {
            return Err(Error::Format(format!("row {} has an odd number of columns", rows.len())));
        }
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Format(format!("bad number '{s}': {e}"))))
            .collect::<Result<_>>()?;
        rows.push(vals.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect());
    }
    let m = rows.len();
    if m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::Format(format!("expected a square matrix, got {m} rows")));
    }
    Ok(CMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

pub fn write_real_matrix_csv<W: Write>(w: W, m: &DMatrix<f64>, header: &[String]) -> Result<()> {
    let mut out = csv_writer(w, header)?;
    out.write_record((0..m.ncols()).map(|j| format!("c{j}")))?;
    for i in 0..m.nrows() {
        out.write_record((0..m.ncols()).map(|j| m[(i, j)].to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_snapshots_bin<W: Write>(mut w: W, s: &SnapshotSet) -> Result<()> {
    for v in [s.n_elements() as u64, s.n_snapshots() as u64, s.seed] {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(16 * s.data.len());
    for i in 0..s.n_elements() {
        for t in 0..s.n_snapshots() {
            let z = s.data[(i, t)];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshots_bin<R: Read>(mut r: R) -> Result<SnapshotSet> {
    let mut word = [0u8; 8];
    let mut next_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut word).map_err(|e| Error::Format(format!("truncated header: {e}")))?;
        Ok(u64::from_le_bytes(word))
    };
    let m = next_u64(&mut r)? as usize;
    let t = next_u64(&mut r)? as usize;
    let seed = next_u64(&mut r)?;
    let len = m.checked_mul(t).and_then(|n| n.checked_mul(16)).ok_or_else(|| Error::Format("header sizes overflow".into()))?;
    let mut bytes = Vec::with_capacity(len);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != len {
        return Err(Error::Format(format!("expected {len} data bytes for {m}x{t}, found {}", bytes.len())));
    }
    let f = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().expect("8 bytes"));
    let data = CMatrix::from_fn(m, t, |i, j| {
        let k = 2 * (i * t + j);
        Complex64::new(f(k), f(k + 1))
    });
    SnapshotSet::new(data, seed)
}

pub fn write_snapshots_csv<W: Write>(w: W, s: &SnapshotSet, header: &[String]) -> Result<()> {
    let mut out = csv_writer(w, header)?;
    out.write_record(["snapshot", "element", "re", "im"])?;
    for t in 0..s.n_snapshots() {
        for i in 0..s.n_elements() {
            let z = s.data[(i, t)];
            out.write_record([t.to_string(), i.to_string(), z.re.to_string(), z.im.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(w: W, h: &Histogram, header: &[String]) -> Result<()> {
    let mut out = csv_writer(w, header)?;
    out.write_record(["bin_center", "density"])?;
    for (c, d) in h.centers().iter().zip(&h.density) {
        out.write_record([c.to_string(), d.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_spectrum_csv<W: Write>(w: W, s: &SpectrumResult, header: &[String]) -> Result<()> {
    let mut out = csv_writer(w, header)?;
    out.write_record(["angle_deg", "pseudo_spectrum_db"])?;
    for (a, v) in s.grid_deg.iter().zip(&s.pseudo_spectrum_db) {
        out.write_record([a.to_string(), v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_rmse_csv<W: Write>(w: W, records: &[RmseRecord], header: &[String]) -> Result<()> {
    let mut out = csv_writer(w, header)?;
    out.write_record(["snr_db", "method", "rmse_deg", "invalid_rate", "n_trials", "n_valid", "n_failed", "seed"])?;
    for r in records {
        out.write_record([
            r.snr_db.to_string(),
            r.method.to_string(),
            r.rmse_deg.map_or_else(String::new, |v| v.to_string()),
            r.invalid_rate.to_string(),
            r.n_trials.to_string(),
            r.n_valid.to_string(),
            r.n_failed.to_string(),
            r.seed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_rb_recovery_csv<W: Write>(w: W, rows: &[RbRecoveryRow], header: &[String]) -> Result<()> {
    let mut out = csv_writer(w, header)?;
    out.write_record(["lag", "true_value", "estimated_value", "stderr"])?;
    for r in rows {
        out.write_record([r.lag.to_string(), r.true_value.to_string(), r.estimated_value.to_string(), r.stderr.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `range_m,d_over_lambda,alpha` rows (header required, `#` comments allowed).
pub fn read_observations_csv<R: Read>(r: R) -> Result<Vec<AlphaObservation>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
    let obs: Vec<AlphaObservation> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    if obs.is_empty() {
        return Err(Error::Format("no observations".into()));
    }
    Ok(obs)
}

/// One direction estimate as exported to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    /// `null` when the estimate is invalid and not clamped.
    pub theta_hat_deg: Option<f64>,
    pub valid: bool,
    pub method: Method,
}
