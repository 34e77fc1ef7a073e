//! Transaction-fee datasets: parsing, histograms, CDF lookups and the
//! whale/regular split.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeeScanError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{} malformed line(s); first: {}", .0.len(), .0[0])]
    Malformed(Vec<FeeScanError>),
    #[error("bucket edges must be nonempty and strictly ascending")]
    Edges,
    #[error("whale threshold must be positive, got {0}")]
    Threshold(f64),
    #[error("no fee records")]
    Empty,
    #[error("read failed: {0}")]
    Io(String),
}

/// One transaction fee, in whatever unit the input uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeeRecord {
    pub fee: f64,
    pub block_height: Option<u64>,
}

fn parse_line(line: &str, number: usize) -> Result<FeeRecord, FeeScanError> {
    let err = |message: String| FeeScanError::Line { line: number, message };
    let (height, fee) = match line.split_once(',') {
        Some((h, f)) => {
            let h = h.trim().parse::<u64>().map_err(|_| err(format!("bad block height `{}`", h.trim())))?;
            (Some(h), f.trim())
        }
        None => (None, line),
    };
    let value: f64 = fee.parse().map_err(|_| err(format!("bad fee `{fee}`")))?;
    if !value.is_finite() || value < 0.0 {
        return Err(err(format!("fee must be a nonnegative number, got `{fee}`")));
    }
    Ok(FeeRecord { fee: value, block_height: height })
}

/// Parses `fee` or `block_height,fee` lines. Blank lines and lines starting
/// with `#` are skipped. Every malformed line is reported.
pub fn parse_fees(text: &str) -> Result<Vec<FeeRecord>, FeeScanError> {
    read_fees(text.as_bytes())
}

/// Same as [`parse_fees`], reading line by line.
pub fn read_fees<R: BufRead>(reader: R) -> Result<Vec<FeeRecord>, FeeScanError> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in reader.lines().enumerate() {
        let raw = raw.map_err(|e| FeeScanError::Io(e.to_string()))?;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_line(line, i + 1) {
            Ok(r) => records.push(r),
            Err(e) => errors.push(e),
        }
    }
    if errors.is_empty() {
        Ok(records)
    } else {
        Err(FeeScanError::Malformed(errors))
    }
}

/// Histogram over half-open buckets `[e_i, e_{i+1})`. `bucket_counts` has
/// one more entry than `bucket_edges` on each side: index 0 counts fees below
/// the first edge and the last index counts fees at or above the last edge.
/// A fee exactly on an edge falls into the upper bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeeHistogram {
    pub count: usize,
    pub bucket_edges: Vec<f64>,
    pub bucket_counts: Vec<usize>,
    #[serde(skip)]
    sorted: Vec<f64>,
}

impl FeeHistogram {
    /// Fraction of fees strictly below `threshold`.
    pub fn cdf_at(&self, threshold: f64) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.sorted.partition_point(|&f| f < threshold) as f64 / self.count as f64
    }

    /// `(edge, cdf_at(edge))` for every edge.
    pub fn cdf_points(&self) -> Vec<(f64, f64)> {
        self.bucket_edges.iter().map(|&e| (e, self.cdf_at(e))).collect()
    }
}

pub fn distribution(records: &[FeeRecord], edges: &[f64]) -> Result<FeeHistogram, FeeScanError> {
    if edges.is_empty() || edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| e.is_nan()) {
        return Err(FeeScanError::Edges);
    }
    let mut sorted: Vec<f64> = records.iter().map(|r| r.fee).collect();
    sorted.sort_by(f64::total_cmp);
    let mut bucket_counts = vec![0; edges.len() + 1];
    for &fee in &sorted {
        bucket_counts[edges.partition_point(|&e| e <= fee)] += 1;
    }
    Ok(FeeHistogram { count: sorted.len(), bucket_edges: edges.to_vec(), bucket_counts, sorted })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeeClasses {
    /// Fraction of records with a fee below the whale threshold.
    pub regular_fraction: f64,
    /// Mean fee of regular records, 0 when there are none.
    pub mean_regular_fee: f64,
    /// Mean fee of whale records, 0 when there are none.
    pub mean_whale_fee: f64,
    pub mean_fee: f64,
}

pub fn classify(records: &[FeeRecord], whale_threshold: f64) -> Result<FeeClasses, FeeScanError> {
    if !(whale_threshold > 0.0) {
        return Err(FeeScanError::Threshold(whale_threshold));
    }
    if records.is_empty() {
        return Err(FeeScanError::Empty);
    }
    let (mut n_reg, mut sum_reg, mut sum_whale) = (0usize, 0.0, 0.0);
    for r in records {
        if r.fee < whale_threshold {
            n_reg += 1;
            sum_reg += r.fee;
        } else {
            sum_whale += r.fee;
        }
    }
    let n = records.len();
    let n_whale = n - n_reg;
    Ok(FeeClasses {
        regular_fraction: n_reg as f64 / n as f64,
        mean_regular_fee: if n_reg > 0 { sum_reg / n_reg as f64 } else { 0.0 },
        mean_whale_fee: if n_whale > 0 { sum_whale / n_whale as f64 } else { 0.0 },
        mean_fee: (sum_reg + sum_whale) / n as f64,
    })
}
