use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::data::format_float;
use crate::error::{GpError, Result};

/// Averages over all result rows sharing a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    /// `algorithm, workers, support_size, rank, partition, partition_u`.
    pub key: Vec<String>,
    pub rows: usize,
    pub rmse: Option<f64>,
    pub mnlp: Option<f64>,
    /// Rows whose MNLP was not computed.
    pub mnlp_missing: usize,
    pub rmse_vs_fgp: Option<f64>,
    pub time_total: Option<f64>,
    pub speedup: Option<f64>,
    pub negative_variance_count: usize,
}

const KEY: [&str; 6] = ["algorithm", "workers", "support_size", "rank", "partition", "partition_u"];

#[derive(Default)]
struct Acc {
    rows: usize,
    sums: BTreeMap<&'static str, (f64, usize)>,
    negative: usize,
}

impl Acc {
    fn add(&mut self, col: &'static str, v: Option<f64>) {
        if let Some(v) = v {
            let e = self.sums.entry(col).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }

    fn mean(&self, col: &str) -> Option<f64> {
        self.sums.get(col).map(|(s, n)| s / *n as f64)
    }

    fn count(&self, col: &str) -> usize {
        self.sums.get(col).map_or(0, |(_, n)| *n)
    }
}

/// Reads results files written by the runner and averages them per
/// configuration, in key order.
pub fn summarize_results<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<SummaryRow>> {
    let mut groups: BTreeMap<Vec<String>, Acc> = BTreeMap::new();
    for path in paths {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| GpError::Format {
                path: path.to_path_buf(),
                message: format!("missing column {name:?}"),
            })
        };
        let key_cols = KEY.iter().map(|k| col(k)).collect::<Result<Vec<_>>>()?;
        let value_cols: Vec<(&'static str, usize)> = ["rmse", "mnlp", "rmse_vs_fgp", "time_total", "speedup"]
            .into_iter()
            .map(|c| col(c).map(|i| (c, i)))
            .collect::<Result<_>>()?;
        let neg = col("negative_variance_count")?;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |message: String| GpError::Format {
                path: path.to_path_buf(),
                message: format!("row {}: {message}", line + 2),
            };
            let key: Vec<String> = key_cols.iter().map(|&i| rec.get(i).unwrap_or("").to_string()).collect();
            let acc = groups.entry(key).or_default();
            acc.rows += 1;
            for &(name, i) in &value_cols {
                let raw = rec.get(i).unwrap_or("");
                let v = if raw.is_empty() {
                    None
                } else {
                    Some(raw.parse::<f64>().map_err(|e| bad(format!("{name}: {e}")))?)
                };
                acc.add(name, v);
            }
            acc.negative += rec
                .get(neg)
                .unwrap_or("0")
                .parse::<usize>()
                .map_err(|e| bad(format!("negative_variance_count: {e}")))?;
        }
    }
    Ok(groups
        .into_iter()
        .map(|(key, a)| SummaryRow {
            key,
            rows: a.rows,
            rmse: a.mean("rmse"),
            mnlp: a.mean("mnlp"),
            mnlp_missing: a.rows - a.count("mnlp"),
            rmse_vs_fgp: a.mean("rmse_vs_fgp"),
            time_total: a.mean("time_total"),
            speedup: a.mean("speedup"),
            negative_variance_count: a.negative,
        })
        .collect())
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = KEY.to_vec();
    header.extend([
        "rows",
        "rmse",
        "mnlp",
        "mnlp_missing",
        "rmse_vs_fgp",
        "time_total",
        "speedup",
        "negative_variance_count",
    ]);
    out.write_record(&header)?;
    let f = |v: Option<f64>| v.map(format_float).unwrap_or_default();
    for r in rows {
        let mut rec = r.key.clone();
        rec.extend([
            r.rows.to_string(),
            f(r.rmse),
            f(r.mnlp),
            r.mnlp_missing.to_string(),
            f(r.rmse_vs_fgp),
            f(r.time_total),
            f(r.speedup),
            r.negative_variance_count.to_string(),
        ]);
        out.write_record(rec)?;
    }
    out.flush()?;
    Ok(())
}
