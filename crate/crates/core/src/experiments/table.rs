//! Metric rows and their stable CSV / JSON serialization.

use std::str::FromStr;

use serde_json::{json, Map, Value};

use super::config::ExperimentConfig;
use crate::error::{argument, Error, Result};
use crate::report::{fmt_sig12, round_sig12};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub point: String,
    pub metric: String,
    pub value: f64,
    pub std_error: f64,
    pub count: u64,
}

impl MetricRow {
    /// Values are stored at 12 significant digits so text round trips are exact.
    pub fn new(point: &str, metric: impl Into<String>, value: f64, std_error: f64, count: u64) -> Self {
        Self {
            point: point.into(),
            metric: metric.into(),
            value: round_sig12(value),
            std_error: round_sig12(std_error),
            count,
        }
    }

    /// Binomial proportion `successes / count` with its standard error.
    pub fn rate(point: &str, metric: impl Into<String>, successes: u64, count: u64) -> Self {
        let p = if count == 0 {
            0.0
        } else {
            successes as f64 / count as f64
        };
        let se = if count == 0 {
            0.0
        } else {
            (p * (1.0 - p) / count as f64).sqrt()
        };
        Self::new(point, metric, p, se, count)
    }

    /// Sample mean with `sample std / sqrt(count)`.
    pub fn mean(point: &str, metric: impl Into<String>, samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self::new(point, metric, 0.0, 0.0, 0);
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self::new(point, metric, mean, se, n as u64)
    }

    pub fn exact(point: &str, metric: impl Into<String>, value: f64) -> Self {
        Self::new(point, metric, value, 0.0, 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub config: ExperimentConfig,
    pub rows: Vec<MetricRow>,
}

impl MetricsTable {
    pub fn row(&self, point: &str, metric: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.point == point && r.metric == metric)
    }

    /// Rows for `metric` across points, in emission order.
    pub fn metric<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a MetricRow> {
        self.rows.iter().filter(move |r| r.metric == metric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => argument(format!("unknown format {other:?}; expected csv or json")),
        }
    }
}

fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(fmt_sig12(x))
    }
}

fn parse_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => match s.as_str() {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "nan" => Some(f64::NAN),
            _ => None,
        },
        _ => None,
    }
}

/// Serialize tables with their configuration echo, master seeds and tool
/// version. Output depends only on the tables.
///
/// JSON: `{config: [..], rows: [..], provenance: {master_seed, version}}`
/// with sorted keys; row `table` indexes `config`. CSV: `#` comment lines
/// with the same provenance, then one header and one line per row.
pub fn emit_report(tables: &[MetricsTable], format: Format) -> Result<Vec<u8>> {
    if tables.is_empty() {
        return argument("no tables to report");
    }
    let seeds: Vec<u64> = tables.iter().map(|t| t.config.master_seed).collect();
    match format {
        Format::Json => {
            let rows: Vec<Value> = tables
                .iter()
                .enumerate()
                .flat_map(|(i, t)| {
                    t.rows.iter().map(move |r| {
                        json!({
                            "table": i,
                            "campaign": t.config.campaign.name(),
                            "point": r.point,
                            "metric": r.metric,
                            "value": number(r.value),
                            "std_error": number(r.std_error),
                            "count": r.count,
                        })
                    })
                })
                .collect();
            let doc = json!({
                "config": tables.iter().map(|t| t.config.to_value()).collect::<Vec<_>>(),
                "rows": rows,
                "provenance": {"master_seed": seeds, "version": VERSION},
            });
            let mut out = serde_json::to_vec_pretty(&doc).expect("report serializes");
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut out = String::new();
            for (i, t) in tables.iter().enumerate() {
                let cfg = serde_json::to_string(&t.config.to_value()).expect("config serializes");
                out.push_str(&format!("# config[{i}]: {cfg}\n"));
            }
            let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
            out.push_str(&format!("# master_seed: {}\n", seeds.join(" ")));
            out.push_str(&format!("# version: {VERSION}\n"));
            out.push_str("table,campaign,point,metric,value,std_error,count\n");
            for (i, t) in tables.iter().enumerate() {
                for r in &t.rows {
                    out.push_str(&format!(
                        "{i},{},{},{},{},{},{}\n",
                        t.config.campaign.name(),
                        csv_field(&r.point),
                        csv_field(&r.metric),
                        fmt_sig12(r.value),
                        fmt_sig12(r.std_error),
                        r.count
                    ));
                }
            }
            Ok(out.into_bytes())
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Inverse of the JSON form of [`emit_report`].
pub fn parse_report(bytes: &[u8]) -> Result<Vec<MetricsTable>> {
    let bad = |what: &str| Error::Argument(format!("malformed report: {what}"));
    let doc: Value =
        serde_json::from_slice(bytes).map_err(|e| Error::Argument(format!("report is not JSON: {e}")))?;
    let configs = doc["config"].as_array().ok_or_else(|| bad("config"))?;
    let mut tables = configs
        .iter()
        .map(|c| {
            ExperimentConfig::from_value(c)
                .map(|config| MetricsTable {
                    config,
                    rows: Vec::new(),
                })
                .map_err(|errs| Error::Argument(format!("malformed config echo: {}", errs[0])))
        })
        .collect::<Result<Vec<_>>>()?;
    for row in doc["rows"].as_array().ok_or_else(|| bad("rows"))? {
        let row: &Map<String, Value> = row.as_object().ok_or_else(|| bad("row"))?;
        let table = row
            .get("table")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("table"))? as usize;
        let text = |k: &str| row.get(k).and_then(Value::as_str).ok_or_else(|| bad(k));
        let num = |k: &str| row.get(k).and_then(parse_number).ok_or_else(|| bad(k));
        let parsed = MetricRow {
            point: text("point")?.to_string(),
            metric: text("metric")?.to_string(),
            value: num("value")?,
            std_error: num("std_error")?,
            count: row
                .get("count")
                .and_then(Value::as_u64)
                .ok_or_else(|| bad("count"))?,
        };
        tables
            .get_mut(table)
            .ok_or_else(|| bad("table index"))?
            .rows
            .push(parsed);
    }
    Ok(tables)
}
