use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pipeline::RunReport;
use crate::error::Result;
use crate::unlearn::Method;

/// Mean and sample standard deviation (`n - 1` denominator; 0 for a single
/// value).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Stat { mean, std })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateEntry {
    pub method: Method,
    pub forget_ratio: f64,
    /// Number of successful runs contributing.
    pub runs: usize,
    /// Metrics with at least one value; see [`EvalReport::metrics`](crate::eval::EvalReport::metrics).
    pub metrics: BTreeMap<String, Stat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub run: usize,
    pub error: String,
}

/// Contents of `aggregate.json`: one entry per (method, ratio), methods in
/// configuration order, ratios within each method in configuration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub methods: Vec<Method>,
    pub forget_ratios: Vec<f64>,
    pub runs: usize,
    pub failed_runs: Vec<FailedRun>,
    pub entries: Vec<AggregateEntry>,
}

impl AggregateReport {
    pub fn from_runs(methods: &[Method], forget_ratios: &[f64], runs: &[RunReport]) -> Self {
        let mut entries = Vec::new();
        for &method in methods {
            for &ratio in forget_ratios {
                let cell: Vec<_> = runs
                    .iter()
                    .flat_map(|r| &r.reports)
                    .filter(|e| e.method == method.id() && e.forget_ratio == ratio)
                    .collect();
                let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
                for report in &cell {
                    for (name, v) in report.metrics() {
                        if let Some(v) = v {
                            values.entry(name).or_default().push(v);
                        }
                    }
                }
                entries.push(AggregateEntry {
                    method,
                    forget_ratio: ratio,
                    runs: cell.len(),
                    metrics: values
                        .into_iter()
                        .filter_map(|(k, v)| Stat::of(&v).map(|s| (k.to_string(), s)))
                        .collect(),
                });
            }
        }
        AggregateReport {
            methods: methods.to_vec(),
            forget_ratios: forget_ratios.to_vec(),
            runs: runs.len(),
            failed_runs: runs
                .iter()
                .filter_map(|r| {
                    r.error.as_ref().map(|e| FailedRun {
                        run: r.run,
                        error: e.clone(),
                    })
                })
                .collect(),
            entries,
        }
    }

    pub fn entry(&self, method: Method, ratio: f64) -> Option<&AggregateEntry> {
        self.entries
            .iter()
            .find(|e| e.method == method && e.forget_ratio == ratio)
    }

    pub fn stat(&self, method: Method, ratio: f64, metric: &str) -> Option<Stat> {
        self.entry(method, ratio)?.metrics.get(metric).copied()
    }
}

/// Table file stem and the metric it shows.
pub const TABLES: [(&str, &str); 4] = [
    ("link_auc", "test_auc"),
    ("mi_auc", "mi_auc_unlearned"),
    ("activation_distance", "activation_distance"),
    ("delta_p", "delta_p_mean"),
];

/// Writes `<table>.csv` (rows = methods, columns = ratios, cells
/// `mean±std` to four decimals, `NA` when missing) and `<table>_raw.csv`
/// (`method,forget_ratio,runs,mean,std` at full precision).
pub fn emit_tables(agg: &AggregateReport, dir: &Path) -> Result<()> {
    for (stem, metric) in TABLES {
        let mut table = BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?);
        let header: Vec<String> = agg.forget_ratios.iter().map(f64::to_string).collect();
        writeln!(table, "method,{}", header.join(","))?;
        let mut raw = BufWriter::new(File::create(dir.join(format!("{stem}_raw.csv")))?);
        writeln!(raw, "method,forget_ratio,runs,mean,std")?;
        for &method in &agg.methods {
            let mut cells = Vec::with_capacity(agg.forget_ratios.len());
            for &ratio in &agg.forget_ratios {
                match agg.stat(method, ratio, metric) {
                    Some(s) => {
                        cells.push(format!("{:.4}±{:.4}", s.mean, s.std));
                        let runs = agg.entry(method, ratio).map_or(0, |e| e.runs);
                        writeln!(raw, "{method},{ratio},{runs},{},{}", s.mean, s.std)?;
                    }
                    None => cells.push("NA".to_string()),
                }
            }
            writeln!(table, "{method},{}", cells.join(","))?;
        }
        table.flush()?;
        raw.flush()?;
    }
    Ok(())
}
