//! Result tables: a versioned JSON record and a plain-text rendering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{aggregate_runs, welch_ttest, Aggregate, MeanStd, Metric, RunSet, TTestResult};

pub const REPORT_VERSION: u32 = 1;
/// Metrics covered by the pairwise test matrices.
pub const TESTED_METRICS: [Metric; 2] = [Metric::Time, Metric::Mrr];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestMatrix {
    pub metric: Metric,
    pub labels: Vec<String>,
    /// `cells[i][j]` compares row `i` with column `j`; `None` when not run.
    pub cells: Vec<Vec<Option<TTestResult>>>,
}

impl TestMatrix {
    pub fn empty(metric: Metric, labels: Vec<String>) -> Self {
        let n = labels.len();
        TestMatrix {
            metric,
            labels,
            cells: vec![vec![None; n]; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub dataset: String,
    pub alpha: f64,
    /// Free-form provenance, e.g. the config document and seed.
    pub context: serde_json::Value,
    pub rows: Vec<Aggregate>,
    pub tests: Vec<TestMatrix>,
}

/// Welch tests for each `(i, j)` pair of run sets on Time and MRR.
/// Pairs whose samples are too small or degenerate are left empty.
pub fn pairwise_tests(runsets: &[RunSet], pairs: &[(usize, usize)], alpha: f64) -> Result<Vec<TestMatrix>> {
    let labels: Vec<String> = runsets.iter().map(|r| r.label.clone()).collect();
    let mut out = Vec::new();
    for metric in TESTED_METRICS {
        let mut m = TestMatrix::empty(metric, labels.clone());
        for &(i, j) in pairs {
            if i >= runsets.len() || j >= runsets.len() {
                return Err(Error::Report(format!("pair ({i}, {j}) out of range")));
            }
            match welch_ttest(&runsets[i].column(metric), &runsets[j].column(metric), alpha) {
                Ok(r) => m.cells[i][j] = Some(r),
                Err(Error::DegenerateSample | Error::SampleTooSmall(_)) => {}
                Err(e) => return Err(e),
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// Every pair `(i, j)` with `i < j`.
pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

pub fn emit_report(
    runsets: &[RunSet],
    tests: Vec<TestMatrix>,
    dataset: &str,
    alpha: f64,
    context: serde_json::Value,
) -> Result<Report> {
    let rows = runsets.iter().map(aggregate_runs).collect::<Result<Vec<_>>>()?;
    Ok(Report {
        version: REPORT_VERSION,
        dataset: dataset.to_string(),
        alpha,
        context,
        rows,
        tests,
    })
}

/// `0.366±4e-4`.
pub fn format_score(m: MeanStd) -> String {
    format!("{:.3}±{}", m.mean, format_sci(m.std))
}

/// `42±8`, with decimals for sub-10-second epochs.
pub fn format_time(m: MeanStd) -> String {
    let decimals = if m.mean >= 10.0 {
        0
    } else if m.mean >= 1.0 {
        1
    } else {
        3
    };
    format!("{:.*}±{:.*}", decimals, m.mean, decimals, m.std)
}

/// One significant digit with a bare exponent: `4e-4`, `0e0`.
pub fn format_sci(x: f64) -> String {
    format!("{x:.0e}")
}

pub fn format_cell(t: &TTestResult) -> String {
    format!("({}, {})", u8::from(t.h), format_sci(t.p))
}

impl Report {
    fn best(&self, metric: Metric) -> Option<f64> {
        let vals = self.rows.iter().map(|r| r.get(metric).mean).filter(|v| v.is_finite());
        if metric.higher_is_better() {
            vals.reduce(f64::max)
        } else {
            vals.reduce(f64::min)
        }
    }

    /// Plain-text table; best means are wrapped in `**`.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "# conjkge report v{}  dataset={}  alpha={}\n",
            self.version, self.dataset, self.alpha
        );
        let header: Vec<&str> = std::iter::once("Model")
            .chain(Metric::ALL.iter().map(|m| m.header()))
            .chain(std::iter::once("n"))
            .collect();
        let mut table = vec![header.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        for row in &self.rows {
            let mut cells = vec![row.label.clone()];
            for metric in Metric::ALL {
                let m = row.get(metric);
                let mut s = match metric {
                    Metric::Time => format_time(m),
                    Metric::Mrr => format_score(m),
                    _ => format!("{:.3}", m.mean),
                };
                if self.best(metric) == Some(m.mean) {
                    s = format!("**{s}**");
                }
                cells.push(s);
            }
            cells.push(if row.single_run {
                format!("{}*", row.n)
            } else {
                row.n.to_string()
            });
            table.push(cells);
        }
        out.push_str(&render_grid(&table));
        if self.rows.iter().any(|r| r.single_run) {
            out.push_str("* single run: std reported as 0\n");
        }
        for m in &self.tests {
            out.push_str(&format!("\nt-test (h, p) of {}\n", m.metric.header()));
            let mut table = vec![std::iter::once(String::new())
                .chain(m.labels.iter().cloned())
                .collect::<Vec<_>>()];
            for (i, label) in m.labels.iter().enumerate() {
                let mut cells = vec![label.clone()];
                for j in 0..m.labels.len() {
                    cells.push(m.cells[i][j].as_ref().map_or_else(|| "-".to_string(), format_cell));
                }
                table.push(cells);
            }
            out.push_str(&render_grid(&table));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn render_grid(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        out.push_str(line.join(" | ").trim_end());
        out.push('\n');
    }
    out
}
