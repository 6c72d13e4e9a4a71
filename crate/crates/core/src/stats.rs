//! Repeated-run aggregation and Welch's unequal-variance t-test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;
/// Repeats for main comparisons.
pub const MAIN_REPEATS: usize = 17;
/// Repeats for clearly inferior ablations.
pub const ABLATION_REPEATS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    /// `true` when the equal-means hypothesis is rejected at `alpha`.
    #[serde(with = "bool_as_int")]
    pub h: bool,
    pub p: f64,
    pub t_statistic: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub dof: f64,
    pub alpha: f64,
}

impl TTestResult {
    /// Re-derives the decision at another significance level.
    pub fn with_alpha(self, alpha: f64) -> Self {
        TTestResult {
            h: self.p < alpha,
            alpha,
            ..self
        }
    }
}

mod bool_as_int {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!("expected 0 or 1, got {other}"))),
        }
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.iter().all(|&x| x == xs[0]) {
        return (xs[0], 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sided Welch t-test of equal means.
pub fn welch_ttest(a: &[f64], b: &[f64], alpha: f64) -> Result<TTestResult> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(Error::SampleTooSmall(s.len()));
        }
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    if sa == 0.0 && sb == 0.0 {
        return Err(Error::DegenerateSample);
    }
    let t = (ma - mb) / (sa + sb).sqrt();
    let dof = (sa + sb).powi(2) / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
    let p = student_t_two_sided(t, dof);
    Ok(TTestResult {
        h: p < alpha,
        p,
        t_statistic: t,
        dof,
        alpha,
    })
}

/// `P(|T| ≥ |t|)` for Student's t with `dof` degrees of freedom.
pub fn student_t_two_sided(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = dof / (dof + t * t);
    regularized_incomplete_beta(0.5 * dof, 0.5, x).clamp(0.0, 1.0)
}

/// `I_x(a, b)` by continued fraction (modified Lentz), using the symmetry
/// `I_x(a, b) = 1 − I_{1−x}(b, a)` where that converges faster.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Metrics of one training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub seconds_per_epoch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSet {
    pub label: String,
    pub dataset: String,
    pub samples: Vec<RunMetrics>,
}

impl RunSet {
    pub fn new(label: impl Into<String>, dataset: impl Into<String>) -> Self {
        RunSet {
            label: label.into(),
            dataset: dataset.into(),
            samples: Vec::new(),
        }
    }

    pub fn column(&self, metric: Metric) -> Vec<f64> {
        self.samples.iter().map(|s| metric.of(s)).collect()
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.samples.iter().map(|s| s.seed).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Time,
    Mrr,
    Hits1,
    Hits3,
    Hits10,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Time, Metric::Mrr, Metric::Hits1, Metric::Hits3, Metric::Hits10];

    pub fn of(self, m: &RunMetrics) -> f64 {
        match self {
            Metric::Time => m.seconds_per_epoch,
            Metric::Mrr => m.mrr,
            Metric::Hits1 => m.hits1,
            Metric::Hits3 => m.hits3,
            Metric::Hits10 => m.hits10,
        }
    }

    pub fn header(self) -> &'static str {
        match self {
            Metric::Time => "Time",
            Metric::Mrr => "MRR",
            Metric::Hits1 => "H@1",
            Metric::Hits3 => "H@3",
            Metric::Hits10 => "H@10",
        }
    }

    /// Lower is better only for time.
    pub fn higher_is_better(self) -> bool {
        self != Metric::Time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptyInput("samples"));
        }
        if xs.len() == 1 {
            return Ok(MeanStd { mean: xs[0], std: 0.0 });
        }
        let (mean, var) = mean_var(xs);
        Ok(MeanStd { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub label: String,
    pub dataset: String,
    pub seeds: Vec<u64>,
    pub n: usize,
    /// Set when only one run exists and `std` is a placeholder.
    pub single_run: bool,
    pub time: MeanStd,
    pub mrr: MeanStd,
    pub hits1: MeanStd,
    pub hits3: MeanStd,
    pub hits10: MeanStd,
}

impl Aggregate {
    pub fn get(&self, metric: Metric) -> MeanStd {
        match metric {
            Metric::Time => self.time,
            Metric::Mrr => self.mrr,
            Metric::Hits1 => self.hits1,
            Metric::Hits3 => self.hits3,
            Metric::Hits10 => self.hits10,
        }
    }
}

pub fn aggregate_runs(runs: &RunSet) -> Result<Aggregate> {
    if runs.samples.is_empty() {
        return Err(Error::EmptyInput("run set"));
    }
    let agg = |m: Metric| MeanStd::of(&runs.column(m));
    Ok(Aggregate {
        label: runs.label.clone(),
        dataset: runs.dataset.clone(),
        seeds: runs.seeds(),
        n: runs.samples.len(),
        single_run: runs.samples.len() == 1,
        time: agg(Metric::Time)?,
        mrr: agg(Metric::Mrr)?,
        hits1: agg(Metric::Hits1)?,
        hits3: agg(Metric::Hits3)?,
        hits10: agg(Metric::Hits10)?,
    })
}
