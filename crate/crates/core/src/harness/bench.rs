use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::Model;
use crate::noise::Rational;

use super::{run_certify, CertifyConfig, Dataset, Method};
use crate::certifier::RandomizedParams;

pub const BENCH_SCHEMA: &str = "dssn-bench-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub params: RandomizedParams,
    pub repetitions: usize,
    pub seed: u64,
    /// Certify at most this many points per repetition.
    pub max_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: String,
    /// Median over repetitions of (repetition wall time / images).
    pub median_seconds_per_image: f64,
    pub seconds_per_image: Vec<f64>,
    pub evals_per_image: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub schema: String,
    pub images: usize,
    pub repetitions: usize,
    pub q: u32,
    #[serde(rename = "L")]
    pub period: u32,
    pub n0: u64,
    pub n: u64,
    pub methods: Vec<MethodReport>,
    /// `(n0 + n) / L` as a reduced fraction `"num/den"`.
    pub eval_ratio: String,
    pub eval_ratio_value: f64,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m.as_str())
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times each method on the same points, single-threaded. Fails if any
/// certificate spent a different number of base evaluations than the method
/// prescribes (`L` for dssn, `n0 + n` otherwise).
pub fn run_bench(data: &Dataset, model: &Model, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.repetitions == 0 || cfg.methods.is_empty() {
        return Err(Error::Argument("need at least one method and one repetition".into()));
    }
    let mut subset = data.clone();
    if let Some(m) = cfg.max_points {
        if m == 0 {
            return Err(Error::Argument("max_points must be positive".into()));
        }
        subset.points.truncate(m);
        subset.labels.truncate(m);
    }
    let images = subset.len();
    let period = model.spec.period();
    let mc_evals = cfg.params.n0 + cfg.params.n;

    let mut methods = Vec::new();
    for &method in &cfg.methods {
        let expected = match method {
            Method::Dssn => period as u64,
            _ => mc_evals,
        };
        let mut certify = CertifyConfig::new(method);
        certify.params = cfg.params;
        certify.seed = cfg.seed;
        certify.threads = 1;
        let mut per_image = Vec::with_capacity(cfg.repetitions);
        for _ in 0..cfg.repetitions {
            let start = std::time::Instant::now();
            let rows = run_certify(&subset, model, &certify)?;
            per_image.push(start.elapsed().as_secs_f64() / images as f64);
            if let Some(r) = rows.iter().find(|r| r.cert.eval_count != expected) {
                return Err(Error::Argument(format!(
                    "{} spent {} evaluations on point {}, expected {expected}",
                    method.as_str(),
                    r.cert.eval_count,
                    r.index
                )));
            }
        }
        methods.push(MethodReport {
            method: method.as_str().to_string(),
            median_seconds_per_image: median(&per_image),
            seconds_per_image: per_image,
            evals_per_image: expected,
        });
    }
    let ratio = Rational::new(mc_evals as i64, period as i64);
    Ok(BenchReport {
        schema: BENCH_SCHEMA.to_string(),
        images,
        repetitions: cfg.repetitions,
        q: model.q(),
        period,
        n0: cfg.params.n0,
        n: cfg.params.n,
        methods,
        eval_ratio: format!("{}/{}", ratio.numer(), ratio.denom()),
        eval_ratio_value: mc_evals as f64 / period as f64,
    })
}
