use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::certifier::{certify_dssn, certify_randomized, Certificate, GapRule, Radius, RandomizedParams};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::noise::{NoiseKind, NoiseModel, QuantizedLambda};

use super::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exact derandomized certificate from the model's stored split spec.
    Dssn,
    /// Randomized certificate under independent splitting noise.
    SsnMc,
    /// Randomized certificate under uniform additive noise.
    UniformMc,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dssn => "dssn",
            Method::SsnMc => "ssn-mc",
            Method::UniformMc => "uniform-mc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dssn" => Ok(Method::Dssn),
            "ssn-mc" => Ok(Method::SsnMc),
            "uniform-mc" => Ok(Method::UniformMc),
            other => Err(Error::Argument(format!(
                "unknown method '{other}' (expected dssn, ssn-mc or uniform-mc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyConfig {
    pub method: Method,
    pub params: RandomizedParams,
    pub gap_rule: GapRule,
    /// Noise scale for the Monte-Carlo methods; defaults to the model's.
    pub lambda: Option<QuantizedLambda>,
    /// Root seed of the per-point Monte-Carlo streams.
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub record_time: bool,
}

impl CertifyConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            params: RandomizedParams::default(),
            gap_rule: GapRule::default(),
            lambda: None,
            seed: 0,
            threads: 0,
            record_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertRow {
    pub index: usize,
    pub label: usize,
    pub cert: Certificate,
    pub wall_seconds: Option<f64>,
}

fn mc_noise(model: &Model, method: Method, lambda: Option<QuantizedLambda>) -> Result<NoiseModel> {
    let (q, period) = match lambda {
        Some(l) if l.q != model.q() => {
            return Err(Error::Argument(format!(
                "noise scale quantized for q={} but the model has q={}",
                l.q,
                model.q()
            )))
        }
        Some(l) => (l.q, l.period),
        None => (model.q(), model.spec.period()),
    };
    Ok(match method {
        Method::SsnMc => NoiseModel::IndependentSsn { q, period },
        Method::UniformMc => NoiseModel::UniformAdditive {
            lambda: QuantizedLambda { period, q }.lambda(),
        },
        Method::Dssn => unreachable!("dssn does not sample"),
    })
}

/// Checks that `method` can be used with `model` and `data`.
fn check_compatible(data: &Dataset, model: &Model, cfg: &CertifyConfig) -> Result<()> {
    if data.d != model.dim() || data.q != model.q() {
        return Err(Error::Argument(format!(
            "dataset has (d={}, q={}) but the model expects (d={}, q={})",
            data.d,
            data.q,
            model.dim(),
            model.q()
        )));
    }
    if data.classes != model.classes {
        return Err(Error::Argument("dataset and model class sets differ".into()));
    }
    if cfg.method == Method::Dssn {
        if model.noise != NoiseKind::Dssn {
            return Err(Error::Argument(format!(
                "method dssn needs a model trained with dssn noise, this one used {}",
                model.noise.as_str()
            )));
        }
        if cfg.lambda.is_some() {
            return Err(Error::Argument(
                "method dssn certifies with the model's stored split spec; a noise scale cannot be overridden".into(),
            ));
        }
    }
    Ok(())
}

/// Certifies every point. Rows come back in input order; Monte-Carlo point
/// `i` draws from ChaCha8 stream `i` of `seed`, so output does not depend on
/// the thread count.
pub fn run_certify(data: &Dataset, model: &Model, cfg: &CertifyConfig) -> Result<Vec<CertRow>> {
    check_compatible(data, model, cfg)?;
    let noise = match cfg.method {
        Method::Dssn => None,
        m => Some(mc_noise(model, m, cfg.lambda)?),
    };
    let certify_one = |i: usize| -> Result<CertRow> {
        let x = &data.points[i];
        let start = Instant::now();
        let cert = match &noise {
            None => certify_dssn(model, x, &model.spec, cfg.gap_rule)?,
            Some(noise) => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(i as u64);
                certify_randomized(model, x, noise, cfg.params, &mut rng)?
            }
        };
        let elapsed = start.elapsed().as_secs_f64();
        Ok(CertRow {
            index: i,
            label: data.labels[i],
            cert,
            wall_seconds: cfg.record_time.then_some(elapsed),
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..data.len()).into_par_iter().map(certify_one).collect())
}

/// CSV columns: `index,label,predicted,radius,radius_num,radius_den,abstained,eval_count`
/// plus `wall_seconds` when timing was recorded. `header` lines are written
/// first, each prefixed with `# `.
pub fn write_certificates<W: Write>(out: W, rows: &[CertRow], model: &Model, header: &[String]) -> Result<()> {
    let mut out = out;
    for line in header {
        writeln!(out, "# {line}")?;
    }
    let timed = rows.iter().any(|r| r.wall_seconds.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut cols = vec![
        "index",
        "label",
        "predicted",
        "radius",
        "radius_num",
        "radius_den",
        "abstained",
        "eval_count",
    ];
    if timed {
        cols.push("wall_seconds");
    }
    w.write_record(&cols)?;
    for r in rows {
        let (radius, num, den) = match r.cert.radius {
            Some(Radius::Exact(v)) => (
                Radius::Exact(v).to_f64().to_string(),
                v.numer().to_string(),
                v.denom().to_string(),
            ),
            Some(Radius::Probabilistic(v)) => (v.to_string(), String::new(), String::new()),
            None => (String::new(), String::new(), String::new()),
        };
        let mut rec = vec![
            r.index.to_string(),
            model.classes.label(r.label).to_string(),
            model.classes.label(r.cert.predicted).to_string(),
            radius,
            num,
            den,
            r.cert.abstained().to_string(),
            r.cert.eval_count.to_string(),
        ];
        if timed {
            rec.push(r.wall_seconds.map_or(String::new(), |s| format!("{s:.6}")));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synth_dataset;
    use crate::models::{ClassifierKind, LinearSoftmax, TableClassifier};
    use crate::noise::{quantize_lambda, SplitSpec, GENERATOR_MT19937};
    use crate::oracle::{exact_counts, Budget, Joint};

    fn table_model(seed: u64) -> (Dataset, Model) {
        let data = synth_dataset(seed, 2, 4, 3, 5, 0.6).unwrap();
        let spec = SplitSpec::generate(GENERATOR_MT19937, seed, 2, 4, 6).unwrap();
        let table = TableClassifier::random(2, 4, 6, 3, seed).unwrap();
        let model = Model {
            classes: data.classes.clone(),
            noise: NoiseKind::Dssn,
            spec,
            classifier: ClassifierKind::Table(table),
            training: None,
        };
        (data, model)
    }

    /// Table classifiers only accept grid outputs, so the randomized methods
    /// are exercised on a linear model.
    fn linear_model(seed: u64) -> (Dataset, Model) {
        let data = synth_dataset(seed, 2, 4, 3, 5, 0.6).unwrap();
        let spec = SplitSpec::generate(GENERATOR_MT19937, seed, 2, 4, 6).unwrap();
        let w = LinearSoftmax::from_parts(2, 3, vec![1.0, -1.0, -1.0, 1.0, 0.5, 0.5], vec![0.0, 0.0, -0.4]).unwrap();
        let model = Model {
            classes: data.classes.clone(),
            noise: NoiseKind::Dssn,
            spec,
            classifier: ClassifierKind::Linear(w),
            training: None,
        };
        (data, model)
    }

    #[test]
    fn dssn_rows_match_oracle() {
        let (data, model) = table_model(3);
        let rows = run_certify(&data, &model, &CertifyConfig::new(Method::Dssn)).unwrap();
        assert_eq!(rows.len(), data.len());
        for (row, x) in rows.iter().zip(&data.points) {
            let (counts, total) = exact_counts(&model, x, &model.spec, Joint::Correlated, &Budget::default()).unwrap();
            assert_eq!(total, 6);
            let a = crate::models::argmax_first(&counts);
            assert_eq!(row.cert.predicted, a);
            let gap = (0..counts.len())
                .filter(|&c| c != a)
                .map(|c| counts[a] as i64 - counts[c] as i64 - i64::from(c < a))
                .min()
                .unwrap();
            assert_eq!(
                row.cert.radius,
                Some(Radius::Exact(crate::noise::Rational::new(gap.max(0), 8)))
            );
        }
    }

    #[test]
    fn small_n_uniform_mc_abstains_somewhere() {
        let (data, model) = linear_model(4);
        let mut cfg = CertifyConfig::new(Method::UniformMc);
        cfg.params = RandomizedParams {
            n0: 4,
            n: 8,
            alpha: 0.001,
        };
        let rows = run_certify(&data, &model, &cfg).unwrap();
        // with 8 draws the bound can only exceed 1/2 when all 8 agree and
        // 0.001^(1/8) = 0.42 < 1/2, so every row abstains
        assert!(rows.iter().all(|r| r.cert.abstained()));
    }

    #[test]
    fn output_is_stable_across_threads() {
        let (data, model) = linear_model(5);
        for method in [Method::Dssn, Method::SsnMc, Method::UniformMc] {
            let mut cfg = CertifyConfig::new(method);
            cfg.params.n = 500;
            let render = |threads| {
                let mut c = cfg.clone();
                c.threads = threads;
                let rows = run_certify(&data, &model, &c).unwrap();
                let mut buf = Vec::new();
                write_certificates(&mut buf, &rows, &model, &["m".into()]).unwrap();
                buf
            };
            let one = render(1);
            assert_eq!(one, render(3));
            assert_eq!(one, render(1));
        }
    }

    #[test]
    fn dssn_rejects_lambda_override_and_foreign_noise() {
        let (data, mut model) = linear_model(6);
        let mut cfg = CertifyConfig::new(Method::Dssn);
        cfg.lambda = Some(quantize_lambda(0.5, 4).unwrap());
        assert!(matches!(run_certify(&data, &model, &cfg), Err(Error::Argument(_))));
        model.noise = NoiseKind::UniformAdditive;
        assert!(run_certify(&data, &model, &CertifyConfig::new(Method::Dssn)).is_err());
        // randomized methods accept any model
        let mut mc = CertifyConfig::new(Method::UniformMc);
        mc.params.n = 100;
        assert!(run_certify(&data, &model, &mc).is_ok());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (_, model) = table_model(7);
        let other = synth_dataset(1, 3, 4, 3, 2, 0.5).unwrap();
        assert!(run_certify(&other, &model, &CertifyConfig::new(Method::Dssn)).is_err());
    }

    #[test]
    fn csv_layout() {
        let (data, model) = table_model(8);
        let rows = run_certify(&data, &model, &CertifyConfig::new(Method::Dssn)).unwrap();
        let mut buf = Vec::new();
        write_certificates(&mut buf, &rows[..1], &model, &["method=dssn".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "# method=dssn");
        assert_eq!(
            lines[1],
            "index,label,predicted,radius,radius_num,radius_den,abstained,eval_count"
        );
        assert!(lines[2].starts_with("0,c0,"));
        assert!(lines[2].ends_with(",false,6"));
    }

    #[test]
    fn timing_column_is_opt_in() {
        let (data, model) = table_model(9);
        let mut cfg = CertifyConfig::new(Method::Dssn);
        cfg.record_time = true;
        let rows = run_certify(&data, &model, &cfg).unwrap();
        let mut buf = Vec::new();
        write_certificates(&mut buf, &rows, &model, &[]).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .ends_with(",wall_seconds"));
    }
}
