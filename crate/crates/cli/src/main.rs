//! `dssn`: train, certify and verify classifiers smoothed with splitting noise.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dssn_core::harness::{
    certified_accuracy_curve, load_dataset, max_envelope, parse_radius_grid, read_certificates, render_curves_svg,
    run_bench, run_certify, synth_dataset, write_certificates, write_curve, write_dataset, BenchConfig, CertifyConfig,
    Method,
};
use dssn_core::models::{read_model_file, train_linear, write_model_file, ClassifierKind, TrainConfig, TrainingMeta};
use dssn_core::noise::GENERATOR_MT19937;
use dssn_core::oracle::{self, Budget, Joint};
use dssn_core::{
    lambda_to_sigma, quantize_lambda, sigma_to_lambda, GapRule, Model, NoiseKind, NoiseModel, QuantizedLambda,
    RandomizedParams, SplitSpec, TableClassifier,
};

const EXIT_VIOLATION: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "dssn",
    version,
    about = "Exact l1 certificates for splitting-noise smoothing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded Gaussian-cluster dataset as CSV.
    Synth(SynthArgs),
    /// Train a linear softmax base classifier under a noise model.
    Train(TrainArgs),
    /// Certify every point of a dataset.
    Certify(CertifyArgs),
    /// Certified-accuracy curves from certificate files.
    Curve(CurveArgs),
    /// Brute-force checks of the Lipschitz guarantees on small grids.
    Verify(VerifyArgs),
    /// Time exact and Monte-Carlo certification on the same model.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    q: u32,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 100)]
    n_per_class: usize,
    #[arg(long, default_value_t = 0.5)]
    separation: f64,
    #[arg(long, short)]
    out: PathBuf,
}

/// Noise scale, as `σ = λ/√3` or directly as `λ`.
#[derive(Args, Clone, Copy)]
#[group(multiple = false)]
struct Scale {
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
}

impl Scale {
    /// Quantized scale plus the conversion trail for output headers.
    fn resolve(&self, q: u32) -> Result<Option<(QuantizedLambda, Vec<String>)>> {
        let mut notes = Vec::new();
        let lambda = match (self.sigma, self.lambda) {
            (Some(s), None) => {
                let l = sigma_to_lambda(s);
                notes.push(format!("sigma={s} -> lambda=sigma*sqrt(3)={l}"));
                l
            }
            (None, Some(l)) => {
                notes.push(format!("lambda={l} (sigma={})", lambda_to_sigma(l)));
                l
            }
            _ => return Ok(None),
        };
        let ql = quantize_lambda(lambda, q)?;
        notes.push(format!(
            "lambda={lambda} -> L=floor(2*lambda*q)={} -> lambda'=L/(2q)={}",
            ql.period,
            ql.lambda()
        ));
        Ok(Some((ql, notes)))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Dssn,
    IndependentSsn,
    UniformAdditive,
}

impl From<NoiseArg> for NoiseKind {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Dssn => NoiseKind::Dssn,
            NoiseArg::IndependentSsn => NoiseKind::IndependentSsn,
            NoiseArg::UniformAdditive => NoiseKind::UniformAdditive,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    q: u32,
    #[arg(long, value_enum, default_value = "dssn")]
    noise: NoiseArg,
    #[command(flatten)]
    scale: Scale,
    #[arg(long, default_value = GENERATOR_MT19937)]
    generator: String,
    /// Seed of the offset vector.
    #[arg(long, default_value_t = 0)]
    v_seed: u64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    learning_rate: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    /// Seed of shuffling and noise draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Dssn,
    SsnMc,
    UniformMc,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Dssn => Method::Dssn,
            MethodArg::SsnMc => Method::SsnMc,
            MethodArg::UniformMc => Method::UniformMc,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GapArg {
    Multiclass,
    OneVsAll,
}

#[derive(Args)]
struct McArgs {
    #[arg(long, default_value_t = 64)]
    n0: u64,
    #[arg(long, default_value_t = 100_000)]
    n: u64,
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    /// Root seed of the Monte-Carlo streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl McArgs {
    fn params(&self) -> RandomizedParams {
        RandomizedParams {
            n0: self.n0,
            n: self.n,
            alpha: self.alpha,
        }
    }
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "dssn")]
    method: MethodArg,
    #[command(flatten)]
    mc: McArgs,
    /// Overrides the model's noise scale (randomized methods only).
    #[command(flatten)]
    scale: Scale,
    #[arg(long, value_enum, default_value = "multiclass")]
    gap_rule: GapArg,
    /// Worker threads; 0 uses all cores.
    #[arg(long, env = "DSSN_THREADS", default_value_t = 0)]
    threads: usize,
    /// Add a per-row wall-time column (output is then not reproducible).
    #[arg(long)]
    with_timing: bool,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    /// One or more certificate CSVs (e.g. one per noise level).
    #[arg(long, required = true, num_args = 1..)]
    certs: Vec<PathBuf>,
    /// Comma-separated radii, e.g. `0,0.25,0.5`.
    #[arg(long)]
    radii: String,
    /// Curve CSV; with several inputs, `-<n>` is inserted before the extension.
    #[arg(long, short)]
    out: PathBuf,
    /// Pointwise best accuracy across all inputs.
    #[arg(long)]
    envelope: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Lipschitz,
    Stability,
    Counterexample,
    Flip,
    Pushforward,
    Degenerate,
    Agreement,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum JointArg {
    Correlated,
    Independent,
    Both,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    check: Check,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 4)]
    q: u32,
    /// Number of split positions `L = 2λq`.
    #[arg(long = "L", default_value_t = 4)]
    period: u32,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    /// Random tables (or offset seeds) to try.
    #[arg(long, default_value_t = 20)]
    tables: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "both")]
    joint: JointArg,
    /// Check a trained model instead of random tables (stability only).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["dssn", "uniform-mc"])]
    methods: Vec<MethodArg>,
    #[command(flatten)]
    mc: McArgs,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[arg(long)]
    max_points: Option<usize>,
    /// JSON report; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn synth(a: SynthArgs) -> Result<()> {
    let data = synth_dataset(a.seed, a.d, a.q, a.classes, a.n_per_class, a.separation)?;
    let mut w = create(&a.out)?;
    write_dataset(&mut w, &data)?;
    w.flush()?;
    eprintln!("wrote {} points to {}", data.len(), a.out.display());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let data = load_dataset(&a.data, a.q, None)?;
    let Some((ql, notes)) = a.scale.resolve(a.q)? else {
        bail!(dssn_core::Error::Argument(
            "one of --sigma or --lambda is required".into()
        ));
    };
    for n in &notes {
        eprintln!("# {n}");
    }
    let spec = SplitSpec::generate(&a.generator, a.v_seed, data.d, a.q, ql.period)?;
    let kind = NoiseKind::from(a.noise);
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        seed: a.seed,
    };
    let linear = train_linear(&data, &NoiseModel::from_spec(kind, &spec), &cfg)?;
    let model = Model {
        classes: data.classes.clone(),
        noise: kind,
        spec,
        classifier: ClassifierKind::Linear(linear),
        training: Some(TrainingMeta::new(&cfg, &data)),
    };
    write_model_file(&a.out, &model)?;
    eprintln!("wrote model to {}", a.out.display());
    Ok(())
}

fn certify(a: CertifyArgs) -> Result<()> {
    let model = read_model_file(&a.model)?;
    let data = load_dataset(&a.data, model.q(), Some(&model.classes))?;
    let method = Method::from(a.method);
    let mut header = vec![format!("method={}", method.as_str())];
    let scale = a.scale.resolve(model.q())?;
    let lambda = match &scale {
        Some((ql, notes)) => {
            header.extend(notes.iter().cloned());
            Some(*ql)
        }
        None => None,
    };
    let spec = &model.spec;
    let (period, q) = lambda.map_or((spec.period(), spec.q()), |l| (l.period, l.q));
    header.push(format!(
        "q={q} L={period} lambda={} sigma={}",
        QuantizedLambda { period, q }.lambda(),
        lambda_to_sigma(period as f64 / (2 * q) as f64)
    ));
    match method {
        Method::Dssn => header.push(format!(
            "generator={} seed={} gap_rule={}",
            spec.generator_id(),
            spec.seed(),
            match a.gap_rule {
                GapArg::Multiclass => "multiclass",
                GapArg::OneVsAll => "one-vs-all",
            }
        )),
        _ => header.push(format!(
            "n0={} n={} alpha={} rng_seed={}",
            a.mc.n0, a.mc.n, a.mc.alpha, a.mc.seed
        )),
    }
    let cfg = CertifyConfig {
        method,
        params: a.mc.params(),
        gap_rule: match a.gap_rule {
            GapArg::Multiclass => GapRule::MultiClass,
            GapArg::OneVsAll => GapRule::OneVsAll,
        },
        lambda,
        seed: a.mc.seed,
        threads: a.threads,
        record_time: a.with_timing,
    };
    let rows = run_certify(&data, &model, &cfg)?;
    let mut w = create(&a.out)?;
    write_certificates(&mut w, &rows, &model, &header)?;
    w.flush()?;
    let abstained = rows.iter().filter(|r| r.cert.abstained()).count();
    eprintln!(
        "certified {} points ({abstained} abstained) -> {}",
        rows.len(),
        a.out.display()
    );
    Ok(())
}

fn numbered_path(base: &Path, i: usize) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}-{i}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{i}"),
    };
    base.with_file_name(name)
}

fn curve(a: CurveArgs) -> Result<()> {
    let radii = parse_radius_grid(&a.radii)?;
    let mut curves = Vec::new();
    for path in &a.certs {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let records = read_certificates(file, &path.display().to_string())?;
        curves.push(certified_accuracy_curve(&records, &radii)?);
    }
    for (i, c) in curves.iter().enumerate() {
        let path = if curves.len() == 1 {
            a.out.clone()
        } else {
            numbered_path(&a.out, i)
        };
        let mut w = create(&path)?;
        write_curve(&mut w, c)?;
        w.flush()?;
    }
    if let Some(path) = &a.envelope {
        let mut w = create(path)?;
        write_curve(&mut w, &max_envelope(&curves)?)?;
        w.flush()?;
    }
    if let Some(path) = &a.svg {
        let series: Vec<_> = a
            .certs
            .iter()
            .zip(&curves)
            .map(|(p, c)| {
                (
                    p.file_stem()
                        .map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
                    c.clone(),
                )
            })
            .collect();
        std::fs::write(path, render_curves_svg(&series)).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

struct Outcome {
    name: &'static str,
    pass: bool,
    skipped: bool,
    detail: String,
}

fn joints(j: JointArg) -> Vec<Joint> {
    match j {
        JointArg::Correlated => vec![Joint::Correlated],
        JointArg::Independent => vec![Joint::Independent],
        JointArg::Both => vec![Joint::Correlated, Joint::Independent],
    }
}

fn verify_checks(a: &VerifyArgs) -> Result<Vec<Outcome>> {
    let budget = Budget {
        grid_points: a.budget,
        split_vectors: a.budget,
    };
    let wants = |c: Check| a.check == c || a.check == Check::All;
    let mut out = Vec::new();

    if wants(Check::Lipschitz) {
        let mut worst = dssn_core::Rational::from_integer(0);
        let mut pairs = 0;
        for t in 0..a.tables {
            let spec = SplitSpec::generate(GENERATOR_MT19937, a.seed + t, a.d, a.q, a.period)?;
            let table = TableClassifier::random(a.d, a.q, a.period, a.classes, a.seed + t)?;
            for joint in joints(a.joint) {
                let rep = oracle::verify_lipschitz_grid(&table, &spec, joint, &budget)?;
                worst = worst.max(rep.max_ratio);
                pairs += rep.pairs_checked;
            }
        }
        out.push(Outcome {
            name: "lipschitz",
            pass: worst <= dssn_core::Rational::from_integer(1),
            skipped: false,
            detail: format!("max ratio {worst} over {pairs} pairs"),
        });
    }
    if wants(Check::Stability) {
        let (checked, violations) = match &a.model {
            Some(path) => {
                let model = read_model_file(path)?;
                let rep = oracle::verify_prediction_stability(&model, &model.spec, GapRule::MultiClass, &budget)?;
                (rep.pairs_checked, rep.violations.len())
            }
            None => {
                let mut totals = (0, 0);
                for t in 0..a.tables {
                    let spec = SplitSpec::generate(GENERATOR_MT19937, a.seed + t, a.d, a.q, a.period)?;
                    let table = TableClassifier::random(a.d, a.q, a.period, a.classes, a.seed + t)?;
                    let rep = oracle::verify_prediction_stability(&table, &spec, GapRule::MultiClass, &budget)?;
                    totals.0 += rep.pairs_checked;
                    totals.1 += rep.violations.len();
                }
                totals
            }
        };
        out.push(Outcome {
            name: "stability",
            pass: violations == 0,
            skipped: false,
            detail: format!("{violations} violations in {checked} covered pairs"),
        });
    }
    if wants(Check::Counterexample) {
        let rep = oracle::proposition1_counterexample();
        out.push(Outcome {
            name: "counterexample",
            pass: rep.lipschitz_bound_violated,
            skipped: false,
            detail: format!(
                "p(x)={} p(x')={} |d|_1={} ratio={} (correlated additive noise exceeds the bound)",
                rep.p_x, rep.p_x_prime, rep.delta_l1, rep.ratio
            ),
        });
    }
    if wants(Check::Flip) {
        let spec = SplitSpec::generate(GENERATOR_MT19937, a.seed, a.d, a.q, a.period)?;
        let grid = oracle::grid_points(a.d, a.q, budget.grid_points)?;
        let mut bad = 0;
        let mut pairs = 0u64;
        for x in &grid {
            for y in &grid {
                let rep = oracle::check_flip_probability(x, y, &spec)?;
                pairs += 1;
                if !(rep.per_coordinate_exact() && rep.union_bound_holds()) {
                    bad += 1;
                }
            }
        }
        out.push(Outcome {
            name: "flip",
            pass: bad == 0,
            skipped: false,
            detail: format!("{bad} mismatches in {pairs} pairs"),
        });
    }
    if wants(Check::Pushforward) {
        let ok = oracle::check_marginal_pushforward(dssn_core::Rational::new(1, 2), a.q)?;
        out.push(Outcome {
            name: "pushforward",
            pass: ok,
            skipped: false,
            detail: format!("lambda=1/2 q={}", a.q),
        });
    }
    if wants(Check::Degenerate) {
        if a.period <= a.q {
            out.push(Outcome {
                name: "degenerate",
                pass: true,
                skipped: true,
                detail: format!("needs L > q (got L={}, q={})", a.period, a.q),
            });
        } else {
            let spec = SplitSpec::from_offsets(a.q, a.period, vec![0; a.d])?;
            let mut pass = true;
            let mut fraction = None;
            for t in 0..a.tables {
                let table = TableClassifier::random(a.d, a.q, a.period, a.classes, a.seed + t)?;
                let rep = oracle::check_degenerate_equal_splits(&spec, &table, &budget)?;
                pass &= rep.holds();
                fraction = Some(rep.degenerate_fraction());
            }
            out.push(Outcome {
                name: "degenerate",
                pass,
                skipped: false,
                detail: format!("v=0: degenerate fraction {}", fraction.unwrap_or_default()),
            });
        }
    }
    if wants(Check::Agreement) {
        if a.period < a.q {
            out.push(Outcome {
                name: "agreement",
                pass: true,
                skipped: true,
                detail: format!("needs L >= q (got L={}, q={})", a.period, a.q),
            });
        } else {
            let rep = oracle::check_transform_agreement(a.q, a.period)?;
            out.push(Outcome {
                name: "agreement",
                pass: rep.mismatches == 0,
                skipped: false,
                detail: format!("{} mismatches in {} pairs", rep.mismatches, rep.pairs_checked),
            });
        }
    }
    Ok(out)
}

fn verify(a: VerifyArgs) -> Result<bool> {
    let outcomes = verify_checks(&a)?;
    let mut all = true;
    for o in &outcomes {
        println!(
            "{:<15} {}  {}",
            o.name,
            match (o.skipped, o.pass) {
                (true, _) => "SKIP",
                (false, true) => "PASS",
                (false, false) => "FAIL",
            },
            o.detail
        );
        all &= o.pass;
    }
    Ok(all)
}

fn bench(a: BenchArgs) -> Result<()> {
    let model = read_model_file(&a.model)?;
    let data = load_dataset(&a.data, model.q(), Some(&model.classes))?;
    let cfg = BenchConfig {
        methods: a.methods.iter().map(|&m| m.into()).collect(),
        params: a.mc.params(),
        repetitions: a.repetitions,
        seed: a.mc.seed,
        max_points: a.max_points,
    };
    let report = run_bench(&data, &model, &cfg)?;
    let json = report.to_json();
    match &a.out {
        Some(p) => std::fs::write(p, json + "\n").with_context(|| format!("cannot write {}", p.display()))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let missing = |io: &std::io::Error| io.kind() == std::io::ErrorKind::NotFound;
    let input = err.chain().any(|e| match e.downcast_ref::<dssn_core::Error>() {
        Some(dssn_core::Error::Io(io)) => missing(io),
        Some(core) => core.is_input_error(),
        None => e.downcast_ref::<std::io::Error>().is_some_and(missing),
    });
    if input {
        EXIT_INPUT
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Certify(a) => certify(a),
        Command::Curve(a) => curve(a),
        Command::Bench(a) => bench(a),
        Command::Verify(a) => match verify(a) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(EXIT_VIOLATION),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbered_paths() {
        assert_eq!(
            numbered_path(Path::new("out/curve.csv"), 2),
            PathBuf::from("out/curve-2.csv")
        );
        assert_eq!(numbered_path(Path::new("curve"), 0), PathBuf::from("curve-0"));
    }

    #[test]
    fn scale_conversion_trail() {
        let s = Scale {
            sigma: None,
            lambda: Some(0.5),
        };
        let (ql, notes) = s.resolve(8).unwrap().unwrap();
        assert_eq!(ql.period, 8);
        assert!(notes.last().unwrap().contains("L=floor(2*lambda*q)=8"));
        let none = Scale {
            sigma: None,
            lambda: None,
        };
        assert!(none.resolve(8).unwrap().is_none());
    }

    #[test]
    fn input_errors_map_to_exit_3() {
        let e = anyhow::Error::from(dssn_core::Error::Argument("x".into()));
        assert_eq!(exit_code(&e), EXIT_INPUT);
        let e = anyhow::anyhow!("other");
        assert_eq!(exit_code(&e), 1);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
