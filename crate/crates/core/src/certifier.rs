//! Smoothed-classifier evaluation and certified ℓ1 radii.
//!
//! The exact path enumerates all `L` base splits of the derandomized scheme
//! and works in integer counts; its radius is an exact rational. The
//! Monte-Carlo path estimates the top-class probability with a binomial
//! lower confidence bound and may abstain.

use num_traits::ToPrimitive;
use rand::Rng;
use rayon::prelude::*;

use crate::confidence::lower_confidence_bound;
use crate::error::{ClassifierError, Error, Result};
use crate::models::{argmax_first, BaseClassifier};
use crate::noise::{
    numerators_to_f64, quantized_noisy, splits_from_base, NoiseModel, QuantizedPoint, Rational, SplitSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Exact,
    MonteCarlo,
}

/// Per-class vote counts out of `total` evaluations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmoothedScores {
    pub kind: ScoreKind,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl SmoothedScores {
    pub fn probability(&self, class: usize) -> Rational {
        Rational::new(self.counts[class] as i64, self.total as i64)
    }

    pub fn fraction(&self, class: usize) -> f64 {
        self.counts[class] as f64 / self.total as f64
    }
}

fn checked_class(
    c: std::result::Result<usize, ClassifierError>,
    num_classes: usize,
    base_index: usize,
) -> Result<usize> {
    match c {
        Ok(c) if c < num_classes => Ok(c),
        Ok(c) => Err(Error::Classifier {
            base_index,
            source: ClassifierError(format!("returned class {c} but only {num_classes} classes exist")),
        }),
        Err(source) => Err(Error::Classifier { base_index, source }),
    }
}

fn classify_base<C: BaseClassifier + ?Sized>(
    clf: &C,
    x: &QuantizedPoint,
    spec: &SplitSpec,
    base: u32,
) -> Result<usize> {
    let splits = splits_from_base(base, spec)?;
    let noisy = numerators_to_f64(&quantized_noisy(x, &splits, spec.period()), spec.q());
    checked_class(clf.predict_hard(&noisy), clf.num_classes(), base as usize)
}

/// Exact smoothed scores: one base-classifier call per split position.
pub fn smooth_exact_dssn<C: BaseClassifier + ?Sized>(
    clf: &C,
    x: &QuantizedPoint,
    spec: &SplitSpec,
) -> Result<SmoothedScores> {
    spec.check_point(x)?;
    let mut counts = vec![0u64; clf.num_classes()];
    for base in 0..spec.period() {
        counts[classify_base(clf, x, spec, base)?] += 1;
    }
    Ok(SmoothedScores {
        kind: ScoreKind::Exact,
        counts,
        total: spec.period() as u64,
    })
}

/// [`smooth_exact_dssn`] with the `L` evaluations spread over the current
/// rayon pool. Counts are summed, so the result does not depend on the
/// number of workers.
pub fn smooth_exact_dssn_par<C>(clf: &C, x: &QuantizedPoint, spec: &SplitSpec) -> Result<SmoothedScores>
where
    C: BaseClassifier + Sync + ?Sized,
{
    spec.check_point(x)?;
    let k = clf.num_classes();
    let counts = (0..spec.period())
        .into_par_iter()
        .map(|base| classify_base(clf, x, spec, base))
        .try_fold(
            || vec![0u64; k],
            |mut acc, c| {
                acc[c?] += 1;
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(
            || vec![0u64; k],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(SmoothedScores {
        kind: ScoreKind::Exact,
        counts,
        total: spec.period() as u64,
    })
}

/// Vote counts from `n` independent noisy evaluations.
pub fn smooth_monte_carlo<C, R>(
    clf: &C,
    x: &QuantizedPoint,
    model: &NoiseModel,
    n: u64,
    rng: &mut R,
) -> Result<SmoothedScores>
where
    C: BaseClassifier + ?Sized,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(Error::Argument("Monte-Carlo sample count must be at least 1".into()));
    }
    if let NoiseModel::Dssn(spec) = model {
        spec.check_point(x)?;
    }
    let mut counts = vec![0u64; clf.num_classes()];
    for i in 0..n {
        let noisy = model.sample(rng, x);
        counts[checked_class(clf.predict_hard(&noisy), clf.num_classes(), i as usize)?] += 1;
    }
    Ok(SmoothedScores {
        kind: ScoreKind::MonteCarlo,
        counts,
        total: n,
    })
}

/// Plurality class; ties go to the lexicographically first label.
pub fn predict(scores: &SmoothedScores) -> usize {
    argmax_first(&scores.counts)
}

/// How the runner-up score is bounded in the exact certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapRule {
    /// True second-largest exact count.
    #[default]
    MultiClass,
    /// Every other class bounded by `1 − p_A`.
    OneVsAll,
}

impl GapRule {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "multiclass" => Ok(GapRule::MultiClass),
            "one-vs-all" => Ok(GapRule::OneVsAll),
            other => Err(Error::Argument(format!("unknown gap rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radius {
    Exact(Rational),
    Probabilistic(f64),
}

impl Radius {
    pub fn to_f64(&self) -> f64 {
        match self {
            Radius::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Radius::Probabilistic(r) => *r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CertKind {
    Exact,
    Probabilistic { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub predicted: usize,
    /// `None` when the certifier abstained.
    pub radius: Option<Radius>,
    pub kind: CertKind,
    /// Number of base-classifier invocations spent.
    pub eval_count: u64,
}

impl Certificate {
    pub fn abstained(&self) -> bool {
        self.radius.is_none()
    }
}

/// Exact certificate from exact scores.
///
/// Radius is `(k_A − k_B) / (2q)` with robustness guaranteed up to and
/// including it. Each perturbation step of `1/q` can move at most one vote
/// from A to a rival, so a rival ranked before A in label order must stay
/// strictly behind; its gap is reduced by one vote for that reason.
pub fn certify_exact(scores: &SmoothedScores, q: u32, rule: GapRule) -> Result<Certificate> {
    if scores.kind != ScoreKind::Exact {
        return Err(Error::Argument("exact certification needs exact scores".into()));
    }
    let a = predict(scores);
    let k_a = scores.counts[a] as i64;
    let gap = match rule {
        GapRule::MultiClass => scores
            .counts
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != a)
            .map(|(c, &k)| k_a - k as i64 - i64::from(c < a))
            .min()
            .unwrap_or(k_a),
        GapRule::OneVsAll => {
            let rest = scores.total as i64 - k_a;
            k_a - rest - i64::from(a > 0)
        }
    };
    Ok(Certificate {
        predicted: a,
        radius: Some(Radius::Exact(Rational::new(gap.max(0), 2 * q as i64))),
        kind: CertKind::Exact,
        eval_count: scores.total,
    })
}

/// Exact smoothing followed by [`certify_exact`].
pub fn certify_dssn<C: BaseClassifier + ?Sized>(
    clf: &C,
    x: &QuantizedPoint,
    spec: &SplitSpec,
    rule: GapRule,
) -> Result<Certificate> {
    let scores = smooth_exact_dssn(clf, x, spec)?;
    certify_exact(&scores, spec.q(), rule)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizedParams {
    pub n0: u64,
    pub n: u64,
    pub alpha: f64,
}

impl Default for RandomizedParams {
    fn default() -> Self {
        Self {
            n0: 64,
            n: 100_000,
            alpha: 0.001,
        }
    }
}

/// Two-stage randomized certificate: guess the class from `n0` draws, then
/// lower-bound its probability from `n` fresh draws. Abstains unless the
/// bound exceeds 1/2.
pub fn certify_randomized<C, R>(
    clf: &C,
    x: &QuantizedPoint,
    model: &NoiseModel,
    params: RandomizedParams,
    rng: &mut R,
) -> Result<Certificate>
where
    C: BaseClassifier + ?Sized,
    R: Rng + ?Sized,
{
    if params.n0 == 0 || params.n == 0 {
        return Err(Error::Argument("n0 and n must both be at least 1".into()));
    }
    if !(params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(Error::Argument(format!(
            "alpha must lie in (0, 1), got {}",
            params.alpha
        )));
    }
    let guess = predict(&smooth_monte_carlo(clf, x, model, params.n0, rng)?);
    let scores = smooth_monte_carlo(clf, x, model, params.n, rng)?;
    let p_lower = lower_confidence_bound(scores.counts[guess], params.n, params.alpha);
    let lambda = model.lambda().to_f64().unwrap_or(f64::NAN);
    let radius = (p_lower > 0.5).then_some(Radius::Probabilistic(lambda * (2.0 * p_lower - 1.0)));
    Ok(Certificate {
        predicted: guess,
        radius,
        kind: CertKind::Probabilistic { alpha: params.alpha },
        eval_count: params.n0 + params.n,
    })
}

/// Converts the reported noise scale to `λ` (`σ = λ/√3`).
pub fn sigma_to_lambda(sigma: f64) -> f64 {
    sigma * 3f64.sqrt()
}

pub fn lambda_to_sigma(lambda: f64) -> f64 {
    lambda / 3f64.sqrt()
}
