//! Brute-force checks of the Lipschitz guarantees on small quantized domains.
//!
//! Everything here is exact: probabilities are rationals with denominator
//! `L` (correlated splits) or `L^d` (independent splits) and every check is
//! an equality or inequality between rationals. Enumerations that would
//! exceed their budget are refused, never truncated.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::certifier::{certify_dssn, Certificate, GapRule, Radius};
use crate::error::{Error, Result};
use crate::models::BaseClassifier;
use crate::noise::{
    marginal_map_g, numerators_to_f64, quantized_noisy, quantized_transform, split_coord_general, split_coord_simple,
    split_value, splits_from_base, QuantizedPoint, Rational, SplitSpec, SplitVector,
};

/// Joint structure of the split vector being enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Joint {
    /// `s_i = (s_base + v_i) mod 2λ`: `L` outcomes.
    Correlated,
    /// Independent `s_i`: `L^d` outcomes.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub grid_points: u64,
    pub split_vectors: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            grid_points: 1_000_000,
            split_vectors: 1_000_000,
        }
    }
}

fn checked_power(base: u64, exp: usize, budget: u64) -> Result<u64> {
    let size = (base as u128).checked_pow(exp as u32).unwrap_or(u128::MAX);
    if size > budget as u128 {
        return Err(Error::BudgetExceeded { required: size, budget });
    }
    Ok(size as u64)
}

/// Every point of `[0,1]_(q)^d`, first coordinate most significant.
pub fn grid_points(d: usize, q: u32, budget: u64) -> Result<Vec<QuantizedPoint>> {
    let size = checked_power(q as u64 + 1, d, budget)?;
    let mut out = Vec::with_capacity(size as usize);
    let mut levels = vec![0u32; d];
    for _ in 0..size {
        out.push(QuantizedPoint::new(levels.clone(), q)?);
        for i in (0..d).rev() {
            levels[i] += 1;
            if levels[i] <= q {
                break;
            }
            levels[i] = 0;
        }
    }
    Ok(out)
}

fn vote<C: BaseClassifier + ?Sized>(
    clf: &C,
    x: &QuantizedPoint,
    splits: &SplitVector,
    period: u32,
    index: usize,
) -> Result<usize> {
    let noisy = numerators_to_f64(&quantized_noisy(x, splits, period), x.q());
    let c = clf.predict_hard(&noisy).map_err(|source| Error::Classifier {
        base_index: index,
        source,
    })?;
    if c >= clf.num_classes() {
        return Err(Error::Argument(format!("classifier returned out-of-range class {c}")));
    }
    Ok(c)
}

/// Exact per-class vote counts and the number of outcomes enumerated.
pub fn exact_counts<C: BaseClassifier + ?Sized>(
    clf: &C,
    x: &QuantizedPoint,
    spec: &SplitSpec,
    joint: Joint,
    budget: &Budget,
) -> Result<(Vec<u64>, u64)> {
    spec.check_point(x)?;
    let period = spec.period();
    let mut counts = vec![0u64; clf.num_classes()];
    match joint {
        Joint::Correlated => {
            for b in 0..period {
                let s = splits_from_base(b, spec)?;
                counts[vote(clf, x, &s, period, b as usize)?] += 1;
            }
            Ok((counts, period as u64))
        }
        Joint::Independent => {
            let total = checked_power(period as u64, x.dim(), budget.split_vectors)?;
            let mut s = SplitVector { idx: vec![0; x.dim()] };
            for n in 0..total {
                counts[vote(clf, x, &s, period, n as usize)?] += 1;
                for i in (0..s.idx.len()).rev() {
                    s.idx[i] += 1;
                    if s.idx[i] < period {
                        break;
                    }
                    s.idx[i] = 0;
                }
            }
            Ok((counts, total))
        }
    }
}

/// Exact smoothed class probabilities.
pub fn exact_smoothed_value<C: BaseClassifier + ?Sized>(
    clf: &C,
    x: &QuantizedPoint,
    spec: &SplitSpec,
    joint: Joint,
    budget: &Budget,
) -> Result<Vec<Rational>> {
    let (counts, total) = exact_counts(clf, x, spec, joint, budget)?;
    Ok(counts
        .into_iter()
        .map(|c| Rational::new(c as i64, total as i64))
        .collect())
}

/// Worst observed ratio of `|p(x) − p(x')|` to the guaranteed bound
/// `‖δ‖₁ / (2λ)`; the guarantee holds iff `max_ratio ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub max_ratio: Rational,
    /// `(x, x', class)` attaining the maximum, if any pair differs.
    pub witness: Option<(QuantizedPoint, QuantizedPoint, usize)>,
    pub pairs_checked: u64,
    pub points: usize,
}

impl GridReport {
    pub fn holds(&self) -> bool {
        self.max_ratio <= Rational::one()
    }
}

/// Checks `|p_c(x) − p_c(x')| ≤ ‖x − x'‖₁ / (2λ)` for every class and every
/// pair of distinct grid points.
pub fn verify_lipschitz_grid<C>(clf: &C, spec: &SplitSpec, joint: Joint, budget: &Budget) -> Result<GridReport>
where
    C: BaseClassifier + Sync + ?Sized,
{
    let points = grid_points(spec.dim(), spec.q(), budget.grid_points)?;
    let scores: Vec<(Vec<u64>, u64)> = points
        .par_iter()
        .map(|x| exact_counts(clf, x, spec, joint, budget))
        .collect::<Result<_>>()?;
    let period = spec.period() as i64;

    // ratio = |Δk| / T · (L/q) / (D/q) = |Δk|·L / (T·D), D in grid steps
    let best = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut best: Option<(Rational, usize, usize, usize)> = None;
            for j in i + 1..points.len() {
                let steps = points[i].l1_steps(&points[j]) as i64;
                let (ci, ti) = &scores[i];
                let (cj, _) = &scores[j];
                for c in 0..ci.len() {
                    let diff = (ci[c] as i64 - cj[c] as i64).abs();
                    let ratio = Rational::new(diff * period, *ti as i64 * steps);
                    if best.as_ref().is_none_or(|b| ratio > b.0) {
                        best = Some((ratio, i, j, c));
                    }
                }
            }
            best
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, x) | (x, None) => x,
                (Some(a), Some(b)) => {
                    // deterministic regardless of scheduling: larger ratio, then earliest pair
                    if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2, b.3) < (a.1, a.2, a.3)) {
                        Some(b)
                    } else {
                        Some(a)
                    }
                }
            },
        );

    let n = points.len() as u64;
    let (max_ratio, witness) = match best {
        Some((r, i, j, c)) if r > Rational::zero() => (r, Some((points[i].clone(), points[j].clone(), c))),
        _ => (Rational::zero(), None),
    };
    Ok(GridReport {
        max_ratio,
        witness,
        pairs_checked: n * (n - 1) / 2,
        points: points.len(),
    })
}

/// Correlated additive noise `ε_1 = … = ε_d = e ~ U(−λ, λ)` against the
/// half-space classifier `f(z) = 1[w·z > b]`: the exact probability that
/// `f(x + ε) = 1`.
pub fn correlated_additive_halfspace_probability(
    w: &[Rational],
    b: Rational,
    x: &[Rational],
    lambda: Rational,
) -> Rational {
    let slope: Rational = w.iter().copied().sum();
    let margin: Rational = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<Rational>() - b;
    // f = 1 iff margin + e·slope > 0
    let width = lambda * 2;
    let clamp = |v: Rational| v.max(-lambda).min(lambda);
    if slope.is_zero() {
        return if margin > Rational::zero() {
            Rational::one()
        } else {
            Rational::zero()
        };
    }
    let root = -margin / slope;
    if slope > Rational::zero() {
        (lambda - clamp(root)) / width
    } else {
        (clamp(root) + lambda) / width
    }
}

/// Correlated additive noise is not 1/(2λ)-Lipschitz: the explicit pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleReport {
    pub x: [Rational; 2],
    pub x_prime: [Rational; 2],
    pub p_x: Rational,
    pub p_x_prime: Rational,
    pub delta_l1: Rational,
    /// `|p(x) − p(x')| · 2λ / ‖δ‖₁`.
    pub ratio: Rational,
    pub lipschitz_bound_violated: bool,
}

pub fn proposition1_counterexample() -> CounterexampleReport {
    let r = Rational::new;
    let lambda = r(1, 2);
    // f(z) = 1[z_1 > 0.4 + z_2]
    let w = [r(1, 1), r(-1, 1)];
    let b = r(2, 5);
    let x = [r(4, 5), r(1, 5)];
    let x_prime = [r(3, 5), r(2, 5)];
    let p_x = correlated_additive_halfspace_probability(&w, b, &x, lambda);
    let p_x_prime = correlated_additive_halfspace_probability(&w, b, &x_prime, lambda);
    let delta_l1 = (x[0] - x_prime[0]).abs() + (x[1] - x_prime[1]).abs();
    let ratio = (p_x - p_x_prime).abs() * lambda * 2 / delta_l1;
    CounterexampleReport {
        x,
        x_prime,
        p_x,
        p_x_prime,
        delta_l1,
        ratio,
        lipschitz_bound_violated: ratio > Rational::one(),
    }
}

/// Exact split-flip fractions between two grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipReport {
    /// Fraction of the `L` split values with `x̃_i ≠ x̃'_i`, per coordinate.
    pub per_coordinate: Vec<Rational>,
    /// `min(|δ_i| / (2λ), 1)` per coordinate.
    pub expected: Vec<Rational>,
    /// Fraction of base splits (correlated scheme) with `x̃ ≠ x̃'`.
    pub whole_vector: Rational,
    /// `Σ_i |δ_i| / (2λ)`.
    pub union_bound: Rational,
}

impl FlipReport {
    pub fn per_coordinate_exact(&self) -> bool {
        self.per_coordinate == self.expected
    }

    pub fn union_bound_holds(&self) -> bool {
        self.whole_vector <= self.union_bound
    }
}

pub fn check_flip_probability(x: &QuantizedPoint, x_prime: &QuantizedPoint, spec: &SplitSpec) -> Result<FlipReport> {
    spec.check_point(x)?;
    spec.check_point(x_prime)?;
    let (q, period) = (spec.q(), spec.period());
    let lambda = spec.lambda();
    let l = period as i64;

    let per_coordinate = x
        .levels()
        .iter()
        .zip(x_prime.levels())
        .map(|(&a, &b)| {
            let flips = (0..period)
                .filter(|&j| quantized_transform(a, j, q, period) != quantized_transform(b, j, q, period))
                .count();
            Rational::new(flips as i64, l)
        })
        .collect();
    let expected = x
        .levels()
        .iter()
        .zip(x_prime.levels())
        .map(|(&a, &b)| (Rational::new(a.abs_diff(b) as i64, q as i64) / (lambda * 2)).min(Rational::one()))
        .collect();
    let mut differing = 0i64;
    for base in 0..period {
        let s = splits_from_base(base, spec)?;
        if quantized_noisy(x, &s, period) != quantized_noisy(x_prime, &s, period) {
            differing += 1;
        }
    }
    Ok(FlipReport {
        per_coordinate,
        expected,
        whole_vector: Rational::new(differing, l),
        union_bound: x.l1_distance(x_prime) / (lambda * 2),
    })
}

/// At `λ = 1/2`, the multiset of `g(x_i + ε)` over the `L` half-step
/// additive offsets equals the multiset of splitting-noise outputs, for every
/// level. Refuses any other `λ`.
pub fn check_marginal_pushforward(lambda: Rational, q: u32) -> Result<bool> {
    if lambda != Rational::new(1, 2) {
        return Err(Error::Argument(format!(
            "the affine correspondence only holds at λ = 1/2 (got {lambda})"
        )));
    }
    if q == 0 {
        return Err(Error::Argument("q must be positive".into()));
    }
    let period = q; // 2λq
    for level in 0..=q {
        let x = Rational::new(level as i64, q as i64);
        let mut additive: Vec<Rational> = (0..period)
            .map(|k| marginal_map_g(x - lambda + split_value(k, q), lambda))
            .collect::<Result<_>>()?;
        let mut splitting: Vec<Rational> = (0..period).map(|j| split_coord_simple(x, split_value(j, q))).collect();
        additive.sort();
        splitting.sort();
        if additive != splitting {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Effect of identical splits on every coordinate when `λ > 1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateReport {
    /// Base splits where every coordinate has `s_i > 1`.
    pub degenerate_bases: u32,
    /// Base splits whose noisy output is `½·𝟙` (checked equal to the above).
    pub all_half_outputs: u32,
    pub period: u32,
    /// `max |p_c(x) − (degenerate fraction)·1[f(½·𝟙) = c]|` over the grid.
    pub max_deviation: Rational,
    /// `(L − degenerate) / L`; equals `q/L` for zero offsets.
    pub deviation_bound: Rational,
}

impl DegenerateReport {
    pub fn degenerate_fraction(&self) -> Rational {
        Rational::new(self.degenerate_bases as i64, self.period as i64)
    }

    pub fn holds(&self) -> bool {
        self.degenerate_bases == self.all_half_outputs && self.max_deviation <= self.deviation_bound
    }
}

pub fn check_degenerate_equal_splits<C>(spec: &SplitSpec, clf: &C, budget: &Budget) -> Result<DegenerateReport>
where
    C: BaseClassifier + ?Sized,
{
    if spec.lambda() <= Rational::new(1, 2) {
        return Err(Error::Argument(format!(
            "degenerate splits need λ > 1/2 (got {})",
            spec.lambda()
        )));
    }
    let (q, period, d) = (spec.q(), spec.period(), spec.dim());
    let mut degenerate = 0u32;
    let mut all_half = 0u32;
    let origin = QuantizedPoint::new(vec![0; d], q)?;
    for base in 0..period {
        let s = splits_from_base(base, spec)?;
        if s.idx.iter().all(|&j| j >= q) {
            degenerate += 1;
        }
        if quantized_noisy(&origin, &s, period).iter().all(|&n| n == 2 * q) {
            all_half += 1;
        }
    }
    let half_class = clf
        .predict_hard(&vec![0.5; d])
        .map_err(|source| Error::Classifier { base_index: 0, source })?;
    let constant = Rational::new(degenerate as i64, period as i64);
    let mut max_deviation = Rational::zero();
    for x in grid_points(d, q, budget.grid_points)? {
        let (counts, total) = exact_counts(clf, &x, spec, Joint::Correlated, budget)?;
        for (c, &k) in counts.iter().enumerate() {
            let p = Rational::new(k as i64, total as i64);
            let base = if c == half_class { constant } else { Rational::zero() };
            max_deviation = max_deviation.max((p - base).abs());
        }
    }
    Ok(DegenerateReport {
        degenerate_bases: degenerate,
        all_half_outputs: all_half,
        period,
        max_deviation,
        deviation_bound: Rational::new((period - degenerate) as i64, period as i64),
    })
}

/// Exhaustive comparison of the two-piece and general transforms over all
/// `(level, split)` pairs for `λ = L/(2q) ≥ 1/2`; also checks the integer
/// fast path against the rational general transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgreementReport {
    pub pairs_checked: u64,
    pub mismatches: u64,
}

pub fn check_transform_agreement(q: u32, period: u32) -> Result<AgreementReport> {
    if q == 0 || period < q {
        return Err(Error::Argument(format!(
            "agreement is only claimed for λ ≥ 1/2, i.e. L ≥ q (got q={q}, L={period})"
        )));
    }
    let lambda = Rational::new(period as i64, 2 * q as i64);
    let mut pairs = 0;
    let mut mismatches = 0;
    for level in 0..=q {
        let x = Rational::new(level as i64, q as i64);
        for j in 0..period {
            let s = split_value(j, q);
            let general = split_coord_general(x, s, lambda);
            let simple = split_coord_simple(x, s);
            let fast = Rational::new(quantized_transform(level, j, q, period) as i64, 4 * q as i64);
            pairs += 1;
            if general != simple || general != fast {
                mismatches += 1;
            }
        }
    }
    Ok(AgreementReport {
        pairs_checked: pairs,
        mismatches,
    })
}

/// Outcome of exhaustively checking exact certificates on a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilityReport {
    pub certificates: usize,
    pub pairs_checked: u64,
    /// `(x, x')` where `x'` lies within the certified radius of `x` but the
    /// smoothed prediction differs.
    pub violations: Vec<(QuantizedPoint, QuantizedPoint)>,
}

/// Certifies every grid point exactly and confirms the smoothed prediction
/// is unchanged at every grid point within the (inclusive) radius.
pub fn verify_prediction_stability<C>(
    clf: &C,
    spec: &SplitSpec,
    rule: GapRule,
    budget: &Budget,
) -> Result<StabilityReport>
where
    C: BaseClassifier + Sync + ?Sized,
{
    let points = grid_points(spec.dim(), spec.q(), budget.grid_points)?;
    let certs: Vec<Certificate> = points
        .par_iter()
        .map(|x| certify_dssn(clf, x, spec, rule))
        .collect::<Result<_>>()?;
    let two_q = 2 * spec.q() as i64;
    let per_point: Vec<(u64, Vec<(QuantizedPoint, QuantizedPoint)>)> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let Some(Radius::Exact(r)) = certs[i].radius else {
                return (0, Vec::new());
            };
            // radius r = gap/(2q); a point `steps` grid steps away is covered iff 2·steps ≤ gap
            let gap = r * two_q;
            let mut checked = 0;
            let mut bad = Vec::new();
            for (j, y) in points.iter().enumerate() {
                if i == j || Rational::from_integer(2 * points[i].l1_steps(y) as i64) > gap {
                    continue;
                }
                checked += 1;
                if certs[j].predicted != certs[i].predicted {
                    bad.push((points[i].clone(), y.clone()));
                }
            }
            (checked, bad)
        })
        .collect();
    Ok(StabilityReport {
        certificates: certs.len(),
        pairs_checked: per_point.iter().map(|p| p.0).sum(),
        violations: per_point.into_iter().flat_map(|p| p.1).collect(),
    })
}
