//! Splitting-noise transforms and the noise models built on them.
//!
//! Quantized inputs live on the grid `{0, 1/q, ..., 1}` and are stored as
//! integer levels. Split positions live on the half-steps between levels,
//! `s = (2j + 1) / (2q)` for `j in 0..L`, where `L = 2λq` is the number of
//! distinct split positions. With these conventions every noisy coordinate
//! is a midpoint of two half-steps (or of a half-step and 0 or 1), so it is
//! an exact integer numerator over `4q`. The exact paths in this crate never
//! touch floating point until the value is handed to a base classifier.

use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_mt::Mt;

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

/// Mersenne Twister (32-bit, `init_genrand` seeding) with masked rejection
/// sampling. Produces the same vectors as numpy's legacy
/// `RandomState(seed).randint(0, L, size=d)`.
pub const GENERATOR_MT19937: &str = "mt19937-masked-v1";
/// ChaCha8 keyed by the little-endian seed, masked rejection sampling.
pub const GENERATOR_CHACHA8: &str = "chacha8-masked-v1";
/// Offsets supplied directly by the caller; cannot be regenerated.
pub const GENERATOR_EXPLICIT: &str = "explicit";

pub const KNOWN_GENERATORS: &[&str] = &[GENERATOR_MT19937, GENERATOR_CHACHA8];

/// A point of `[0,1]^d` quantized to multiples of `1/q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuantizedPoint {
    levels: Vec<u32>,
    q: u32,
}

impl QuantizedPoint {
    pub fn new(levels: Vec<u32>, q: u32) -> Result<Self> {
        if q == 0 {
            return Err(Error::Argument("quantization q must be positive".into()));
        }
        if levels.is_empty() {
            return Err(Error::Argument("point must have at least one coordinate".into()));
        }
        if let Some((i, &l)) = levels.iter().enumerate().find(|(_, &l)| l > q) {
            return Err(Error::Argument(format!(
                "coordinate {i} has level {l}, outside 0..={q}"
            )));
        }
        Ok(Self { levels, q })
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn value(&self, i: usize) -> Rational {
        Rational::new(self.levels[i] as i64, self.q as i64)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        let q = self.q as f64;
        self.levels.iter().map(|&l| l as f64 / q).collect()
    }

    /// `‖self − other‖₁` counted in grid steps (multiply by `1/q` for the
    /// real distance).
    pub fn l1_steps(&self, other: &QuantizedPoint) -> u64 {
        debug_assert_eq!(self.q, other.q);
        self.levels
            .iter()
            .zip(&other.levels)
            .map(|(&a, &b)| a.abs_diff(b) as u64)
            .sum()
    }

    pub fn l1_distance(&self, other: &QuantizedPoint) -> Rational {
        Rational::new(self.l1_steps(other) as i64, self.q as i64)
    }
}

/// Draws `count` values in `0..=max` with masked rejection sampling.
fn masked_bounded<F: FnMut() -> u32>(mut next: F, max: u32, count: usize) -> Vec<u32> {
    if max == 0 {
        return vec![0; count];
    }
    let mask = u32::MAX >> max.leading_zeros();
    (0..count)
        .map(|_| loop {
            let v = next() & mask;
            if v <= max {
                break v;
            }
        })
        .collect()
}

/// Pseudorandom offset vector `v`, each entry in `0..period`.
///
/// A pure function of its arguments: the pair `(generator_id, seed)` is all
/// that needs to be stored to recover `v`.
pub fn make_offset_vector(generator_id: &str, seed: u64, d: usize, period: u32) -> Result<Vec<u32>> {
    if period == 0 {
        return Err(Error::Argument("period L must be at least 1".into()));
    }
    if d == 0 {
        return Err(Error::Argument("dimension must be at least 1".into()));
    }
    match generator_id {
        GENERATOR_MT19937 => {
            let seed = u32::try_from(seed)
                .map_err(|_| Error::Config(format!("{GENERATOR_MT19937} takes a 32-bit seed, got {seed}")))?;
            let mut mt = Mt::new(seed);
            Ok(masked_bounded(|| mt.next_u32(), period - 1, d))
        }
        GENERATOR_CHACHA8 => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(masked_bounded(|| rng.next_u32(), period - 1, d))
        }
        other => Err(Error::Config(format!(
            "unknown offset generator '{other}' (known: {})",
            KNOWN_GENERATORS.join(", ")
        ))),
    }
}

/// Parameterization of quantized splitting noise: `L = 2λq` split
/// positions and the per-coordinate offsets `v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    q: u32,
    period: u32,
    offsets: Vec<u32>,
    generator_id: String,
    seed: u64,
}

impl SplitSpec {
    pub fn generate(generator_id: &str, seed: u64, d: usize, q: u32, period: u32) -> Result<Self> {
        if q == 0 {
            return Err(Error::Argument("quantization q must be positive".into()));
        }
        let offsets = make_offset_vector(generator_id, seed, d, period)?;
        Ok(Self {
            q,
            period,
            offsets,
            generator_id: generator_id.to_string(),
            seed,
        })
    }

    /// A spec with caller-chosen offsets (e.g. all zeros).
    pub fn from_offsets(q: u32, period: u32, offsets: Vec<u32>) -> Result<Self> {
        if q == 0 || period == 0 {
            return Err(Error::Argument("q and L must be positive".into()));
        }
        if offsets.is_empty() {
            return Err(Error::Argument("offset vector must be non-empty".into()));
        }
        if let Some(&bad) = offsets.iter().find(|&&v| v >= period) {
            return Err(Error::Argument(format!("offset {bad} outside 0..{period}")));
        }
        Ok(Self {
            q,
            period,
            offsets,
            generator_id: GENERATOR_EXPLICIT.to_string(),
            seed: 0,
        })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// `L`, the number of split positions per coordinate.
    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn offsets(&self) -> &[u32] {
        &self.offsets
    }

    pub fn generator_id(&self) -> &str {
        &self.generator_id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.offsets.len()
    }

    /// `λ = L / (2q)`.
    pub fn lambda(&self) -> Rational {
        Rational::new(self.period as i64, 2 * self.q as i64)
    }

    pub fn check_point(&self, x: &QuantizedPoint) -> Result<()> {
        if x.q() != self.q || x.dim() != self.dim() {
            return Err(Error::Argument(format!(
                "point has (d={}, q={}) but the split spec expects (d={}, q={})",
                x.dim(),
                x.q(),
                self.dim(),
                self.q
            )));
        }
        Ok(())
    }
}

/// One realized splitting vector; `idx[i] = j` encodes `s_i = (2j+1)/(2q)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SplitVector {
    pub idx: Vec<u32>,
}

impl SplitVector {
    pub fn values(&self, q: u32) -> Vec<Rational> {
        self.idx.iter().map(|&j| split_value(j, q)).collect()
    }
}

/// The half-step split position `(2j+1)/(2q)`.
pub fn split_value(j: u32, q: u32) -> Rational {
    Rational::new(2 * j as i64 + 1, 2 * q as i64)
}

pub fn enumerate_split_bases(period: u32) -> Vec<u32> {
    (0..period).collect()
}

/// `s_i = (s_base + v_i) mod 2λ`, in index form.
pub fn splits_from_base(base: u32, spec: &SplitSpec) -> Result<SplitVector> {
    if base >= spec.period {
        return Err(Error::Argument(format!("base index {base} outside 0..{}", spec.period)));
    }
    Ok(SplitVector {
        idx: spec
            .offsets
            .iter()
            .map(|&v| ((base as u64 + v as u64) % spec.period as u64) as u32)
            .collect(),
    })
}

fn ceil_div(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    -((-a).div_euclid(b))
}

/// Noisy value of one quantized coordinate as a numerator over `4q`.
///
/// `level` is `x_i·q`, `split` is the split index `j`. Covers every `λ > 0`:
/// the interval `[0,1]` is cut at `s + 2λn` and the result is the midpoint
/// of the piece containing `x_i` (ties `x_i = s` go to the lower piece, which
/// cannot happen on the grid).
#[inline]
pub fn quantized_transform(level: u32, split: u32, q: u32, period: u32) -> u32 {
    // Work in units of 1/(2q): x = 2·level, s = 2·split + 1, 2λ = 2·period.
    let x = 2 * level as i64;
    let s = 2 * split as i64 + 1;
    let p = 2 * period as i64;
    let one = 2 * q as i64;
    let n = ceil_div(x - s, p);
    let upper = (p * n + s).min(one);
    let lower = (p * (n - 1) + s).max(0);
    (upper + lower) as u32
}

/// Applies [`quantized_transform`] to every coordinate.
pub fn quantized_noisy(x: &QuantizedPoint, splits: &SplitVector, period: u32) -> Vec<u32> {
    x.levels()
        .iter()
        .zip(&splits.idx)
        .map(|(&l, &j)| quantized_transform(l, j, x.q(), period))
        .collect()
}

/// Converts numerators over `4q` to the reals the base classifier sees.
pub fn numerators_to_f64(nums: &[u32], q: u32) -> Vec<f64> {
    let den = 4.0 * q as f64;
    nums.iter().map(|&n| n as f64 / den).collect()
}

/// `x̃_i = (min(s_i, 1) + 1[x_i > s_i]) / 2`, valid for `λ ≥ 1/2`.
pub fn split_coord_simple(x: Rational, s: Rational) -> Rational {
    let one = Rational::one();
    let lifted = if x > s { one } else { Rational::zero() };
    (s.min(one) + lifted) / 2
}

/// Midpoint of the piece of `[0,1]` (cut at `s + 2λn`) containing `x`.
pub fn split_coord_general(x: Rational, s: Rational, lambda: Rational) -> Rational {
    let width = lambda * 2;
    let n = ((x - s) / width).ceil();
    let upper = (width * n + s).min(Rational::one());
    let lower = (width * (n - Rational::one()) + s).max(Rational::zero());
    (upper + lower) / 2
}

fn check_split_range(s: &[Rational], lambda: Rational) -> Result<()> {
    let top = lambda * 2;
    if let Some(bad) = s.iter().find(|&&v| v < Rational::zero() || v > top) {
        return Err(Error::Argument(format!(
            "split value {bad} outside [0, 2λ] = [0, {top}]"
        )));
    }
    Ok(())
}

/// Vector form of the `λ ≥ 1/2` transform.
pub fn split_transform_simple(x: &[Rational], s: &[Rational], lambda: Rational) -> Result<Vec<Rational>> {
    if lambda < Rational::new(1, 2) {
        return Err(Error::Argument(format!(
            "the two-piece transform needs λ ≥ 1/2 (got {lambda}); use the general transform"
        )));
    }
    if x.len() != s.len() {
        return Err(Error::Argument("x and s differ in length".into()));
    }
    check_split_range(s, lambda)?;
    Ok(x.iter().zip(s).map(|(&xi, &si)| split_coord_simple(xi, si)).collect())
}

/// Vector form of the general transform.
pub fn split_transform_general(x: &[Rational], s: &[Rational], lambda: Rational) -> Result<Vec<Rational>> {
    if lambda <= Rational::zero() {
        return Err(Error::Argument("λ must be positive".into()));
    }
    if x.len() != s.len() {
        return Err(Error::Argument("x and s differ in length".into()));
    }
    check_split_range(s, lambda)?;
    Ok(x.iter()
        .zip(s)
        .map(|(&xi, &si)| split_coord_general(xi, si, lambda))
        .collect())
}

/// Floating-point general transform, used for continuous splitting noise.
pub fn split_coord_general_f64(x: f64, s: f64, lambda: f64) -> f64 {
    let width = 2.0 * lambda;
    let n = ((x - s) / width).ceil();
    let upper = (width * n + s).min(1.0);
    let lower = (width * (n - 1.0) + s).max(0.0);
    (upper + lower) / 2.0
}

/// Independent quantized splits: each index uniform on `0..period`.
pub fn sample_split_independent<R: Rng + ?Sized>(rng: &mut R, d: usize, period: u32) -> SplitVector {
    SplitVector {
        idx: (0..d).map(|_| rng.random_range(0..period)).collect(),
    }
}

/// Independent continuous splits, each uniform on `[0, 2λ)`.
pub fn sample_split_continuous<R: Rng + ?Sized>(rng: &mut R, d: usize, lambda: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>() * 2.0 * lambda).collect()
}

/// `x + ε` with `ε_i` independent and uniform on `[−λ, λ]`.
pub fn uniform_additive_sample<R: Rng + ?Sized>(rng: &mut R, x: &[f64], lambda: f64) -> Vec<f64> {
    x.iter()
        .map(|&xi| xi + (2.0 * rng.random::<f64>() - 1.0) * lambda)
        .collect()
}

/// Maps uniform additive noise onto the marginal of splitting noise.
///
/// Continuous at both breakpoints, so the boundary convention is immaterial.
pub fn marginal_map_g(z: Rational, lambda: Rational) -> Result<Rational> {
    let half = Rational::new(1, 2);
    if lambda < half {
        return Err(Error::Argument(format!("marginal map needs λ ≥ 1/2, got {lambda}")));
    }
    let one = Rational::one();
    Ok(if z < one - lambda {
        (z + lambda) / 2
    } else if z <= lambda {
        half
    } else {
        (z - lambda + one) / 2
    })
}

pub fn marginal_map_g_f64(z: f64, lambda: f64) -> f64 {
    if z < 1.0 - lambda {
        (z + lambda) / 2.0
    } else if z <= lambda {
        0.5
    } else {
        (z - lambda + 1.0) / 2.0
    }
}

/// A noise level rounded down onto the grid: `λ' = ⌊2λq⌋ / (2q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizedLambda {
    pub period: u32,
    pub q: u32,
}

impl QuantizedLambda {
    pub fn lambda(&self) -> Rational {
        Rational::new(self.period as i64, 2 * self.q as i64)
    }
}

pub fn quantize_lambda(lambda: f64, q: u32) -> Result<QuantizedLambda> {
    if lambda.is_nan() || lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::Argument(format!("λ must be positive and finite, got {lambda}")));
    }
    if q == 0 {
        return Err(Error::Argument("quantization q must be positive".into()));
    }
    let scaled = (2.0 * lambda * q as f64).floor();
    if scaled < 1.0 {
        return Err(Error::Argument(format!(
            "λ = {lambda} is below the smallest representable level 1/(2q) = {} for q = {q}",
            1.0 / (2.0 * q as f64)
        )));
    }
    let period = scaled
        .to_u32()
        .ok_or_else(|| Error::Argument(format!("2λq = {scaled} does not fit in 32 bits")))?;
    Ok(QuantizedLambda { period, q })
}

/// Which joint structure the smoothing noise has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    /// One shared base split plus fixed offsets.
    Dssn,
    /// Independent quantized split per coordinate.
    IndependentSsn,
    /// Continuous additive `U(−λ, λ)` per coordinate.
    UniformAdditive,
}

impl NoiseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseKind::Dssn => "dssn",
            NoiseKind::IndependentSsn => "independent-ssn",
            NoiseKind::UniformAdditive => "uniform-additive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dssn" => Ok(NoiseKind::Dssn),
            "independent-ssn" => Ok(NoiseKind::IndependentSsn),
            "uniform-additive" => Ok(NoiseKind::UniformAdditive),
            other => Err(Error::Config(format!("unknown noise kind '{other}'"))),
        }
    }
}

/// A concrete smoothing distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    Dssn(SplitSpec),
    IndependentSsn { q: u32, period: u32 },
    UniformAdditive { lambda: Rational },
}

impl NoiseModel {
    pub fn kind(&self) -> NoiseKind {
        match self {
            NoiseModel::Dssn(_) => NoiseKind::Dssn,
            NoiseModel::IndependentSsn { .. } => NoiseKind::IndependentSsn,
            NoiseModel::UniformAdditive { .. } => NoiseKind::UniformAdditive,
        }
    }

    pub fn lambda(&self) -> Rational {
        match self {
            NoiseModel::Dssn(spec) => spec.lambda(),
            NoiseModel::IndependentSsn { q, period } => Rational::new(*period as i64, 2 * *q as i64),
            NoiseModel::UniformAdditive { lambda } => *lambda,
        }
    }

    /// Builds the model of `kind` sharing `spec`'s noise level.
    pub fn from_spec(kind: NoiseKind, spec: &SplitSpec) -> Self {
        match kind {
            NoiseKind::Dssn => NoiseModel::Dssn(spec.clone()),
            NoiseKind::IndependentSsn => NoiseModel::IndependentSsn {
                q: spec.q(),
                period: spec.period(),
            },
            NoiseKind::UniformAdditive => NoiseModel::UniformAdditive { lambda: spec.lambda() },
        }
    }

    /// Draws one noisy version of `x`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, x: &QuantizedPoint) -> Vec<f64> {
        match self {
            NoiseModel::Dssn(spec) => {
                let base = rng.random_range(0..spec.period());
                let splits = splits_from_base(base, spec).expect("base drawn in range");
                numerators_to_f64(&quantized_noisy(x, &splits, spec.period()), x.q())
            }
            NoiseModel::IndependentSsn { period, .. } => {
                let splits = sample_split_independent(rng, x.dim(), *period);
                numerators_to_f64(&quantized_noisy(x, &splits, *period), x.q())
            }
            NoiseModel::UniformAdditive { lambda } => {
                let lambda = lambda.to_f64().unwrap_or(f64::NAN);
                uniform_additive_sample(rng, &x.to_f64(), lambda)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn offsets_trivial_period_is_all_zero() {
        for generator in KNOWN_GENERATORS {
            assert_eq!(make_offset_vector(generator, 0, 3, 1).unwrap(), vec![0, 0, 0]);
        }
    }

    #[test]
    fn offsets_are_deterministic() {
        for generator in KNOWN_GENERATORS {
            let a = make_offset_vector(generator, 0, 4, 6).unwrap();
            let b = make_offset_vector(generator, 0, 4, 6).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn mt_offsets_match_numpy_randint() {
        // np.random.RandomState(seed).randint(0, L, size=d)
        assert_eq!(
            make_offset_vector(GENERATOR_MT19937, 0, 10, 6).unwrap(),
            vec![4, 5, 0, 3, 3, 3, 1, 3, 5, 2]
        );
        assert_eq!(
            make_offset_vector(GENERATOR_MT19937, 0, 10, 255).unwrap(),
            vec![172, 47, 117, 192, 67, 251, 195, 103, 9, 211]
        );
        assert_eq!(
            make_offset_vector(GENERATOR_MT19937, 7, 5, 1000).unwrap(),
            vec![175, 196, 537, 502, 579]
        );
    }

    #[test]
    fn offsets_are_close_to_uniform() {
        for generator in KNOWN_GENERATORS {
            let v = make_offset_vector(generator, 0, 1000, 6).unwrap();
            let mut counts = [0u32; 6];
            for &x in &v {
                counts[x as usize] += 1;
            }
            // each count ~ Binomial(1000, 1/6)
            let mean = 1000.0 / 6.0;
            let sd = (1000.0f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
            for c in counts {
                assert!((c as f64 - mean).abs() < 5.0 * sd, "{generator}: {counts:?}");
            }
            let chi2: f64 = counts.iter().map(|&c| (c as f64 - mean).powi(2) / mean).sum();
            // 5 dof, p = 1e-4 critical value is about 25.7
            assert!(chi2 < 25.7, "{generator}: chi2 = {chi2}");
        }
    }

    #[test]
    fn unknown_generator_is_a_config_error() {
        assert!(matches!(make_offset_vector("xorshift", 0, 3, 4), Err(Error::Config(_))));
        assert!(matches!(
            make_offset_vector(GENERATOR_MT19937, 1 << 40, 3, 4),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn split_bases() {
        assert_eq!(enumerate_split_bases(1), vec![0]);
        let halves: Vec<_> = enumerate_split_bases(2).iter().map(|&j| split_value(j, 2)).collect();
        assert_eq!(halves, vec![r(1, 4), r(3, 4)]);
        let fig: Vec<_> = enumerate_split_bases(5).iter().map(|&j| split_value(j, 4)).collect();
        assert_eq!(fig, vec![r(1, 8), r(3, 8), r(5, 8), r(7, 8), r(9, 8)]);
    }

    #[test]
    fn splits_from_base_examples() {
        let spec = SplitSpec::from_offsets(3, 3, vec![0, 0]).unwrap();
        assert_eq!(splits_from_base(0, &spec).unwrap().idx, vec![0, 0]);
        let spec = SplitSpec::from_offsets(3, 3, vec![1, 2]).unwrap();
        assert_eq!(splits_from_base(2, &spec).unwrap().idx, vec![0, 1]);
        assert!(matches!(splits_from_base(3, &spec), Err(Error::Argument(_))));
    }

    #[test]
    fn simple_transform_examples() {
        // q = 4, 2λ = 5/4
        assert_eq!(split_coord_simple(r(1, 4), r(7, 8)), r(7, 16));
        assert_eq!(split_coord_simple(r(3, 10), r(6, 5)), r(1, 2));
        assert_eq!(split_coord_simple(r(1, 1), r(6, 5)), r(1, 2));
        assert_eq!(split_coord_simple(r(3, 5), r(1, 2)), r(3, 4));
    }

    #[test]
    fn simple_transform_rejects_small_lambda() {
        let err = split_transform_simple(&[r(1, 2)], &[r(1, 10)], r(1, 5));
        assert!(matches!(err, Err(Error::Argument(_))));
        let err = split_transform_simple(&[r(1, 2)], &[r(3, 1)], r(1, 1));
        assert!(matches!(err, Err(Error::Argument(_))));
    }

    #[test]
    fn general_transform_examples() {
        assert_eq!(split_coord_general(r(9, 20), r(1, 10), r(1, 5)), r(3, 10));
        assert_eq!(split_coord_general(r(3, 10), r(4, 5), r(3, 5)), r(2, 5));
        assert_eq!(split_coord_simple(r(3, 10), r(4, 5)), r(2, 5));
        assert_eq!(split_coord_general(r(1, 20), r(1, 10), r(1, 5)), r(1, 20));
        assert!((split_coord_general_f64(0.45, 0.1, 0.2) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn quantized_transform_matches_rational_general() {
        for q in 1..=6u32 {
            for period in 1..=3 * q {
                let lambda = r(period as i64, 2 * q as i64);
                for level in 0..=q {
                    for j in 0..period {
                        let exact = split_coord_general(r(level as i64, q as i64), split_value(j, q), lambda);
                        let fast = quantized_transform(level, j, q, period);
                        assert_eq!(exact, r(fast as i64, 4 * q as i64), "q={q} L={period} x={level} j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn no_information_value_above_one() {
        let q = 4;
        for level in 0..=q {
            for j in q..7 {
                assert_eq!(quantized_transform(level, j, q, 7), 2 * q);
            }
        }
    }

    #[test]
    fn marginal_map_examples() {
        assert_eq!(marginal_map_g(r(0, 1), r(1, 2)).unwrap(), r(1, 4));
        assert_eq!(marginal_map_g(r(0, 1), r(3, 2)).unwrap(), r(1, 2));
        assert_eq!(marginal_map_g(r(8, 5), r(3, 2)).unwrap(), r(11, 20));
        assert!(marginal_map_g(r(0, 1), r(1, 4)).is_err());
        assert!((marginal_map_g_f64(1.6, 1.5) - 0.55).abs() < 1e-12);
    }

    #[test]
    fn quantize_lambda_examples() {
        let ql = quantize_lambda(0.5, 255).unwrap();
        assert_eq!(ql.period, 255);
        assert_eq!(ql.lambda(), r(1, 2));
        let ql = quantize_lambda(0.15 * 3f64.sqrt(), 255).unwrap();
        assert_eq!(ql.period, 132);
        assert_eq!(ql.lambda(), r(132, 510));
        assert!(quantize_lambda(0.001, 255).is_err());
    }

    #[test]
    fn independent_sampling_trivial_period() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert_eq!(sample_split_independent(&mut rng, 4, 1).idx, vec![0; 4]);
        }
    }

    #[test]
    fn independent_sampling_marginals_and_joint() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let period = 4u32;
        let draws = 100_000;
        let mut marg = [[0u32; 4]; 2];
        let mut joint = [[0u32; 4]; 4];
        for _ in 0..draws {
            let s = sample_split_independent(&mut rng, 2, period);
            marg[0][s.idx[0] as usize] += 1;
            marg[1][s.idx[1] as usize] += 1;
            joint[s.idx[0] as usize][s.idx[1] as usize] += 1;
        }
        let p = 0.25;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for m in marg {
            for c in m {
                assert!((c as f64 - draws as f64 * p).abs() < 5.0 * sd);
            }
        }
        // contingency chi-square against the product of marginals, 9 dof;
        // p = 1e-4 critical value is about 33.7
        let mut chi2 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let e = marg[0][a] as f64 * marg[1][b] as f64 / draws as f64;
                chi2 += (joint[a][b] as f64 - e).powi(2) / e;
            }
        }
        assert!(chi2 < 33.7, "chi2 = {chi2}");
    }

    #[test]
    fn uniform_additive_support_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = [0.2, 0.9];
        let lambda = 0.75;
        let draws = 100_000;
        let mut sum = [0.0f64; 2];
        for _ in 0..draws {
            let y = uniform_additive_sample(&mut rng, &x, lambda);
            for i in 0..2 {
                assert!(y[i] >= x[i] - lambda && y[i] <= x[i] + lambda);
                sum[i] += y[i];
            }
        }
        let sd = lambda / 3f64.sqrt() / (draws as f64).sqrt();
        for i in 0..2 {
            assert!((sum[i] / draws as f64 - x[i]).abs() < 5.0 * sd);
        }
        let y = uniform_additive_sample(&mut rng, &x, 0.0);
        assert_eq!(y, x.to_vec());
    }

    proptest! {
        #[test]
        fn shift_is_a_permutation(period in 1u32..40, offset in 0u32..40) {
            let offset = offset % period;
            let spec = SplitSpec::from_offsets(1, period, vec![offset]).unwrap();
            let mut seen: Vec<u32> = (0..period)
                .map(|b| splits_from_base(b, &spec).unwrap().idx[0])
                .collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..period).collect::<Vec<_>>());
        }

        #[test]
        fn general_equals_simple_for_large_lambda(q in 1u32..12, extra in 0u32..24, level in 0u32..12, j in 0u32..48) {
            let period = q + extra;
            let level = level % (q + 1);
            let j = j % period;
            let lambda = r(period as i64, 2 * q as i64);
            let x = r(level as i64, q as i64);
            let s = split_value(j, q);
            prop_assert_eq!(split_coord_general(x, s, lambda), split_coord_simple(x, s));
        }

        #[test]
        fn noisy_values_stay_in_unit_interval(q in 1u32..16, period in 1u32..64, level in 0u32..16, j in 0u32..64) {
            let level = level % (q + 1);
            let j = j % period;
            let n = quantized_transform(level, j, q, period);
            prop_assert!(n <= 4 * q);
            let v = r(n as i64, 4 * q as i64);
            prop_assert!(v >= r(0, 1) && v <= r(1, 1));
        }
    }
}
