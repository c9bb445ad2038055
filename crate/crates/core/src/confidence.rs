//! One-sided exact binomial lower confidence bound.

use statrs::function::factorial::ln_binomial;

/// Bisection stops once the bracket is narrower than this.
pub const BISECTION_TOLERANCE: f64 = 1e-12;

/// `Pr[Bin(n, p) ≥ k]`, summed outward from the mode with a ratio
/// recurrence so each call costs one log-binomial and `O(spread)` products.
pub fn binomial_upper_tail(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let mode = (((n + 1) as f64) * p).floor().min(n as f64) as u64;
    let start = k.max(mode);
    let log_start = ln_binomial(n, start) + start as f64 * p.ln() + (n - start) as f64 * (-p).ln_1p();
    let odds = p / (1.0 - p);

    // relative to pmf(start)
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut j = start;
    while j < n {
        term *= (n - j) as f64 / (j + 1) as f64 * odds;
        j += 1;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    term = 1.0;
    j = start;
    while j > k {
        term *= j as f64 / (n - j + 1) as f64 / odds;
        j -= 1;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    (log_start + sum.ln()).exp().min(1.0)
}

/// Clopper–Pearson style lower bound on `p` from `k` successes in `n` trials:
/// the largest `p` with `Pr[Bin(n, p) ≥ k] ≤ α`, so the true `p` lies below
/// the bound with probability at most `α`.
///
/// Found by bisection on the exact tail; the returned endpoint is the
/// conservative side of the final bracket.
pub fn lower_confidence_bound(k: u64, n: u64, alpha: f64) -> f64 {
    assert!(k <= n, "k = {k} exceeds n = {n}");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    if k == 0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if binomial_upper_tail(k, n, mid) > alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct summation of every pmf term, for small n only.
    fn tail_by_summation(k: u64, n: u64, p: f64) -> f64 {
        (k..=n)
            .map(|j| (ln_binomial(n, j) + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp())
            .sum()
    }

    #[test]
    fn tail_matches_direct_summation() {
        for &n in &[1u64, 5, 30, 100] {
            for k in 0..=n {
                for &p in &[0.01, 0.3, 0.5, 0.77, 0.99] {
                    let a = binomial_upper_tail(k, n, p);
                    let b = if k == 0 { 1.0 } else { tail_by_summation(k, n, p) };
                    assert!((a - b).abs() <= 1e-12 + 1e-10 * b, "k={k} n={n} p={p}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn zero_successes_give_zero() {
        assert_eq!(lower_confidence_bound(0, 100, 0.001), 0.0);
    }

    #[test]
    fn all_successes_give_closed_form() {
        for &n in &[1u64, 10, 1000, 100_000] {
            let want = 0.001f64.powf(1.0 / n as f64);
            let got = lower_confidence_bound(n, n, 0.001);
            assert!((got - want).abs() < 1e-9, "n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn bound_is_monotone_in_k() {
        let mut prev = 0.0;
        for k in 0..=50 {
            let b = lower_confidence_bound(k, 50, 0.01);
            assert!(b >= prev);
            prev = b;
        }
    }
}
