use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::BaseClassifier;
use crate::error::{ClassifierError, Error, Result};
use crate::noise::quantized_transform;

/// Largest table the constructors will materialize.
pub const MAX_TABLE_ENTRIES: u64 = 10_000_000;

/// A classifier defined by an explicit label for every noisy input that
/// quantized splitting noise can produce for a given `(q, L)`.
///
/// Noisy coordinates are numerators over `4q`; the table is indexed in
/// mixed radix over the sorted per-coordinate value set, first coordinate
/// most significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableClassifier {
    d: usize,
    q: u32,
    period: u32,
    num_classes: usize,
    values: Vec<u32>,
    labels: Vec<u32>,
}

/// Every numerator (over `4q`) one coordinate can take under `(q, L)`.
pub fn reachable_values(q: u32, period: u32) -> Vec<u32> {
    let mut out: Vec<u32> = (0..=q)
        .flat_map(|level| (0..period).map(move |j| quantized_transform(level, j, q, period)))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn table_size(radix: usize, d: usize) -> Result<usize> {
    let size = (radix as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if size > MAX_TABLE_ENTRIES as u128 {
        return Err(Error::BudgetExceeded {
            required: size,
            budget: MAX_TABLE_ENTRIES,
        });
    }
    Ok(size as usize)
}

impl TableClassifier {
    /// Builds the table by calling `f` on every reachable noisy input.
    pub fn from_fn<F>(d: usize, q: u32, period: u32, num_classes: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[u32]) -> usize,
    {
        if d == 0 || q == 0 || period == 0 || num_classes == 0 {
            return Err(Error::Argument("table dimensions must be positive".into()));
        }
        let values = reachable_values(q, period);
        let size = table_size(values.len(), d)?;
        let mut labels = Vec::with_capacity(size);
        let mut digits = vec![0usize; d];
        let mut point = vec![values[0]; d];
        for _ in 0..size {
            let c = f(&point);
            if c >= num_classes {
                return Err(Error::Argument(format!("label {c} outside 0..{num_classes}")));
            }
            labels.push(c as u32);
            for i in (0..d).rev() {
                digits[i] += 1;
                if digits[i] < values.len() {
                    point[i] = values[digits[i]];
                    break;
                }
                digits[i] = 0;
                point[i] = values[0];
            }
        }
        Ok(Self {
            d,
            q,
            period,
            num_classes,
            values,
            labels,
        })
    }

    /// Uniformly random labels, reproducible from `seed`.
    pub fn random(d: usize, q: u32, period: u32, num_classes: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_fn(d, q, period, num_classes, |_| rng.random_range(0..num_classes))
    }

    pub fn from_labels(d: usize, q: u32, period: u32, num_classes: usize, labels: Vec<u32>) -> Result<Self> {
        if d == 0 || q == 0 || period == 0 || num_classes == 0 {
            return Err(Error::Argument("table dimensions must be positive".into()));
        }
        let values = reachable_values(q, period);
        let size = table_size(values.len(), d)?;
        if labels.len() != size {
            return Err(Error::Argument(format!(
                "table for d={d}, q={q}, L={period} needs {size} labels, got {}",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&c| c as usize >= num_classes) {
            return Err(Error::Argument(format!("label {bad} outside 0..{num_classes}")));
        }
        Ok(Self {
            d,
            q,
            period,
            num_classes,
            values,
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn predict_numerators(&self, nums: &[u32]) -> std::result::Result<usize, ClassifierError> {
        if nums.len() != self.d {
            return Err(ClassifierError(format!(
                "table expects {} coordinates, got {}",
                self.d,
                nums.len()
            )));
        }
        let mut index = 0usize;
        for &n in nums {
            let digit = self.values.binary_search(&n).map_err(|_| {
                ClassifierError(format!(
                    "value {n}/{} is not reachable for q={}, L={}",
                    4 * self.q,
                    self.q,
                    self.period
                ))
            })?;
            index = index * self.values.len() + digit;
        }
        Ok(self.labels[index] as usize)
    }
}

impl BaseClassifier for TableClassifier {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_hard(&self, x: &[f64]) -> std::result::Result<usize, ClassifierError> {
        let den = 4.0 * self.q as f64;
        let mut nums = Vec::with_capacity(x.len());
        for &v in x {
            let scaled = v * den;
            let n = scaled.round();
            if !(0.0..=den).contains(&n) || (scaled - n).abs() > 1e-6 {
                return Err(ClassifierError(format!(
                    "input {v} is not on the 1/{den} grid this table covers"
                )));
            }
            nums.push(n as u32);
        }
        self.predict_numerators(&nums)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::numerators_to_f64;

    #[test]
    fn reachable_values_half_lambda() {
        // λ = 1/2: every odd numerator over 4q
        assert_eq!(reachable_values(2, 2), vec![1, 3, 5, 7]);
    }

    #[test]
    fn reachable_values_include_no_information_point() {
        let vals = reachable_values(4, 6);
        assert!(vals.contains(&8));
    }

    #[test]
    fn lookup_round_trips_through_floats() {
        let t = TableClassifier::from_fn(2, 4, 5, 3, |p| (p[0] + 2 * p[1]) as usize % 3).unwrap();
        for &a in &t.values {
            for &b in &t.values {
                let want = (a + 2 * b) as usize % 3;
                assert_eq!(t.predict_numerators(&[a, b]).unwrap(), want);
                let x = numerators_to_f64(&[a, b], 4);
                assert_eq!(t.predict_hard(&x).unwrap(), want);
            }
        }
    }

    #[test]
    fn off_grid_input_is_an_error() {
        let t = TableClassifier::random(1, 2, 2, 2, 0).unwrap();
        assert!(t.predict_hard(&[0.3]).is_err());
        assert!(t.predict_hard(&[0.5]).is_err());
        assert!(t.predict_hard(&[0.125, 0.125]).is_err());
    }

    #[test]
    fn random_tables_are_seeded() {
        let a = TableClassifier::random(2, 4, 4, 3, 9).unwrap();
        let b = TableClassifier::random(2, 4, 4, 3, 9).unwrap();
        let c = TableClassifier::random(2, 4, 4, 3, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn oversized_table_is_refused() {
        assert!(matches!(
            TableClassifier::random(8, 255, 255, 2, 0),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
