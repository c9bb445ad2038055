//! Base classifiers and model persistence.

mod file;
mod linear;
mod table;
mod train;

pub use file::{load_model, read_model_file, save_model, write_model_file, ClassifierKind, Model, FORMAT_VERSION};
pub use linear::LinearSoftmax;
pub use table::TableClassifier;
pub use train::{train_linear, TrainConfig, TrainingMeta};

use crate::error::{ClassifierError, Error, Result};

/// Ordered class labels. Index order is lexicographic label order, so the
/// lowest index is the "first" class for tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSet {
    labels: Vec<String>,
}

impl ClassSet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        labels.sort();
        labels.dedup();
        if labels.is_empty() {
            return Err(Error::Argument("class set is empty".into()));
        }
        if let Some(bad) = labels
            .iter()
            .find(|l| l.is_empty() || l.contains([',', '\n', '\r', ' ']))
        {
            return Err(Error::Argument(format!(
                "class label {bad:?} must be non-empty and contain no commas, spaces or newlines"
            )));
        }
        Ok(Self { labels })
    }

    /// `count` labels `c0, c1, ...` zero-padded so lexicographic order matches
    /// numeric order.
    pub fn numbered(count: usize) -> Self {
        let width = count.saturating_sub(1).to_string().len();
        Self {
            labels: (0..count).map(|i| format!("c{i:0width$}")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }
}

/// Index of the largest value; ties go to the lowest index.
///
/// This is the single tie rule shared by smoothed prediction and by the
/// hard decisions of base classifiers. NaN never wins.
pub fn argmax_first<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A hard base classifier over `num_classes` classes.
pub trait BaseClassifier {
    fn num_classes(&self) -> usize;

    fn predict_hard(&self, x: &[f64]) -> std::result::Result<usize, ClassifierError>;
}

impl<C: BaseClassifier + ?Sized> BaseClassifier for &C {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn predict_hard(&self, x: &[f64]) -> std::result::Result<usize, ClassifierError> {
        (**self).predict_hard(x)
    }
}

/// Wraps a closure as a classifier.
pub struct FnClassifier<F> {
    num_classes: usize,
    f: F,
}

impl<F> FnClassifier<F>
where
    F: Fn(&[f64]) -> usize,
{
    pub fn new(num_classes: usize, f: F) -> Self {
        Self { num_classes, f }
    }
}

impl<F> BaseClassifier for FnClassifier<F>
where
    F: Fn(&[f64]) -> usize,
{
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_hard(&self, x: &[f64]) -> std::result::Result<usize, ClassifierError> {
        let c = (self.f)(x);
        if c >= self.num_classes {
            return Err(ClassifierError(format!(
                "closure returned class {c} but only {} classes exist",
                self.num_classes
            )));
        }
        Ok(c)
    }
}
