//! Exact ℓ1 robustness certificates for classifiers smoothed with splitting
//! noise on quantized inputs, the derandomized variant that needs only `L`
//! base-classifier calls, and the uniform-additive randomized baseline.
//!
//! Inputs live on the grid `{0, 1/q, …, 1}^d` and are stored as integer
//! levels. With `L = 2λq` split positions the exact smoothed scores are
//! counts out of `L`, and certified radii are exact rationals.

pub mod certifier;
pub mod confidence;
pub mod error;
pub mod harness;
pub mod models;
pub mod noise;
pub mod oracle;

pub use certifier::{
    certify_dssn, certify_exact, certify_randomized, lambda_to_sigma, predict, sigma_to_lambda, smooth_exact_dssn,
    smooth_exact_dssn_par, smooth_monte_carlo, CertKind, Certificate, GapRule, Radius, RandomizedParams, ScoreKind,
    SmoothedScores,
};
pub use confidence::lower_confidence_bound;
pub use error::{ClassifierError, Error, Result};
pub use harness::Dataset;
pub use models::{BaseClassifier, ClassSet, LinearSoftmax, Model, TableClassifier};
pub use noise::{
    make_offset_vector, quantize_lambda, NoiseKind, NoiseModel, QuantizedLambda, QuantizedPoint, Rational, SplitSpec,
    SplitVector,
};
