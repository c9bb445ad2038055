//! Dataset I/O, batch certification, accuracy curves, plots and timing.

mod bench;
mod certify;
mod curve;
mod dataset;
mod svg;

pub use bench::{run_bench, BenchConfig, BenchReport, MethodReport, BENCH_SCHEMA};
pub use certify::{run_certify, write_certificates, CertRow, CertifyConfig, Method};
pub use curve::{
    certified_accuracy_curve, max_envelope, parse_radius, parse_radius_grid, read_certificates, write_curve,
    CertRadius, CertRecord, CurvePoint,
};
pub use dataset::{load_dataset, parse_dataset, synth_dataset, write_dataset, Dataset, SYNTH_CLUSTER_STD};
pub use svg::render_curves_svg;
