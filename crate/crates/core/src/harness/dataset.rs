use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::models::ClassSet;
use crate::noise::QuantizedPoint;

/// Per-coordinate standard deviation of synthetic clusters.
pub const SYNTH_CLUSTER_STD: f64 = 0.15;

/// Labelled points on a shared grid. `labels[i]` indexes into `classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<QuantizedPoint>,
    pub labels: Vec<usize>,
    pub classes: ClassSet,
    pub q: u32,
    pub d: usize,
    /// File path or synthetic generator parameters.
    pub provenance: String,
}

impl Dataset {
    pub fn new(points: Vec<QuantizedPoint>, labels: Vec<usize>, classes: ClassSet, provenance: String) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::Argument("dataset has no points".into()))?;
        let (q, d) = (first.q(), first.dim());
        if points.len() != labels.len() {
            return Err(Error::Argument(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| p.q() != q || p.dim() != d) {
            return Err(Error::Argument(format!(
                "point with (d={}, q={}) in a (d={d}, q={q}) dataset",
                p.dim(),
                p.q()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= classes.len()) {
            return Err(Error::Argument(format!("label index {y} outside the class set")));
        }
        Ok(Self {
            points,
            labels,
            classes,
            q,
            d,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Reads a CSV dataset: header row, integer levels in `0..=q`, label last.
///
/// With `classes = None` the class set is the set of labels present.
/// Otherwise every label must belong to `classes`, and the result uses that
/// indexing (needed to line a dataset up with a model).
pub fn load_dataset(path: impl AsRef<Path>, q: u32, classes: Option<&ClassSet>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_dataset(file, q, classes, &path.display().to_string())
}

pub fn parse_dataset<R: Read>(input: R, q: u32, classes: Option<&ClassSet>, provenance: &str) -> Result<Dataset> {
    if q == 0 {
        return Err(Error::Argument("q must be positive".into()));
    }
    let err = |line: u64, msg: String| Error::Parse {
        path: provenance.to_string(),
        line: line as usize,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(input);
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(err(
            1,
            "header needs at least one feature column and a label column".into(),
        ));
    }
    let d = width - 1;

    let mut rows: Vec<(u64, Vec<u32>, String)> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(err(line, format!("expected {width} fields, found {}", record.len())));
        }
        let mut levels = Vec::with_capacity(d);
        for (i, field) in record.iter().take(d).enumerate() {
            let v: u32 = field.trim().parse().map_err(|_| {
                err(
                    line,
                    format!("column {}: {field:?} is not a non-negative integer", i + 1),
                )
            })?;
            if v > q {
                return Err(err(line, format!("column {}: level {v} exceeds q = {q}", i + 1)));
            }
            levels.push(v);
        }
        rows.push((line, levels, record[d].trim().to_string()));
    }
    if rows.is_empty() {
        return Err(err(1, "dataset has no rows".into()));
    }

    let classes = match classes {
        Some(c) => c.clone(),
        None => ClassSet::new(rows.iter().map(|r| r.2.clone())).map_err(|e| err(1, e.to_string()))?,
    };
    let mut points = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (line, levels, label) in rows {
        let y = classes
            .index_of(&label)
            .ok_or_else(|| err(line, format!("unknown label {label:?}")))?;
        points.push(QuantizedPoint::new(levels, q)?);
        labels.push(y);
    }
    Dataset::new(points, labels, classes, provenance.to_string())
}

/// Writes `x0,…,x{d-1},label` followed by one row per point.
pub fn write_dataset<W: Write>(out: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..data.d).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (p, &y) in data.points.iter().zip(&data.labels) {
        let mut row: Vec<String> = p.levels().iter().map(u32::to_string).collect();
        row.push(data.classes.label(y).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Class `c` is centred at `0.5 ± separation/2` per coordinate, the sign on
/// coordinate `i` being bit `i mod B` of `c` (`B` bits index the classes).
fn cluster_center(c: usize, classes: usize, d: usize, separation: f64) -> Vec<f64> {
    let bits = (usize::BITS - (classes.max(2) - 1).leading_zeros()) as usize;
    (0..d)
        .map(|i| {
            let sign = if (c >> (i % bits)) & 1 == 1 { 1.0 } else { -1.0 };
            0.5 + sign * separation / 2.0
        })
        .collect()
}

/// Seeded Gaussian clusters, clipped to `[0, 1]` and rounded to the grid.
/// Points are emitted class by class.
pub fn synth_dataset(
    seed: u64,
    d: usize,
    q: u32,
    classes: usize,
    n_per_class: usize,
    separation: f64,
) -> Result<Dataset> {
    if d == 0 || q == 0 || classes == 0 || n_per_class == 0 {
        return Err(Error::Argument("d, q, classes and n_per_class must be positive".into()));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::Argument(format!(
            "separation must be finite and non-negative, got {separation}"
        )));
    }
    let class_set = ClassSet::numbered(classes);
    let noise = Normal::new(0.0, SYNTH_CLUSTER_STD).expect("valid std");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(classes * n_per_class);
    let mut labels = Vec::with_capacity(classes * n_per_class);
    for c in 0..classes {
        let center = cluster_center(c, classes, d, separation);
        for _ in 0..n_per_class {
            let levels = center
                .iter()
                .map(|&m| ((m + noise.sample(&mut rng)).clamp(0.0, 1.0) * q as f64).round() as u32)
                .collect();
            points.push(QuantizedPoint::new(levels, q)?);
            labels.push(c);
        }
    }
    let provenance =
        format!("synth:seed={seed},d={d},q={q},classes={classes},n_per_class={n_per_class},separation={separation}");
    Dataset::new(points, labels, class_set, provenance)
}
