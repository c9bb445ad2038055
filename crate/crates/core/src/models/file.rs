//! Canonical model files.
//!
//! A model file is the magic line `DSSN-MODEL` followed by fields in a fixed
//! order, one per line, each written as `<key> <byte length>:<value>`:
//!
//! ```text
//! DSSN-MODEL
//! format_version 1:1
//! classes 5:c0,c1
//! noise 4:dssn
//! d 1:2
//! q 1:4
//! L 1:6
//! generator 17:mt19937-masked-v1
//! seed 1:0
//! v 3:4 5
//! classifier 6:linear
//! weights 19:1e0 -1e0 2.5e-1 0e0
//! bias 7:0e0 0e0
//! training 4:none
//! ```
//!
//! Floats use Rust's shortest round-trip exponent form, so parsing and
//! re-serializing reproduces the file byte for byte. The offset vector is
//! regenerated from `(generator, seed)` on load and must match.

use std::fmt::Write as _;
use std::path::Path;

use super::{BaseClassifier, ClassSet, LinearSoftmax, TableClassifier, TrainingMeta};
use crate::error::{ClassifierError, Error, Result};
use crate::noise::{make_offset_vector, NoiseKind, NoiseModel, SplitSpec, GENERATOR_EXPLICIT, KNOWN_GENERATORS};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "DSSN-MODEL";

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierKind {
    Linear(LinearSoftmax),
    Table(TableClassifier),
}

/// A base classifier together with the noise it was trained for.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub classes: ClassSet,
    pub noise: NoiseKind,
    pub spec: SplitSpec,
    pub classifier: ClassifierKind,
    pub training: Option<TrainingMeta>,
}

impl Model {
    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel::from_spec(self.noise, &self.spec)
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn q(&self) -> u32 {
        self.spec.q()
    }
}

impl BaseClassifier for Model {
    fn num_classes(&self) -> usize {
        self.classes.len()
    }

    fn predict_hard(&self, x: &[f64]) -> std::result::Result<usize, ClassifierError> {
        match &self.classifier {
            ClassifierKind::Linear(m) => m.predict_hard(x),
            ClassifierKind::Table(t) => t.predict_hard(x),
        }
    }
}

fn field(out: &mut String, key: &str, value: &str) {
    let _ = writeln!(out, "{key} {}:{value}", value.len());
}

fn join<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    let mut s = String::new();
    for (i, v) in items.into_iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v}");
    }
    s
}

fn join_floats(items: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in items.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v:e}");
    }
    s
}

/// Serializes `model` canonically.
pub fn save_model(model: &Model) -> Result<Vec<u8>> {
    if model.spec.generator_id() == GENERATOR_EXPLICIT {
        return Err(Error::ModelFile(
            "offsets without a generator cannot be persisted; build the spec with a known generator".into(),
        ));
    }
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    field(&mut out, "format_version", &FORMAT_VERSION.to_string());
    field(&mut out, "classes", &model.classes.labels().join(","));
    field(&mut out, "noise", model.noise.as_str());
    field(&mut out, "d", &model.spec.dim().to_string());
    field(&mut out, "q", &model.spec.q().to_string());
    field(&mut out, "L", &model.spec.period().to_string());
    field(&mut out, "generator", model.spec.generator_id());
    field(&mut out, "seed", &model.spec.seed().to_string());
    field(&mut out, "v", &join(model.spec.offsets()));
    match &model.classifier {
        ClassifierKind::Linear(m) => {
            field(&mut out, "classifier", "linear");
            field(&mut out, "weights", &join_floats(m.weights()));
            field(&mut out, "bias", &join_floats(m.bias()));
        }
        ClassifierKind::Table(t) => {
            field(&mut out, "classifier", "table");
            field(&mut out, "table", &join(t.labels()));
        }
    }
    let training = match &model.training {
        None => "none".to_string(),
        Some(t) => format!(
            "epochs={};learning_rate={:e};schedule={};batch_size={};seed={};data={}",
            t.epochs, t.learning_rate, t.schedule, t.batch_size, t.seed, t.data
        ),
    };
    field(&mut out, "training", &training);
    Ok(out.into_bytes())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn bad(&self, msg: impl Into<String>) -> Error {
        Error::ModelFile(format!("at byte {}: {}", self.pos, msg.into()))
    }

    fn until(&mut self, stop: u8) -> Result<&'a str> {
        let rest = &self.buf[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == stop)
            .ok_or_else(|| self.bad(format!("expected {:?}", stop as char)))?;
        let s = std::str::from_utf8(&rest[..end]).map_err(|_| self.bad("invalid UTF-8"))?;
        self.pos += end + 1;
        Ok(s)
    }

    fn field(&mut self, key: &str) -> Result<&'a str> {
        let got = self.until(b' ')?;
        if got != key {
            return Err(self.bad(format!("expected field '{key}', found '{got}'")));
        }
        let len: usize = self
            .until(b':')?
            .parse()
            .map_err(|_| self.bad(format!("bad length for '{key}'")))?;
        if self.pos + len > self.buf.len() {
            return Err(self.bad(format!("'{key}' runs past the end of the file")));
        }
        let value = std::str::from_utf8(&self.buf[self.pos..self.pos + len]).map_err(|_| self.bad("invalid UTF-8"))?;
        self.pos += len;
        if self.buf.get(self.pos) != Some(&b'\n') {
            return Err(self.bad(format!("'{key}' is not followed by a newline (length prefix wrong?)")));
        }
        self.pos += 1;
        Ok(value)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.field(key)?;
        v.parse()
            .map_err(|_| self.bad(format!("cannot parse '{key}' value {v:?}")))
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(' ')
        .map(|t| {
            t.parse()
                .map_err(|_| Error::ModelFile(format!("'{key}' has unparsable entry {t:?}")))
        })
        .collect()
}

fn parse_training(s: &str) -> Result<Option<TrainingMeta>> {
    if s == "none" {
        return Ok(None);
    }
    let bad = || Error::ModelFile(format!("malformed training metadata {s:?}"));
    let mut parts = s.splitn(6, ';');
    let mut take = |key: &str| -> Result<&str> {
        let part = parts.next().ok_or_else(bad)?;
        part.strip_prefix(key).and_then(|r| r.strip_prefix('=')).ok_or_else(bad)
    };
    Ok(Some(TrainingMeta {
        epochs: take("epochs")?.parse().map_err(|_| bad())?,
        learning_rate: take("learning_rate")?.parse().map_err(|_| bad())?,
        schedule: take("schedule")?.to_string(),
        batch_size: take("batch_size")?.parse().map_err(|_| bad())?,
        seed: take("seed")?.parse().map_err(|_| bad())?,
        data: take("data")?.to_string(),
    }))
}

/// Parses and validates a model file.
pub fn load_model(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.until(b'\n')?;
    if magic != MAGIC {
        return Err(Error::ModelFile(format!("not a model file (header {magic:?})")));
    }
    let version: u32 = r.parse("format_version")?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFile(format!(
            "format version {version} is not supported (this build reads version {FORMAT_VERSION})"
        )));
    }
    let classes =
        ClassSet::new(r.field("classes")?.split(',')).map_err(|e| Error::ModelFile(format!("classes: {e}")))?;
    let noise = NoiseKind::parse(r.field("noise")?).map_err(|e| Error::ModelFile(e.to_string()))?;
    let d: usize = r.parse("d")?;
    let q: u32 = r.parse("q")?;
    let period: u32 = r.parse("L")?;
    let generator = r.field("generator")?.to_string();
    let seed: u64 = r.parse("seed")?;
    let offsets: Vec<u32> = parse_list("v", r.field("v")?)?;

    if !KNOWN_GENERATORS.contains(&generator.as_str()) {
        return Err(Error::ModelFile(format!(
            "offset generator '{generator}' is not known to this build (known: {}); \
             the offsets cannot be verified, retrain or re-export the model with a known generator",
            KNOWN_GENERATORS.join(", ")
        )));
    }
    let expected = make_offset_vector(&generator, seed, d, period)
        .map_err(|e| Error::ModelFile(format!("cannot regenerate offsets: {e}")))?;
    if expected != offsets {
        return Err(Error::ModelFile(format!(
            "stored offset vector does not match {generator} with seed {seed}; the file was modified"
        )));
    }
    let spec = SplitSpec::generate(&generator, seed, d, q, period).map_err(|e| Error::ModelFile(e.to_string()))?;

    let classifier = match r.field("classifier")? {
        "linear" => {
            let weights = parse_list("weights", r.field("weights")?)?;
            let bias = parse_list("bias", r.field("bias")?)?;
            ClassifierKind::Linear(
                LinearSoftmax::from_parts(d, classes.len(), weights, bias)
                    .map_err(|e| Error::ModelFile(e.to_string()))?,
            )
        }
        "table" => {
            let labels = parse_list("table", r.field("table")?)?;
            ClassifierKind::Table(
                TableClassifier::from_labels(d, q, period, classes.len(), labels)
                    .map_err(|e| Error::ModelFile(e.to_string()))?,
            )
        }
        other => return Err(Error::ModelFile(format!("unknown classifier kind '{other}'"))),
    };
    let training = parse_training(r.field("training")?)?;
    if r.pos != bytes.len() {
        return Err(Error::ModelFile("trailing bytes after the last field".into()));
    }
    Ok(Model {
        classes,
        noise,
        spec,
        classifier,
        training,
    })
}

pub fn write_model_file(path: impl AsRef<Path>, model: &Model) -> Result<()> {
    std::fs::write(path, save_model(model)?)?;
    Ok(())
}

pub fn read_model_file(path: impl AsRef<Path>) -> Result<Model> {
    let bytes = std::fs::read(path)?;
    load_model(&bytes)
}
