use std::io::{Read, Write};

use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::noise::Rational;

/// A certified radius as read back from CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CertRadius {
    Exact(Rational),
    Approx(f64),
}

impl CertRadius {
    /// Inclusive: a certificate of radius `r` certifies every `ρ ≤ r`.
    pub fn covers(&self, rho: Rational) -> bool {
        match self {
            CertRadius::Exact(r) => *r >= rho,
            CertRadius::Approx(r) => *r >= rho.to_f64().unwrap_or(f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertRecord {
    pub index: usize,
    pub label: String,
    pub predicted: String,
    /// `None` for abstentions.
    pub radius: Option<CertRadius>,
}

impl CertRecord {
    pub fn certified_at(&self, rho: Rational) -> bool {
        self.label == self.predicted && self.radius.is_some_and(|r| r.covers(rho))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub radius: Rational,
    pub certified: usize,
    pub total: usize,
}

impl CurvePoint {
    pub fn certified_accuracy(&self) -> f64 {
        self.certified as f64 / self.total as f64
    }
}

/// Parses `"0.25"`, `"3"` or `"1/8"` into an exact non-negative rational.
pub fn parse_radius(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Argument(format!("radius {s:?} is not a non-negative decimal or fraction"));
    let value = if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        Rational::new(n, d)
    } else {
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if (int.is_empty() && frac.is_empty()) || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        if frac.len() > 15 {
            return Err(bad());
        }
        let digits = format!("{int}{frac}");
        let n: i64 = digits.parse().map_err(|_| bad())?;
        Rational::new(n, 10i64.pow(frac.len() as u32))
    };
    if value < Rational::zero() {
        return Err(bad());
    }
    Ok(value)
}

/// Comma-separated radii, sorted and de-duplicated.
pub fn parse_radius_grid(s: &str) -> Result<Vec<Rational>> {
    let mut radii: Vec<Rational> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(parse_radius)
        .collect::<Result<_>>()?;
    if radii.is_empty() {
        return Err(Error::Argument("radius grid is empty".into()));
    }
    radii.sort();
    radii.dedup();
    Ok(radii)
}

/// Reads certificate CSV as written by `write_certificates`. Exact radii are
/// taken from the numerator/denominator columns when present.
pub fn read_certificates<R: Read>(input: R, source: &str) -> Result<Vec<CertRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            path: source.to_string(),
            line: 1,
            msg: format!("missing column '{name}'"),
        })
    };
    let (i_index, i_label, i_pred) = (col("index")?, col("label")?, col("predicted")?);
    let (i_rad, i_num, i_den, i_abs) = (
        col("radius")?,
        col("radius_num")?,
        col("radius_den")?,
        col("abstained")?,
    );

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let err = |msg: String| Error::Parse {
            path: source.to_string(),
            line,
            msg,
        };
        let abstained = match &record[i_abs] {
            "true" => true,
            "false" => false,
            other => return Err(err(format!("abstained must be true or false, got {other:?}"))),
        };
        let radius = if abstained {
            None
        } else if !record[i_num].is_empty() {
            let n: i64 = record[i_num].parse().map_err(|_| err("bad radius_num".into()))?;
            let d: i64 = record[i_den].parse().map_err(|_| err("bad radius_den".into()))?;
            if d <= 0 {
                return Err(err("radius_den must be positive".into()));
            }
            Some(CertRadius::Exact(Rational::new(n, d)))
        } else {
            let r: f64 = record[i_rad].parse().map_err(|_| err("bad radius".into()))?;
            if r.is_nan() {
                return Err(err("radius is NaN".into()));
            }
            Some(CertRadius::Approx(r))
        };
        out.push(CertRecord {
            index: record[i_index].parse().map_err(|_| err("bad index".into()))?,
            label: record[i_label].to_string(),
            predicted: record[i_pred].to_string(),
            radius,
        });
    }
    if out.is_empty() {
        return Err(Error::Parse {
            path: source.to_string(),
            line: 1,
            msg: "no certificate rows".into(),
        });
    }
    Ok(out)
}

/// Certified accuracy at each radius. Abstentions and misclassifications
/// are uncertified at every radius.
pub fn certified_accuracy_curve(records: &[CertRecord], radii: &[Rational]) -> Result<Vec<CurvePoint>> {
    if radii.is_empty() {
        return Err(Error::Argument("radius grid is empty".into()));
    }
    if records.is_empty() {
        return Err(Error::Argument("no certificates".into()));
    }
    let mut radii = radii.to_vec();
    radii.sort();
    radii.dedup();
    Ok(radii
        .into_iter()
        .map(|rho| CurvePoint {
            radius: rho,
            certified: records.iter().filter(|r| r.certified_at(rho)).count(),
            total: records.len(),
        })
        .collect())
}

/// Pointwise best certified accuracy across curves on a common grid.
pub fn max_envelope(curves: &[Vec<CurvePoint>]) -> Result<Vec<CurvePoint>> {
    let first = curves
        .first()
        .ok_or_else(|| Error::Argument("no curves to combine".into()))?;
    let mut out = first.clone();
    for c in &curves[1..] {
        if c.len() != out.len() || c.iter().zip(&out).any(|(a, b)| a.radius != b.radius) {
            return Err(Error::Argument("curves use different radius grids".into()));
        }
        for (o, p) in out.iter_mut().zip(c) {
            if p.certified_accuracy() > o.certified_accuracy() {
                *o = p.clone();
            }
        }
    }
    Ok(out)
}

/// Columns `radius,radius_num,radius_den,certified,total,certified_accuracy`.
pub fn write_curve<W: Write>(out: W, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "radius",
        "radius_num",
        "radius_den",
        "certified",
        "total",
        "certified_accuracy",
    ])?;
    for p in curve {
        w.write_record([
            p.radius.to_f64().unwrap_or(f64::NAN).to_string(),
            p.radius.numer().to_string(),
            p.radius.denom().to_string(),
            p.certified.to_string(),
            p.total.to_string(),
            p.certified_accuracy().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn rec(label: &str, pred: &str, radius: Option<CertRadius>) -> CertRecord {
        CertRecord {
            index: 0,
            label: label.into(),
            predicted: pred.into(),
            radius,
        }
    }

    #[test]
    fn radius_parsing_is_exact() {
        assert_eq!(parse_radius("0.25").unwrap(), r(1, 4));
        assert_eq!(parse_radius("1.5").unwrap(), r(3, 2));
        assert_eq!(parse_radius("2").unwrap(), r(2, 1));
        assert_eq!(parse_radius(".1").unwrap(), r(1, 10));
        assert_eq!(parse_radius("3/8").unwrap(), r(3, 8));
        for bad in ["", "-1", "a", "1e3", "1/0", "."] {
            assert!(parse_radius(bad).is_err(), "{bad}");
        }
        assert_eq!(
            parse_radius_grid("0.5, 0,0.25,0.5").unwrap(),
            vec![r(0, 1), r(1, 4), r(1, 2)]
        );
        assert!(parse_radius_grid(" , ").is_err());
    }

    #[test]
    fn uniform_half_radius_staircase() {
        let records: Vec<_> = (0..4)
            .map(|_| rec("a", "a", Some(CertRadius::Exact(r(1, 2)))))
            .collect();
        let c = certified_accuracy_curve(&records, &[r(0, 1), r(1, 4), r(1, 2), r(3, 4)]).unwrap();
        let acc: Vec<f64> = c.iter().map(CurvePoint::certified_accuracy).collect();
        assert_eq!(acc, vec![1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn three_row_hand_example() {
        // correct at 3/8, correct at 1/8, wrong at 1/2
        let records = vec![
            rec("a", "a", Some(CertRadius::Exact(r(3, 8)))),
            rec("b", "b", Some(CertRadius::Exact(r(1, 8)))),
            rec("a", "b", Some(CertRadius::Exact(r(1, 2)))),
        ];
        let c = certified_accuracy_curve(&records, &[r(0, 1), r(1, 8), r(1, 4), r(3, 8), r(1, 2)]).unwrap();
        let counts: Vec<usize> = c.iter().map(|p| p.certified).collect();
        assert_eq!(counts, vec![2, 2, 1, 1, 0]);
    }

    #[test]
    fn abstentions_never_count() {
        let records = vec![rec("a", "a", None), rec("a", "a", Some(CertRadius::Approx(0.0)))];
        let c = certified_accuracy_curve(&records, &[r(0, 1)]).unwrap();
        assert_eq!(c[0].certified, 1);
    }

    #[test]
    fn empty_grid_is_an_error() {
        assert!(certified_accuracy_curve(&[rec("a", "a", None)], &[]).is_err());
    }

    #[test]
    fn reads_exact_and_approximate_rows() {
        let text = "# header\nindex,label,predicted,radius,radius_num,radius_den,abstained,eval_count\n\
                    0,a,a,0.375,3,8,false,4\n1,a,b,0.2,,,false,10\n2,b,b,,,,true,10\n";
        let rows = read_certificates(text.as_bytes(), "t").unwrap();
        assert_eq!(rows[0].radius, Some(CertRadius::Exact(r(3, 8))));
        assert_eq!(rows[1].radius, Some(CertRadius::Approx(0.2)));
        assert_eq!(rows[2].radius, None);
        assert!(read_certificates("index,label\n".as_bytes(), "t").is_err());
        let bad = "index,label,predicted,radius,radius_num,radius_den,abstained,eval_count\n0,a,a,1,,,maybe,4\n";
        assert!(matches!(
            read_certificates(bad.as_bytes(), "t"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn envelope_takes_pointwise_best() {
        let grid = [r(0, 1), r(1, 2)];
        let a = certified_accuracy_curve(&[rec("a", "a", Some(CertRadius::Exact(r(1, 4))))], &grid).unwrap();
        let b = certified_accuracy_curve(&[rec("a", "a", Some(CertRadius::Exact(r(1, 1))))], &grid).unwrap();
        let e = max_envelope(&[a, b]).unwrap();
        assert_eq!(e.iter().map(|p| p.certified).collect::<Vec<_>>(), vec![1, 1]);
        assert!(max_envelope(&[]).is_err());
    }

    proptest! {
        #[test]
        fn curves_are_monotone(
            rows in prop::collection::vec((0u8..3, 0u8..3, prop::option::of(0i64..40)), 1..40),
            grid in prop::collection::vec(0i64..50, 1..12),
        ) {
            let records: Vec<_> = rows
                .iter()
                .map(|&(l, p, rad)| rec(&l.to_string(), &p.to_string(), rad.map(|n| CertRadius::Exact(r(n, 16)))))
                .collect();
            let radii: Vec<_> = grid.iter().map(|&n| r(n, 16)).collect();
            let c = certified_accuracy_curve(&records, &radii).unwrap();
            for w in c.windows(2) {
                prop_assert!(w[0].radius < w[1].radius);
                prop_assert!(w[0].certified >= w[1].certified);
            }
            let clean = records.iter().filter(|r| r.radius.is_some() && r.label == r.predicted).count();
            prop_assert!(c[0].certified <= clean);
        }
    }
}
