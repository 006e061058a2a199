//! Samples, datasets and the dataset text format.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

const DATASET_MAGIC: &str = "grm-dataset";
const DATASET_VERSION: u32 = 1;

/// One detector hit: object category, confidence, and region feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T> {
    pub object: usize,
    pub confidence: T,
    pub feature: Vec<T>,
}

/// A person pair with its precomputed region features and scene detections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub id: u64,
    pub f_union: Vec<T>,
    pub f_p1: Vec<T>,
    pub f_p2: Vec<T>,
    pub geometry: Vec<T>,
    pub detections: Vec<Detection<T>>,
    pub label: usize,
}

/// Vector lengths and vocabulary sizes every sample of a dataset agrees on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleDims {
    pub relationships: usize,
    pub objects: usize,
    /// Length of each of the union / person-1 / person-2 vectors.
    pub feature: usize,
    pub geometry: usize,
    /// Length of detected-object features; equals the hidden feature size `d`.
    pub object_feature: usize,
}

impl SampleDims {
    /// Length of the concatenated pair-encoder input.
    pub fn pair_input(&self) -> usize {
        3 * self.feature + self.geometry
    }
}

impl<T: Scalar> Sample<T> {
    pub fn validate(&self, dims: &SampleDims) -> Result<()> {
        let ctx = |what: &str, got: usize, want: usize| {
            Error::Invalid(format!(
                "sample {}: {what} has length {got}, expected {want}",
                self.id
            ))
        };
        for (what, v, want) in [
            ("f_union", &self.f_union, dims.feature),
            ("f_p1", &self.f_p1, dims.feature),
            ("f_p2", &self.f_p2, dims.feature),
            ("geometry", &self.geometry, dims.geometry),
        ] {
            if v.len() != want {
                return Err(ctx(what, v.len(), want));
            }
        }
        if self.label >= dims.relationships {
            return Err(Error::Invalid(format!(
                "sample {}: label {} out of range for {} relationships",
                self.id, self.label, dims.relationships
            )));
        }
        for d in &self.detections {
            if d.object >= dims.objects {
                return Err(Error::Invalid(format!(
                    "sample {}: object index {} out of range for {} objects",
                    self.id, d.object, dims.objects
                )));
            }
            if !(d.confidence >= T::zero() && d.confidence <= T::one()) {
                return Err(Error::Invalid(format!(
                    "sample {}: confidence {} outside [0, 1]",
                    self.id, d.confidence
                )));
            }
            if d.feature.len() != dims.object_feature {
                return Err(ctx("detection feature", d.feature.len(), dims.object_feature));
            }
        }
        Ok(())
    }

    /// Concatenation `[f_union; f_p1; f_p2; geometry]`.
    pub fn pair_input(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(
            self.f_union.len() + self.f_p1.len() + self.f_p2.len() + self.geometry.len(),
        );
        v.extend_from_slice(&self.f_union);
        v.extend_from_slice(&self.f_p1);
        v.extend_from_slice(&self.f_p2);
        v.extend_from_slice(&self.geometry);
        v
    }

    /// Detections with confidence strictly above `threshold`, in original order.
    pub fn detections_above(&self, threshold: T) -> impl Iterator<Item = &Detection<T>> {
        self.detections.iter().filter(move |d| d.confidence > threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub dims: SampleDims,
    pub samples: Vec<Sample<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(dims: SampleDims, samples: Vec<Sample<T>>) -> Result<Self> {
        for s in &samples {
            s.validate(&dims)?;
        }
        Ok(Self { dims, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.dims.relationships];
        for s in &self.samples {
            c[s.label] += 1;
        }
        c
    }
}

/// Rounds to the nearest multiple of 1e-6; values written by the text
/// formats survive a save/load cycle unchanged after this.
pub fn quantize6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn push_vec<T: Scalar>(out: &mut String, tag: &str, v: &[T]) {
    out.push_str(tag);
    for x in v {
        let _ = write!(out, " {:.6}", x.to_f64_lossy());
    }
    out.push('\n');
}

/// Serializes a dataset. `header` lines are written as `# key=value`
/// comments after the version line.
pub fn write_dataset<T: Scalar>(data: &Dataset<T>, header: &[(String, String)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{DATASET_MAGIC} {DATASET_VERSION}");
    for (k, v) in header {
        let _ = writeln!(out, "# {k}={v}");
    }
    let d = &data.dims;
    let _ = writeln!(
        out,
        "dims relationships={} objects={} feature={} geometry={} object_feature={}",
        d.relationships, d.objects, d.feature, d.geometry, d.object_feature
    );
    let _ = writeln!(out, "samples {}", data.samples.len());
    for s in &data.samples {
        let _ = writeln!(out, "sample {} {} {}", s.id, s.label, s.detections.len());
        push_vec(&mut out, "u", &s.f_union);
        push_vec(&mut out, "p1", &s.f_p1);
        push_vec(&mut out, "p2", &s.f_p2);
        push_vec(&mut out, "g", &s.geometry);
        for det in &s.detections {
            let _ = write!(
                out,
                "d {} {:.6}",
                det.object,
                det.confidence.to_f64_lossy()
            );
            for x in &det.feature {
                let _ = write!(out, " {:.6}", x.to_f64_lossy());
            }
            out.push('\n');
        }
    }
    out
}

pub fn save_dataset<T: Scalar>(
    path: &Path,
    data: &Dataset<T>,
    header: &[(String, String)],
) -> Result<()> {
    std::fs::write(path, write_dataset(data, header))?;
    Ok(())
}

pub fn load_dataset<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text, &path.display().to_string())
}

/// Line cursor that skips blank and `#` lines and reports 1-based numbers.
pub(crate) struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    pub(crate) source: &'a str,
    pub(crate) last: usize,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str, source: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            source,
            last: 0,
        }
    }

    pub(crate) fn next_line(&mut self) -> Result<&'a str> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let t = line.trim_end();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok(t);
        }
        Err(Error::parse(self.source, self.last + 1, "unexpected end of file"))
    }

    pub(crate) fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.source, self.last, msg)
    }

    pub(crate) fn expect_end(&mut self) -> Result<()> {
        match self.next_line() {
            Ok(l) => Err(self.err(format!("trailing content: {l:?}"))),
            Err(_) => Ok(()),
        }
    }
}

pub(crate) fn parse_num<N: std::str::FromStr>(lines: &Lines, tok: &str, field: &str) -> Result<N> {
    tok.parse()
        .map_err(|_| lines.err(format!("invalid {field}: {tok:?}")))
}

fn parse_key_usize(lines: &Lines, tok: &str, key: &str) -> Result<usize> {
    let v = tok
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| lines.err(format!("expected {key}=<n>, got {tok:?}")))?;
    parse_num(lines, v, key)
}

fn parse_vec<T: Scalar>(lines: &mut Lines, tag: &str, len: usize) -> Result<Vec<T>> {
    let line = lines.next_line()?;
    let mut toks = line.split_ascii_whitespace();
    if toks.next() != Some(tag) {
        return Err(lines.err(format!("expected '{tag}' vector line")));
    }
    let v = toks
        .map(|t| parse_num::<f64>(lines, t, tag).map(T::lit))
        .collect::<Result<Vec<T>>>()?;
    if v.len() != len {
        return Err(lines.err(format!("'{tag}' has {} values, expected {len}", v.len())));
    }
    Ok(v)
}

pub fn parse_dataset<T: Scalar>(text: &str, source: &str) -> Result<Dataset<T>> {
    let mut lines = Lines::new(text, source);
    let head = lines.next_line()?;
    match head.split_once(' ') {
        Some((DATASET_MAGIC, v)) if v.trim() == DATASET_VERSION.to_string() => {}
        _ => return Err(lines.err(format!("not a {DATASET_MAGIC} v{DATASET_VERSION} file"))),
    }
    let dims_line = lines.next_line()?;
    let toks: Vec<&str> = dims_line.split_ascii_whitespace().collect();
    if toks.len() != 6 || toks[0] != "dims" {
        return Err(lines.err("expected dims line"));
    }
    let dims = SampleDims {
        relationships: parse_key_usize(&lines, toks[1], "relationships")?,
        objects: parse_key_usize(&lines, toks[2], "objects")?,
        feature: parse_key_usize(&lines, toks[3], "feature")?,
        geometry: parse_key_usize(&lines, toks[4], "geometry")?,
        object_feature: parse_key_usize(&lines, toks[5], "object_feature")?,
    };
    let count_line = lines.next_line()?;
    let n: usize = match count_line.split_once(' ') {
        Some(("samples", n)) => parse_num(&lines, n.trim(), "sample count")?,
        _ => return Err(lines.err("expected samples line")),
    };
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next_line()?;
        let toks: Vec<&str> = line.split_ascii_whitespace().collect();
        if toks.len() != 4 || toks[0] != "sample" {
            return Err(lines.err("expected 'sample <id> <label> <detections>'"));
        }
        let id: u64 = parse_num(&lines, toks[1], "sample id")?;
        let label: usize = parse_num(&lines, toks[2], "label")?;
        let ndet: usize = parse_num(&lines, toks[3], "detection count")?;
        let f_union = parse_vec(&mut lines, "u", dims.feature)?;
        let f_p1 = parse_vec(&mut lines, "p1", dims.feature)?;
        let f_p2 = parse_vec(&mut lines, "p2", dims.feature)?;
        let geometry = parse_vec(&mut lines, "g", dims.geometry)?;
        let mut detections = Vec::with_capacity(ndet);
        for _ in 0..ndet {
            let line = lines.next_line()?;
            let toks: Vec<&str> = line.split_ascii_whitespace().collect();
            if toks.len() != 3 + dims.object_feature || toks[0] != "d" {
                return Err(lines.err(format!(
                    "expected detection line with {} feature values",
                    dims.object_feature
                )));
            }
            let object: usize = parse_num(&lines, toks[1], "object index")?;
            let confidence = T::lit(parse_num::<f64>(&lines, toks[2], "confidence")?);
            let feature = toks[3..]
                .iter()
                .map(|t| parse_num::<f64>(&lines, t, "feature").map(T::lit))
                .collect::<Result<Vec<T>>>()?;
            detections.push(Detection {
                object,
                confidence,
                feature,
            });
        }
        let sample = Sample {
            id,
            f_union,
            f_p1,
            f_p2,
            geometry,
            detections,
            label,
        };
        sample
            .validate(&dims)
            .map_err(|e| lines.err(e.to_string()))?;
        samples.push(sample);
    }
    lines.expect_end()?;
    Ok(Dataset { dims, samples })
}
