//! Binary parameter checkpoints.
//!
//! Layout: the magic `GRMCKPT\0`, a little-endian `u32` version, a `u64`
//! header length, a UTF-8 header, then every parameter matrix row-major as
//! little-endian `f64`, in header order. The header holds provenance
//! lines (`# key=value`), the model configuration as JSON and the group
//! and entry shapes:
//!
//! ```text
//! # seed=3
//! config {"dims":{...},...}
//! groups 5
//! group encoder sgd 2
//! entry w 64 104
//! ...
//! ```

use crate::error::{Error, Result};
use crate::math::{Matrix, OptimizerKind, ParamGroup, ParamSet};
use crate::model::{GrmModel, ModelConfig};
use crate::scalar::Scalar;
use std::fmt::Write as _;
use std::path::Path;

const MAGIC: &[u8; 8] = b"GRMCKPT\0";
const VERSION: u32 = 1;

/// A checkpoint's model plus its provenance header.
pub struct Checkpoint<T> {
    pub model: GrmModel<T>,
    pub header: Vec<(String, String)>,
}

pub fn write_checkpoint<T: Scalar>(model: &GrmModel<T>, header: &[(String, String)]) -> Vec<u8> {
    let mut text = String::new();
    for (k, v) in header {
        let _ = writeln!(text, "# {k}={v}");
    }
    let config = serde_json::to_string(&model.config).expect("config serializes");
    let _ = writeln!(text, "config {config}");
    let _ = writeln!(text, "groups {}", model.params.groups.len());
    for g in &model.params.groups {
        let _ = writeln!(text, "group {} {} {}", g.name, g.optimizer.as_str(), g.entries.len());
        for e in &g.entries {
            let _ = writeln!(text, "entry {} {} {}", e.name, e.value.rows(), e.value.cols());
        }
    }
    let mut out = Vec::with_capacity(20 + text.len() + 8 * model.params.num_scalars());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    for (_, _, m) in model.params.iter() {
        for v in m.as_slice() {
            out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint<T: Scalar>(path: &Path, model: &GrmModel<T>, header: &[(String, String)]) -> Result<()> {
    std::fs::write(path, write_checkpoint(model, header))?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    let bytes = std::fs::read(path)?;
    read_checkpoint(&bytes, &path.display().to_string())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::parse(
                self.source,
                0,
                format!("truncated checkpoint while reading {what} at byte {}", self.pos),
            )),
        }
    }
}

fn header_err(source: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::parse(source, line, msg)
}

fn parse_usize(source: &str, line: usize, tok: Option<&str>, what: &str) -> Result<usize> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| header_err(source, line, format!("bad {what}")))
}

/// Parses a checkpoint; the model is returned only if every byte checks out.
pub fn read_checkpoint<T: Scalar>(bytes: &[u8], source: &str) -> Result<Checkpoint<T>> {
    let mut cur = Cursor { bytes, pos: 0, source };
    if cur.take(8, "magic")? != MAGIC {
        return Err(header_err(source, 0, "not a checkpoint file"));
    }
    let version = u32::from_le_bytes(cur.take(4, "version")?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(header_err(source, 0, format!("unsupported checkpoint version {version}")));
    }
    let len = u64::from_le_bytes(cur.take(8, "header length")?.try_into().expect("8 bytes"));
    let len = usize::try_from(len).map_err(|_| header_err(source, 0, "header length overflows"))?;
    let text = std::str::from_utf8(cur.take(len, "header")?)
        .map_err(|_| header_err(source, 0, "header is not UTF-8"))?;

    let mut header = Vec::new();
    let mut config: Option<ModelConfig> = None;
    let mut groups: Vec<ParamGroup<T>> = Vec::new();
    let mut shapes: Vec<(usize, String, usize, usize)> = Vec::new();
    let mut expected_groups = None;
    let mut pending: Vec<usize> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        if let Some(kv) = line.strip_prefix("# ") {
            let (k, v) = kv.split_once('=').ok_or_else(|| header_err(source, ln, "expected '# key=value'"))?;
            header.push((k.to_string(), v.to_string()));
            continue;
        }
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "config" => {
                let c: ModelConfig =
                    serde_json::from_str(rest).map_err(|e| header_err(source, ln, format!("config: {e}")))?;
                config = Some(c);
            }
            "groups" => expected_groups = Some(parse_usize(source, ln, Some(rest), "group count")?),
            "group" => {
                let toks: Vec<&str> = rest.split(' ').collect();
                if toks.len() != 3 {
                    return Err(header_err(source, ln, "expected 'group <name> <optimizer> <entries>'"));
                }
                let kind = OptimizerKind::parse(toks[1])
                    .ok_or_else(|| header_err(source, ln, format!("unknown optimizer {}", toks[1])))?;
                groups.push(ParamGroup::new(toks[0], kind));
                pending.push(parse_usize(source, ln, Some(toks[2]), "entry count")?);
            }
            "entry" => {
                let toks: Vec<&str> = rest.split(' ').collect();
                let g = groups.len().checked_sub(1).ok_or_else(|| header_err(source, ln, "entry before group"))?;
                if toks.len() != 3 {
                    return Err(header_err(source, ln, "expected 'entry <name> <rows> <cols>'"));
                }
                let rows = parse_usize(source, ln, Some(toks[1]), "rows")?;
                let cols = parse_usize(source, ln, Some(toks[2]), "cols")?;
                shapes.push((g, toks[0].to_string(), rows, cols));
            }
            _ => return Err(header_err(source, ln, format!("unknown header line '{line}'"))),
        }
    }
    let config = config.ok_or_else(|| header_err(source, 0, "missing config line"))?;
    if expected_groups != Some(groups.len()) {
        return Err(header_err(source, 0, "group count does not match header"));
    }
    for (g, want) in pending.iter().enumerate() {
        let got = shapes.iter().filter(|s| s.0 == g).count();
        if got != *want {
            return Err(header_err(source, 0, format!("group {g} lists {got} entries, expected {want}")));
        }
    }
    for (g, name, rows, cols) in shapes {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| header_err(source, 0, "entry size overflows"))?;
        let raw = cur.take(n.checked_mul(8).ok_or_else(|| header_err(source, 0, "entry size overflows"))?, &name)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect();
        groups[g].push(&name, Matrix::from_vec(rows, cols, data)?)?;
    }
    if cur.pos != bytes.len() {
        return Err(header_err(source, 0, format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    let params = ParamSet::new(groups)?;
    let model = GrmModel::from_params(config, params)?;
    Ok(Checkpoint { model, header })
}
