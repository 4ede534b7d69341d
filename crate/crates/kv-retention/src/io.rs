//! File formats: tensor blocks, score vectors, outcome records, and the
//! JSON/CSV artifacts the CLI emits.
//!
//! Value tensors are accepted in two self-describing layouts sharing one
//! logical schema (header `{n, L, H, d, dtype}` plus a row-major payload):
//!
//! * JSON: `{"n":..,"L":..,"H":..,"d":..,"dtype":"f32"|"f64","values":[..]}`
//! * binary: magic `KVTB`, version byte `1`, header `n, L, H, d` as u32
//!   little-endian, a dtype byte (0 = f32, 1 = f64), then the payload in
//!   little-endian row-major order (token, layer, head, dim).
//!
//! The two are distinguished by the magic bytes, not the file name.
//! Whatever the storage dtype, values are widened to f64 on read and all
//! downstream arithmetic runs in f64.
//!
//! All writes go through a temp file in the destination directory plus an
//! atomic rename.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::select::{RetainedSet, ScoreVector};
use crate::signature::ValueTensorBlock;
use crate::stats::{CellResult, ProblemOutcome};

/// Schema tag stamped on every JSON artifact the tool writes.
pub const SCHEMA: &str = "kvr/v1";

const TENSOR_MAGIC: &[u8; 4] = b"KVTB";
const TENSOR_VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct TensorJson {
    n: usize,
    #[serde(rename = "L")]
    layers: usize,
    #[serde(rename = "H")]
    heads: usize,
    d: usize,
    dtype: String,
    values: Vec<f64>,
}

/// Write a path atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Read a value tensor block, auto-detecting binary vs JSON layout.
pub fn read_value_tensor(path: &Path) -> Result<ValueTensorBlock> {
    let mut file = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    let got = file.read(&mut magic)?;
    if got == 4 && &magic == TENSOR_MAGIC {
        read_tensor_binary(&mut file)
    } else {
        let mut rest = Vec::new();
        rest.extend_from_slice(&magic[..got]);
        file.read_to_end(&mut rest)?;
        let t: TensorJson = serde_json::from_slice(&rest)?;
        match t.dtype.as_str() {
            "f32" | "f64" => {}
            other => return Err(Error::Schema(format!("unknown dtype '{other}'"))),
        }
        ValueTensorBlock::new(t.n, t.layers, t.heads, t.d, t.values)
    }
}

fn read_tensor_binary(r: &mut impl Read) -> Result<ValueTensorBlock> {
    let version = r.read_u8()?;
    if version != TENSOR_VERSION {
        return Err(Error::Schema(format!("unsupported tensor version {version}")));
    }
    let n = r.read_u32::<LittleEndian>()? as usize;
    let layers = r.read_u32::<LittleEndian>()? as usize;
    let heads = r.read_u32::<LittleEndian>()? as usize;
    let d = r.read_u32::<LittleEndian>()? as usize;
    let dtype = r.read_u8()?;
    let count = n * layers * heads * d;
    let mut values = Vec::with_capacity(count);
    match dtype {
        0 => {
            for _ in 0..count {
                values.push(r.read_f32::<LittleEndian>()? as f64);
            }
        }
        1 => {
            for _ in 0..count {
                values.push(r.read_f64::<LittleEndian>()?);
            }
        }
        other => return Err(Error::Schema(format!("unknown dtype byte {other}"))),
    }
    ValueTensorBlock::new(n, layers, heads, d, values)
}

/// Write a value tensor block in the binary layout (f64 payload).
pub fn write_value_tensor_binary(path: &Path, block: &ValueTensorBlock) -> Result<()> {
    let mut buf = Vec::with_capacity(18 + block.values.len() * 8);
    buf.extend_from_slice(TENSOR_MAGIC);
    buf.push(TENSOR_VERSION);
    for dim in [block.n, block.layers, block.heads, block.d] {
        buf.write_u32::<LittleEndian>(dim as u32)?;
    }
    buf.push(1u8); // f64
    for v in &block.values {
        buf.write_f64::<LittleEndian>(*v)?;
    }
    write_atomic(path, &buf)
}

/// Write a value tensor block in the JSON layout.
pub fn write_value_tensor_json(path: &Path, block: &ValueTensorBlock) -> Result<()> {
    write_json(
        path,
        &TensorJson {
            n: block.n,
            layers: block.layers,
            heads: block.heads,
            d: block.d,
            dtype: "f64".into(),
            values: block.values.clone(),
        },
    )
}

#[derive(Serialize, Deserialize)]
struct ScoresJson {
    n: usize,
    scores: Vec<f64>,
}

pub fn read_scores(path: &Path) -> Result<ScoreVector> {
    let s: ScoresJson = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if s.scores.len() != s.n {
        return Err(Error::Schema(format!(
            "scores header n={} but {} entries",
            s.n,
            s.scores.len()
        )));
    }
    ScoreVector::new(s.scores)
}

pub fn write_scores(path: &Path, scores: &ScoreVector) -> Result<()> {
    write_json(
        path,
        &ScoresJson {
            n: scores.n,
            scores: scores.scores.clone(),
        },
    )
}

/// Selector result artifact.
#[derive(Debug, Serialize, Deserialize)]
pub struct SelectionOutput {
    pub schema: String,
    pub retained: Vec<usize>,
    pub lambda: f64,
    pub k: usize,
    pub n: usize,
}

impl SelectionOutput {
    pub fn new(set: &RetainedSet, lambda: f64, k: usize, n: usize) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            retained: set.indices.clone(),
            lambda,
            k,
            n,
        }
    }
}

/// Read outcome records from JSONL, one record per line; blank lines are
/// skipped and unknown fields are preserved on each record.
pub fn read_outcomes_jsonl(path: &Path) -> Result<Vec<ProblemOutcome>> {
    let file = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ProblemOutcome = serde_json::from_str(&line)
            .map_err(|e| Error::Schema(format!("line {}: {e}", lineno + 1)))?;
        out.push(record);
    }
    Ok(out)
}

/// Forest-plot CSV: one row per cell with point estimate, CI, p, and the
/// Bonferroni mark.
pub fn forest_csv(cells: &[CellResult]) -> String {
    let mut out = String::from("cell,delta_pp,ci_lo,ci_hi,p,pass\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.label(),
            c.delta_pp,
            c.ci95[0],
            c.ci95[1],
            c.p,
            c.bonferroni_pass
        ));
    }
    out
}

/// Trajectory CSV: step 0 is the end-of-prefill cache, steps 1..T the
/// post-append decode lengths.
pub fn trajectory_csv(trace: &crate::cache::DecodeTrace) -> String {
    let mut out = String::from("step,length\n");
    out.push_str(&format!("0,{}\n", trace.end_of_prefill));
    for (i, len) in trace.lengths.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, len));
    }
    out
}
