//! On-disk form of a trained sequence.
//!
//! A checkpoint directory holds `manifest.toml` plus one `interval_NNN.bin`
//! per interval. A blob is the parameter vector as little-endian `f64`
//! followed by a little-endian `u64` FNV-1a checksum of those bytes; the
//! manifest repeats the checksum so a swapped blob is caught too.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::influence::InfluenceSpec;
use crate::network::{NetworkSpec, ParamVector};
use crate::oracle::fnv1a;
use crate::problem::Problem;
use crate::trainer::{ComposedSolution, Precision, TrainedInterval, TrainingSummary};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    problem: Problem,
    precision: Precision,
    t_start: f64,
    nodes: Vec<f64>,
    #[serde(default, rename = "interval")]
    intervals: Vec<IntervalEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalEntry {
    index: usize,
    t_span: (f64, f64),
    /// Hex; TOML integers stop at `i64`.
    seed: String,
    blob: String,
    checksum: String,
    parameters: usize,
    spec: NetworkSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    influence: Option<InfluenceSpec>,
    summary: TrainingSummary,
}

pub fn blob_name(index: usize) -> String {
    format!("interval_{index:03}.bin")
}

pub fn encode_blob(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * values.len() + 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let sum = fnv1a(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

/// Values and checksum of a blob; fails if the trailer does not match.
pub fn decode_blob(path: &Path, bytes: &[u8]) -> Result<(Vec<f64>, u64)> {
    if bytes.len() < 8 || bytes.len() % 8 != 0 {
        return Err(Error::format(path, format!("checksum mismatch: blob of {} bytes is truncated", bytes.len())));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    let actual = fnv1a(body);
    if stored != actual {
        return Err(Error::format(path, format!("checksum mismatch: stored {stored:016x}, computed {actual:016x}")));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((values, actual))
}

fn hex(v: u64) -> String {
    format!("{v:016x}")
}

fn unhex(path: &Path, key: &str, s: &str) -> Result<u64> {
    u64::from_str_radix(s, 16).map_err(|_| Error::format(path, format!("`{key}` is not a hex u64: `{s}`")))
}

/// Writes `solution` into `dir`, creating it if needed. Existing blobs with
/// the same names are overwritten.
pub fn save(solution: &ComposedSolution, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut intervals = Vec::with_capacity(solution.intervals.len());
    for iv in &solution.intervals {
        let name = blob_name(iv.index);
        let bytes = encode_blob(&iv.params.values);
        let sum = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
        let path = dir.join(&name);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        intervals.push(IntervalEntry {
            index: iv.index,
            t_span: iv.t_span,
            seed: hex(iv.params.seed),
            blob: name,
            checksum: hex(sum),
            parameters: iv.params.values.len(),
            spec: iv.spec.clone(),
            influence: iv.influence,
            summary: iv.summary.clone(),
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        problem: solution.problem.clone(),
        precision: solution.precision,
        t_start: solution.t_start,
        nodes: solution.nodes(),
        intervals,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::format(dir.join(MANIFEST), e.to_string()))?;
    let path = dir.join(MANIFEST);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn load(dir: &Path) -> Result<ComposedSolution> {
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::format(&mpath, e.message()))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::format(
            &mpath,
            format!(
                "format version {} is not supported (expected {FORMAT_VERSION})",
                manifest.format_version
            ),
        ));
    }
    let mut solution = ComposedSolution::new(manifest.problem, manifest.precision, manifest.t_start);
    for entry in manifest.intervals {
        let bpath = dir.join(&entry.blob);
        let bytes = match fs::read(&bpath) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::format(&bpath, format!("missing blob for interval {}", entry.index)))
            }
            Err(e) => return Err(Error::io(&bpath, e)),
        };
        let (values, sum) = decode_blob(&bpath, &bytes)?;
        if sum != unhex(&mpath, "checksum", &entry.checksum)? {
            return Err(Error::format(
                &bpath,
                format!("checksum mismatch: manifest lists {}, blob has {}", entry.checksum, hex(sum)),
            ));
        }
        entry.spec.validate()?;
        if values.len() != entry.parameters || values.len() != entry.spec.param_count() {
            return Err(Error::format(
                &bpath,
                format!(
                    "{} parameters stored, manifest says {}, architecture needs {}",
                    values.len(),
                    entry.parameters,
                    entry.spec.param_count()
                ),
            ));
        }
        let seed = unhex(&mpath, "seed", &entry.seed)?;
        solution.push(TrainedInterval {
            index: entry.index,
            t_span: entry.t_span,
            spec: entry.spec,
            params: ParamVector { values, seed },
            influence: entry.influence,
            summary: entry.summary,
        })?;
    }
    if solution.nodes() != manifest.nodes {
        return Err(Error::format(&mpath, "`nodes` disagree with the interval spans"));
    }
    Ok(solution)
}
