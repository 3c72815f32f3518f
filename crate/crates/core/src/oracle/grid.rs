use std::hash::Hasher;
use std::io::{Read, Write};
use std::path::Path;

use fnv::FnvHasher;
use ndarray::Array2;

use crate::error::{Error, Result};

pub const GRID_MAGIC: &[u8; 8] = b"PDEGRID1";
pub const GRID_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 * 3 + 8 * 4;

/// Dense solution samples on a uniform periodic-in-`x` grid.
///
/// `x` nodes are `x_lo + j (x_hi - x_lo) / nx` for `j < nx` (the right end
/// is the periodic image of the left); `t` nodes include both ends.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceGrid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    /// `nt x nx`, row `k` at `t_k`.
    pub values: Array2<f64>,
    /// Free-form provenance (problem, resolution, step); not stored on disk.
    pub metadata: Vec<(String, String)>,
}

impl ReferenceGrid {
    pub fn new(x_span: (f64, f64), t_span: (f64, f64), values: Array2<f64>) -> Result<Self> {
        let (nt, nx) = values.dim();
        if nx < 2 || nt < 2 {
            return Err(Error::Config(format!("grid needs at least 2x2 nodes (got {nt}x{nx})")));
        }
        if !(x_span.0 < x_span.1 && t_span.0 < t_span.1) {
            return Err(Error::Config(format!("empty grid box {x_span:?} x {t_span:?}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: "reference grid values".into(),
            });
        }
        Ok(ReferenceGrid {
            x_lo: x_span.0,
            x_hi: x_span.1,
            t_lo: t_span.0,
            t_hi: t_span.1,
            values,
            metadata: Vec::new(),
        })
    }

    pub fn nx(&self) -> usize {
        self.values.ncols()
    }

    pub fn nt(&self) -> usize {
        self.values.nrows()
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.nx() as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t_hi - self.t_lo) / (self.nt() - 1) as f64
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.nx()).map(|j| self.x_lo + j as f64 * self.dx()).collect()
    }

    pub fn t_nodes(&self) -> Vec<f64> {
        (0..self.nt()).map(|k| self.t_lo + k as f64 * self.dt()).collect()
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Bilinear interpolation; `x` wraps periodically.
    pub fn interpolate(&self, x: f64, t: f64) -> Result<f64> {
        if !(t >= self.t_lo && t <= self.t_hi) || !x.is_finite() {
            return Err(Error::OutOfRange(format!(
                "({x}, {t}) outside t in [{}, {}]",
                self.t_lo, self.t_hi
            )));
        }
        let (nx, nt) = (self.nx(), self.nt());
        let period = self.x_hi - self.x_lo;
        let sx = (x - self.x_lo).rem_euclid(period) / self.dx();
        let j = (sx.floor() as usize).min(nx - 1);
        let fx = sx - j as f64;
        let st = (t - self.t_lo) / self.dt();
        let k = (st.floor() as usize).min(nt - 2);
        let ft = st - k as f64;
        let v = &self.values;
        let j1 = (j + 1) % nx;
        let lo = v[[k, j]] + fx * (v[[k, j1]] - v[[k, j]]);
        let hi = v[[k + 1, j]] + fx * (v[[k + 1, j1]] - v[[k + 1, j]]);
        Ok(lo + ft * (hi - lo))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.values.len() + 8);
        out.extend_from_slice(GRID_MAGIC);
        for v in [GRID_VERSION, self.nx() as u32, self.nt() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in [self.x_lo, self.x_hi, self.t_lo, self.t_hi] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let start = out.len();
        for v in self.values.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let sum = fnv1a(&out[start..]);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    /// Parses the binary grid format; `path` is used only in error messages.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::format(path, reason);
        if bytes.len() < HEADER_LEN {
            return Err(bad(format!("truncated header ({} bytes)", bytes.len())));
        }
        if &bytes[..8] != GRID_MAGIC {
            return Err(bad("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(8);
        if version != GRID_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let (nx, nt) = (u32_at(12) as usize, u32_at(16) as usize);
        let count = nx
            .checked_mul(nt)
            .ok_or_else(|| bad(format!("grid size {nt}x{nx} overflows")))?;
        let expected = HEADER_LEN + 8 * count + 8;
        if bytes.len() != expected {
            return Err(bad(format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let body = &bytes[HEADER_LEN..HEADER_LEN + 8 * count];
        let stored = u64::from_le_bytes(bytes[expected - 8..].try_into().expect("8 bytes"));
        if fnv1a(body) != stored {
            return Err(bad("checksum mismatch".into()));
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let values = Array2::from_shape_vec((nt, nx), values).expect("sized above");
        ReferenceGrid::new((f64_at(20), f64_at(28)), (f64_at(36), f64_at(44)), values)
            .map_err(|e| bad(e.to_string()))
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

pub fn save_grid(grid: &ReferenceGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&grid.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<ReferenceGrid> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    ReferenceGrid::from_bytes(&bytes, path)
}
