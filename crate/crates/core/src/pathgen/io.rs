//! Path files.
//!
//! CSV: `#`-prefixed header lines (the last of which is `# header: {json}`),
//! then a column row `t,x1,x2[,dx2]` and one row per grid point.
//!
//! Binary: magic `WNDP`, `u32` version, `u32` header length, the JSON header,
//! `u64` point count, then each column as little-endian `f64` (`x1`, `x2`,
//! and `dx2` when the header says so).

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::{Backend, GridSpec, SamplePath, SamplerDiagnostics, Smoothing};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"WNDP";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathHeader {
    pub model_hash: Option<String>,
    pub seed: u64,
    pub replication: u64,
    pub backend: Option<Backend>,
    pub horizon: f64,
    pub n: usize,
    pub has_dx2: bool,
    #[serde(default)]
    pub diagnostics: SamplerDiagnostics,
    #[serde(default)]
    pub smoothing: Option<Smoothing>,
    #[serde(default)]
    pub process_independent_z: bool,
}

impl PathHeader {
    pub fn of(path: &SamplePath, model_hash: Option<String>) -> Self {
        PathHeader {
            model_hash,
            seed: path.seed,
            replication: path.replication,
            backend: path.backend,
            horizon: path.grid.horizon,
            n: path.grid.n,
            has_dx2: path.dx2.is_some(),
            diagnostics: path.diagnostics.clone(),
            smoothing: path.smoothing.clone(),
            process_independent_z: path.process_independent_z,
        }
    }

    fn into_path(self, x1: Vec<f64>, x2: Vec<f64>, dx2: Option<Vec<f64>>) -> Result<SamplePath> {
        let grid = GridSpec::new(self.horizon, self.n)?;
        let mut p = SamplePath::from_data(grid, x1, x2)?;
        p.dx2 = dx2;
        p.seed = self.seed;
        p.replication = self.replication;
        p.backend = self.backend;
        p.diagnostics = self.diagnostics;
        p.smoothing = self.smoothing;
        p.process_independent_z = self.process_independent_z;
        Ok(p)
    }
}

pub fn write_csv(path: &SamplePath, model_hash: Option<String>, mut w: impl Write) -> Result<()> {
    let header = PathHeader::of(path, model_hash);
    writeln!(w, "# winding sample path")?;
    writeln!(w, "# header: {}", serde_json::to_string(&header)?)?;
    let has_d = path.dx2.is_some();
    writeln!(w, "{}", if has_d { "t,x1,x2,dx2" } else { "t,x1,x2" })?;
    for i in 0..path.grid.n {
        write!(w, "{},{},{}", path.grid.time(i), path.x1[i], path.x2[i])?;
        if let Some(d) = &path.dx2 {
            write!(w, ",{}", d[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Read a CSV path. The JSON header is optional: without it the grid is taken
/// from the `t` column, which must be uniform.
pub fn read_csv(r: impl BufRead) -> Result<SamplePath> {
    let mut header: Option<PathHeader> = None;
    let mut columns: Option<Vec<String>> = None;
    let mut data: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(json) = rest.trim().strip_prefix("header:") {
                header = Some(serde_json::from_str(json.trim())?);
            }
            continue;
        }
        if columns.is_none() {
            let cols: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            for need in ["t", "x1", "x2"] {
                if !cols.iter().any(|c| c == need) {
                    return Err(Error::Config(format!("path CSV lacks a {need:?} column")));
                }
            }
            data = vec![Vec::new(); cols.len()];
            columns = Some(cols);
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != data.len() {
            return Err(Error::Config(format!(
                "line {}: expected {} fields",
                lineno + 1,
                data.len()
            )));
        }
        for (col, f) in data.iter_mut().zip(fields) {
            col.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?,
            );
        }
    }
    let cols = columns.ok_or_else(|| Error::Config("path CSV has no column row".into()))?;
    let take = |name: &str| cols.iter().position(|c| c == name).map(|i| data[i].clone());
    let t = take("t").unwrap_or_default();
    let (x1, x2) = (take("x1").unwrap_or_default(), take("x2").unwrap_or_default());
    let dx2 = take("dx2");
    match header {
        Some(h) => h.into_path(x1, x2, dx2),
        None => {
            if t.len() < 2 {
                return Err(Error::Config("path CSV needs at least two rows".into()));
            }
            let grid = GridSpec::new(t[t.len() - 1] - t[0], t.len())?;
            let dt = grid.dt();
            if t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
                return Err(Error::Config("path CSV time column is not uniform".into()));
            }
            let mut p = SamplePath::from_data(grid, x1, x2)?;
            p.dx2 = dx2;
            Ok(p)
        }
    }
}

pub fn write_binary(path: &SamplePath, model_hash: Option<String>, mut w: impl Write) -> Result<()> {
    let header = serde_json::to_vec(&PathHeader::of(path, model_hash))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    w.write_all(&(path.grid.n as u64).to_le_bytes())?;
    let mut cols = vec![&path.x1, &path.x2];
    if let Some(d) = &path.dx2 {
        cols.push(d);
    }
    for col in cols {
        for v in col {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_binary(mut r: impl Read) -> Result<SamplePath> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Config("not a path file (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Config(format!("unsupported path file version {version}")));
    }
    let len = read_u32(&mut r)? as usize;
    let mut h = vec![0u8; len];
    r.read_exact(&mut h)?;
    let header: PathHeader = serde_json::from_slice(&h)?;
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    let n = u64::from_le_bytes(b) as usize;
    if n != header.n {
        return Err(Error::Config(format!(
            "point count {n} disagrees with header {}",
            header.n
        )));
    }
    let mut col = || -> Result<Vec<f64>> {
        (0..n)
            .map(|_| {
                r.read_exact(&mut b)?;
                Ok(f64::from_le_bytes(b))
            })
            .collect()
    };
    let x1 = col()?;
    let x2 = col()?;
    let dx2 = if header.has_dx2 { Some(col()?) } else { None };
    header.into_path(x1, x2, dx2)
}
