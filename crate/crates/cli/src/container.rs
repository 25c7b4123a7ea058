//! Binary array files with a JSON sidecar.
//!
//! The body starts with three little-endian u64 (rows, cols, arity) followed by
//! rows·cols·arity (re, im) pairs of little-endian f64. Real data stores im = 0.
//! The sidecar (same stem, `.json`) carries the mesh or grid needed to rebuild the value.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use srcstab::domain::{BoundaryMesh, Grid3};
use srcstab::source::SourcePair;
use srcstab::sweep::{FrequencyGrid, FrequencySweep, C64};
use srcstab::synthesis::TimeTrace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sidecar {
    /// rows = nodes, cols = frequency columns (static first). Tangential gradients are not stored.
    Sweep { mesh: BoundaryMesh, grid: FrequencyGrid, has_static: bool },
    /// rows = nodes, cols = time samples.
    Trace { mesh: BoundaryMesh, dt: f64 },
    /// rows = lattice nodes, cols = (f₀, f₁, mask).
    Volume { grid: Grid3, smoothness: u32 },
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub rows: usize,
    pub cols: usize,
    pub arity: usize,
}

impl Header {
    fn len(&self) -> Result<usize> {
        self.rows
            .checked_mul(self.cols)
            .and_then(|n| n.checked_mul(self.arity))
            .context("container dimensions overflow")
    }
}

pub fn write_array(path: &Path, header: Header, body: &[C64], sidecar: &Sidecar) -> Result<()> {
    ensure!(body.len() == header.len()?, "body has {} entries, header wants {}", body.len(), header.len()?);
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    for v in [header.rows, header.cols, header.arity] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for z in body {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    let side = sidecar_path(path);
    std::fs::write(&side, serde_json::to_string_pretty(sidecar)?).with_context(|| format!("writing {}", side.display()))?;
    Ok(())
}

pub fn read_array(path: &Path) -> Result<(Header, Vec<C64>, Sidecar)> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut r = BufReader::new(f);
    let mut word = [0u8; 8];
    let mut dims = [0usize; 3];
    for d in &mut dims {
        r.read_exact(&mut word).context("truncated header")?;
        *d = usize::try_from(u64::from_le_bytes(word))?;
    }
    let header = Header { rows: dims[0], cols: dims[1], arity: dims[2] };
    let n = header.len()?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    ensure!(bytes.len() == 16 * n, "{}: body is {} bytes, expected {}", path.display(), bytes.len(), 16 * n);
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let body = (0..n).map(|i| C64::new(f64_at(16 * i), f64_at(16 * i + 8))).collect();
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).with_context(|| format!("reading {}", side.display()))?;
    Ok((header, body, serde_json::from_str(&text)?))
}

pub fn write_sweep(path: &Path, sw: &FrequencySweep) -> Result<()> {
    let header = Header { rows: sw.nodes(), cols: sw.columns(), arity: sw.arity };
    let side = Sidecar::Sweep { mesh: sw.mesh.clone(), grid: sw.grid.clone(), has_static: sw.has_static };
    write_array(path, header, &sw.values, &side)
}

pub fn read_sweep(path: &Path) -> Result<FrequencySweep> {
    let (h, values, side) = read_array(path)?;
    let Sidecar::Sweep { mesh, grid, has_static } = side else { bail!("{} does not hold a frequency sweep", path.display()) };
    ensure!(h.rows == mesh.len() && h.cols == grid.count + 1, "sweep header does not match its sidecar");
    Ok(FrequencySweep { mesh, grid, arity: h.arity, values, has_static, tangential: None })
}

pub fn write_trace(path: &Path, tr: &TimeTrace) -> Result<()> {
    let header = Header { rows: tr.nodes(), cols: tr.n_t, arity: tr.arity };
    let body: Vec<C64> = tr.values.iter().map(|&v| C64::new(v, 0.0)).collect();
    write_array(path, header, &body, &Sidecar::Trace { mesh: tr.mesh.clone(), dt: tr.dt })
}

pub fn read_trace(path: &Path) -> Result<TimeTrace> {
    let (h, values, side) = read_array(path)?;
    let Sidecar::Trace { mesh, dt } = side else { bail!("{} does not hold a time trace", path.display()) };
    ensure!(h.rows == mesh.len(), "trace header does not match its sidecar");
    Ok(TimeTrace { mesh, arity: h.arity, dt, n_t: h.cols, values: values.iter().map(|z| z.re).collect() })
}

pub fn write_volume(path: &Path, src: &SourcePair) -> Result<()> {
    let a = src.arity;
    let n = src.grid.len();
    let mut body = Vec::with_capacity(3 * n * a);
    for i in 0..n {
        body.extend(src.f0[i * a..(i + 1) * a].iter().map(|&v| C64::new(v, 0.0)));
        body.extend(src.f1[i * a..(i + 1) * a].iter().map(|&v| C64::new(v, 0.0)));
        body.extend((0..a).map(|_| C64::new(if src.mask[i] { 1.0 } else { 0.0 }, 0.0)));
    }
    let header = Header { rows: n, cols: 3, arity: a };
    write_array(path, header, &body, &Sidecar::Volume { grid: src.grid.clone(), smoothness: src.smoothness })
}

pub fn read_volume(path: &Path) -> Result<SourcePair> {
    let (h, values, side) = read_array(path)?;
    let Sidecar::Volume { grid, smoothness } = side else { bail!("{} does not hold a volume", path.display()) };
    ensure!(h.rows == grid.len() && h.cols == 3, "volume header does not match its sidecar");
    let a = h.arity;
    let (mut f0, mut f1, mut mask) = (Vec::with_capacity(h.rows * a), Vec::with_capacity(h.rows * a), Vec::with_capacity(h.rows));
    for row in values.chunks(3 * a) {
        f0.extend(row[..a].iter().map(|z| z.re));
        f1.extend(row[a..2 * a].iter().map(|z| z.re));
        mask.push(row[2 * a].re != 0.0);
    }
    Ok(SourcePair { grid, arity: a, f0, f1, mask, smoothness })
}
