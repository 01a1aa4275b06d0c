//! Trajectory CSV export and binary state snapshots.
//!
//! Snapshot layout, all little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 8     | magic `RWSNAP\0\0` |
//! | 4     | format version (u32, currently 1) |
//! | 4     | lattice dimension (u32) |
//! | 12    | points per axis (3 × u32) |
//! | 24    | length per axis (3 × f64) |
//! | 4     | fibre dimension (u32) |
//! | 8     | time (f64) |
//! | 8     | number of complex entries (u64) |
//! | 16·n  | entries as (re, im) f64 pairs, site-major |

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::lattice::Grid;
use crate::state::StateVector;
use crate::C64;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"RWSNAP\0\0";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Columns written after `t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvColumns {
    /// `re_i, im_i` for every entry of the state.
    Components,
    /// Total norm, per-fibre-component norms and the indefinite form if any.
    #[default]
    Norms,
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory_csv<W: Write>(out: W, tr: &Trajectory, columns: CsvColumns) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let first = &tr.states[0];
    let mut header = vec!["t".to_string()];
    match columns {
        CsvColumns::Components => {
            for i in 0..first.len() {
                header.push(format!("re_{i}"));
                header.push(format!("im_{i}"));
            }
        }
        CsvColumns::Norms => {
            header.push("norm".into());
            header.extend((0..first.fibre_dim()).map(|a| format!("norm_c{a}")));
            if tr.forms.is_some() {
                header.push("form".into());
            }
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, (t, s)) in tr.times.iter().zip(&tr.states).enumerate() {
        let mut row = vec![fmt_f64(*t)];
        match columns {
            CsvColumns::Components => {
                for v in s.data() {
                    row.push(fmt_f64(v.re));
                    row.push(fmt_f64(v.im));
                }
            }
            CsvColumns::Norms => {
                row.push(fmt_f64(tr.norms[i]));
                let f = s.fibre_dim();
                for a in 0..f {
                    let n: f64 = s.data().iter().skip(a).step_by(f).map(|v| v.norm_sqr()).sum();
                    row.push(fmt_f64(n.sqrt()));
                }
                if let Some(forms) = &tr.forms {
                    row.push(fmt_f64(forms[i]));
                }
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn write_snapshot<W: Write>(mut out: W, state: &StateVector) -> Result<()> {
    let g = state.grid();
    let mut buf = Vec::with_capacity(72 + 16 * state.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    for axis in 0..3 {
        let p = if axis < g.dim() { g.points(axis) } else { 1 };
        buf.extend_from_slice(&(p as u32).to_le_bytes());
    }
    for axis in 0..3 {
        let l = if axis < g.dim() { g.length(axis) } else { 0.0 };
        buf.extend_from_slice(&l.to_le_bytes());
    }
    buf.extend_from_slice(&(state.fibre_dim() as u32).to_le_bytes());
    buf.extend_from_slice(&state.time().to_le_bytes());
    buf.extend_from_slice(&(state.len() as u64).to_le_bytes());
    for v in state.data() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format(format!("snapshot truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(s.try_into().expect("slice has length N"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<StateVector> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if &c.take::<8>()? != SNAPSHOT_MAGIC {
        return Err(Error::Format("not a snapshot file (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let dim = c.u32()? as usize;
    let points = [c.u32()? as usize, c.u32()? as usize, c.u32()? as usize];
    let lengths = [c.f64()?, c.f64()?, c.f64()?];
    let fibre = c.u32()? as usize;
    let time = c.f64()?;
    let n = c.u64()? as usize;
    if dim > 3 {
        return Err(Error::Format(format!("lattice dimension {dim} in snapshot")));
    }
    let grid = if dim == 0 { Grid::single_site() } else { Grid::with_axes(&points[..dim], &lengths[..dim])? };
    if n != grid.num_sites() * fibre {
        return Err(Error::Format(format!("snapshot holds {n} entries, header implies {}", grid.num_sites() * fibre)));
    }
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        data.push(C64::new(c.f64()?, c.f64()?));
    }
    if c.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after snapshot data".into()));
    }
    StateVector::new(grid, fibre, data, time)
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let res = std::fs::write(&tmp, bytes).and_then(|_| std::fs::rename(&tmp, path));
    if res.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    res.map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
