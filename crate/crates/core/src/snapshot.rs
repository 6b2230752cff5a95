//! Binary field snapshots with a JSON sidecar.
//!
//! Layout (little endian): magic `AXBL`, format version `u16`, field kind
//! `u16`, `n: u32`, component count `u32`, `L: f64`, then `components * n^3`
//! `f64` samples, each component row-major. The sidecar `<file>.json` holds
//! time stamp and provenance. Both files are written to a temporary name and
//! renamed into place.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const MAGIC: &[u8; 4] = b"AXBL";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Scalar,
    Density,
    Velocity,
    Vorticity,
    Zeta,
    Gamma,
}

impl FieldKind {
    fn code(self) -> u16 {
        match self {
            FieldKind::Scalar => 0,
            FieldKind::Density => 1,
            FieldKind::Velocity => 2,
            FieldKind::Vorticity => 3,
            FieldKind::Zeta => 4,
            FieldKind::Gamma => 5,
        }
    }

    fn from_code(c: u16) -> Result<Self> {
        Ok(match c {
            0 => FieldKind::Scalar,
            1 => FieldKind::Density,
            2 => FieldKind::Velocity,
            3 => FieldKind::Vorticity,
            4 => FieldKind::Zeta,
            5 => FieldKind::Gamma,
            _ => return Err(Error::Format(format!("unknown field kind {c}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub time: f64,
    pub provenance: String,
    pub kind: FieldKind,
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub components: usize,
    pub version: u16,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub meta: SnapshotMeta,
    pub components: Vec<ScalarField>,
}

impl Snapshot {
    pub fn scalar(u: &ScalarField, kind: FieldKind, time: f64, provenance: &str) -> Self {
        Self { meta: meta(u.grid(), kind, 1, time, provenance), components: vec![u.clone()] }
    }

    pub fn vector(v: &VectorField, kind: FieldKind, time: f64, provenance: &str) -> Self {
        Self { meta: meta(v.grid(), kind, 3, time, provenance), components: v.comps.to_vec() }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.meta.n, self.meta.half_width)
    }

    pub fn into_scalar(mut self) -> Result<ScalarField> {
        if self.components.len() != 1 {
            return Err(Error::Format(format!("expected 1 component, found {}", self.components.len())));
        }
        Ok(self.components.remove(0))
    }

    pub fn into_vector(self) -> Result<VectorField> {
        let c: [ScalarField; 3] = self
            .components
            .try_into()
            .map_err(|v: Vec<ScalarField>| Error::Format(format!("expected 3 components, found {}", v.len())))?;
        VectorField::new(c)
    }
}

fn meta(g: &Grid, kind: FieldKind, components: usize, time: f64, provenance: &str) -> SnapshotMeta {
    SnapshotMeta {
        time,
        provenance: provenance.to_string(),
        kind,
        n: g.n,
        half_width: g.half_width,
        components,
        version: VERSION,
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn encode(s: &Snapshot) -> Vec<u8> {
    let m = &s.meta;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.components * m.n.pow(3));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&m.kind.code().to_le_bytes());
    out.extend_from_slice(&(m.n as u32).to_le_bytes());
    out.extend_from_slice(&(m.components as u32).to_le_bytes());
    out.extend_from_slice(&m.half_width.to_le_bytes());
    for c in &s.components {
        for x in c.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// Decodes the binary payload; time and provenance come from the sidecar.
pub fn decode(bytes: &[u8]) -> Result<(FieldKind, Grid, Vec<ScalarField>)> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing AXBL header".into()));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u16_at(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let kind = FieldKind::from_code(u16_at(6))?;
    let n = u32_at(8) as usize;
    let comps = u32_at(12) as usize;
    let l = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let grid = Grid::new(n, l)?;
    let need = HEADER_LEN + 8 * comps * grid.len();
    if bytes.len() != need {
        return Err(Error::Format(format!("payload is {} bytes, header implies {need}", bytes.len())));
    }
    let mut fields = Vec::with_capacity(comps);
    for c in 0..comps {
        let base = HEADER_LEN + 8 * c * grid.len();
        let data = bytes[base..base + 8 * grid.len()]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        fields.push(ScalarField::new(grid, data)?);
    }
    Ok((kind, grid, fields))
}

pub fn write(path: &Path, s: &Snapshot) -> Result<()> {
    write_atomic(path, &encode(s))?;
    write_atomic(&sidecar_path(path), &serde_json::to_vec_pretty(&s.meta)?)
}

pub fn read(path: &Path) -> Result<Snapshot> {
    let (kind, grid, components) = decode(&fs::read(path)?)?;
    let side = sidecar_path(path);
    let meta = if side.exists() {
        let m: SnapshotMeta = serde_json::from_slice(&fs::read(&side)?)?;
        if m.n != grid.n || m.half_width != grid.half_width || m.kind != kind || m.components != components.len() {
            return Err(Error::Format(format!("sidecar {} disagrees with binary header", side.display())));
        }
        m
    } else {
        meta(&grid, kind, components.len(), 0.0, "")
    };
    Ok(Snapshot { meta, components })
}
