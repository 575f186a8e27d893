//! Field files: one JSON header line, then raw little-endian f64 samples.
//!
//! ```text
//! {"format":"nlp-field","version":1,"spec":{...},"rank":"vector","endianness":"little","dtype":"f64","layout":"t,c,i,j,k"}\n
//! <nt * components * nx * ny * nz little-endian f64 values>
//! ```
//!
//! The payload is row-major over `(t, c, i, j, k)`, `k` fastest. Symmetric
//! tensors store `xx, xy, xz, yy, yz, zz`. Static fields have no `time` entry
//! in `spec` and `nt = 1`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::data::{GridField, Rank};
use super::grid::GridSpec;
use crate::error::{Error, Result};

pub const FORMAT: &str = "nlp-field";
pub const VERSION: u32 = 1;
pub const LAYOUT: &str = "t,c,i,j,k";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub spec: GridSpec,
    pub rank: Rank,
    pub endianness: String,
    pub dtype: String,
    pub layout: String,
}

impl Header {
    pub fn for_field(f: &GridField) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            spec: f.spec.clone(),
            rank: f.rank,
            endianness: "little".into(),
            dtype: "f64".into(),
            layout: LAYOUT.into(),
        }
    }

    pub fn sample_count(&self) -> usize {
        self.spec.len() * self.spec.nt() * self.rank.components()
    }

    fn validate(&self) -> Result<()> {
        if self.format != FORMAT {
            return Err(Error::Format(format!("unknown format tag {:?}", self.format)));
        }
        if self.version != VERSION {
            return Err(Error::Format(format!("unsupported version {}", self.version)));
        }
        if self.endianness != "little" || self.dtype != "f64" || self.layout != LAYOUT {
            return Err(Error::Format("only little-endian f64 t,c,i,j,k payloads are supported".into()));
        }
        GridSpec::new(self.spec.origin, self.spec.spacing, self.spec.counts)?;
        Ok(())
    }
}

pub fn write_field(path: &Path, f: &GridField) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer(&mut out, &Header::for_field(f))?;
    out.write_all(b"\n")?;
    for v in &f.data {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_header(path: &Path) -> Result<Header> {
    let mut r = BufReader::new(fs::File::open(path)?);
    read_header_from(&mut r)
}

fn read_header_from<R: BufRead>(r: &mut R) -> Result<Header> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("missing header terminator".into()));
    }
    let header: Header = serde_json::from_slice(&line[..line.len() - 1])
        .map_err(|e| Error::Format(format!("bad field header: {e}")))?;
    header.validate()?;
    Ok(header)
}

pub fn read_field(path: &Path) -> Result<GridField> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let header = read_header_from(&mut r)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let want = header.sample_count() * 8;
    if bytes.len() != want {
        return Err(Error::Format(format!("payload has {} bytes, expected {want}", bytes.len())));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    GridField::from_data(header.spec, header.rank, data)
}

/// Per-trajectory index written next to the per-time field files.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub name: String,
    pub spec: GridSpec,
    pub rank: Rank,
    pub times: Vec<f64>,
    pub files: Vec<String>,
}

/// Writes each time slice of `f` as `<stem>_tNNNN.nlpf` plus `<stem>.manifest.json`.
pub fn write_trajectory(dir: &Path, stem: &str, f: &GridField) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let times = f.times();
    let mut files = Vec::with_capacity(times.len());
    for n in 0..f.nt() {
        let name = format!("{stem}_t{n:04}.nlpf");
        write_field(&dir.join(&name), &f.time_slice(n))?;
        files.push(name);
    }
    let manifest = Manifest {
        format: "nlp-trajectory".into(),
        name: stem.into(),
        spec: f.spec.clone(),
        rank: f.rank,
        times,
        files,
    };
    let path = dir.join(format!("{stem}.manifest.json"));
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

pub fn read_trajectory(manifest: &Path) -> Result<GridField> {
    let m: Manifest = serde_json::from_str(&fs::read_to_string(manifest)?)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let slices = m
        .files
        .iter()
        .map(|name| read_field(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    match m.spec.time {
        Some(axis) => GridField::stack(&slices, axis),
        None => slices.into_iter().next().ok_or_else(|| Error::Format("empty manifest".into())),
    }
}

/// Summary statistics printed by `nlp field info`.
#[derive(Clone, Debug, Serialize)]
pub struct FieldInfo {
    pub header: Header,
    pub min: f64,
    pub max: f64,
    pub max_magnitude: f64,
    pub finite: bool,
}

pub fn field_info(path: &Path) -> Result<FieldInfo> {
    let f = read_field(path)?;
    let (min, max) = f
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    Ok(FieldInfo {
        header: Header::for_field(&f),
        min,
        max,
        max_magnitude: f.max_magnitude(),
        finite: f.is_finite(),
    })
}
