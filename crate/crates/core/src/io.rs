//! On-disk formats. Binary artifacts share one little-endian container:
//!
//! ```text
//! offset size field
//!      0    8 magic "SQZTOMO\0"
//!      8    2 version (u16) = 1
//!     10    2 kind (u16)
//!     12    4 metadata length M (u32)
//!     16    8 payload length P (u64)
//!     24    4 CRC-32 (IEEE) of metadata ‖ payload (u32)
//!     28    4 reserved, zero (u32)
//!     32    M metadata, UTF-8 JSON object
//!   32+M    P payload
//! ```
//!
//! Records are also read and written as `phase_rad,quadrature` CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::degradation::{BandPoint, LevelPoint, PurityRow};
use crate::error::{Error, Result};
use crate::fock::{CMatrix, DensityMatrix, C64};
use crate::homodyne::{QuadraturePoint, QuadratureRecord};
use crate::metrics::WignerGrid;
use crate::nn::{Architecture, NetworkModel, SampleInput, TrainingSample, TrainingSet};
use crate::simulate::{CorpusEntry, CorpusSpec};

pub const MAGIC: [u8; 8] = *b"SQZTOMO\0";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;
pub const RECORD_CSV_HEADER: &str = "phase_rad,quadrature";
pub const CORPUS_INDEX: &str = "index.json";

/// Payload kind stored at offset 10.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum PayloadKind {
    DensityMatrix = 1,
    Model = 2,
    Record = 3,
}

impl PayloadKind {
    fn from_u16(v: u16) -> Option<Self> {
        match v {
            1 => Some(Self::DensityMatrix),
            2 => Some(Self::Model),
            3 => Some(Self::Record),
            _ => None,
        }
    }
}

/// Parsed container header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileHeader {
    pub version: u16,
    pub kind: PayloadKind,
    pub metadata_len: u32,
    pub payload_len: u64,
    pub checksum: u32,
}

fn malformed(location: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::malformed(PathBuf::new(), location, reason)
}

/// Fills in the path of a path-less malformed-file error.
fn at_path(e: Error, path: &Path) -> Error {
    match e {
        Error::MalformedFile {
            path: p,
            location,
            reason,
        } if p.as_os_str().is_empty() => Error::malformed(path, location, reason),
        other => other,
    }
}

/// Wraps metadata and payload in the container.
pub fn encode_container(kind: PayloadKind, metadata: &[u8], payload: &[u8]) -> Vec<u8> {
    let mut crc = crc32fast::Hasher::new();
    crc.update(metadata);
    crc.update(payload);
    let mut out = Vec::with_capacity(HEADER_LEN + metadata.len() + payload.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(kind as u16).to_le_bytes());
    out.extend_from_slice(&(metadata.len() as u32).to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&crc.finalize().to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(metadata);
    out.extend_from_slice(payload);
    out
}

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn le_u64(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

fn le_f64(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

/// Validates the container and returns `(header, metadata, payload)`.
pub fn decode_container(bytes: &[u8]) -> Result<(FileHeader, &[u8], &[u8])> {
    if bytes.len() < HEADER_LEN {
        return Err(malformed(
            format!("byte {}", bytes.len()),
            format!("file shorter than the {HEADER_LEN}-byte header"),
        ));
    }
    if bytes[..8] != MAGIC {
        return Err(malformed("byte 0", "bad magic"));
    }
    let version = le_u16(bytes, 8);
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let kind = PayloadKind::from_u16(le_u16(bytes, 10)).ok_or_else(|| {
        malformed(
            "byte 10",
            format!("unknown payload kind {}", le_u16(bytes, 10)),
        )
    })?;
    let metadata_len = le_u32(bytes, 12);
    let payload_len = le_u64(bytes, 16);
    let checksum = le_u32(bytes, 24);
    if le_u32(bytes, 28) != 0 {
        return Err(malformed("byte 28", "reserved field is not zero"));
    }
    let body = (bytes.len() - HEADER_LEN) as u64;
    let declared = u64::from(metadata_len).checked_add(payload_len);
    if declared != Some(body) {
        return Err(malformed(
            format!("byte {}", bytes.len()),
            format!("header declares {metadata_len} + {payload_len} body bytes, file has {body}"),
        ));
    }
    let meta_end = HEADER_LEN + metadata_len as usize;
    let (metadata, payload) = (&bytes[HEADER_LEN..meta_end], &bytes[meta_end..]);
    let mut crc = crc32fast::Hasher::new();
    crc.update(metadata);
    crc.update(payload);
    let computed = crc.finalize();
    if computed != checksum {
        return Err(Error::Checksum {
            stored: checksum,
            computed,
        });
    }
    Ok((
        FileHeader {
            version,
            kind,
            metadata_len,
            payload_len,
            checksum,
        },
        metadata,
        payload,
    ))
}

fn expect_kind(header: &FileHeader, kind: PayloadKind) -> Result<()> {
    if header.kind != kind {
        return Err(malformed(
            "byte 10",
            format!("expected payload kind {kind:?}, found {:?}", header.kind),
        ));
    }
    Ok(())
}

fn parse_metadata<T: DeserializeOwned>(metadata: &[u8]) -> Result<T> {
    serde_json::from_slice(metadata).map_err(|e| {
        malformed(
            format!("metadata line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    Ok(fs::read(path)?)
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".into(),
    });
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

// density matrices

#[derive(Debug, Serialize, Deserialize)]
struct DensityMeta {
    dim: usize,
    layout: String,
}

const DENSITY_LAYOUT: &str = "row-major complex128 (re, im)";

pub fn encode_density(rho: &DensityMatrix) -> Vec<u8> {
    let d = rho.dim();
    let meta = serde_json::to_vec(&DensityMeta {
        dim: d,
        layout: DENSITY_LAYOUT.into(),
    })
    .expect("metadata serializes");
    let mut payload = Vec::with_capacity(16 * d * d);
    for i in 0..d {
        for j in 0..d {
            let z = rho.get(i, j);
            payload.extend_from_slice(&z.re.to_le_bytes());
            payload.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    encode_container(PayloadKind::DensityMatrix, &meta, &payload)
}

pub fn decode_density(bytes: &[u8]) -> Result<DensityMatrix> {
    let (header, meta, payload) = decode_container(bytes)?;
    expect_kind(&header, PayloadKind::DensityMatrix)?;
    let meta: DensityMeta = parse_metadata(meta)?;
    if meta.layout != DENSITY_LAYOUT {
        return Err(malformed(
            "metadata",
            format!("unknown layout {:?}", meta.layout),
        ));
    }
    let d = meta.dim;
    if d.checked_mul(d).and_then(|n| n.checked_mul(16)) != Some(payload.len()) {
        return Err(malformed(
            "payload",
            format!(
                "{} bytes do not hold a {d}×{d} complex matrix",
                payload.len()
            ),
        ));
    }
    let m = CMatrix::from_fn(d, d, |i, j| {
        let at = 16 * (i * d + j);
        C64::new(le_f64(payload, at), le_f64(payload, at + 8))
    });
    DensityMatrix::from_matrix(m).map_err(|e| malformed("payload", e.to_string()))
}

pub fn write_density(path: &Path, rho: &DensityMatrix) -> Result<()> {
    write_atomic(path, &encode_density(rho))
}

pub fn read_density(path: &Path) -> Result<DensityMatrix> {
    decode_density(&read_bytes(path)?).map_err(|e| at_path(e, path))
}

/// JSON view of a density matrix: `{"dim": N, "re": [[..]], "im": [[..]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&DensityMatrix> for DensityJson {
    fn from(rho: &DensityMatrix) -> Self {
        let d = rho.dim();
        let rows = |f: fn(C64) -> f64| {
            (0..d)
                .map(|i| (0..d).map(|j| f(rho.get(i, j))).collect())
                .collect()
        };
        Self {
            dim: d,
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}

impl DensityJson {
    pub fn to_density(&self) -> Result<DensityMatrix> {
        let d = self.dim;
        let shaped = |m: &Vec<Vec<f64>>| m.len() == d && m.iter().all(|r| r.len() == d);
        if !(shaped(&self.re) && shaped(&self.im)) {
            return Err(malformed("re/im", format!("rows are not {d}×{d}")));
        }
        DensityMatrix::from_matrix(CMatrix::from_fn(d, d, |i, j| {
            C64::new(self.re[i][j], self.im[i][j])
        }))
        .map_err(|e| malformed("re/im", e.to_string()))
    }
}

pub fn write_density_json(path: &Path, rho: &DensityMatrix) -> Result<()> {
    write_json(path, &DensityJson::from(rho))
}

pub fn read_density_json(path: &Path) -> Result<DensityMatrix> {
    read_json::<DensityJson>(path)?
        .to_density()
        .map_err(|e| at_path(e, path))
}

// network models

#[derive(Debug, Serialize, Deserialize)]
struct ModelMeta {
    architecture: Architecture,
    param_count: usize,
}

pub fn encode_model(model: &NetworkModel) -> Vec<u8> {
    let meta = serde_json::to_vec(&ModelMeta {
        architecture: model.architecture().clone(),
        param_count: model.param_count(),
    })
    .expect("metadata serializes");
    let payload: Vec<u8> = model
        .weights()
        .iter()
        .flat_map(|w| w.to_le_bytes())
        .collect();
    encode_container(PayloadKind::Model, &meta, &payload)
}

pub fn decode_model(bytes: &[u8]) -> Result<NetworkModel> {
    let (header, meta, payload) = decode_container(bytes)?;
    expect_kind(&header, PayloadKind::Model)?;
    let meta: ModelMeta = parse_metadata(meta)?;
    if meta.param_count.checked_mul(8) != Some(payload.len()) {
        return Err(malformed(
            "payload",
            format!(
                "{} bytes do not hold {} weights",
                payload.len(),
                meta.param_count
            ),
        ));
    }
    let weights = payload.chunks_exact(8).map(|c| le_f64(c, 0)).collect();
    NetworkModel::new(meta.architecture, weights).map_err(|e| malformed("metadata", e.to_string()))
}

pub fn write_model(path: &Path, model: &NetworkModel) -> Result<()> {
    write_atomic(path, &encode_model(model))
}

pub fn read_model(path: &Path) -> Result<NetworkModel> {
    decode_model(&read_bytes(path)?).map_err(|e| at_path(e, path))
}

// quadrature records

#[derive(Debug, Serialize, Deserialize)]
struct RecordMeta {
    len: usize,
}

pub fn encode_record(record: &QuadratureRecord) -> Vec<u8> {
    let meta = serde_json::to_vec(&RecordMeta { len: record.len() }).expect("metadata serializes");
    let mut payload = Vec::with_capacity(16 * record.len());
    for p in record.points() {
        payload.extend_from_slice(&p.phase.to_le_bytes());
        payload.extend_from_slice(&p.value.to_le_bytes());
    }
    encode_container(PayloadKind::Record, &meta, &payload)
}

pub fn decode_record(bytes: &[u8]) -> Result<QuadratureRecord> {
    let (header, meta, payload) = decode_container(bytes)?;
    expect_kind(&header, PayloadKind::Record)?;
    let meta: RecordMeta = parse_metadata(meta)?;
    if meta.len.checked_mul(16) != Some(payload.len()) {
        return Err(malformed(
            "payload",
            format!("{} bytes do not hold {} points", payload.len(), meta.len),
        ));
    }
    let points = payload
        .chunks_exact(16)
        .map(|c| QuadraturePoint {
            phase: le_f64(c, 0),
            value: le_f64(c, 8),
        })
        .collect();
    QuadratureRecord::new(points).map_err(|e| malformed("payload", e.to_string()))
}

pub fn write_record(path: &Path, record: &QuadratureRecord) -> Result<()> {
    write_atomic(path, &encode_record(record))
}

pub fn read_record(path: &Path) -> Result<QuadratureRecord> {
    decode_record(&read_bytes(path)?).map_err(|e| at_path(e, path))
}

/// CSV text with header `phase_rad,quadrature`; values use the shortest
/// representation that parses back to the same `f64`.
pub fn record_to_csv(record: &QuadratureRecord) -> String {
    let mut s = String::with_capacity(48 * (record.len() + 1));
    s.push_str(RECORD_CSV_HEADER);
    s.push('\n');
    for p in record.points() {
        s.push_str(&format!("{:?},{:?}\n", p.phase, p.value));
    }
    s
}

/// Parses record CSV. Blank lines and lines starting with `#` are skipped;
/// phases are taken as given and must lie in `[0, 2π)`.
pub fn record_from_csv(text: &str) -> Result<QuadratureRecord> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    match lines.next() {
        Some((_, h)) if h.trim() == RECORD_CSV_HEADER => {}
        Some((i, h)) => {
            return Err(malformed(
                format!("line {}", i + 1),
                format!(
                    "expected header {RECORD_CSV_HEADER:?}, found {:?}",
                    h.trim()
                ),
            ))
        }
        None => return Err(malformed("line 1", "empty record file")),
    }
    let mut points = Vec::new();
    for (i, line) in lines {
        let loc = || format!("line {}", i + 1);
        let mut fields = line.split(',');
        let mut num = |name: &str| -> Result<f64> {
            let f = fields
                .next()
                .ok_or_else(|| malformed(loc(), format!("missing {name}")))?;
            f.trim()
                .parse::<f64>()
                .map_err(|e| malformed(loc(), format!("{name} {:?}: {e}", f.trim())))
        };
        let phase = num("phase_rad")?;
        let value = num("quadrature")?;
        if fields.next().is_some() {
            return Err(malformed(loc(), "more than two fields"));
        }
        if !(phase.is_finite() && value.is_finite()) {
            return Err(malformed(loc(), "non-finite value"));
        }
        if !(0.0..std::f64::consts::TAU).contains(&phase) {
            return Err(malformed(loc(), format!("phase {phase} outside [0, 2π)")));
        }
        points.push(QuadraturePoint { phase, value });
    }
    if points.is_empty() {
        return Err(malformed("line 2", "record has no data rows"));
    }
    QuadratureRecord::new(points)
}

pub fn write_record_csv(path: &Path, record: &QuadratureRecord) -> Result<()> {
    write_atomic(path, record_to_csv(record).as_bytes())
}

pub fn read_record_csv(path: &Path) -> Result<QuadratureRecord> {
    let bytes = read_bytes(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::malformed(path, format!("byte {}", e.valid_up_to()), "not UTF-8"))?;
    record_from_csv(text).map_err(|e| at_path(e, path))
}

/// Reads a record by extension: `.csv` as CSV, anything else as binary.
pub fn read_record_any(path: &Path) -> Result<QuadratureRecord> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        read_record_csv(path)
    } else {
        read_record(path)
    }
}

// level points and reports

pub const LEVEL_POINTS_CSV_HEADER: &str = "sq_db,as_db";
pub const BAND_CSV_HEADER: &str = "ideal_db,sq_db,as_db,sq_sigma,as_sigma";
pub const PURITY_CSV_HEADER: &str = "ideal_db,sq_db,as_db,purity";
pub const WIGNER_CSV_HEADER: &str = "x,p,w";

/// Parses `sq_db,as_db[,label[,pump_mw]]` CSV (header required; the
/// optional columns are recognized by name). Empty optional cells are
/// `None`.
pub fn level_points_from_csv(text: &str) -> Result<Vec<LevelPoint>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let columns: Vec<String> = match lines.next() {
        Some((i, h)) => {
            let cols: Vec<String> = h.split(',').map(|c| c.trim().to_string()).collect();
            let ok = cols.len() >= 2
                && cols.len() <= 4
                && cols[0] == "sq_db"
                && cols[1] == "as_db"
                && cols.get(2).is_none_or(|c| c == "label")
                && cols.get(3).is_none_or(|c| c == "pump_mw");
            if !ok {
                return Err(malformed(
                    format!("line {}", i + 1),
                    format!(
                        "expected header \"sq_db,as_db[,label,pump_mw]\", found {:?}",
                        h.trim()
                    ),
                ));
            }
            cols
        }
        None => return Err(malformed("line 1", "empty points file")),
    };
    let mut points = Vec::new();
    for (i, line) in lines {
        let loc = || format!("line {}", i + 1);
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(malformed(
                loc(),
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .parse::<f64>()
                .map_err(|e| malformed(loc(), format!("{} {:?}: {e}", columns[k], fields[k])))
        };
        let mut p =
            LevelPoint::new(num(0)?, num(1)?).map_err(|e| malformed(loc(), e.to_string()))?;
        if columns.len() > 2 && !fields[2].is_empty() {
            p.label = Some(fields[2].to_string());
        }
        if columns.len() > 3 && !fields[3].is_empty() {
            p.pump_mw = Some(num(3)?);
        }
        p.validate().map_err(|e| malformed(loc(), e.to_string()))?;
        points.push(p);
    }
    if points.is_empty() {
        return Err(malformed("line 2", "no data rows"));
    }
    Ok(points)
}

pub fn read_level_points_csv(path: &Path) -> Result<Vec<LevelPoint>> {
    let bytes = read_bytes(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::malformed(path, format!("byte {}", e.valid_up_to()), "not UTF-8"))?;
    level_points_from_csv(text).map_err(|e| at_path(e, path))
}

pub fn level_points_to_csv(points: &[LevelPoint]) -> String {
    let mut s = String::from("sq_db,as_db,label,pump_mw\n");
    for p in points {
        let pump = p.pump_mw.map(|v| format!("{v:?}")).unwrap_or_default();
        s.push_str(&format!(
            "{:?},{:?},{},{}\n",
            p.sq_db,
            p.as_db,
            p.label.as_deref().unwrap_or(""),
            pump
        ));
    }
    s
}

fn rows_to_csv<const N: usize>(header: &str, rows: impl Iterator<Item = [f64; N]>) -> String {
    let mut s = format!("{header}\n");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn band_to_csv(band: &[BandPoint]) -> String {
    rows_to_csv(
        BAND_CSV_HEADER,
        band.iter()
            .map(|b| [b.ideal_db, b.sq_db, b.as_db, b.sq_sigma, b.as_sigma]),
    )
}

pub fn purity_to_csv(rows: &[PurityRow]) -> String {
    rows_to_csv(
        PURITY_CSV_HEADER,
        rows.iter()
            .map(|r| [r.ideal_db, r.sq_db, r.as_db, r.purity]),
    )
}

/// One `x,p,w` row per grid node, `x` varying slowest.
pub fn wigner_to_csv(grid: &WignerGrid) -> String {
    rows_to_csv(
        WIGNER_CSV_HEADER,
        grid.x_axis.iter().enumerate().flat_map(|(i, &x)| {
            grid.p_axis
                .iter()
                .enumerate()
                .map(move |(j, &p)| [x, p, grid.values[(i, j)]])
        }),
    )
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

// JSON documents

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| {
        Error::malformed(
            path,
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })
}

// corpora

/// `index.json` of a corpus directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub format: String,
    pub version: u16,
    pub spec: CorpusSpec,
    pub entries: Vec<CorpusIndexEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndexEntry {
    #[serde(flatten)]
    pub entry: CorpusEntry,
    /// Paths relative to the corpus directory.
    pub record: String,
    pub truth: String,
}

pub const CORPUS_FORMAT: &str = "sqztomo-corpus";

fn corpus_paths(index: usize) -> (String, String) {
    (
        format!("records/{index:06}.rec"),
        format!("truths/{index:06}.dm"),
    )
}

/// Writes one corpus entry's record and truth files.
pub fn write_corpus_entry(
    dir: &Path,
    spec: &CorpusSpec,
    entry: &CorpusEntry,
) -> Result<CorpusIndexEntry> {
    let (rec, truth) = corpus_paths(entry.index);
    write_record(&dir.join(&rec), &entry.record(&spec.schedule)?)?;
    write_density(&dir.join(&truth), &entry.truth(spec.dim, spec.max_tail)?)?;
    Ok(CorpusIndexEntry {
        entry: *entry,
        record: rec,
        truth,
    })
}

/// Writes the index last, after every referenced file exists.
pub fn write_corpus_index(
    dir: &Path,
    spec: &CorpusSpec,
    mut entries: Vec<CorpusIndexEntry>,
) -> Result<()> {
    entries.sort_by_key(|e| e.entry.index);
    write_json(
        &dir.join(CORPUS_INDEX),
        &CorpusIndex {
            format: CORPUS_FORMAT.into(),
            version: FORMAT_VERSION,
            spec: spec.clone(),
            entries,
        },
    )
}

pub fn read_corpus_index(dir: &Path) -> Result<CorpusIndex> {
    let path = dir.join(CORPUS_INDEX);
    let index: CorpusIndex = read_json(&path)?;
    if index.format != CORPUS_FORMAT {
        return Err(Error::malformed(
            &path,
            "format",
            format!("unknown format {:?}", index.format),
        ));
    }
    if index.version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: index.version,
            expected: FORMAT_VERSION,
        });
    }
    for e in &index.entries {
        for f in [&e.record, &e.truth] {
            if !dir.join(f).is_file() {
                return Err(Error::malformed(
                    &path,
                    format!("entry {}", e.entry.index),
                    format!("missing file {f}"),
                ));
            }
        }
    }
    Ok(index)
}

/// Loads every record and truth of a corpus directory.
pub fn read_corpus(dir: &Path) -> Result<(CorpusIndex, TrainingSet)> {
    let index = read_corpus_index(dir)?;
    let samples = index
        .entries
        .iter()
        .map(|e| {
            Ok(TrainingSample {
                input: SampleInput::Record(read_record(&dir.join(&e.record))?),
                target: read_density(&dir.join(&e.truth))?,
                metadata: e.entry.spec.metadata(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((index, TrainingSet::new(samples)?))
}
