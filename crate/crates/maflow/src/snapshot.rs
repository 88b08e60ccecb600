//! Snapshot files: `MAFLOW01` magic, a length-prefixed JSON header, then
//! raw little-endian binary64 payloads in declared order. Round-trips are
//! bit-exact.

use crate::grid::PeriodicGrid;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

const MAGIC_PREFIX: &[u8; 6] = b"MAFLOW";
const MAGIC_VERSION: &[u8; 2] = b"01";

#[derive(Debug, Serialize, Deserialize)]
struct FieldEntry {
    name: String,
    /// Offset into the payload, in f64 units.
    offset: u64,
    len: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    n: usize,
    points: Vec<usize>,
    periods: Vec<f64>,
    t: f64,
    dt_last: f64,
    fields: Vec<FieldEntry>,
}

/// A decoded snapshot: grid geometry, time stamp, and named payloads.
#[derive(Debug)]
pub struct Snapshot {
    pub n: usize,
    pub points: Vec<usize>,
    pub periods: Vec<f64>,
    pub t: f64,
    pub dt_last: f64,
    pub fields: Vec<(String, Vec<f64>)>,
}

impl Snapshot {
    pub fn grid(&self) -> Result<Arc<PeriodicGrid>> {
        PeriodicGrid::new(self.n, &self.points, &self.periods)
    }

    pub fn field(&self, name: &str) -> Result<&[f64]> {
        self.fields
            .iter()
            .find(|(f, _)| f == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::SnapshotFormat(format!("field {name:?} missing")))
    }
}

pub fn write(
    path: &Path,
    grid: &PeriodicGrid,
    t: f64,
    dt_last: f64,
    fields: &[(&str, &[f64])],
) -> Result<()> {
    let mut offset = 0u64;
    let mut entries = Vec::with_capacity(fields.len());
    for (name, data) in fields {
        entries.push(FieldEntry {
            name: (*name).to_string(),
            offset,
            len: data.len() as u64,
        });
        offset += data.len() as u64;
    }
    let header = Header {
        n: grid.dim(),
        points: grid.points().to_vec(),
        periods: grid.periods().to_vec(),
        t,
        dt_last,
        fields: entries,
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MAGIC_PREFIX)?;
    out.write_all(MAGIC_VERSION)?;
    out.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    out.write_all(&header_bytes)?;
    for (_, data) in fields {
        for &v in *data {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Snapshot> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)
        .map_err(|_| Error::SnapshotFormat("file shorter than magic".into()))?;
    if &magic[..6] != MAGIC_PREFIX {
        return Err(Error::SnapshotFormat("bad magic".into()));
    }
    if &magic[6..8] != MAGIC_VERSION {
        return Err(Error::SnapshotVersion(
            String::from_utf8_lossy(&magic[6..8]).into_owned(),
        ));
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes)
        .map_err(|_| Error::SnapshotFormat("truncated header length".into()))?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes)
        .map_err(|_| Error::SnapshotFormat("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&header_bytes)?;

    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    let total: u64 = header.fields.iter().map(|f| f.len).sum();
    if payload.len() != (total as usize) * 8 {
        return Err(Error::SnapshotFormat(format!(
            "payload holds {} bytes, header declares {}",
            payload.len(),
            total * 8
        )));
    }
    let mut fields = Vec::with_capacity(header.fields.len());
    for entry in &header.fields {
        let start = (entry.offset as usize) * 8;
        let end = start + (entry.len as usize) * 8;
        if end > payload.len() {
            return Err(Error::SnapshotFormat(format!(
                "field {:?} extends past payload",
                entry.name
            )));
        }
        let mut values = Vec::with_capacity(entry.len as usize);
        for chunk in payload[start..end].chunks_exact(8) {
            values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        fields.push((entry.name.clone(), values));
    }
    Ok(Snapshot {
        n: header.n,
        points: header.points,
        periods: header.periods,
        t: header.t,
        dt_last: header.dt_last,
        fields,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use std::f64::consts::TAU;

    fn grid() -> Arc<PeriodicGrid> {
        PeriodicGrid::new(2, &[4, 1, 4, 1], &[1.0, 1.0, 2.0, 1.0]).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let g = grid();
        let u = ScalarField::from_fn(&g, |x| (TAU * x[0]).sin() + 0.1 * x[2]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.snap");
        write(&path, &g, 0.62500000000000211, 1e-3, &[("u", u.values())]).unwrap();
        let snap = read(&path).unwrap();
        assert_eq!(snap.t.to_bits(), 0.62500000000000211f64.to_bits());
        assert_eq!(snap.points, vec![4, 1, 4, 1]);
        let loaded = snap.field("u").unwrap();
        assert_eq!(loaded.len(), u.values().len());
        for (a, b) in loaded.iter().zip(u.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_payload_is_detected() {
        let g = grid();
        let u = ScalarField::constant(&g, 1.5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.snap");
        write(&path, &g, 0.0, 0.0, &[("u", u.values())]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        match read(&path) {
            Err(Error::SnapshotFormat(_)) => {}
            other => panic!("expected size mismatch, got {other:?}"),
        }
    }

    #[test]
    fn unknown_version_is_rejected() {
        let g = grid();
        let u = ScalarField::constant(&g, 1.5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.snap");
        write(&path, &g, 0.0, 0.0, &[("u", u.values())]).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[6] = b'9';
        bytes[7] = b'9';
        std::fs::write(&path, &bytes).unwrap();
        match read(&path) {
            Err(Error::SnapshotVersion(v)) => assert_eq!(v, "99"),
            other => panic!("expected version error, got {other:?}"),
        }
    }
}
