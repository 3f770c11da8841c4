//! On-disk container for assembled designs: a length-prefixed JSON header
//! (metadata, standardization, outcomes, subject ids) followed by the raw
//! row-major f64 matrix in little-endian order.
//!
//! The header length prefix is a little-endian u64, so a reader can skip
//! straight to the matrix block or memory-map it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{DesignMatrix, FeatureMeta, Standardization};

const MAGIC: &[u8; 8] = b"GOREGDS1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DesignHeader {
    n: usize,
    p: usize,
    meta: FeatureMeta,
    standardization: Standardization,
    y: Vec<f64>,
    subject_ids: Vec<String>,
    total_cap_count: u64,
}

/// Write a design to `path`. Reading it back with [`read_design`] reproduces
/// the design bit-for-bit.
pub fn write_design(design: &DesignMatrix, path: &Path) -> Result<()> {
    let header = DesignHeader {
        n: design.n(),
        p: design.p(),
        meta: design.meta.clone(),
        standardization: design.standardization.clone(),
        y: design.y.to_vec(),
        subject_ids: design.subject_ids.clone(),
        total_cap_count: design.total_cap_count,
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_u64::<LittleEndian>(header_bytes.len() as u64)?;
    w.write_all(&header_bytes)?;
    for &v in design.x.iter() {
        w.write_f64::<LittleEndian>(v)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a design written by [`write_design`].
pub fn read_design(path: &Path) -> Result<DesignMatrix> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::DataIntegrity(format!(
            "{}: not a design file (bad magic)",
            path.display()
        )));
    }
    let header_len = r.read_u64::<LittleEndian>()? as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: DesignHeader = serde_json::from_slice(&header_bytes)?;
    if header.y.len() != header.n || header.subject_ids.len() != header.n {
        return Err(Error::DataIntegrity(format!(
            "{}: header row counts disagree",
            path.display()
        )));
    }
    let mut values = vec![0.0f64; header.n * header.p];
    r.read_f64_into::<LittleEndian>(&mut values)?;
    // trailing bytes mean truncated/concatenated writes
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::DataIntegrity(format!(
            "{}: trailing bytes after matrix block",
            path.display()
        )));
    }
    let x = Array2::from_shape_vec((header.n, header.p), values)
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok(DesignMatrix {
        x,
        y: header.y.into(),
        standardization: header.standardization,
        subject_ids: header.subject_ids,
        meta: header.meta,
        total_cap_count: header.total_cap_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BSplineBasis;
    use crate::empdist::{build_empirical_distribution, BuildOptions, Grid};
    use crate::features::{assemble_design, compute_features, IndexOrder};
    use crate::ingest::ObservationSet;
    use crate::odds::OddsPolicy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_design() -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let grid = Grid::new(20, 9.6).unwrap();
        let basis = BSplineBasis::new(3, 8, 9.6).unwrap();
        let policy = OddsPolicy::default();
        let tensors: Vec<_> = (0..6)
            .map(|i| {
                let values: Vec<f64> = (0..40).map(|_| rng.gen_range(0.0..9.6)).collect();
                let obs = ObservationSet {
                    subject_id: format!("s{i}"),
                    values,
                    outcome: rng.gen_range(-1.0..1.0),
                };
                let dist =
                    build_empirical_distribution(&obs, &grid, BuildOptions::default()).unwrap();
                compute_features(&dist, &obs.subject_id, &basis, policy, IndexOrder::Two).unwrap()
            })
            .collect();
        let outcomes: Vec<f64> = (0..6).map(|i| i as f64 / 2.0).collect();
        assemble_design(&tensors, &outcomes).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let design = sample_design();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("design.bin");
        write_design(&design, &path).unwrap();
        let back = read_design(&path).unwrap();
        assert_eq!(design.x, back.x);
        assert_eq!(design.y, back.y);
        assert_eq!(design.subject_ids, back.subject_ids);
        assert_eq!(design.meta, back.meta);
        assert_eq!(design.standardization, back.standardization);
        assert_eq!(design.total_cap_count, back.total_cap_count);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOTADSGNxxxxxxxxxxxxxxxx").unwrap();
        assert!(matches!(read_design(&path), Err(Error::DataIntegrity(_))));
    }

    #[test]
    fn truncated_matrix_is_rejected() {
        let design = sample_design();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("design.bin");
        write_design(&design, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(read_design(&path).is_err());
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let design = sample_design();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("design.bin");
        write_design(&design, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&[0u8; 4]);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_design(&path), Err(Error::DataIntegrity(_))));
    }
}
