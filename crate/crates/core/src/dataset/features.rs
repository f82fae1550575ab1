use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{AdqError, Result};

pub const FEATURE_MAGIC: [u8; 4] = *b"ADQF";
pub const FEATURE_VERSION: u32 = 1;
/// magic + version + M (u64) + d (u32)
pub const FEATURE_HEADER_LEN: u64 = 20;

/// `M` items with `d`-dimensional feature rows. Item ids are the dense row
/// indices `0..M`.
///
/// Values are stored as `f32`; every consumer widens them to `f64` before
/// accumulating.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    rows: usize,
    dim: usize,
    values: Vec<f32>,
    labels: Option<Vec<u32>>,
}

impl FeatureTable {
    pub fn new(rows: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(AdqError::InvalidInput(format!(
                "feature table must be non-empty, got {rows}x{dim}"
            )));
        }
        if values.len() != rows * dim {
            return Err(AdqError::LengthMismatch {
                left: values.len(),
                right: rows * dim,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(AdqError::NonFiniteValue {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(FeatureTable {
            rows,
            dim,
            values,
            labels: None,
        })
    }

    /// Builds a table from `f64` rows, rounding each entry to `f32`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(AdqError::InvalidInput(format!(
                    "row {i} has {} entries, expected {dim}",
                    r.len()
                )));
            }
            values.extend(r.iter().map(|&v| v as f32));
        }
        FeatureTable::new(rows.len(), dim, values)
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != self.rows {
            return Err(AdqError::LengthMismatch {
                left: labels.len(),
                right: self.rows,
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Item count `M`.
    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// Feature dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> {
        0..self.rows as u32
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn row(&self, id: u32) -> Result<&[f32]> {
        let i = id as usize;
        if i >= self.rows {
            return Err(AdqError::UnknownId(id));
        }
        Ok(&self.values[i * self.dim..(i + 1) * self.dim])
    }

    pub fn row_f64(&self, id: u32) -> Result<Vec<f64>> {
        Ok(self.row(id)?.iter().map(|&v| v as f64).collect())
    }

    /// Mean feature vector over all items.
    pub fn centroid(&self) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.dim];
        for row in self.values.chunks_exact(self.dim) {
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += v as f64;
            }
        }
        acc.iter_mut().for_each(|a| *a /= self.rows as f64);
        acc
    }

    /// Encodes the table in the `ADQF` container.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FEATURE_HEADER_LEN as usize + self.values.len() * 4);
        out.extend_from_slice(&FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Decodes an `ADQF` container. `origin` is only used in error messages.
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let truncated = |expected: u64| AdqError::TruncatedFile {
            offset: bytes.len() as u64,
            expected,
        };
        if bytes.len() < 4 {
            return Err(truncated(FEATURE_HEADER_LEN));
        }
        let mut found = [0u8; 4];
        found.copy_from_slice(&bytes[..4]);
        if found != FEATURE_MAGIC {
            return Err(AdqError::BadMagic {
                path: origin.to_path_buf(),
                expected: FEATURE_MAGIC,
                found,
            });
        }
        if bytes.len() < FEATURE_HEADER_LEN as usize {
            return Err(truncated(FEATURE_HEADER_LEN));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FEATURE_VERSION {
            return Err(AdqError::UnsupportedVersion(version));
        }
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as u64;
        let expected = rows
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(FEATURE_HEADER_LEN))
            .ok_or_else(|| AdqError::parse("feature header", "M*d overflows"))?;
        if (bytes.len() as u64) < expected {
            return Err(truncated(expected));
        }
        if (bytes.len() as u64) > expected {
            return Err(AdqError::parse(
                "feature file",
                format!("{} trailing bytes", bytes.len() as u64 - expected),
            ));
        }
        let values: Vec<f32> = bytes[FEATURE_HEADER_LEN as usize..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        FeatureTable::new(rows as usize, dim as usize, values)
    }
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| AdqError::io(path, e))?;
    FeatureTable::from_bytes(&bytes, path)
}

pub fn write_features(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| AdqError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&table.to_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| AdqError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> FeatureTable {
        FeatureTable::new(3, 2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.adqf");
        write_features(&small(), &path).unwrap();
        let back = load_features(&path).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back.dim(), 2);
        assert_eq!(back, small());
    }

    #[test]
    fn truncated_mid_row() {
        let mut bytes = small().to_bytes();
        bytes.truncate(bytes.len() - 2);
        match FeatureTable::from_bytes(&bytes, Path::new("x")) {
            Err(AdqError::TruncatedFile { offset, expected }) => {
                assert_eq!(offset, 42);
                assert_eq!(expected, 44);
            }
            other => panic!("expected TruncatedFile, got {other:?}"),
        }
    }

    #[test]
    fn nan_row_is_named() {
        let mut values = vec![0.5f32; 10 * 3];
        values[7 * 3 + 1] = f32::NAN;
        let mut bytes = FeatureTable::new(10, 3, vec![0.0; 30]).unwrap().to_bytes();
        for (i, v) in values.iter().enumerate() {
            let at = FEATURE_HEADER_LEN as usize + 4 * i;
            bytes[at..at + 4].copy_from_slice(&v.to_le_bytes());
        }
        match FeatureTable::from_bytes(&bytes, Path::new("x")) {
            Err(AdqError::NonFiniteValue { row, col }) => assert_eq!((row, col), (7, 1)),
            other => panic!("expected NonFiniteValue, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic() {
        let mut bytes = small().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            FeatureTable::from_bytes(&bytes, Path::new("x")),
            Err(AdqError::BadMagic { .. })
        ));
    }

    #[test]
    fn empty_path_is_io_failure() {
        assert!(matches!(
            write_features(&small(), ""),
            Err(AdqError::Io { .. })
        ));
    }

    #[test]
    fn large_table_file_size() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f32> = (0..10_000 * 64).map(|_| rng.random::<f32>() - 0.5).collect();
        let table = FeatureTable::new(10_000, 64, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.adqf");
        write_features(&table, &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 20 + 10_000 * 64 * 4);
        assert_eq!(load_features(&path).unwrap(), table);
    }

    proptest! {
        #[test]
        fn bytes_round_trip_bit_exact(
            rows in 1usize..20,
            dim in 1usize..9,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f32> = (0..rows * dim)
                .map(|_| f32::from_bits(rng.random::<u32>()))
                .map(|v| if v.is_finite() { v } else { 1.0 })
                .collect();
            let t = FeatureTable::new(rows, dim, values).unwrap();
            let back = FeatureTable::from_bytes(&t.to_bytes(), Path::new("p")).unwrap();
            let a: Vec<u32> = t.values().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.values().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
