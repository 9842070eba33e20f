//! `ADAPTFV1` dense feature files.
//!
//! Layout: 8-byte magic, `n: u32 LE`, `d: u32 LE`, then `n * d` little-endian
//! `f32` values in row-major order. Total length is exactly `16 + 4 n d`.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::DataError;

pub const FEATURE_MAGIC: &[u8; 8] = b"ADAPTFV1";
pub const HEADER_LEN: usize = 16;

/// Row-major matrix of raw backbone features, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f32>) -> Result<Self, DataError> {
        if d == 0 {
            return Err(DataError::ZeroDimension);
        }
        if data.len() != n * d {
            return Err(DataError::Shape {
                expected: n * d,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(DataError::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        Ok(Self { n, d, data })
    }

    pub fn empty(d: usize) -> Result<Self, DataError> {
        Self::new(0, d, Vec::new())
    }

    /// Builds a matrix from `f64` rows, rounding each entry to `f32`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], d: usize) -> Result<Self, DataError> {
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            let r = r.as_ref();
            if r.len() != d {
                return Err(DataError::Shape {
                    expected: d,
                    got: r.len(),
                });
            }
            data.extend(r.iter().map(|&x| x as f32));
        }
        Self::new(rows.len(), d, data)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&x| x as f64).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.d)
    }

    /// New matrix holding the listed rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self, DataError> {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            if i >= self.n {
                return Err(DataError::RowOutOfRange { row: i, n: self.n });
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(idx.len(), self.d, data)
    }
}

pub fn encode_features(matrix: &FeatureMatrix) -> Result<Vec<u8>, DataError> {
    let n = u32::try_from(matrix.n).map_err(|_| DataError::TooLarge(matrix.n))?;
    let d = u32::try_from(matrix.d).map_err(|_| DataError::TooLarge(matrix.d))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * matrix.data.len());
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&d.to_le_bytes());
    for x in &matrix.data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureMatrix, DataError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 8 && &bytes[..8] != FEATURE_MAGIC {
            return Err(DataError::BadMagic);
        }
        return Err(DataError::Truncated {
            expected: HEADER_LEN,
            got: bytes.len(),
        });
    }
    if &bytes[..8] != FEATURE_MAGIC {
        return Err(DataError::BadMagic);
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if d == 0 {
        return Err(DataError::ZeroDimension);
    }
    let expected = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_mul(4))
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or(DataError::TooLarge(n))?;
    if bytes.len() < expected {
        return Err(DataError::Truncated {
            expected,
            got: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(DataError::TrailingBytes {
            expected,
            got: bytes.len(),
        });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMatrix::new(n, d, data)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix, DataError> {
    let bytes = fs::read(path.as_ref()).map_err(|e| DataError::io(path.as_ref(), e))?;
    decode_features(&bytes)
}

pub fn write_features(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<(), DataError> {
    let bytes = encode_features(matrix)?;
    let mut f = fs::File::create(path.as_ref()).map_err(|e| DataError::io(path.as_ref(), e))?;
    f.write_all(&bytes)
        .map_err(|e| DataError::io(path.as_ref(), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row() {
        let m = FeatureMatrix::new(1, 2, vec![3.0, 4.0]).unwrap();
        let bytes = encode_features(&m).unwrap();
        assert_eq!(bytes.len(), 16 + 8);
        let back = decode_features(&bytes).unwrap();
        assert_eq!(back.row(0), &[3.0, 4.0]);
    }

    #[test]
    fn empty_matrix_is_header_only() {
        let m = FeatureMatrix::empty(5).unwrap();
        let bytes = encode_features(&m).unwrap();
        assert_eq!(bytes.len(), 16);
        assert_eq!(decode_features(&bytes).unwrap(), m);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            FeatureMatrix::new(0, 0, vec![]),
            Err(DataError::ZeroDimension)
        ));
        let mut bytes = FEATURE_MAGIC.to_vec();
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            decode_features(&bytes),
            Err(DataError::ZeroDimension)
        ));
    }

    #[test]
    fn malformed_inputs() {
        let m = FeatureMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let good = encode_features(&m).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[..8].copy_from_slice(b"XXXXXXXX");
        assert!(matches!(decode_features(&bad_magic), Err(DataError::BadMagic)));

        assert!(matches!(
            decode_features(&good[..good.len() - 1]),
            Err(DataError::Truncated { .. })
        ));
        assert!(matches!(
            decode_features(&good[..10]),
            Err(DataError::Truncated { .. })
        ));

        let mut long = good.clone();
        long.push(0);
        assert!(matches!(
            decode_features(&long),
            Err(DataError::TrailingBytes { .. })
        ));

        let mut nan = good;
        nan[16 + 4..16 + 8].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            decode_features(&nan),
            Err(DataError::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn missing_file_is_io() {
        assert!(matches!(
            read_features("/nonexistent/definitely/missing.bin"),
            Err(DataError::Io { .. })
        ));
    }
}
