use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::Dataset;
use crate::error::{Error, IdxError, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw 8-bit grayscale images with digit labels, as stored in MNIST.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayscaleSet {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl GrayscaleSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.pixels[i * self.dim()..(i + 1) * self.dim()]
    }

    /// Expands a ternary dataset back to pixels: +1 becomes 255, anything else 0.
    pub fn from_dataset(ds: &Dataset, rows: usize, cols: usize) -> Result<Self> {
        if rows * cols != ds.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} images from {}-dimensional inputs",
                ds.input_dim()
            )));
        }
        Ok(GrayscaleSet {
            rows,
            cols,
            pixels: ds.inputs().iter().map(|&v| if v > 0 { 255 } else { 0 }).collect(),
            labels: ds.labels().iter().map(|&l| l as u8).collect(),
        })
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(bytes.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32, IdxError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or(IdxError::Truncated {
            expected: at + 4,
            found: bytes.len(),
        })
}

/// Decodes an IDX3 image file: returns (rows, cols, pixels).
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), IdxError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(IdxError::BadMagic {
            expected: IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(IdxError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    Ok((rows, cols, bytes[16..expected].to_vec()))
}

/// Decodes an IDX1 label file. Labels must be digits.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(IdxError::BadMagic {
            expected: LABELS_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(IdxError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let labels = bytes[8..expected].to_vec();
    if let Some(index) = labels.iter().position(|&l| l > 9) {
        return Err(IdxError::InvalidLabel {
            index,
            value: labels[index],
        });
    }
    Ok(labels)
}

/// Loads an MNIST image/label file pair. Gzipped files are decompressed transparently.
pub fn load_mnist_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<GrayscaleSet> {
    let (rows, cols, pixels) = parse_idx_images(&read_maybe_gz(images_path.as_ref())?)?;
    let labels = parse_idx_labels(&read_maybe_gz(labels_path.as_ref())?)?;
    let images = if rows * cols == 0 {
        0
    } else {
        pixels.len() / (rows * cols)
    };
    if images != labels.len() {
        return Err(IdxError::CountMismatch {
            images,
            labels: labels.len(),
        }
        .into());
    }
    Ok(GrayscaleSet {
        rows,
        cols,
        pixels,
        labels,
    })
}

/// Pixels strictly above `threshold` become +1, the rest 0.
pub fn binarize_threshold(raw: &GrayscaleSet, threshold: f64) -> Result<Dataset> {
    if !(0.0..=255.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} outside [0, 255]"
        )));
    }
    let inputs = raw.pixels.iter().map(|&p| i8::from(p as f64 > threshold)).collect();
    let labels = raw.labels.iter().map(|&l| l as u16).collect();
    Dataset::new(inputs, labels, 10, raw.dim())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images_file(count: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IMAGES_MAGIC, count, 2, 2] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(pixels);
        b
    }

    fn labels_file(labels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [LABELS_MAGIC, labels.len() as u32] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(labels);
        b
    }

    #[test]
    fn parses_well_formed_files() {
        let (r, c, px) = parse_idx_images(&images_file(2, &[0, 1, 2, 3, 4, 5, 6, 7])).unwrap();
        assert_eq!((r, c), (2, 2));
        assert_eq!(px, vec![0, 1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(parse_idx_labels(&labels_file(&[3, 9])).unwrap(), vec![3, 9]);
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(
            parse_idx_images(&labels_file(&[1])),
            Err(IdxError::BadMagic { .. })
        ));
        assert!(matches!(
            parse_idx_images(&images_file(3, &[0; 8])),
            Err(IdxError::Truncated {
                expected: 28,
                found: 24
            })
        ));
        assert!(matches!(parse_idx_labels(&[0, 0]), Err(IdxError::Truncated { .. })));
        assert_eq!(
            parse_idx_labels(&labels_file(&[1, 12])),
            Err(IdxError::InvalidLabel { index: 1, value: 12 })
        );
    }

    #[test]
    fn count_mismatch_between_files() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lbl = dir.path().join("lbl");
        std::fs::write(&img, images_file(2, &[0; 8])).unwrap();
        std::fs::write(&lbl, labels_file(&[1, 2, 3])).unwrap();
        let err = load_mnist_idx(&img, &lbl).unwrap_err();
        assert!(matches!(
            err,
            Error::Idx(IdxError::CountMismatch { images: 2, labels: 3 })
        ));
    }

    #[test]
    fn binarization_extremes() {
        let raw = GrayscaleSet {
            rows: 2,
            cols: 2,
            pixels: vec![0, 0, 0, 0, 255, 255, 255, 255, 127, 128, 3, 200],
            labels: vec![0, 1, 2],
        };
        let ds = binarize_threshold(&raw, 127.0).unwrap();
        assert_eq!(ds.input(0), &[0, 0, 0, 0]);
        assert_eq!(ds.input(1), &[1, 1, 1, 1]);
        assert_eq!(ds.input(2), &[0, 1, 0, 1]);
        assert!(binarize_threshold(&raw, 300.0).is_err());
    }

    #[test]
    fn binarization_is_idempotent() {
        let raw = GrayscaleSet {
            rows: 1,
            cols: 4,
            pixels: vec![10, 140, 250, 127, 0, 99, 128, 255],
            labels: vec![4, 5],
        };
        let once = binarize_threshold(&raw, 127.0).unwrap();
        let twice = binarize_threshold(&GrayscaleSet::from_dataset(&once, 1, 4).unwrap(), 127.0).unwrap();
        assert_eq!(once, twice);
    }
}
