//! IDX binary dataset format: big-endian magic and dimension sizes followed
//! by raw bytes. Image files use magic 0x00000803 (count, rows, cols), label
//! files 0x00000801 (count). Pixels load as `f64` in `[0, 1]`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::tensor::Tensor;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic number at offset 0: got {got:#010x}, expected {expected:#010x}")]
    BadMagic { got: u32, expected: u32 },
    #[error("file truncated: needed {needed} data bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("images file has {images} items but labels file has {labels}")]
    CountMismatch { images: usize, labels: usize },
}

/// In-memory labeled image collection.
#[derive(Clone, Debug)]
pub struct ImageDataset {
    /// `(count, 1, rows, cols)` in `[0, 1]`.
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub rows: usize,
    pub cols: usize,
}

impl ImageDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn image(&self, i: usize) -> Tensor {
        let px = self.rows * self.cols;
        Tensor::from_vec(&[1, self.rows, self.cols], self.images.data()[i * px..(i + 1) * px].to_vec())
    }

    /// Example indices grouped by class label.
    pub fn by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_classes()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

fn read_u32_be(r: &mut impl Read) -> Result<u32, IdxError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_be_bytes(b))
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<ImageDataset, IdxError> {
    let mut ir = BufReader::new(File::open(images_path)?);
    let magic = read_u32_be(&mut ir)?;
    if magic != IMAGES_MAGIC {
        return Err(IdxError::BadMagic { got: magic, expected: IMAGES_MAGIC });
    }
    let count = read_u32_be(&mut ir)? as usize;
    let rows = read_u32_be(&mut ir)? as usize;
    let cols = read_u32_be(&mut ir)? as usize;
    let needed = count * rows * cols;
    let mut bytes = Vec::new();
    ir.read_to_end(&mut bytes)?;
    if bytes.len() < needed {
        return Err(IdxError::Truncated { needed, found: bytes.len() });
    }
    let data: Vec<f64> = bytes[..needed].iter().map(|&b| b as f64 / 255.0).collect();

    let mut lr = BufReader::new(File::open(labels_path)?);
    let magic = read_u32_be(&mut lr)?;
    if magic != LABELS_MAGIC {
        return Err(IdxError::BadMagic { got: magic, expected: LABELS_MAGIC });
    }
    let label_count = read_u32_be(&mut lr)? as usize;
    if label_count != count {
        return Err(IdxError::CountMismatch { images: count, labels: label_count });
    }
    let mut label_bytes = Vec::new();
    lr.read_to_end(&mut label_bytes)?;
    if label_bytes.len() < label_count {
        return Err(IdxError::Truncated { needed: label_count, found: label_bytes.len() });
    }
    let labels = label_bytes[..label_count].iter().map(|&b| b as usize).collect();

    Ok(ImageDataset { images: Tensor::from_vec(&[count, 1, rows, cols], data), labels, rows, cols })
}

/// Writes a dataset in IDX format; pixel values are clamped to `[0, 1]` and
/// quantized to bytes, so a write-read round trip is byte-exact for values
/// already on the 1/255 grid.
pub fn write_idx(dataset: &ImageDataset, images_path: &Path, labels_path: &Path) -> Result<(), IdxError> {
    let mut iw = BufWriter::new(File::create(images_path)?);
    iw.write_all(&IMAGES_MAGIC.to_be_bytes())?;
    iw.write_all(&(dataset.len() as u32).to_be_bytes())?;
    iw.write_all(&(dataset.rows as u32).to_be_bytes())?;
    iw.write_all(&(dataset.cols as u32).to_be_bytes())?;
    let bytes: Vec<u8> =
        dataset.images.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    iw.write_all(&bytes)?;
    iw.flush()?;

    let mut lw = BufWriter::new(File::create(labels_path)?);
    lw.write_all(&LABELS_MAGIC.to_be_bytes())?;
    lw.write_all(&(dataset.len() as u32).to_be_bytes())?;
    let labels: Vec<u8> = dataset.labels.iter().map(|&l| l as u8).collect();
    lw.write_all(&labels)?;
    lw.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("idx-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn fixture_round_trips_byte_exactly() {
        // Two 3x3 images on the 1/255 grid.
        let data: Vec<f64> = (0..18).map(|i| (i * 14) as f64 / 255.0).collect();
        let ds = ImageDataset {
            images: Tensor::from_vec(&[2, 1, 3, 3], data),
            labels: vec![1, 0],
            rows: 3,
            cols: 3,
        };
        let dir = tmpdir();
        let (ip, lp) = (dir.join("imgs.idx"), dir.join("labels.idx"));
        write_idx(&ds, &ip, &lp).unwrap();
        let back = load_idx(&ip, &lp).unwrap();
        assert_eq!(back.labels, ds.labels);
        assert_eq!(back.images.data(), ds.images.data());

        // Writing the loaded dataset reproduces identical files.
        let (ip2, lp2) = (dir.join("imgs2.idx"), dir.join("labels2.idx"));
        write_idx(&back, &ip2, &lp2).unwrap();
        assert_eq!(std::fs::read(&ip).unwrap(), std::fs::read(&ip2).unwrap());
        assert_eq!(std::fs::read(&lp).unwrap(), std::fs::read(&lp2).unwrap());
    }

    #[test]
    fn empty_dataset_loads_as_empty() {
        let ds = ImageDataset { images: Tensor::zeros(&[0, 1, 4, 4]), labels: vec![], rows: 4, cols: 4 };
        let dir = tmpdir();
        let (ip, lp) = (dir.join("empty.idx"), dir.join("empty-labels.idx"));
        write_idx(&ds, &ip, &lp).unwrap();
        let back = load_idx(&ip, &lp).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.n_classes(), 0);
    }

    #[test]
    fn wrong_magic_names_the_offset() {
        let dir = tmpdir();
        let bad = dir.join("bad.idx");
        std::fs::write(&bad, 0x1234_5678u32.to_be_bytes()).unwrap();
        let err = load_idx(&bad, &bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("offset 0"), "{msg}");
        assert!(matches!(err, IdxError::BadMagic { expected: IMAGES_MAGIC, .. }));
    }

    #[test]
    fn truncated_file_is_detected() {
        let dir = tmpdir();
        let ip = dir.join("trunc.idx");
        let mut bytes = Vec::new();
        bytes.extend(IMAGES_MAGIC.to_be_bytes());
        bytes.extend(2u32.to_be_bytes());
        bytes.extend(3u32.to_be_bytes());
        bytes.extend(3u32.to_be_bytes());
        bytes.extend([0u8; 5]); // needs 18
        std::fs::write(&ip, bytes).unwrap();
        let lp = dir.join("trunc-labels.idx");
        let mut lbytes = Vec::new();
        lbytes.extend(LABELS_MAGIC.to_be_bytes());
        lbytes.extend(2u32.to_be_bytes());
        lbytes.extend([0u8; 2]);
        std::fs::write(&lp, lbytes).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(IdxError::Truncated { needed: 18, found: 5 })));
    }
}
