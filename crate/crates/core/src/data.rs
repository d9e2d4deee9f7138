//! MNIST in IDX format.
//!
//! IDX files start with a big-endian magic (`0x00000801` for labels,
//! `0x00000803` for images) followed by big-endian `u32` dimensions and raw
//! bytes. Files ending in `.gz` are decompressed transparently. Pixels are
//! scaled by 1/255 into `[0, 1]`.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const NUM_CLASSES: usize = 10;

const LABEL_MAGIC: u32 = 0x0000_0801;
const IMAGE_MAGIC: u32 = 0x0000_0803;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Images (`n x 784`, row-major, values in `[0, 1]`) and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Array2<f64>,
    labels: Vec<usize>,
    split: Split,
}

impl Dataset {
    pub fn new(images: Array2<f64>, labels: Vec<usize>, split: Split) -> Result<Self> {
        if images.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: images.nrows(),
                got: labels.len(),
            });
        }
        if images.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter("pixel outside [0, 1]".into()));
        }
        Ok(Self { images, labels, split })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn feature_dim(&self) -> usize {
        self.images.ncols()
    }

    pub fn images(&self) -> &Array2<f64> {
        &self.images
    }

    pub fn image(&self, i: usize) -> ArrayView1<'_, f64> {
        self.images.row(i)
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Gathers the given rows into a feature-major `dim x indices.len()` matrix.
    pub fn gather_columns(&self, indices: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((self.feature_dim(), indices.len()));
        for (j, &i) in indices.iter().enumerate() {
            out.column_mut(j).assign(&self.images.row(i));
        }
        out
    }

    /// The first `n` samples (or all, if fewer).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            images: self.images.slice(ndarray::s![..n, ..]).to_owned(),
            labels: self.labels[..n].to_vec(),
            split: self.split,
        }
    }

    /// Samples at the given indices, in order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut images = Array2::zeros((indices.len(), self.feature_dim()));
        for (j, &i) in indices.iter().enumerate() {
            images.row_mut(j).assign(&self.images.row(i));
        }
        Dataset {
            images,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            split: self.split,
        }
    }
}

fn open(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut bytes = Vec::new();
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(reader).read_to_end(&mut bytes)
    } else {
        reader.read_to_end(&mut bytes)
    }
    .map_err(|e| Error::io(path, e))?;
    Ok(bytes)
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Idx {
            path: path.to_path_buf(),
            reason: "truncated header".into(),
        })
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = open(path)?;
    let idx_err = |reason: String| Error::Idx {
        path: path.to_path_buf(),
        reason,
    };
    let magic = be_u32(&bytes, 0, path)?;
    if magic != LABEL_MAGIC {
        return Err(idx_err(format!("bad label magic {magic:#010x}")));
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(idx_err(format!("expected {n} labels, found {} bytes", body.len())));
    }
    if let Some(&bad) = body.iter().find(|&&b| b as usize >= NUM_CLASSES) {
        return Err(idx_err(format!("label {bad} out of range")));
    }
    Ok(body.iter().map(|&b| b as usize).collect())
}

fn read_images(path: &Path) -> Result<Array2<f64>> {
    let bytes = open(path)?;
    let idx_err = |reason: String| Error::Idx {
        path: path.to_path_buf(),
        reason,
    };
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IMAGE_MAGIC {
        return Err(idx_err(format!("bad image magic {magic:#010x}")));
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let body = &bytes[16..];
    if body.len() != n * rows * cols {
        return Err(idx_err(format!(
            "expected {} pixel bytes, found {}",
            n * rows * cols,
            body.len()
        )));
    }
    Ok(Array2::from_shape_vec((n, rows * cols), body.iter().map(|&b| b as f64 / 255.0).collect())
        .expect("length checked"))
}

/// Loads an images/labels IDX pair.
pub fn load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<Dataset> {
    let images = read_images(images_path)?;
    let labels = read_labels(labels_path)?;
    if images.nrows() != labels.len() {
        return Err(Error::Idx {
            path: labels_path.to_path_buf(),
            reason: format!("{} labels for {} images", labels.len(), images.nrows()),
        });
    }
    Ok(Dataset { images, labels, split })
}

/// Standard MNIST file names inside `dir`, preferring uncompressed files.
pub fn mnist_paths(dir: &Path, split: Split) -> (PathBuf, PathBuf) {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let pick = |stem: String| {
        let plain = dir.join(&stem);
        if plain.exists() {
            plain
        } else {
            dir.join(format!("{stem}.gz"))
        }
    };
    (
        pick(format!("{prefix}-images-idx3-ubyte")),
        pick(format!("{prefix}-labels-idx1-ubyte")),
    )
}

pub fn load_mnist(dir: &Path, split: Split) -> Result<Dataset> {
    let (images, labels) = mnist_paths(dir, split);
    load_idx(&images, &labels, split)
}

/// Writes raw bytes as IDX image and label files (used for fixtures).
pub fn write_idx(images_path: &Path, labels_path: &Path, pixels: &[u8], rows: usize, cols: usize, labels: &[u8]) -> Result<()> {
    let n = labels.len();
    assert_eq!(pixels.len(), n * rows * cols, "pixel buffer size");
    let mut img = Vec::with_capacity(16 + pixels.len());
    img.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    for d in [n, rows, cols] {
        img.extend_from_slice(&(d as u32).to_be_bytes());
    }
    img.extend_from_slice(pixels);
    let mut lab = Vec::with_capacity(8 + n);
    lab.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(n as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    for (path, bytes) in [(images_path, img), (labels_path, lab)] {
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Index batches for one epoch: a seeded permutation cut into chunks.
pub fn batches(n: usize, batch_size: usize, shuffle_seed: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(shuffle_seed));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_sizes_and_coverage() {
        let b = batches(10, 4, 1).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(b, batches(10, 4, 1).unwrap());
        assert!(batches(10, 0, 1).is_err());
    }

    #[test]
    fn synthetic_idx_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
        let pixels: Vec<u8> = (0..=255u8).chain(0..=255).collect::<Vec<_>>()[..2 * 16].to_vec();
        write_idx(&ip, &lp, &pixels, 4, 4, &[3, 7]).unwrap();
        let ds = load_idx(&ip, &lp, Split::Test).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels(), &[3, 7]);
        for (p, &raw) in ds.images().iter().zip(&pixels) {
            assert_eq!((*p * 255.0).round() as u8, raw);
        }
    }

    #[test]
    fn scaling_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
        write_idx(&ip, &lp, &[0, 255, 128, 1], 2, 2, &[0]).unwrap();
        let ds = load_idx(&ip, &lp, Split::Train).unwrap();
        assert_eq!(ds.image(0)[0], 0.0);
        assert_eq!(ds.image(0)[1], 1.0);
    }

    #[test]
    fn rejects_count_mismatch_and_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
        write_idx(&ip, &lp, &[0; 8], 2, 2, &[1, 2]).unwrap();
        let (ip2, lp2) = (dir.path().join("img2"), dir.path().join("lab2"));
        write_idx(&ip2, &lp2, &[0; 4], 2, 2, &[1]).unwrap();
        assert!(load_idx(&ip, &lp2, Split::Train).is_err());
        assert!(load_idx(&lp, &ip, Split::Train).is_err());
        let bytes = std::fs::read(&ip).unwrap();
        std::fs::write(&ip, &bytes[..bytes.len() - 1]).unwrap();
        assert!(load_idx(&ip, &lp, Split::Train).is_err());
    }

    #[test]
    fn gzip_accepted() {
        use flate2::write::GzEncoder;
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
        write_idx(&ip, &lp, &[10, 20, 30, 40], 2, 2, &[5]).unwrap();
        let gz = dir.path().join("img.gz");
        let mut enc = GzEncoder::new(File::create(&gz).unwrap(), flate2::Compression::default());
        enc.write_all(&std::fs::read(&ip).unwrap()).unwrap();
        enc.finish().unwrap();
        let ds = load_idx(&gz, &lp, Split::Test).unwrap();
        assert_eq!(ds.image(0)[3], 40.0 / 255.0);
    }
}
