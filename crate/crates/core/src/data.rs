//! Dataset ingestion: IDX (MNIST) files, 8×8 downsampling and a synthetic
//! Gaussian-cluster fallback.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mlp::Batch;
use crate::rng::SeededRng;

/// Environment variable naming the directory that holds the MNIST IDX files.
pub const DATA_DIR_ENV: &str = "CPN_DATA_DIR";
pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;
pub const MNIST_SIDE: usize = 28;
pub const MNIST_CLASSES: usize = 10;

fn format_err(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(path, offset as u64, "file truncated inside header"))
}

/// Parse an IDX3 image file and an IDX1 label file into a batch of
/// `[0, 1]`-scaled pixel rows and one-hot targets over `classes` labels.
pub fn load_idx(images_path: &Path, labels_path: &Path, classes: usize) -> Result<Batch> {
    let img = std::fs::read(images_path)?;
    let lab = std::fs::read(labels_path)?;

    let magic = read_u32(&img, 0, images_path)?;
    if magic != IMAGE_MAGIC {
        return Err(format_err(
            images_path,
            0,
            format!("bad magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"),
        ));
    }
    let n = read_u32(&img, 4, images_path)? as usize;
    let rows = read_u32(&img, 8, images_path)? as usize;
    let cols = read_u32(&img, 12, images_path)? as usize;
    let pixels = rows * cols;
    let expected = 16 + n * pixels;
    if img.len() != expected {
        return Err(format_err(
            images_path,
            img.len().min(expected) as u64,
            format!(
                "header declares {n} images of {rows}x{cols} ({expected} bytes), file has {} bytes",
                img.len()
            ),
        ));
    }

    let magic = read_u32(&lab, 0, labels_path)?;
    if magic != LABEL_MAGIC {
        return Err(format_err(
            labels_path,
            0,
            format!("bad magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"),
        ));
    }
    let n_labels = read_u32(&lab, 4, labels_path)? as usize;
    if lab.len() != 8 + n_labels {
        return Err(format_err(
            labels_path,
            lab.len().min(8 + n_labels) as u64,
            format!(
                "header declares {n_labels} labels ({} bytes), file has {} bytes",
                8 + n_labels,
                lab.len()
            ),
        ));
    }
    if n_labels != n {
        return Err(format_err(
            labels_path,
            4,
            format!("{n_labels} labels for {n} images"),
        ));
    }

    let inputs: Vec<f64> = img[16..].iter().map(|&b| f64::from(b) / 255.0).collect();
    let mut targets = Matrix::zeros(n, classes);
    for (i, &label) in lab[8..].iter().enumerate() {
        let label = label as usize;
        if label >= classes {
            return Err(format_err(
                labels_path,
                (8 + i) as u64,
                format!("label {label} out of range for {classes} classes"),
            ));
        }
        targets[(i, label)] = 1.0;
    }
    Batch::new(Matrix::from_vec(n, pixels, inputs)?, targets)
}

/// The MNIST training set from `dir`, or from `$CPN_DATA_DIR` when `dir` is
/// `None`.
pub fn load_mnist(dir: Option<&Path>) -> Result<Batch> {
    let dir: PathBuf = match dir {
        Some(d) => d.to_path_buf(),
        None => std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .ok_or_else(|| {
                Error::DatasetNotFound(format!(
                    "no data directory given and {DATA_DIR_ENV} is unset"
                ))
            })?,
    };
    let images = dir.join(TRAIN_IMAGES);
    let labels = dir.join(TRAIN_LABELS);
    for p in [&images, &labels] {
        if !p.is_file() {
            return Err(Error::DatasetNotFound(p.display().to_string()));
        }
    }
    load_idx(&images, &labels, MNIST_CLASSES)
}

/// Zero-pad a 28×28 image to 32×32 (2-pixel border) and average-pool 4×4
/// blocks into an 8×8 image, row-major.
pub fn downsample_8x8(image: &[f64]) -> Result<Vec<f64>> {
    if image.len() != MNIST_SIDE * MNIST_SIDE {
        return Err(Error::StructuralMismatch(format!(
            "expected a {} pixel image, got {}",
            MNIST_SIDE * MNIST_SIDE,
            image.len()
        )));
    }
    const PAD: usize = 2;
    let mut out = vec![0.0; 64];
    for r in 0..MNIST_SIDE {
        for c in 0..MNIST_SIDE {
            let cell = ((r + PAD) / 4) * 8 + (c + PAD) / 4;
            out[cell] += image[r * MNIST_SIDE + c];
        }
    }
    for v in &mut out {
        *v /= 16.0;
    }
    Ok(out)
}

/// Apply [`downsample_8x8`] to every row of a 784-feature batch.
pub fn downsample_batch(batch: &Batch) -> Result<Batch> {
    let mut data = Vec::with_capacity(batch.len() * 64);
    for r in 0..batch.len() {
        data.extend(downsample_8x8(batch.inputs.row(r))?);
    }
    Batch::new(
        Matrix::from_vec(batch.len(), 64, data)?,
        batch.targets.clone(),
    )
}

/// Standard deviation of each synthetic cluster.
pub const SYNTHETIC_SIGMA: f64 = 1.0 / 6.0;

/// `n` points in `dim` dimensions from `classes` isotropic Gaussian clusters.
/// Class `c` is centred on `e_c / √2`, so every pair of means is exactly one
/// unit (six cluster deviations) apart. Labels are assigned round-robin.
pub fn make_synthetic(classes: usize, dim: usize, n: usize, rng: &mut SeededRng) -> Result<Batch> {
    if classes < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    if classes > dim {
        return Err(Error::InvalidParameter(format!(
            "{classes} classes do not fit orthogonal means in {dim} dimensions"
        )));
    }
    let offset = std::f64::consts::FRAC_1_SQRT_2;
    let mut inputs = Matrix::zeros(n, dim);
    let mut targets = Matrix::zeros(n, classes);
    for i in 0..n {
        let c = i % classes;
        for (j, v) in inputs.row_mut(i).iter_mut().enumerate() {
            let mean = if j == c { offset } else { 0.0 };
            *v = mean + SYNTHETIC_SIGMA * rng.normal();
        }
        targets[(i, c)] = 1.0;
    }
    Batch::new(inputs, targets)
}
