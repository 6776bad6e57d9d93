//! IDX image/label pairs (big-endian header, `u8` payload). Pixels are
//! scaled to `[0, 1]` by `/255`.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{io_err, DataError, Dataset, TaskKind};
use crate::model::Targets;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;
const CLASSES: usize = 10;

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn format_err(path: &Path, message: impl Into<String>) -> DataError {
    DataError::Format { path: path.to_path_buf(), message: message.into() }
}

pub fn load_idx_mnist(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let (ipath, lpath) = (images.as_ref(), labels.as_ref());
    let ibytes = fs::read(ipath).map_err(io_err(ipath))?;
    let lbytes = fs::read(lpath).map_err(io_err(lpath))?;

    let header = |bytes: &[u8], path: &Path, len: usize| -> Result<Vec<u32>, DataError> {
        (0..len)
            .map(|i| be_u32(bytes, 4 * i).ok_or_else(|| format_err(path, "truncated header")))
            .collect()
    };
    let ih = header(&ibytes, ipath, 4)?;
    if ih[0] != IMAGE_MAGIC {
        return Err(format_err(ipath, format!("magic {:#x}, expected {IMAGE_MAGIC:#x}", ih[0])));
    }
    let lh = header(&lbytes, lpath, 2)?;
    if lh[0] != LABEL_MAGIC {
        return Err(format_err(lpath, format!("magic {:#x}, expected {LABEL_MAGIC:#x}", lh[0])));
    }
    let (n, rows, cols) = (ih[1] as usize, ih[2] as usize, ih[3] as usize);
    if lh[1] as usize != n {
        return Err(DataError::Validation {
            path: lpath.to_path_buf(),
            message: format!("{} labels for {n} images", lh[1]),
        });
    }
    let pixels = &ibytes[16..];
    let want = n * rows * cols;
    if pixels.len() < want {
        return Err(format_err(ipath, format!("truncated: {} of {want} pixel bytes", pixels.len())));
    }
    let lab = &lbytes[8..];
    if lab.len() < n {
        return Err(format_err(lpath, format!("truncated: {} of {n} labels", lab.len())));
    }
    if let Some(bad) = lab[..n].iter().find(|&&l| l as usize >= CLASSES) {
        return Err(DataError::Validation { path: lpath.to_path_buf(), message: format!("label {bad} outside 0..=9") });
    }
    let features = Array2::from_shape_vec((n, rows * cols), pixels[..want].iter().map(|&p| p as f64 / 255.0).collect())
        .expect("pixel count checked");
    let labels = lab[..n].iter().map(|&l| l as usize).collect();
    Ok(Dataset::new(features, Targets::Classes(labels), TaskKind::Classification { num_classes: CLASSES })?)
}

/// Writes `ds` as an IDX pair with images of `rows × cols` pixels
/// (features `×255`, rounded).
pub fn write_idx_mnist(
    ds: &Dataset,
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
    rows: usize,
    cols: usize,
) -> Result<(), DataError> {
    let (ipath, lpath) = (images.as_ref(), labels.as_ref());
    let Targets::Classes(classes) = ds.targets() else {
        return Err(DataError::Validation { path: lpath.to_path_buf(), message: "IDX labels need class targets".into() });
    };
    if rows * cols != ds.num_features() {
        return Err(DataError::Validation {
            path: ipath.to_path_buf(),
            message: format!("{rows}×{cols} images but {} features", ds.num_features()),
        });
    }
    let n = ds.len() as u32;
    let mut ibytes = Vec::with_capacity(16 + ds.features().len());
    for v in [IMAGE_MAGIC, n, rows as u32, cols as u32] {
        ibytes.extend_from_slice(&v.to_be_bytes());
    }
    ibytes.extend(ds.features().iter().map(|&x| (x * 255.0).round().clamp(0.0, 255.0) as u8));
    let mut lbytes = Vec::with_capacity(8 + classes.len());
    for v in [LABEL_MAGIC, n] {
        lbytes.extend_from_slice(&v.to_be_bytes());
    }
    lbytes.extend(classes.iter().map(|&c| c as u8));
    fs::write(ipath, ibytes).map_err(io_err(ipath))?;
    fs::write(lpath, lbytes).map_err(io_err(lpath))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(bytes: &[u8]) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), bytes).unwrap();
        f
    }

    fn header(words: &[u32]) -> Vec<u8> {
        words.iter().flat_map(|w| w.to_be_bytes()).collect()
    }

    #[test]
    fn two_by_two_images() {
        let mut img = header(&[IMAGE_MAGIC, 2, 2, 2]);
        img.extend([0, 255, 51, 102, 255, 255, 0, 0]);
        let mut lab = header(&[LABEL_MAGIC, 2]);
        lab.extend([7, 0]);
        let (i, l) = (write(&img), write(&lab));
        let ds = load_idx_mnist(i.path(), l.path()).unwrap();
        assert_eq!(ds.features().row(0).to_vec(), vec![0.0, 1.0, 0.2, 0.4]);
        assert_eq!(ds.targets(), &Targets::Classes(vec![7, 0]));
    }

    #[test]
    fn label_count_mismatch() {
        let mut img = header(&[IMAGE_MAGIC, 2, 1, 1]);
        img.extend([0, 0]);
        let mut lab = header(&[LABEL_MAGIC, 3]);
        lab.extend([1, 2, 3]);
        let (i, l) = (write(&img), write(&lab));
        assert!(matches!(load_idx_mnist(i.path(), l.path()), Err(DataError::Validation { .. })));
    }

    #[test]
    fn truncated_and_bad_magic() {
        let mut img = header(&[IMAGE_MAGIC, 2, 2, 2]);
        img.extend([0; 5]);
        let mut lab = header(&[LABEL_MAGIC, 2]);
        lab.extend([1, 2]);
        let (i, l) = (write(&img), write(&lab));
        assert!(matches!(load_idx_mnist(i.path(), l.path()), Err(DataError::Format { .. })));
        let (i2, l2) = (write(&header(&[0x0801, 0, 1, 1])), write(&lab));
        assert!(matches!(load_idx_mnist(i2.path(), l2.path()), Err(DataError::Format { .. })));
    }

    #[test]
    fn round_trip() {
        let mut img = header(&[IMAGE_MAGIC, 3, 1, 2]);
        img.extend([0, 1, 2, 3, 254, 255]);
        let mut lab = header(&[LABEL_MAGIC, 3]);
        lab.extend([9, 4, 1]);
        let (i, l) = (write(&img), write(&lab));
        let ds = load_idx_mnist(i.path(), l.path()).unwrap();
        let (i2, l2) = (tempfile::NamedTempFile::new().unwrap(), tempfile::NamedTempFile::new().unwrap());
        write_idx_mnist(&ds, i2.path(), l2.path(), 1, 2).unwrap();
        assert_eq!(fs::read(i2.path()).unwrap(), img);
        assert_eq!(fs::read(l2.path()).unwrap(), lab);
    }
}
