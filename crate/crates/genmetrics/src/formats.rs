//! Readers for two common external dataset formats: IDX (the MNIST container)
//! and the CIFAR binary batch layout. Both are converted into
//! [`LabeledSampleSet`]s so the rest of the toolkit never sees format details.

use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use crate::dataset::{LabeledSampleSet, Role};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const IDX_LABEL_MAGIC: u32 = 0x0000_0801;
const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;

/// Reads one IDX file. Accepts exactly the unsigned-byte label magic
/// (one dim) and image magic (three dims); all integers are big-endian.
pub fn read_idx(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let too_short = || Error::PayloadLengthMismatch {
        path: path.to_path_buf(),
        expected: 4,
        actual: bytes.len() as u64,
    };
    if bytes.len() < 4 {
        return Err(too_short());
    }
    let magic = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let ndim = match magic {
        IDX_LABEL_MAGIC => 1,
        IDX_IMAGE_MAGIC => 3,
        _ => {
            return Err(Error::IdxBadMagic {
                path: path.to_path_buf(),
                found: magic,
            })
        }
    };
    let header_len = 4 + 4 * ndim;
    if bytes.len() < header_len {
        return Err(Error::PayloadLengthMismatch {
            path: path.to_path_buf(),
            expected: header_len as u64,
            actual: bytes.len() as u64,
        });
    }
    let mut dims = Vec::with_capacity(ndim);
    let mut count: u64 = 1;
    for i in 0..ndim {
        let d = u32::from_be_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as u64;
        count = count.checked_mul(d).ok_or_else(too_short)?;
        dims.push(d as usize);
    }
    let expected = header_len as u64 + count;
    if bytes.len() as u64 != expected {
        return Err(Error::PayloadLengthMismatch {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    let payload = bytes[header_len..].to_vec();
    Ok(Tensor::U8(
        ArrayD::from_shape_vec(IxDyn(&dims), payload).expect("length checked"),
    ))
}

/// Loads an IDX image/label file pair into a sample set.
///
/// `class_count` of `None` infers `max label + 1`. The image tensor keeps its
/// `(n, rows, cols)` shape.
pub fn load_idx_dataset(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    role: Role,
    class_count: Option<usize>,
) -> Result<LabeledSampleSet> {
    let images = read_idx(&images_path)?;
    if images.shape().len() != 3 {
        return Err(Error::BadSampleShape {
            shape: images.shape().to_vec(),
        });
    }
    let labels_tensor = read_idx(&labels_path)?;
    let labels: Vec<i64> = match &labels_tensor {
        Tensor::U8(a) => {
            if a.ndim() != 1 {
                return Err(Error::BadSampleShape {
                    shape: a.shape().to_vec(),
                });
            }
            a.iter().map(|&v| v as i64).collect()
        }
        _ => unreachable!("read_idx only yields u8"),
    };
    let class_count =
        class_count.unwrap_or_else(|| labels.iter().copied().max().map_or(1, |m| m as usize + 1));
    LabeledSampleSet::new(images, labels, role, class_count)
}

/// Which CIFAR binary record layout to expect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CifarLayout {
    /// 1 label byte + 3072 pixel bytes, 10 classes.
    Cifar10,
    /// Coarse + fine label bytes + 3072 pixel bytes; the fine label (second
    /// byte) is used, 100 classes.
    Cifar100,
}

impl CifarLayout {
    fn record_size(self) -> usize {
        match self {
            CifarLayout::Cifar10 => 1 + 3072,
            CifarLayout::Cifar100 => 2 + 3072,
        }
    }

    fn class_count(self) -> usize {
        match self {
            CifarLayout::Cifar10 => 10,
            CifarLayout::Cifar100 => 100,
        }
    }

    fn label_offset(self) -> usize {
        match self {
            CifarLayout::Cifar10 => 0,
            CifarLayout::Cifar100 => 1,
        }
    }
}

/// Reads CIFAR binary batches in order and concatenates them. Images come out
/// channel-first as `(n, 3, 32, 32)` uint8.
pub fn load_cifar_batches(
    paths: &[impl AsRef<Path>],
    layout: CifarLayout,
    role: Role,
) -> Result<LabeledSampleSet> {
    let record = layout.record_size();
    let mut pixels: Vec<u8> = Vec::new();
    let mut labels: Vec<i64> = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() % record != 0 {
            return Err(Error::CifarBadLength {
                path: path.to_path_buf(),
                length: bytes.len() as u64,
                record_size: record,
            });
        }
        for rec in bytes.chunks_exact(record) {
            labels.push(rec[layout.label_offset()] as i64);
            pixels.extend_from_slice(&rec[layout.label_offset() + 1..]);
        }
    }
    let n = labels.len();
    let data = Tensor::U8(
        ArrayD::from_shape_vec(IxDyn(&[n, 3, 32, 32]), pixels).expect("record size fixed"),
    );
    LabeledSampleSet::new(data, labels, role, layout.class_count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_images(n: u32, rows: u32, cols: u32, payload: &[u8]) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&n.to_be_bytes());
        bytes.extend_from_slice(&rows.to_be_bytes());
        bytes.extend_from_slice(&cols.to_be_bytes());
        bytes.extend_from_slice(payload);
        bytes
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        bytes.extend_from_slice(labels);
        bytes
    }

    #[test]
    fn reads_idx_pair_into_sample_set() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("images.idx");
        let lbl_path = dir.path().join("labels.idx");
        let payload: Vec<u8> = (0..2 * 2 * 3).collect();
        std::fs::write(&img_path, idx_images(2, 2, 3, &payload)).unwrap();
        std::fs::write(&lbl_path, idx_labels(&[4, 9])).unwrap();

        let set = load_idx_dataset(&img_path, &lbl_path, Role::Train, None).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.sample_shape(), &[2, 3]);
        assert_eq!(set.labels(), &[4, 9]);
        assert_eq!(set.class_count(), 10);

        let fixed = load_idx_dataset(&img_path, &lbl_path, Role::Train, Some(12)).unwrap();
        assert_eq!(fixed.class_count(), 12);
    }

    #[test]
    fn idx_is_big_endian() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.idx");
        // 256 images would need dim byte 0x00 0x00 0x01 0x00; one image must
        // parse as 1, not 0x01000000.
        std::fs::write(&path, idx_images(1, 1, 1, &[42])).unwrap();
        let t = read_idx(&path).unwrap();
        assert_eq!(t.shape(), &[1, 1, 1]);
    }

    #[test]
    fn rejects_unknown_idx_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.idx");
        let mut bytes = idx_labels(&[1]);
        bytes[2] = 0x09;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_idx(&path), Err(Error::IdxBadMagic { .. })));
    }

    #[test]
    fn rejects_truncated_idx_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.idx");
        let mut bytes = idx_images(2, 2, 2, &[0; 8]);
        bytes.pop();
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            read_idx(&path),
            Err(Error::PayloadLengthMismatch { .. })
        ));
    }

    fn cifar10_record(label: u8, fill: u8) -> Vec<u8> {
        let mut rec = vec![label];
        rec.extend(std::iter::repeat(fill).take(3072));
        rec
    }

    #[test]
    fn reads_cifar10_batches_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let b1 = dir.path().join("batch1.bin");
        let b2 = dir.path().join("batch2.bin");
        let mut bytes1 = cifar10_record(3, 10);
        bytes1.extend(cifar10_record(5, 20));
        std::fs::write(&b1, bytes1).unwrap();
        std::fs::write(&b2, cifar10_record(0, 30)).unwrap();

        let set = load_cifar_batches(&[&b1, &b2], CifarLayout::Cifar10, Role::Train).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.labels(), &[3, 5, 0]);
        assert_eq!(set.sample_shape(), &[3, 32, 32]);
        assert_eq!(set.class_count(), 10);
        let feats = set.features_f32();
        assert!((feats[[0, 0]] - 10.0 / 255.0).abs() < 1e-7);
        assert!((feats[[2, 0]] - 30.0 / 255.0).abs() < 1e-7);
    }

    #[test]
    fn cifar100_uses_fine_label() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.bin");
        let mut rec = vec![7u8, 42u8];
        rec.extend(std::iter::repeat(0u8).take(3072));
        std::fs::write(&path, rec).unwrap();

        let set = load_cifar_batches(&[&path], CifarLayout::Cifar100, Role::Train).unwrap();
        assert_eq!(set.labels(), &[42]);
        assert_eq!(set.class_count(), 100);
    }

    #[test]
    fn rejects_partial_cifar_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, vec![0u8; 3072]).unwrap();
        assert!(matches!(
            load_cifar_batches(&[&path], CifarLayout::Cifar10, Role::Train),
            Err(Error::CifarBadLength { .. })
        ));
    }
}
