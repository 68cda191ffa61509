//! IDX binary tensors (big-endian header, unsigned byte payload).

use std::fs;
use std::path::Path;

use crate::data::{DataSplit, Dataset};
use crate::error::{Error, Result};

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Dimensions and payload of an unsigned-byte IDX file.
pub fn decode(bytes: &[u8]) -> Result<(Vec<usize>, Vec<u8>)> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::Dataset("not an IDX file (bad magic)".into()));
    }
    if bytes[2] != 0x08 {
        return Err(Error::Dataset(format!(
            "unsupported IDX element type {:#04x}",
            bytes[2]
        )));
    }
    let rank = bytes[3] as usize;
    let header = 4 + 4 * rank;
    if rank == 0 || bytes.len() < header {
        return Err(Error::Dataset("truncated IDX header".into()));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let len: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != len {
        return Err(Error::Dataset(format!(
            "IDX payload has {} bytes, dimensions {dims:?} need {len}",
            payload.len()
        )));
    }
    Ok((dims, payload.to_vec()))
}

pub fn encode(dims: &[usize], payload: &[u8]) -> Vec<u8> {
    let mut out = vec![0, 0, 0x08, dims.len() as u8];
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(payload);
    out
}

fn read(path: &Path) -> Result<(Vec<usize>, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
}

fn load_pair(images: &Path, labels: &Path, classes: usize) -> Result<Dataset> {
    let (dims, pixels) = read(images)?;
    let shape = match dims[..] {
        [_, h, w] => [1, h, w],
        [_, c, h, w] => [c, h, w],
        _ => return Err(Error::Dataset(format!("{}: expected rank 3 or 4", images.display()))),
    };
    let (ldims, lbls) = read(labels)?;
    if ldims.len() != 1 || ldims[0] != dims[0] {
        return Err(Error::Dataset(format!(
            "{} has {:?} labels for {} images",
            labels.display(),
            ldims,
            dims[0]
        )));
    }
    Dataset::new(pixels, lbls, shape, classes)
}

pub fn load_split(dir: &Path) -> Result<DataSplit> {
    let label_max = |p: &Path| -> Result<usize> { Ok(read(p)?.1.iter().copied().max().unwrap_or(0) as usize) };
    let classes = label_max(&dir.join(TRAIN_LABELS))?.max(label_max(&dir.join(TEST_LABELS))?) + 1;
    let classes = classes.max(2);
    Ok(DataSplit {
        train: load_pair(&dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS), classes)?,
        test: load_pair(&dir.join(TEST_IMAGES), &dir.join(TEST_LABELS), classes)?,
    })
}

fn image_dims(d: &Dataset) -> Vec<usize> {
    match d.shape {
        [1, h, w] => vec![d.len(), h, w],
        [c, h, w] => vec![d.len(), c, h, w],
    }
}

pub fn save_split(split: &DataSplit, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, bytes: Vec<u8>| {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(p, e))
    };
    write(TRAIN_IMAGES, encode(&image_dims(&split.train), &split.train.images))?;
    write(TRAIN_LABELS, encode(&[split.train.len()], &split.train.labels))?;
    write(TEST_IMAGES, encode(&image_dims(&split.test), &split.test.images))?;
    write(TEST_LABELS, encode(&[split.test.len()], &split.test.labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let bytes = encode(&[2, 1, 3], &[1, 2, 3, 4, 5, 6]);
        assert_eq!(&bytes[..8], &[0, 0, 8, 3, 0, 0, 0, 2]);
        assert_eq!(decode(&bytes).unwrap(), (vec![2, 1, 3], vec![1, 2, 3, 4, 5, 6]));
    }

    #[test]
    fn rejects_corruption() {
        let mut bytes = encode(&[2], &[1, 2]);
        bytes.pop();
        assert!(decode(&bytes).is_err());
        assert!(decode(&[1, 0, 8, 1]).is_err());
        assert!(decode(&[0, 0, 0x0d, 1, 0, 0, 0, 0]).is_err());
    }

    #[test]
    fn split_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let train = Dataset::new((0..32).collect(), vec![0, 1], [1, 4, 4], 2).unwrap();
        let test = Dataset::new((0..16).collect(), vec![1], [1, 4, 4], 2).unwrap();
        let split = DataSplit { train, test };
        save_split(&split, dir.path()).unwrap();
        assert_eq!(load_split(dir.path()).unwrap(), split);
    }
}
