//! Dataset ingestion and preparation: IDX parsing, downsampling to 6x6,
//! batching, and a synthetic fallback dataset so tests run without downloads.
//!
//! Datasets are immutable after load. Pixel values stay in [0, 1] through the
//! whole pipeline.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const IDX_MAGIC_IMAGES: u32 = 0x0000_0803;
const IDX_MAGIC_LABELS: u32 = 0x0000_0801;

/// A raw IDX tensor: big-endian dimension sizes and a ubyte payload.
#[derive(Debug, Clone)]
pub struct RawIdx {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

/// Parses an IDX file (gzip-compressed when the extension is `.gz`).
///
/// Accepts image tensors (magic 0x00000803, three dims) and label vectors
/// (magic 0x00000801, one dim); validates the declared sizes against the
/// actual payload length.
pub fn read_idx(path: &Path) -> Result<RawIdx> {
    let file = File::open(path)?;
    let mut bytes = Vec::new();
    if path.extension().is_some_and(|e| e == "gz") {
        flate2::read::GzDecoder::new(file).read_to_end(&mut bytes)?;
    } else {
        let mut f = file;
        f.read_to_end(&mut bytes)?;
    }
    parse_idx(&bytes)
}

pub fn parse_idx(bytes: &[u8]) -> Result<RawIdx> {
    let read_u32 = |off: usize| -> Result<u32> {
        bytes
            .get(off..off + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| Error::Format("truncated IDX header".into()))
    };
    let magic = read_u32(0)?;
    let ndims = match magic {
        IDX_MAGIC_IMAGES => 3,
        IDX_MAGIC_LABELS => 1,
        other => {
            return Err(Error::Format(format!(
                "bad IDX magic 0x{other:08x} (expected 0x00000803 or 0x00000801)"
            )))
        }
    };
    let mut dims = Vec::with_capacity(ndims);
    for d in 0..ndims {
        dims.push(read_u32(4 + 4 * d)? as usize);
    }
    let header = 4 + 4 * ndims;
    let expected: usize = dims.iter().product();
    let payload = &bytes[header.min(bytes.len())..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "IDX payload is {} bytes, dimensions declare {expected}",
            payload.len()
        )));
    }
    Ok(RawIdx {
        dims,
        data: payload.to_vec(),
    })
}

/// Center-crop a 28x28 image to 24x24 and 4x4-average-pool it to 6x6.
///
/// Input values must already be scaled into [0, 1]. Averaging preserves the
/// mean over the cropped region and keeps values in [0, 1].
pub fn downsample_6x6(image28: &[f64]) -> Result<[f64; 36]> {
    if image28.len() != 28 * 28 {
        return Err(Error::Shape(format!(
            "downsample_6x6 expects 28x28, got {} values",
            image28.len()
        )));
    }
    let mut out = [0.0; 36];
    for by in 0..6 {
        for bx in 0..6 {
            let mut sum = 0.0;
            for dy in 0..4 {
                for dx in 0..4 {
                    let y = 2 + by * 4 + dy;
                    let x = 2 + bx * 4 + dx;
                    sum += image28[y * 28 + x];
                }
            }
            out[by * 6 + bx] = sum / 16.0;
        }
    }
    Ok(out)
}

/// Train/test split tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// A fully prepared dataset: flat 36-pixel rows in [0, 1] plus optional
/// class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub labels: Option<Vec<u8>>,
    pub n: usize,
    pub dim: usize,
    pub split: Split,
}

impl Dataset {
    pub fn sample(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    /// Mean pixel value across the whole dataset.
    pub fn mean_pixel(&self) -> f64 {
        self.inputs.iter().sum::<f64>() / self.inputs.len() as f64
    }

    /// One epoch of batches in a seeded shuffle order (or input order when
    /// `shuffle` is false). The last partial batch is kept.
    pub fn batches(&self, batch_size: usize, seed: u64, shuffle: bool) -> Vec<OwnedBatch> {
        assert!(batch_size >= 1);
        let order = epoch_order(self.n, seed, 0, shuffle);
        order
            .chunks(batch_size)
            .map(|idx| self.gather(idx))
            .collect()
    }

    fn gather(&self, indices: &[u32]) -> OwnedBatch {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = self
            .labels
            .as_ref()
            .map(|_| Vec::with_capacity(indices.len()));
        for &i in indices {
            inputs.extend_from_slice(self.sample(i as usize));
            if let (Some(out), Some(src)) = (labels.as_mut(), self.labels.as_ref()) {
                out.push(src[i as usize]);
            }
        }
        OwnedBatch {
            inputs,
            labels,
            n: indices.len(),
        }
    }
}

/// A materialized minibatch.
#[derive(Debug, Clone)]
pub struct OwnedBatch {
    pub inputs: Vec<f64>,
    pub labels: Option<Vec<u8>>,
    pub n: usize,
}

fn epoch_order(n: usize, seed: u64, epoch: u64, shuffle: bool) -> Vec<u32> {
    let mut order: Vec<u32> = (0..n as u32).collect();
    if shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        order.shuffle(&mut rng);
    }
    order
}

/// An endless minibatch stream cycling seeded epoch shuffles. Each epoch gets
/// a fresh order derived from (seed, epoch), reproducible across reruns.
#[derive(Debug, Clone)]
pub struct BatchStream {
    batch_size: usize,
    seed: u64,
    epoch: u64,
    cursor: usize,
    order: Vec<u32>,
}

impl BatchStream {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Self {
        assert!(batch_size >= 1);
        BatchStream {
            batch_size,
            seed,
            epoch: 0,
            cursor: 0,
            order: epoch_order(n, seed, 0, true),
        }
    }

    /// Indices of the next minibatch (last partial batch of an epoch kept).
    pub fn next_indices(&mut self) -> Vec<u32> {
        if self.cursor >= self.order.len() {
            self.epoch += 1;
            self.order = epoch_order(self.order.len(), self.seed, self.epoch, true);
            self.cursor = 0;
        }
        let hi = (self.cursor + self.batch_size).min(self.order.len());
        let idx = self.order[self.cursor..hi].to_vec();
        self.cursor = hi;
        idx
    }

    pub fn next_batch(&mut self, ds: &Dataset) -> OwnedBatch {
        let idx = self.next_indices();
        ds.gather(&idx)
    }
}

/// Deterministic blurred-blob images in 10 positional classes on the 6x6
/// grid. The offline stand-in for the 6x6 digit task: class identity is
/// carried by blob position, with enough jitter and noise that the task is
/// learnable but not saturated.
pub fn synthetic_dataset(n: usize, seed: u64, split: Split) -> Dataset {
    assert!(n >= 1);
    // 10 blob centers roughly covering the grid; the last sits close to its
    // neighbor so classes genuinely overlap under jitter
    const CENTERS: [(f64, f64); 10] = [
        (1.2, 1.2),
        (1.2, 3.0),
        (1.2, 4.8),
        (3.0, 1.2),
        (3.0, 3.0),
        (3.0, 4.8),
        (4.8, 1.2),
        (4.8, 3.0),
        (4.8, 4.8),
        (3.0, 0.4),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n * 36);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = (i % 10) as u8;
        let (cy, cx) = CENTERS[class as usize];
        let jy: f64 = rng.random_range(-0.55..0.55);
        let jx: f64 = rng.random_range(-0.55..0.55);
        let amp: f64 = rng.random_range(0.3..0.65);
        let sigma: f64 = rng.random_range(0.6..0.85);
        let inv = 1.0 / (2.0 * sigma * sigma);
        for y in 0..6 {
            for x in 0..6 {
                let dy = y as f64 - (cy + jy);
                let dx = x as f64 - (cx + jx);
                let v = amp * (-(dy * dy + dx * dx) * inv).exp();
                let noise: f64 = rng.random_range(-0.02..0.02);
                inputs.push((v + noise).clamp(0.0, 1.0));
            }
        }
        labels.push(class);
    }
    Dataset {
        inputs,
        labels: Some(labels),
        n,
        dim: 36,
        split,
    }
}

/// Loads and prepares one MNIST split: scale by 1/255, crop, pool to 6x6,
/// then subsample `take` examples by a seeded draw.
pub fn load_mnist_6x6(dir: &Path, split: Split, take: usize, seed: u64) -> Result<Dataset> {
    let (img_name, lbl_name) = match split {
        Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    };
    let images = read_idx(&existing_variant(dir, img_name)?)?;
    let labels_raw = read_idx(&existing_variant(dir, lbl_name)?)?;
    if images.dims.len() != 3 || images.dims[1] != 28 || images.dims[2] != 28 {
        return Err(Error::Format(format!(
            "expected (n, 28, 28) images, got {:?}",
            images.dims
        )));
    }
    let total = images.dims[0];
    if labels_raw.dims[0] != total {
        return Err(Error::Format("image/label counts differ".into()));
    }

    let mut picked: Vec<u32> = (0..total as u32).collect();
    if take < total {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        picked.shuffle(&mut rng);
        picked.truncate(take);
        picked.sort_unstable();
    }

    let mut inputs = Vec::with_capacity(picked.len() * 36);
    let mut labels = Vec::with_capacity(picked.len());
    let mut buf = [0.0f64; 28 * 28];
    for &i in &picked {
        let raw = &images.data[i as usize * 784..(i as usize + 1) * 784];
        for (b, &px) in buf.iter_mut().zip(raw) {
            *b = px as f64 / 255.0;
        }
        inputs.extend_from_slice(&downsample_6x6(&buf)?);
        labels.push(labels_raw.data[i as usize]);
    }
    Ok(Dataset {
        inputs,
        labels: Some(labels),
        n: picked.len(),
        dim: 36,
        split,
    })
}

fn existing_variant(dir: &Path, stem: &str) -> Result<std::path::PathBuf> {
    let plain = dir.join(stem);
    if plain.exists() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{stem}.gz"));
    if gz.exists() {
        return Ok(gz);
    }
    Err(Error::Format(format!(
        "neither {stem} nor {stem}.gz found in {}",
        dir.display()
    )))
}

/// True when both MNIST splits are present in `dir`.
pub fn mnist_available(dir: &Path) -> bool {
    [
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
    ]
    .iter()
    .all(|stem| existing_variant(dir, stem).is_ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_image_bytes(images: &[Vec<u8>], rows: usize, cols: usize) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&IDX_MAGIC_IMAGES.to_be_bytes());
        b.extend_from_slice(&(images.len() as u32).to_be_bytes());
        b.extend_from_slice(&(rows as u32).to_be_bytes());
        b.extend_from_slice(&(cols as u32).to_be_bytes());
        for img in images {
            b.extend_from_slice(img);
        }
        b
    }

    #[test]
    fn parses_hand_built_idx() {
        let imgs = vec![(0..9u8).collect::<Vec<_>>(), (9..18u8).collect::<Vec<_>>()];
        let bytes = idx_image_bytes(&imgs, 3, 3);
        let raw = parse_idx(&bytes).unwrap();
        assert_eq!(raw.dims, vec![2, 3, 3]);
        assert_eq!(&raw.data[..9], &imgs[0][..]);
        assert_eq!(&raw.data[9..], &imgs[1][..]);
    }

    #[test]
    fn zero_magic_is_format_error() {
        let mut bytes = idx_image_bytes(&[vec![0u8; 9]], 3, 3);
        bytes[0..4].copy_from_slice(&0u32.to_be_bytes());
        assert!(matches!(parse_idx(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_is_format_error() {
        let mut bytes = idx_image_bytes(&[vec![1u8; 9]], 3, 3);
        bytes.truncate(bytes.len() - 2);
        assert!(matches!(parse_idx(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn gzip_round_trip() {
        use std::io::Write;
        let bytes = idx_image_bytes(&[vec![7u8; 9]], 3, 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.idx.gz");
        let mut enc = flate2::write::GzEncoder::new(
            File::create(&path).unwrap(),
            flate2::Compression::default(),
        );
        enc.write_all(&bytes).unwrap();
        enc.finish().unwrap();
        let raw = read_idx(&path).unwrap();
        assert_eq!(raw.dims, vec![1, 3, 3]);
        assert_eq!(raw.data, vec![7u8; 9]);
    }

    #[test]
    fn downsample_constants() {
        let zeros = vec![0.0; 784];
        assert_eq!(downsample_6x6(&zeros).unwrap(), [0.0; 36]);
        let ones = vec![1.0; 784];
        for v in downsample_6x6(&ones).unwrap() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn downsample_single_hot_pixel() {
        // pixel (14, 14) lands in pooling cell (3, 3) after the 2-pixel crop
        let mut img = vec![0.0; 784];
        img[14 * 28 + 14] = 1.0;
        let out = downsample_6x6(&img).unwrap();
        for (i, v) in out.iter().enumerate() {
            if i == 3 * 6 + 3 {
                assert!((v - 1.0 / 16.0).abs() < 1e-15);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn downsample_preserves_crop_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img: Vec<f64> = (0..784).map(|_| rng.random_range(0.0..1.0)).collect();
        let out = downsample_6x6(&img).unwrap();
        let out_mean: f64 = out.iter().sum::<f64>() / 36.0;
        let mut crop_mean = 0.0;
        for y in 2..26 {
            for x in 2..26 {
                crop_mean += img[y * 28 + x];
            }
        }
        crop_mean /= 576.0;
        assert!((out_mean - crop_mean).abs() < 1e-12);
    }

    #[test]
    fn synthetic_is_deterministic_and_labeled() {
        let a = synthetic_dataset(50, 9, Split::Train);
        let b = synthetic_dataset(50, 9, Split::Train);
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.labels, b.labels);
        let c = synthetic_dataset(10, 1, Split::Train);
        let mut classes: Vec<u8> = c.labels.unwrap();
        classes.sort_unstable();
        assert_eq!(classes, (0..10).collect::<Vec<u8>>());
        assert!(a.inputs.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn single_batch_when_batch_size_covers_all() {
        let ds = synthetic_dataset(20, 4, Split::Train);
        let batches = ds.batches(32, 5, true);
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].n, 20);
    }

    #[test]
    fn unshuffled_batches_preserve_order() {
        let ds = synthetic_dataset(7, 4, Split::Train);
        let batches = ds.batches(3, 5, false);
        assert_eq!(batches.len(), 3);
        assert_eq!(batches[2].n, 1);
        let flat: Vec<f64> = batches.iter().flat_map(|b| b.inputs.clone()).collect();
        assert_eq!(flat, ds.inputs);
    }

    #[test]
    fn epochs_differ_but_reruns_match() {
        let ds = synthetic_dataset(30, 11, Split::Train);
        let mut s1 = BatchStream::new(ds.n, 8, 77);
        let mut s2 = BatchStream::new(ds.n, 8, 77);
        let epoch_batches = ds.n.div_ceil(8);
        let mut first_epoch = Vec::new();
        let mut second_epoch = Vec::new();
        for _ in 0..epoch_batches {
            first_epoch.extend(s1.next_indices());
        }
        for _ in 0..epoch_batches {
            second_epoch.extend(s1.next_indices());
        }
        assert_ne!(first_epoch, second_epoch, "epoch orders should differ");
        let mut replay = Vec::new();
        for _ in 0..epoch_batches {
            replay.extend(s2.next_indices());
        }
        assert_eq!(first_epoch, replay, "same seed must replay the stream");
    }

    #[test]
    fn epoch_batches_partition_dataset() {
        let ds = synthetic_dataset(25, 13, Split::Train);
        let batches = ds.batches(4, 3, true);
        let total: usize = batches.iter().map(|b| b.n).sum();
        assert_eq!(total, 25);
        // concatenation is a permutation: same multiset of rows
        let mut seen: Vec<Vec<u64>> = batches
            .iter()
            .flat_map(|b| {
                (0..b.n).map(|i| {
                    b.inputs[i * 36..(i + 1) * 36]
                        .iter()
                        .map(|v| v.to_bits())
                        .collect::<Vec<u64>>()
                })
            })
            .collect();
        let mut orig: Vec<Vec<u64>> = (0..ds.n)
            .map(|i| ds.sample(i).iter().map(|v| v.to_bits()).collect())
            .collect();
        seen.sort();
        orig.sort();
        assert_eq!(seen, orig);
    }
}
