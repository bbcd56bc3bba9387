//! MNIST ingestion: IDX parsing, 28×28 → 10×10 area downscaling and seeded
//! per-epoch subsampling.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::rng::{Rng64, Stream};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const SOURCE_SIDE: usize = 28;
pub const SIDE: usize = 10;
pub const PIXELS: usize = SIDE * SIDE;
pub const CLASSES: usize = 10;
/// Images drawn per training epoch.
pub const SAMPLES_PER_EPOCH: usize = 2500;

pub type Image = [f64; PIXELS];

/// Raw 28×28 byte images and their labels.
#[derive(Debug, Clone)]
pub struct RawMnist {
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
}

impl RawMnist {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = SOURCE_SIDE * SOURCE_SIDE;
        &self.images[i * n..(i + 1) * n]
    }
}

fn open(path: &Path) -> Result<Box<dyn Read>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let gz = reader
        .fill_buf()
        .map_err(|e| Error::io(path, e))?
        .starts_with(&[0x1f, 0x8b]);
    Ok(if gz {
        Box::new(GzDecoder::new(reader))
    } else {
        Box::new(reader)
    })
}

fn read_u32(reader: &mut dyn Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(u32::from_be_bytes(buf))
}

fn read_payload(reader: &mut dyn Read, path: &Path, len: usize) -> Result<Vec<u8>> {
    let mut data = vec![0u8; len];
    reader.read_exact(&mut data).map_err(|e| Error::io(path, e))?;
    Ok(data)
}

fn check_magic(found: u32, want: u32, path: &Path) -> Result<()> {
    if found != want {
        return Err(Error::Format(format!(
            "{}: magic {found:#010x}, expected {want:#010x}",
            path.display()
        )));
    }
    Ok(())
}

/// Reads an IDX image/label file pair (plain or gzip-compressed).
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<RawMnist> {
    let mut r = open(images_path)?;
    check_magic(read_u32(&mut r, images_path)?, IMAGES_MAGIC, images_path)?;
    let count = read_u32(&mut r, images_path)? as usize;
    let rows = read_u32(&mut r, images_path)? as usize;
    let cols = read_u32(&mut r, images_path)? as usize;
    if rows != SOURCE_SIDE || cols != SOURCE_SIDE {
        return Err(Error::Format(format!(
            "{}: images are {rows}×{cols}, expected 28×28",
            images_path.display()
        )));
    }
    let images = read_payload(&mut r, images_path, count * rows * cols)?;

    let mut r = open(labels_path)?;
    check_magic(read_u32(&mut r, labels_path)?, LABELS_MAGIC, labels_path)?;
    let label_count = read_u32(&mut r, labels_path)? as usize;
    if label_count != count {
        return Err(Error::Consistency(format!("{count} images but {label_count} labels")));
    }
    let labels = read_payload(&mut r, labels_path, label_count)?;
    if let Some(bad) = labels.iter().find(|&&l| l as usize >= CLASSES) {
        return Err(Error::Format(format!(
            "{}: label {bad} is not a digit",
            labels_path.display()
        )));
    }
    Ok(RawMnist { images, labels })
}

/// Overlap weights of the 28 source rows with the 10 output rows, each row of
/// the result summing to 1. Lengths are counted in tenths of a source pixel
/// so the overlaps are exact integers.
fn box_weights() -> [[f64; SOURCE_SIDE]; SIDE] {
    let cell = SOURCE_SIDE as i64; // output cell width, in tenths
    let mut w = [[0.0; SOURCE_SIDE]; SIDE];
    for (i, row) in w.iter_mut().enumerate() {
        let (lo, hi) = (cell * i as i64, cell * (i as i64 + 1));
        for (r, wr) in row.iter_mut().enumerate() {
            let (slo, shi) = (10 * r as i64, 10 * r as i64 + 10);
            let overlap = (hi.min(shi) - lo.max(slo)).max(0);
            *wr = overlap as f64 / cell as f64;
        }
    }
    w
}

/// Area-weighted average over 2.8×2.8 source regions, scaled to [0, 1].
pub fn downscale_10x10(img28: &[u8]) -> Result<Image> {
    if img28.len() != SOURCE_SIDE * SOURCE_SIDE {
        return Err(Error::Shape(format!(
            "expected a 28×28 image, got {} bytes",
            img28.len()
        )));
    }
    let w = box_weights();
    // Rows first: 10×28 intermediate.
    let mut rows = [[0.0; SOURCE_SIDE]; SIDE];
    for (i, out) in rows.iter_mut().enumerate() {
        for (r, &wr) in w[i].iter().enumerate() {
            if wr == 0.0 {
                continue;
            }
            let src = &img28[r * SOURCE_SIDE..(r + 1) * SOURCE_SIDE];
            for (o, &s) in out.iter_mut().zip(src) {
                *o += wr * s as f64;
            }
        }
    }
    let mut out = [0.0; PIXELS];
    for i in 0..SIDE {
        for j in 0..SIDE {
            let v: f64 = w[j].iter().zip(&rows[i]).map(|(a, b)| a * b).sum();
            out[i * SIDE + j] = (v / 255.0).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

/// Downscaled images with labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Vec<Image>,
    pub labels: Vec<u8>,
    pub split: Split,
}

fn find_file(dir: &Path, stem: &str) -> Result<PathBuf> {
    for name in [stem.to_string(), format!("{stem}.gz")] {
        let p = dir.join(name);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::io(
        dir.join(stem),
        std::io::Error::new(std::io::ErrorKind::NotFound, "IDX file not found (plain or .gz)"),
    ))
}

impl Dataset {
    pub fn from_raw(raw: &RawMnist, split: Split) -> Result<Self> {
        let images = (0..raw.len())
            .map(|i| downscale_10x10(raw.image(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            images,
            labels: raw.labels.clone(),
            split,
        })
    }

    /// Loads `{train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz]` from `dir`,
    /// keeping at most `limit` items from the front.
    pub fn load(dir: &Path, split: Split, limit: Option<usize>) -> Result<Self> {
        let images = find_file(dir, &format!("{}-images-idx3-ubyte", split.prefix()))?;
        let labels = find_file(dir, &format!("{}-labels-idx1-ubyte", split.prefix()))?;
        let mut raw = load_idx(&images, &labels)?;
        if let Some(n) = limit {
            let n = n.min(raw.len());
            raw.labels.truncate(n);
            raw.images.truncate(n * SOURCE_SIDE * SOURCE_SIDE);
        }
        Self::from_raw(&raw, split)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// `k` distinct indices from `0..n`, a deterministic function of
/// `(seed, epoch)`: a partial Fisher-Yates shuffle of `0..n` driven by
/// `Rng64::stream(seed, EpochSample, epoch)`. The result is in draw order.
pub fn epoch_sample(n: usize, k: usize, seed: u64, epoch: u64) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::Domain(format!("cannot draw {k} distinct samples from {n}")));
    }
    let mut rng = Rng64::stream(seed, Stream::EpochSample, epoch);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.below(n - i);
        idx.swap(i, j);
    }
    idx.truncate(k);
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::io::Write;

    fn write_idx(dir: &Path, images: &[u8], count: u32, labels: &[u8], image_magic: u32) -> (PathBuf, PathBuf) {
        let ip = dir.join("imgs");
        let lp = dir.join("lbls");
        let mut f = File::create(&ip).unwrap();
        for v in [image_magic, count, 28, 28] {
            f.write_all(&v.to_be_bytes()).unwrap();
        }
        f.write_all(images).unwrap();
        let mut f = File::create(&lp).unwrap();
        for v in [LABELS_MAGIC, labels.len() as u32] {
            f.write_all(&v.to_be_bytes()).unwrap();
        }
        f.write_all(labels).unwrap();
        (ip, lp)
    }

    #[test]
    fn parses_a_small_idx_pair() {
        let dir = tempfile::tempdir().unwrap();
        let images: Vec<u8> = (0..2 * 784).map(|i| (i % 256) as u8).collect();
        let (ip, lp) = write_idx(dir.path(), &images, 2, &[3, 9], IMAGES_MAGIC);
        let raw = load_idx(&ip, &lp).unwrap();
        assert_eq!(raw.len(), 2);
        assert_eq!(raw.labels, vec![3, 9]);
        assert_eq!(raw.image(1)[0], (784 % 256) as u8);
    }

    #[test]
    fn gzip_input_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let images = vec![7u8; 784];
        let (ip, lp) = write_idx(dir.path(), &images, 1, &[1], IMAGES_MAGIC);
        let gz_path = dir.path().join("imgs.gz");
        let mut enc = flate2::write::GzEncoder::new(File::create(&gz_path).unwrap(), flate2::Compression::fast());
        enc.write_all(&std::fs::read(&ip).unwrap()).unwrap();
        enc.finish().unwrap();
        let raw = load_idx(&gz_path, &lp).unwrap();
        assert_eq!(raw.images, images);
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let images = vec![0u8; 784];
        let (ip, lp) = write_idx(dir.path(), &images, 1, &[1], 0x0000_0802);
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Format(_))));

        let (ip, lp) = write_idx(dir.path(), &images[..500], 1, &[1], IMAGES_MAGIC);
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Io { .. })));

        let (ip, lp) = write_idx(dir.path(), &images, 1, &[1, 2], IMAGES_MAGIC);
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Consistency(_))));

        assert!(matches!(
            load_idx(&dir.path().join("missing"), &lp),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn box_weights_partition_each_source_row() {
        let w = box_weights();
        for row in &w {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        for r in 0..SOURCE_SIDE {
            let col: f64 = w.iter().map(|row| row[r]).sum();
            assert!((col - 10.0 / 28.0).abs() < 1e-15);
        }
    }

    #[test]
    fn downscale_constants_and_mass() {
        for v in [0u8, 17, 255] {
            let out = downscale_10x10(&[v; 784]).unwrap();
            for o in out {
                assert!((o - v as f64 / 255.0).abs() < 1e-12);
            }
        }
        let mut rng = Rng64::seed_from_u64(17);
        for _ in 0..20 {
            let img: Vec<u8> = (0..784).map(|_| rng.below(256) as u8).collect();
            let out = downscale_10x10(&img).unwrap();
            let mean_in = img.iter().map(|&b| b as f64).sum::<f64>() / 784.0 / 255.0;
            let mean_out = out.iter().sum::<f64>() / 100.0;
            assert!((mean_in - mean_out).abs() < 1e-12);
            assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert!(matches!(downscale_10x10(&[0; 100]), Err(Error::Shape(_))));
    }

    #[test]
    fn sampling_properties() {
        let full = epoch_sample(100, 100, 1, 0).unwrap();
        let set: HashSet<_> = full.iter().copied().collect();
        assert_eq!(set, (0..100).collect());

        let a = epoch_sample(60_000, 2500, 42, 0).unwrap();
        let b = epoch_sample(60_000, 2500, 42, 0).unwrap();
        let c = epoch_sample(60_000, 2500, 42, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.iter().collect::<HashSet<_>>().len(), 2500);
        assert!(a.iter().all(|&i| i < 60_000));

        assert!(matches!(epoch_sample(10, 11, 0, 0), Err(Error::Domain(_))));
    }
}
