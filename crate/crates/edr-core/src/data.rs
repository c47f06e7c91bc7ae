//! Dataset ingestion: MNIST IDX, PGM/PPM image directories, ETEN tensors,
//! plus per-class splitting with seeded, reproducible sampling.

use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{EdrError, Result};
use crate::tensor::{fold_at, DenseTensor, Shape};

/// Sample tensor `X ∈ R^{I_1×…×I_M×n}` (last mode indexes samples) with
/// optional integer class labels.
#[derive(Debug, Clone)]
pub struct DataSet {
    x: DenseTensor,
    labels: Option<Vec<usize>>,
    provenance: String,
}

impl DataSet {
    pub fn new(x: DenseTensor, labels: Option<Vec<usize>>, provenance: &str) -> Result<Self> {
        if x.order() < 2 {
            return Err(EdrError::Shape("dataset tensor needs feature and sample modes".into()));
        }
        let n = *x.shape().dims().last().unwrap();
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(EdrError::Shape(format!(
                    "{} labels for {} samples",
                    l.len(),
                    n
                )));
            }
        }
        if x.data().iter().any(|v| !v.is_finite()) {
            return Err(EdrError::Numerical("non-finite value in dataset".into()));
        }
        Ok(DataSet {
            x,
            labels,
            provenance: provenance.to_string(),
        })
    }

    /// Dataset of order-1 samples from the columns of an m×n matrix.
    pub fn from_matrix(m: &DMatrix<f64>, labels: Option<Vec<usize>>, provenance: &str) -> Result<Self> {
        let shape = Shape::new(vec![m.nrows(), m.ncols()])?;
        let x = DenseTensor::new(shape, m.as_slice().to_vec())?;
        DataSet::new(x, labels, provenance)
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.x
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn n_samples(&self) -> usize {
        *self.x.shape().dims().last().unwrap()
    }

    /// Extents of the feature modes `I_1..I_M`.
    pub fn feature_dims(&self) -> &[usize] {
        let d = self.x.shape().dims();
        &d[..d.len() - 1]
    }

    pub fn feature_count(&self) -> usize {
        self.feature_dims().iter().product()
    }

    /// `Ψ_M(X)`: features × samples matrix.
    pub fn data_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.feature_count(), self.n_samples(), self.x.data())
    }

    /// Sample `i` (1-based) as an order-M tensor.
    pub fn sample(&self, i: usize) -> Result<DenseTensor> {
        self.x.frontal_slice(i)
    }

    /// New dataset from the 0-based sample indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<DataSet> {
        let m = self.feature_count();
        let n = self.n_samples();
        let mut data = Vec::with_capacity(m * indices.len());
        for &i in indices {
            if i >= n {
                return Err(EdrError::Range(format!("sample index {i} out of 0..{n}")));
            }
            data.extend_from_slice(&self.x.data()[i * m..(i + 1) * m]);
        }
        let mut dims = self.feature_dims().to_vec();
        dims.push(indices.len());
        let x = DenseTensor::new(Shape::new(dims)?, data)?;
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        DataSet::new(x, labels, &self.provenance)
    }

    /// Fixes the mode-`m` feature index (1-based value `r`) producing a
    /// dataset over the remaining feature modes; used by multi-weight fits.
    pub fn feature_slice(&self, mode: usize, r: usize) -> Result<DataSet> {
        let order = self.x.order();
        if mode == 0 || mode >= order {
            return Err(EdrError::Range(format!("feature mode {mode} out of 1..{order}")));
        }
        let extent = self.x.shape().dims()[mode - 1];
        if r == 0 || r > extent {
            return Err(EdrError::Range(format!("slice {r} out of 1..={extent}")));
        }
        let left: usize = self.x.shape().dims()[..mode - 1].iter().product();
        let right: usize = self.x.shape().dims()[mode..].iter().product();
        let mut data = Vec::with_capacity(left * right);
        for b in 0..right {
            let base = b * left * extent + (r - 1) * left;
            data.extend_from_slice(&self.x.data()[base..base + left]);
        }
        let mut dims = self.x.shape().dims().to_vec();
        dims.remove(mode - 1);
        let x = DenseTensor::new(Shape::new(dims)?, data)?;
        DataSet::new(x, self.labels.clone(), &self.provenance)
    }
}

/// Per-class train/test counts and the sampling seed.
#[derive(Debug, Clone, Copy)]
pub struct SplitPlan {
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
}

/// Seeded per-class split without replacement. Classes are visited in
/// ascending label order and their sample indices shuffled with ChaCha8
/// keyed by the plan seed, so identical plans give identical splits.
pub fn split(ds: &DataSet, plan: &SplitPlan) -> Result<(DataSet, DataSet)> {
    let labels = ds
        .labels()
        .ok_or_else(|| EdrError::Config("split requires labels".into()))?;
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for c in classes {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == c)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < plan.train_per_class + plan.test_per_class {
            return Err(EdrError::Config(format!(
                "class {} has {} samples, plan needs {}",
                c,
                idx.len(),
                plan.train_per_class + plan.test_per_class
            )));
        }
        idx.shuffle(&mut rng);
        train_idx.extend_from_slice(&idx[..plan.train_per_class]);
        test_idx.extend_from_slice(&idx[plan.train_per_class..plan.train_per_class + plan.test_per_class]);
    }
    Ok((ds.subset(&train_idx)?, ds.subset(&test_idx)?))
}

fn read_be_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_be_bytes(b))
}

/// Parses an MNIST IDX image/label file pair into `X ∈ R^{rows×cols×n}` with
/// pixels scaled to `[0,1]` by `1/255`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<DataSet> {
    let mut ir = std::io::BufReader::new(std::fs::File::open(images_path)?);
    let magic = read_be_u32(&mut ir)?;
    if magic != 0x0000_0803 {
        return Err(EdrError::Format(format!("bad image magic {magic:#010x}")));
    }
    let n = read_be_u32(&mut ir)? as usize;
    let rows = read_be_u32(&mut ir)? as usize;
    let cols = read_be_u32(&mut ir)? as usize;
    let mut pixels = vec![0u8; n * rows * cols];
    ir.read_exact(&mut pixels)
        .map_err(|_| EdrError::Format("truncated image payload".into()))?;

    let mut lr = std::io::BufReader::new(std::fs::File::open(labels_path)?);
    let magic = read_be_u32(&mut lr)?;
    if magic != 0x0000_0801 {
        return Err(EdrError::Format(format!("bad label magic {magic:#010x}")));
    }
    let ln = read_be_u32(&mut lr)? as usize;
    if ln != n {
        return Err(EdrError::Format(format!("{n} images but {ln} labels")));
    }
    let mut labels = vec![0u8; n];
    lr.read_exact(&mut labels)
        .map_err(|_| EdrError::Format("truncated label payload".into()))?;

    let shape = Shape::new(vec![rows, cols, n])?;
    let mut data = vec![0.0f64; rows * cols * n];
    for img in 0..n {
        for r in 0..rows {
            for c in 0..cols {
                let byte = pixels[(img * rows + r) * cols + c];
                data[img * rows * cols + c * rows + r] = byte as f64 / 255.0;
            }
        }
    }
    let x = DenseTensor::new(shape, data)?;
    DataSet::new(
        x,
        Some(labels.iter().map(|&l| l as usize).collect()),
        &format!("idx:{}", images_path.display()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorMode {
    Gray,
    Rgb,
}

struct Netpbm {
    width: usize,
    height: usize,
    channels: usize,
    /// row-major, channel-interleaved bytes
    bytes: Vec<u8>,
}

fn parse_netpbm(path: &Path) -> Result<Netpbm> {
    let raw = std::fs::read(path)?;
    if raw.len() < 2 {
        return Err(EdrError::Format(format!("{}: too short", path.display())));
    }
    let channels = match &raw[..2] {
        b"P5" => 1,
        b"P6" => 3,
        _ => {
            return Err(EdrError::Format(format!(
                "{}: not a binary PGM/PPM",
                path.display()
            )))
        }
    };
    // header tokens: width, height, maxval; '#' starts a comment to EOL
    let mut pos = 2usize;
    let mut fields = Vec::with_capacity(3);
    while fields.len() < 3 {
        while pos < raw.len() && (raw[pos].is_ascii_whitespace() || raw[pos] == b'#') {
            if raw[pos] == b'#' {
                while pos < raw.len() && raw[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < raw.len() && raw[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(EdrError::Format(format!("{}: bad header", path.display())));
        }
        let tok = std::str::from_utf8(&raw[start..pos]).unwrap();
        fields.push(tok.parse::<usize>().map_err(|_| {
            EdrError::Format(format!("{}: bad header field", path.display()))
        })?);
    }
    let (width, height, maxval) = (fields[0], fields[1], fields[2]);
    if maxval != 255 {
        return Err(EdrError::Format(format!(
            "{}: maxval {} unsupported",
            path.display(),
            maxval
        )));
    }
    pos += 1; // single whitespace after maxval
    let need = width * height * channels;
    if raw.len() < pos + need {
        return Err(EdrError::Format(format!("{}: truncated pixels", path.display())));
    }
    Ok(Netpbm {
        width,
        height,
        channels,
        bytes: raw[pos..pos + need].to_vec(),
    })
}

/// Bilinear resample of one channel; input and output are row-major planes
/// in `[0,1]`. Sample positions follow the pixel-center convention.
fn bilinear_resize(src: &[f64], sh: usize, sw: usize, dh: usize, dw: usize) -> Vec<f64> {
    let mut out = vec![0.0; dh * dw];
    let sy = sh as f64 / dh as f64;
    let sx = sw as f64 / dw as f64;
    for i in 0..dh {
        let fy = ((i as f64 + 0.5) * sy - 0.5).clamp(0.0, sh as f64 - 1.0);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let wy = fy - y0 as f64;
        for j in 0..dw {
            let fx = ((j as f64 + 0.5) * sx - 0.5).clamp(0.0, sw as f64 - 1.0);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let wx = fx - x0 as f64;
            let v = src[y0 * sw + x0] * (1.0 - wy) * (1.0 - wx)
                + src[y0 * sw + x1] * (1.0 - wy) * wx
                + src[y1 * sw + x0] * wy * (1.0 - wx)
                + src[y1 * sw + x1] * wy * wx;
            out[i * dw + j] = v;
        }
    }
    out
}

/// Loads a person-per-subdirectory image tree of binary PGM (gray) or PPM
/// (rgb) files. Labels follow the sorted subdirectory order; images are
/// normalized by `1/255` and bilinearly resized to `(height, width)`.
///
/// Produces `X ∈ R^{h×w×n}` for gray and `X ∈ R^{h×w×3×n}` for rgb.
pub fn load_image_dir(root: &Path, color: ColorMode, resize_to: (usize, usize)) -> Result<DataSet> {
    let (h, w) = resize_to;
    let mut subdirs: Vec<std::path::PathBuf> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(EdrError::Config(format!("{}: no class subdirectories", root.display())));
    }
    let channels = match color {
        ColorMode::Gray => 1,
        ColorMode::Rgb => 3,
    };
    let mut planes: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    for (class, dir) in subdirs.iter().enumerate() {
        let mut files: Vec<std::path::PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for f in files {
            let img = parse_netpbm(&f)?;
            if img.channels != channels {
                return Err(EdrError::Format(format!(
                    "{}: {} channels in {:?} mode",
                    f.display(),
                    img.channels,
                    color
                )));
            }
            for ch in 0..channels {
                let plane: Vec<f64> = (0..img.height * img.width)
                    .map(|p| img.bytes[p * channels + ch] as f64 / 255.0)
                    .collect();
                let resized = bilinear_resize(&plane, img.height, img.width, h, w);
                // tensor layout: row index fastest, then column, then channel
                for c in 0..w {
                    for r in 0..h {
                        planes.push(resized[r * w + c]);
                    }
                }
            }
            labels.push(class);
        }
    }
    let n = labels.len();
    let dims = match color {
        ColorMode::Gray => vec![h, w, n],
        ColorMode::Rgb => vec![h, w, 3, n],
    };
    // planes was filled channel-major per sample already in ivec order
    let x = DenseTensor::new(Shape::new(dims)?, planes)?;
    DataSet::new(x, Some(labels), &format!("imagedir:{}", root.display()))
}

/// Reads a dataset stored as an ETEN tensor plus an optional JSON label list.
pub fn load_eten(tensor_path: &Path, labels_path: Option<&Path>) -> Result<DataSet> {
    let x = crate::eten::read_tensor_file(tensor_path)?;
    let labels = match labels_path {
        Some(p) => {
            let txt = std::fs::read_to_string(p)?;
            let l: Vec<usize> = serde_json::from_str(&txt)
                .map_err(|e| EdrError::Format(format!("labels json: {e}")))?;
            Some(l)
        }
        None => None,
    };
    DataSet::new(x, labels, &format!("eten:{}", tensor_path.display()))
}

/// Fold a d×n embedding matrix into the canonical embedding tensor.
pub fn embedding_tensor(y: &DMatrix<f64>) -> DenseTensor {
    fold_at(y, &Shape::new(vec![y.nrows(), y.ncols()]).unwrap(), 1).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_idx_fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
        // two 2×2 images with distinct pixel bytes
        let ip = dir.join("imgs.idx3");
        let lp = dir.join("labels.idx1");
        let mut f = std::fs::File::create(&ip).unwrap();
        f.write_all(&0x0000_0803u32.to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        // image 1 row-major: [[0, 51], [102, 153]]; image 2: [[255, 204], [153, 102]]
        f.write_all(&[0, 51, 102, 153, 255, 204, 153, 102]).unwrap();
        let mut f = std::fs::File::create(&lp).unwrap();
        f.write_all(&0x0000_0801u32.to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        f.write_all(&[7, 3]).unwrap();
        (ip, lp)
    }

    #[test]
    fn idx_fixture_loads_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_idx_fixture(dir.path());
        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.tensor().shape().dims(), &[2, 2, 2]);
        assert_eq!(ds.labels().unwrap(), &[7, 3]);
        // X[row, col, img]
        assert_eq!(ds.tensor().get(&[1, 1, 1]).unwrap(), 0.0);
        assert_eq!(ds.tensor().get(&[1, 2, 1]).unwrap(), 51.0 / 255.0);
        assert_eq!(ds.tensor().get(&[2, 1, 1]).unwrap(), 102.0 / 255.0);
        assert_eq!(ds.tensor().get(&[1, 1, 2]).unwrap(), 1.0);
    }

    #[test]
    fn idx_rejects_bad_magic_and_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_idx_fixture(dir.path());
        let mut bytes = std::fs::read(&ip).unwrap();
        bytes[3] = 0x01;
        let bad = dir.path().join("bad.idx3");
        std::fs::write(&bad, &bytes).unwrap();
        assert!(load_idx(&bad, &lp).is_err());

        let mut lbytes = std::fs::read(&lp).unwrap();
        lbytes[7] = 3; // claim 3 labels
        let badl = dir.path().join("bad.idx1");
        std::fs::write(&badl, &lbytes).unwrap();
        assert!(load_idx(&ip, &badl).is_err());
    }

    fn write_pgm(path: &Path, w: usize, h: usize, bytes: &[u8]) {
        let mut f = std::fs::File::create(path).unwrap();
        write!(f, "P5\n{} {}\n255\n", w, h).unwrap();
        f.write_all(bytes).unwrap();
    }

    fn write_ppm(path: &Path, w: usize, h: usize, bytes: &[u8]) {
        let mut f = std::fs::File::create(path).unwrap();
        write!(f, "P6\n{} {}\n255\n", w, h).unwrap();
        f.write_all(bytes).unwrap();
    }

    #[test]
    fn image_dir_gray_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        for (c, shade) in [(0u8, 10u8), (1, 200)] {
            let sub = dir.path().join(format!("person{c}"));
            std::fs::create_dir(&sub).unwrap();
            write_pgm(&sub.join("a.pgm"), 2, 2, &[shade; 4]);
            write_pgm(&sub.join("b.pgm"), 2, 2, &[shade; 4]);
        }
        let ds = load_image_dir(dir.path(), ColorMode::Gray, (2, 2)).unwrap();
        assert_eq!(ds.tensor().shape().dims(), &[2, 2, 4]);
        assert_eq!(ds.labels().unwrap(), &[0, 0, 1, 1]);
        assert!((ds.tensor().get(&[1, 1, 1]).unwrap() - 10.0 / 255.0).abs() < 1e-12);
        assert!((ds.tensor().get(&[2, 2, 3]).unwrap() - 200.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_bilinear_downsample() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("p0");
        std::fs::create_dir(&sub).unwrap();
        let mut bytes = [0u8; 16];
        for r in 0..4 {
            for c in 0..4 {
                bytes[r * 4 + c] = if (r + c) % 2 == 0 { 0 } else { 255 };
            }
        }
        write_pgm(&sub.join("cb.pgm"), 4, 4, &bytes);
        let ds = load_image_dir(dir.path(), ColorMode::Gray, (2, 2)).unwrap();
        for i in 1..=2 {
            for j in 1..=2 {
                assert!((ds.tensor().get(&[i, j, 1]).unwrap() - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixed_modes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("p0");
        std::fs::create_dir(&sub).unwrap();
        write_ppm(&sub.join("a.ppm"), 2, 2, &[100u8; 12]);
        write_pgm(&sub.join("b.pgm"), 2, 2, &[100u8; 4]);
        assert!(load_image_dir(dir.path(), ColorMode::Rgb, (2, 2)).is_err());
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            data.push(i as f64);
            data.push(-(i as f64));
            labels.push(i % 3);
        }
        let x = DenseTensor::new(Shape::new(vec![2, 30]).unwrap(), data).unwrap();
        let ds = DataSet::new(x, Some(labels), "synthetic").unwrap();
        let plan = SplitPlan { train_per_class: 6, test_per_class: 2, seed: 42 };
        let (tr1, te1) = split(&ds, &plan).unwrap();
        let (tr2, te2) = split(&ds, &plan).unwrap();
        assert_eq!(tr1.tensor().data(), tr2.tensor().data());
        assert_eq!(te1.tensor().data(), te2.tensor().data());
        assert_eq!(tr1.n_samples(), 18);
        assert_eq!(te1.n_samples(), 6);
        // disjoint: first feature value identifies the source sample
        let tset: Vec<i64> = tr1.tensor().data().iter().step_by(2).map(|&v| v as i64).collect();
        let eset: Vec<i64> = te1.tensor().data().iter().step_by(2).map(|&v| v as i64).collect();
        assert!(tset.iter().all(|v| !eset.contains(v)));
    }

    #[test]
    fn split_all_train_and_infeasible() {
        let x = DenseTensor::new(Shape::new(vec![1, 4]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let ds = DataSet::new(x, Some(vec![0, 0, 1, 1]), "t").unwrap();
        let (tr, te) =
            split(&ds, &SplitPlan { train_per_class: 2, test_per_class: 0, seed: 1 }).unwrap();
        assert_eq!(tr.n_samples(), 4);
        assert_eq!(te.n_samples(), 0);
        assert!(split(&ds, &SplitPlan { train_per_class: 3, test_per_class: 0, seed: 1 }).is_err());
    }

    #[test]
    fn split_concat_preserves_multiset() {
        let x = DenseTensor::new(
            Shape::new(vec![1, 6]).unwrap(),
            vec![5.0, 1.0, 4.0, 2.0, 3.0, 6.0],
        )
        .unwrap();
        let ds = DataSet::new(x, Some(vec![0, 0, 0, 1, 1, 1]), "t").unwrap();
        let (tr, te) =
            split(&ds, &SplitPlan { train_per_class: 2, test_per_class: 1, seed: 9 }).unwrap();
        let mut all: Vec<f64> = tr.tensor().data().to_vec();
        all.extend_from_slice(te.tensor().data());
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(all, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn feature_slice_extracts_channel() {
        // X ∈ R^{2×3×2}: feature modes (2,3), 2 samples
        let x = DenseTensor::new(
            Shape::new(vec![2, 3, 2]).unwrap(),
            (0..12).map(|v| v as f64).collect(),
        )
        .unwrap();
        let ds = DataSet::new(x.clone(), None, "t").unwrap();
        let s2 = ds.feature_slice(2, 2).unwrap();
        assert_eq!(s2.tensor().shape().dims(), &[2, 2]);
        for i in 1..=2 {
            for n in 1..=2 {
                assert_eq!(
                    s2.tensor().get(&[i, n]).unwrap(),
                    x.get(&[i, 2, n]).unwrap()
                );
            }
        }
    }
}
