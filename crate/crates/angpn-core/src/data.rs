//! Dataset ingestion, stratified semi-supervised splits, and synthetic
//! generators for desk-scale tests.
//!
//! Two feature formats are supported and sniffed by magic bytes:
//!
//! * header-less CSV, one point per row, decimal entries;
//! * packed binary: magic `ANGD1`, u32 LE point count, u32 LE dimension,
//!   then row-major little-endian f64 entries.
//!
//! Labels are a text file with one integer per line. Both formats round-trip
//! bit-exactly (CSV uses shortest round-trip decimals).

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::LabeledSplit;
use crate::numkit::Matrix;
use crate::train::split_rng;

/// A labeled point cloud.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub name: String,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, name: impl Into<String>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::Data(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        let class_count = labels.iter().max().map_or(0, |m| m + 1);
        if class_count == 0 {
            return Err(Error::Data("no labels".into()));
        }
        let mut present = vec![false; class_count];
        for &l in &labels {
            present[l] = true;
        }
        if let Some(missing) = present.iter().position(|&p| !p) {
            return Err(Error::Data(format!("class {missing} has no points")));
        }
        Ok(Dataset {
            features,
            labels,
            class_count,
            name: name.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

const PACKED_MAGIC: &[u8; 5] = b"ANGD1";

/// Parses header-less feature CSV; errors carry 1-based line numbers.
pub fn parse_features_csv(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut cols = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for cell in line.split(',') {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::Data(format!("line {}: non-numeric cell '{cell}'", lineno + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "line {}: non-finite value {v}",
                    lineno + 1
                )));
            }
            row.push(v);
        }
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Data(format!(
                    "line {}: {} cells, expected {c}",
                    lineno + 1,
                    row.len()
                )));
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data("empty feature file".into()));
    }
    Matrix::from_rows(&rows)
}

/// Parses a label file, one integer per line.
pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: usize = line
            .parse()
            .map_err(|_| Error::Data(format!("line {}: bad label '{line}'", lineno + 1)))?;
        labels.push(v);
    }
    if labels.is_empty() {
        return Err(Error::Data("empty label file".into()));
    }
    Ok(labels)
}

/// Packed binary encoding of a feature matrix.
pub fn features_to_packed(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 8 * m.rows() * m.cols());
    out.extend_from_slice(PACKED_MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes the packed binary feature format.
pub fn features_from_packed(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < 13 || &bytes[..5] != PACKED_MAGIC {
        return Err(Error::Data("not a packed feature file".into()));
    }
    let n = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let expect = 13 + 8 * n * d;
    if bytes.len() != expect {
        return Err(Error::Data(format!(
            "packed feature file has {} bytes, expected {expect}",
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(n * d);
    for chunk in bytes[13..].chunks_exact(8) {
        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    Matrix::from_vec(n, d, data)
}

/// Loads features from a path, sniffing packed binary versus CSV.
pub fn load_features(path: &Path) -> Result<Matrix> {
    let bytes = std::fs::read(path).map_err(|e| {
        Error::Data(format!("cannot read features '{}': {e}", path.display()))
    })?;
    if bytes.starts_with(PACKED_MAGIC) {
        features_from_packed(&bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Data(format!("'{}' is not UTF-8 CSV", path.display())))?;
        parse_features_csv(&text)
    }
}

/// Loads a dataset from a feature file and a label file.
pub fn load_csv(features_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let features = load_features(features_path)?;
    let text = std::fs::read_to_string(labels_path).map_err(|e| {
        Error::Data(format!("cannot read labels '{}': {e}", labels_path.display()))
    })?;
    let labels = parse_labels(&text)?;
    if labels.len() != features.rows() {
        return Err(Error::Data(format!(
            "{} feature rows but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    let name = features_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Dataset::new(features, labels, name)
}

pub fn save_features_csv(m: &Matrix, path: &Path) -> Result<()> {
    std::fs::write(path, m.to_csv())?;
    Ok(())
}

pub fn save_features_packed(m: &Matrix, path: &Path) -> Result<()> {
    std::fs::write(path, features_to_packed(m))?;
    Ok(())
}

pub fn save_labels(labels: &[usize], path: &Path) -> Result<()> {
    let mut text = String::new();
    for l in labels {
        text.push_str(&format!("{l}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Ceiling count with a tiny guard against decimal-rate rounding noise.
fn ceil_count(rate: f64, n: usize) -> usize {
    ((rate * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Per class: `ceil(label_rate * n_class)` points to train, then
/// `ceil(val_rate * n_class)` to validation, remainder to test. Deterministic
/// for a seed; uses RNG stream 0.
pub fn stratified_split(
    ds: &Dataset,
    label_rate: f64,
    val_rate: f64,
    seed: u64,
) -> Result<LabeledSplit> {
    if !(label_rate > 0.0 && label_rate < 1.0) {
        return Err(Error::Param(format!(
            "label rate must be in (0, 1), got {label_rate}"
        )));
    }
    if !(0.0..1.0).contains(&val_rate) {
        return Err(Error::Param(format!(
            "validation rate must be in [0, 1), got {val_rate}"
        )));
    }
    if label_rate + val_rate >= 1.0 {
        return Err(Error::Param(format!(
            "label rate {label_rate} + validation rate {val_rate} covers the whole dataset"
        )));
    }
    let mut rng = split_rng(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for class in 0..ds.class_count {
        let mut members: Vec<usize> = (0..ds.n()).filter(|&i| ds.labels[i] == class).collect();
        members.shuffle(&mut rng);
        let n_class = members.len();
        let n_train = ceil_count(label_rate, n_class).max(1);
        let n_val = ceil_count(val_rate, n_class);
        if n_train + n_val > n_class {
            return Err(Error::Data(format!(
                "class {class} has {n_class} points, cannot supply {n_train} train + {n_val} val"
            )));
        }
        train.extend_from_slice(&members[..n_train]);
        val.extend_from_slice(&members[n_train..n_train + n_val]);
        test.extend_from_slice(&members[n_train + n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    LabeledSplit::new(ds.labels.clone(), ds.class_count, train, val, test)
}

/// Isotropic Gaussian clouds around the given centers, one class per center.
pub fn gen_blobs(
    n_per_class: usize,
    centers: &[Vec<f64>],
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if centers.len() < 2 {
        return Err(Error::Param("need at least 2 centers".into()));
    }
    if noise_sigma < 0.0 {
        return Err(Error::Param(format!(
            "noise sigma must be nonnegative, got {noise_sigma}"
        )));
    }
    if n_per_class < 1 {
        return Err(Error::Param("need at least 1 point per class".into()));
    }
    let dim = centers[0].len();
    if centers.iter().any(|c| c.len() != dim) {
        return Err(Error::Param("centers must share a dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n = n_per_class * centers.len();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (class, center) in centers.iter().enumerate() {
        for _ in 0..n_per_class {
            let row: Vec<f64> = center
                .iter()
                .map(|&c| c + noise_sigma * normal.sample(&mut rng))
                .collect();
            rows.push(row);
            labels.push(class);
        }
    }
    Dataset::new(Matrix::from_rows(&rows)?, labels, "blobs")
}

/// Two interleaved crescents: class 0 on the upper unit semicircle
/// `(cos t, sin t)`, class 1 on `(1 - cos t, 0.5 - sin t)`, `t` uniform in
/// `[0, pi]`, plus isotropic Gaussian noise.
pub fn gen_two_moons(n_per_class: usize, noise_sigma: f64, seed: u64) -> Result<Dataset> {
    if n_per_class < 2 {
        return Err(Error::Param("need at least 2 points per class".into()));
    }
    if noise_sigma < 0.0 {
        return Err(Error::Param(format!(
            "noise sigma must be nonnegative, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rows = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for class in 0..2usize {
        for _ in 0..n_per_class {
            let t: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let (x, y) = if class == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            rows.push(vec![
                x + noise_sigma * normal.sample(&mut rng),
                y + noise_sigma * normal.sample(&mut rng),
            ]);
            labels.push(class);
        }
    }
    Dataset::new(Matrix::from_rows(&rows)?, labels, "two-moons")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_two_row_file() {
        let features = parse_features_csv("0,0\n3,4\n").unwrap();
        let labels = parse_labels("0\n1\n").unwrap();
        let ds = Dataset::new(features, labels, "t").unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.class_count, 2);
    }

    #[test]
    fn ragged_row_names_line() {
        let err = parse_features_csv("1,2\n3\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = parse_features_csv("1,2\nx,3\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn parse_rejects_non_finite() {
        assert!(parse_features_csv("1,NaN\n").is_err());
        assert!(parse_features_csv("1,inf\n").is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let m = Matrix::from_fn(4, 3, |i, j| {
            ((i * 31 + j * 17) % 23) as f64 * 0.07318 - 0.5
        });
        let parsed = parse_features_csv(&m.to_csv()).unwrap();
        assert_eq!(parsed, m);
    }

    #[test]
    fn packed_round_trip_is_bit_exact() {
        let m = Matrix::from_fn(3, 5, |i, j| ((i * 13 + j * 7) % 19) as f64 * 0.1231 - 1.0);
        let back = features_from_packed(&features_to_packed(&m)).unwrap();
        assert_eq!(back, m);
        assert!(features_from_packed(b"BOGUS").is_err());
    }

    #[test]
    fn split_counts_match_ceiling_arithmetic() {
        // 100 points, 10 classes x 10: rate 0.1 -> 1 train/class,
        // val 0.05 -> ceil(0.5) = 1/class, 8 test/class.
        let features = Matrix::from_fn(100, 2, |i, j| (i * 2 + j) as f64);
        let labels: Vec<usize> = (0..100).map(|i| i / 10).collect();
        let ds = Dataset::new(features, labels, "t").unwrap();
        let split = stratified_split(&ds, 0.1, 0.05, 3).unwrap();
        assert_eq!(split.train_idx.len(), 10);
        assert_eq!(split.val_idx.len(), 10);
        assert_eq!(split.test_idx.len(), 80);
    }

    #[test]
    fn split_rejects_exhaustion() {
        let features = Matrix::from_fn(10, 1, |i, _| i as f64);
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let ds = Dataset::new(features, labels, "t").unwrap();
        assert!(stratified_split(&ds, 0.96, 0.05, 1).is_err());
        assert!(stratified_split(&ds, 0.5, 0.5, 1).is_err());
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let ds = gen_blobs(25, &[vec![0.0, 0.0], vec![5.0, 0.0], vec![0.0, 5.0]], 0.3, 9).unwrap();
        let a = stratified_split(&ds, 0.2, 0.1, 42).unwrap();
        let b = stratified_split(&ds, 0.2, 0.1, 42).unwrap();
        assert_eq!(a.train_idx, b.train_idx);
        assert_eq!(a.val_idx, b.val_idx);
        assert_eq!(a.test_idx, b.test_idx);
        let c = stratified_split(&ds, 0.2, 0.1, 43).unwrap();
        assert_ne!(a.train_idx, c.train_idx);
        let total = a.train_idx.len() + a.val_idx.len() + a.test_idx.len();
        assert_eq!(total, ds.n());
    }

    #[test]
    fn blobs_zero_noise_sits_on_centers() {
        let centers = vec![vec![1.0, 2.0], vec![-3.0, 0.5]];
        let ds = gen_blobs(4, &centers, 0.0, 5).unwrap();
        for i in 0..ds.n() {
            let c = &centers[ds.labels[i]];
            for (a, b) in ds.features.row(i).iter().zip(c) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn blobs_are_separable_at_wide_margin() {
        let ds = gen_blobs(30, &[vec![0.0, 0.0], vec![10.0, 0.0]], 0.5, 7).unwrap();
        let mut min_inter = f64::INFINITY;
        for i in 0..ds.n() {
            for j in 0..ds.n() {
                if ds.labels[i] != ds.labels[j] {
                    let d: f64 = ds
                        .features
                        .row(i)
                        .iter()
                        .zip(ds.features.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    min_inter = min_inter.min(d);
                }
            }
        }
        assert!(min_inter > 0.0, "classes overlap");
    }

    #[test]
    fn moons_parametric_identity_and_order() {
        let ds = gen_two_moons(40, 0.0, 3).unwrap();
        let mut mean0 = 0.0;
        let mut mean1 = 0.0;
        for i in 0..ds.n() {
            let (x, y) = (ds.features.get(i, 0), ds.features.get(i, 1));
            if ds.labels[i] == 0 {
                assert!((x * x + y * y - 1.0).abs() <= 1e-12);
                mean0 += y;
            } else {
                mean1 += y;
            }
        }
        assert!(mean1 / 40.0 < mean0 / 40.0);
    }

    #[test]
    fn generators_are_reproducible() {
        let a = gen_two_moons(10, 0.1, 77).unwrap();
        let b = gen_two_moons(10, 0.1, 77).unwrap();
        assert_eq!(a.features, b.features);
        let c = gen_blobs(5, &[vec![0.0], vec![4.0]], 0.2, 8).unwrap();
        let d = gen_blobs(5, &[vec![0.0], vec![4.0]], 0.2, 8).unwrap();
        assert_eq!(c.features, d.features);
    }
}
