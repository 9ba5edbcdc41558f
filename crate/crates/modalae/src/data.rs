//! Dataset loading, normalization, splitting, and the synthetic
//! mode-superposition generator.
//!
//! Three on-disk formats are understood:
//! - IDX: big-endian binary, magic 0x00000803 for images (3 dims) and
//!   0x00000801 for labels (1 dim), unsigned bytes.
//! - amat: whitespace-separated decimal reals, one sample per line, label
//!   last.
//! - CSV: comma-separated numeric rows, label in a caller-chosen column,
//!   optional header line.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::orthonormalize_columns;
use crate::mat::{matmul, Mat};
use crate::rng::Rng;

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// Tolerance for accepting a real-valued label as an integer.
const LABEL_TOL: f64 = 1e-9;

/// A labeled sample matrix. Rows are samples; entries are expected to lie in
/// [0, 1] once normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Mat,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(features: Mat, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Mismatch(format!(
                "{} feature rows vs {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if num_classes < 1 {
            return Err(Error::Config("num_classes must be at least 1".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Label(format!(
                "label {} out of range for {} classes",
                bad, num_classes
            )));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
        })
    }

    /// Build with `num_classes` inferred as max label + 1.
    pub fn from_parts(features: Mat, labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(1, |&m| m + 1);
        Dataset::new(features, labels, k)
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Concatenate two datasets with identical dimensions (pooling train and
    /// test files before a fresh split).
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "cannot pool datasets of width {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let mut data = self.features.data().to_vec();
        data.extend_from_slice(other.features.data());
        let features = Mat::from_vec(self.len() + other.len(), self.dim(), data)?;
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let k = self.num_classes.max(other.num_classes);
        Dataset::new(features, labels, k)
    }
}

/// How to carve a dataset into train/validation/test parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub seed: u64,
    pub shuffle: bool,
}

/// Ground truth emitted by the synthetic generator: the mode-shape matrix,
/// the latent coordinates, and the affine map that took the raw superposition
/// into [0, 1] (`feature = (raw - raw_min) / raw_range`).
#[derive(Clone, Debug)]
pub struct ModalGroundTruth {
    /// d×m matrix with mutually orthogonal (orthonormal) columns.
    pub psi: Mat,
    /// n×m latent coordinates, one row per sample.
    pub modal_coords: Mat,
    pub noise_sigma: f64,
    pub raw_min: f64,
    pub raw_range: f64,
}

impl ModalGroundTruth {
    /// Invert the recorded rescale, recovering the raw superposition matrix.
    pub fn unrescale(&self, features: &Mat) -> Mat {
        features.map(|x| x * self.raw_range + self.raw_min)
    }
}

fn read_be_u32<R: Read>(r: &mut R, what: &str, offset: usize) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("{} truncated at offset {}", what, offset)))?;
    Ok(u32::from_be_bytes(buf))
}

/// Load an IDX image/label file pair (the MNIST container format).
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let mut img = BufReader::new(File::open(images_path)?);
    let magic = read_be_u32(&mut img, "image header", 0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "bad image magic 0x{:08x} at offset 0 in {} (expected 0x{:08x})",
            magic,
            images_path.display(),
            IDX_IMAGE_MAGIC
        )));
    }
    let n = read_be_u32(&mut img, "image header", 4)? as usize;
    let rows = read_be_u32(&mut img, "image header", 8)? as usize;
    let cols = read_be_u32(&mut img, "image header", 12)? as usize;

    let mut lbl = BufReader::new(File::open(labels_path)?);
    let lmagic = read_be_u32(&mut lbl, "label header", 0)?;
    if lmagic != IDX_LABEL_MAGIC {
        return Err(Error::Format(format!(
            "bad label magic 0x{:08x} at offset 0 in {} (expected 0x{:08x})",
            lmagic,
            labels_path.display(),
            IDX_LABEL_MAGIC
        )));
    }
    let n_labels = read_be_u32(&mut lbl, "label header", 4)? as usize;
    if n_labels != n {
        return Err(Error::Mismatch(format!(
            "{} images but {} labels",
            n, n_labels
        )));
    }

    let d = rows * cols;
    let mut features = Vec::with_capacity(n * d);
    let mut record = vec![0u8; d];
    for i in 0..n {
        img.read_exact(&mut record).map_err(|_| {
            Error::Format(format!(
                "image data truncated at sample {} (offset {})",
                i,
                16 + i * d
            ))
        })?;
        features.extend(record.iter().map(|&b| b as f64 / 255.0));
    }
    let mut label_bytes = vec![0u8; n];
    lbl.read_exact(&mut label_bytes)
        .map_err(|_| Error::Format("label data truncated".into()))?;
    let labels: Vec<usize> = label_bytes.into_iter().map(|b| b as usize).collect();
    Dataset::from_parts(Mat::from_vec(n, d, features)?, labels)
}

fn label_from_real(value: f64, place: &str) -> Result<usize> {
    let rounded = value.round();
    if (value - rounded).abs() > LABEL_TOL || rounded < 0.0 {
        return Err(Error::Label(format!(
            "non-integer label {} at {}",
            value, place
        )));
    }
    Ok(rounded as usize)
}

/// Load an amat file: whitespace-separated reals, one sample per line, the
/// last field being the class label. Feature values are kept verbatim.
pub fn load_amat(path: &Path) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut width: Option<usize> = None;
    let mut features: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut n = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut row: Vec<f64> = Vec::with_capacity(width.unwrap_or(16));
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                Error::Format(format!(
                    "unparseable value '{}' on line {}",
                    tok,
                    lineno + 1
                ))
            })?;
            row.push(v);
        }
        match width {
            None => {
                if row.len() < 2 {
                    return Err(Error::Format(format!(
                        "line {} has {} fields; need at least one feature plus a label",
                        lineno + 1,
                        row.len()
                    )));
                }
                width = Some(row.len());
            }
            Some(w) if w != row.len() => {
                return Err(Error::Format(format!(
                    "ragged line {}: {} fields, expected {}",
                    lineno + 1,
                    row.len(),
                    w
                )));
            }
            _ => {}
        }
        let label_val = row.pop().expect("width checked above");
        labels.push(label_from_real(label_val, &format!("line {}", lineno + 1))?);
        features.extend_from_slice(&row);
        n += 1;
    }
    let d = width.map_or(0, |w| w - 1);
    if n == 0 {
        return Err(Error::Format(format!("{} contains no samples", path.display())));
    }
    Dataset::from_parts(Mat::from_vec(n, d, features)?, labels)
}

/// Write a dataset in amat form. Uses shortest round-trip float formatting so
/// a reload reproduces the features exactly.
pub fn save_amat(data: &Dataset, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for r in 0..data.len() {
        for &x in data.features.row(r) {
            write!(out, "{} ", x)?;
        }
        writeln!(out, "{}", data.labels[r])?;
    }
    Ok(())
}

/// Load a CSV file with the label in `label_column`; the remaining columns
/// become features, min-max normalized to [0, 1].
pub fn load_csv(path: &Path, label_column: usize, skip_header: bool) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut width: Option<usize> = None;
    let mut features: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut n = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if skip_header && lineno == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row_idx = lineno + 1;
        let mut row: Vec<f64> = Vec::with_capacity(width.unwrap_or(16));
        for (col, tok) in line.split(',').enumerate() {
            let v: f64 = tok.trim().parse().map_err(|_| {
                Error::Format(format!(
                    "unparseable cell '{}' at row {}, column {}",
                    tok.trim(),
                    row_idx,
                    col + 1
                ))
            })?;
            row.push(v);
        }
        match width {
            None => {
                if label_column >= row.len() {
                    return Err(Error::Format(format!(
                        "label column {} out of range for width {}",
                        label_column,
                        row.len()
                    )));
                }
                width = Some(row.len());
            }
            Some(w) if w != row.len() => {
                return Err(Error::Format(format!(
                    "inconsistent width at row {}: {} columns, expected {}",
                    row_idx,
                    row.len(),
                    w
                )));
            }
            _ => {}
        }
        let label_val = row.remove(label_column);
        labels.push(label_from_real(label_val, &format!("row {}", row_idx))?);
        features.extend_from_slice(&row);
        n += 1;
    }
    if n == 0 {
        return Err(Error::Format(format!("{} contains no samples", path.display())));
    }
    let d = width.unwrap() - 1;
    let data = Dataset::from_parts(Mat::from_vec(n, d, features)?, labels)?;
    Ok(normalize(&data))
}

/// Affinely map all features so the global minimum goes to 0 and the global
/// maximum to 1. A constant dataset maps to all zeros.
pub fn normalize(data: &Dataset) -> Dataset {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in data.features.data() {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let features = if hi > lo {
        let range = hi - lo;
        data.features.map(|x| (x - lo) / range)
    } else {
        Mat::zeros(data.features.rows(), data.features.cols())
    };
    Dataset {
        features,
        labels: data.labels.clone(),
        num_classes: data.num_classes,
    }
}

/// Partition into disjoint train/validation/test datasets. With
/// `spec.shuffle` the index order is permuted by a generator seeded from
/// `spec.seed`; identical specs give identical partitions.
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let total = spec.n_train + spec.n_valid + spec.n_test;
    if total > data.len() {
        return Err(Error::Size(format!(
            "split asks for {} samples but the dataset has {}",
            total,
            data.len()
        )));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    if spec.shuffle {
        Rng::new(spec.seed).substream("split").shuffle(&mut idx);
    }
    let take = |range: std::ops::Range<usize>| -> Result<Dataset> {
        let sel = &idx[range];
        Dataset::new(
            data.features.gather_rows(sel),
            sel.iter().map(|&i| data.labels[i]).collect(),
            data.num_classes,
        )
    };
    let train = take(0..spec.n_train)?;
    let valid = take(spec.n_train..spec.n_train + spec.n_valid)?;
    let test = take(spec.n_train + spec.n_valid..total)?;
    Ok((train, valid, test))
}

/// Generate `n` samples of an m-mode superposition in `d` dimensions:
/// orthonormal mode shapes from seeded uniform draws, standard-normal latent
/// coordinates, optional white noise, then a global affine rescale into
/// [0, 1]. Labels are all zero.
pub fn make_modal_dataset(
    n: usize,
    d: usize,
    m: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(Dataset, ModalGroundTruth)> {
    if m > d {
        return Err(Error::Dimension(format!(
            "mode count {} exceeds dimension {}",
            m, d
        )));
    }
    let base = Rng::new(seed);
    let mut psi_rng = base.substream("psi");
    let raw_psi = Mat::from_vec(
        d,
        m,
        (0..d * m).map(|_| psi_rng.uniform_in(-1.0, 1.0)).collect(),
    )?;
    let psi = orthonormalize_columns(&raw_psi, 1e-12)?;

    let mut coord_rng = base.substream("coords");
    let modal_coords = Mat::from_vec(n, m, (0..n * m).map(|_| coord_rng.normal()).collect())?;

    // Rows are samples: X = Q Ψᵀ.
    let mut raw = matmul(&modal_coords, &psi.transpose())?;
    if noise_sigma > 0.0 {
        let mut noise_rng = base.substream("noise");
        for x in raw.data_mut() {
            *x += noise_sigma * noise_rng.normal();
        }
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in raw.data() {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let (features, raw_min, raw_range) = if hi > lo {
        (raw.map(|x| (x - lo) / (hi - lo)), lo, hi - lo)
    } else {
        (Mat::zeros(n, d), lo, 0.0)
    };

    let dataset = Dataset::new(features, vec![0; n], 1)?;
    let truth = ModalGroundTruth {
        psi,
        modal_coords,
        noise_sigma,
        raw_min,
        raw_range,
    };
    Ok((dataset, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;
    use std::io::Write as _;

    fn write_idx_pair(
        dir: &tempfile::TempDir,
        images: &[Vec<u8>],
        rows: u32,
        cols: u32,
        labels: &[u8],
    ) -> (std::path::PathBuf, std::path::PathBuf) {
        let img_path = dir.path().join("images.idx3");
        let lbl_path = dir.path().join("labels.idx1");
        let mut f = File::create(&img_path).unwrap();
        f.write_all(&IDX_IMAGE_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&(images.len() as u32).to_be_bytes()).unwrap();
        f.write_all(&rows.to_be_bytes()).unwrap();
        f.write_all(&cols.to_be_bytes()).unwrap();
        for img in images {
            f.write_all(img).unwrap();
        }
        let mut f = File::create(&lbl_path).unwrap();
        f.write_all(&IDX_LABEL_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&(labels.len() as u32).to_be_bytes()).unwrap();
        f.write_all(labels).unwrap();
        (img_path, lbl_path)
    }

    #[test]
    fn idx_all_255_normalizes_to_one() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = write_idx_pair(&dir, &[vec![255; 4], vec![255; 4]], 2, 2, &[0, 1]);
        let ds = load_idx(&img, &lbl).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 4);
        assert!(ds.features.data().iter().all(|&x| x == 1.0));
        assert_eq!(ds.labels, vec![0, 1]);
    }

    #[test]
    fn idx_byte_51_is_point_two() {
        // Hand arithmetic: 51 / 255 = 0.2.
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = write_idx_pair(&dir, &[vec![51, 0, 0, 0]], 2, 2, &[3]);
        let ds = load_idx(&img, &lbl).unwrap();
        assert_eq!(ds.features[(0, 0)], 51.0 / 255.0);
        assert_eq!(ds.features[(0, 0)], 0.2);
    }

    #[test]
    fn idx_bad_magic_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = write_idx_pair(&dir, &[vec![0; 4]], 2, 2, &[0]);
        // Corrupt the image magic.
        let mut bytes = std::fs::read(&img).unwrap();
        bytes[3] = 0x07;
        std::fs::write(&img, bytes).unwrap();
        let err = load_idx(&img, &lbl).unwrap_err();
        match err {
            Error::Format(msg) => assert!(msg.contains("offset 0"), "{msg}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn idx_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = write_idx_pair(&dir, &[vec![0; 4]], 2, 2, &[0, 1]);
        assert!(matches!(load_idx(&img, &lbl), Err(Error::Mismatch(_))));
    }

    #[test]
    fn idx_entries_in_unit_interval_and_exact() {
        let dir = tempfile::tempdir().unwrap();
        let bytes: Vec<u8> = (0..=255).collect();
        let (img, lbl) = write_idx_pair(&dir, &[bytes.clone()], 16, 16, &[9]);
        let ds = load_idx(&img, &lbl).unwrap();
        for (i, &b) in bytes.iter().enumerate() {
            let x = ds.features[(0, i)];
            assert!((0.0..=1.0).contains(&x));
            assert_eq!(x, b as f64 / 255.0);
        }
    }

    #[test]
    fn amat_three_line_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.amat");
        std::fs::write(&path, "0 0.25 0.5 0.75 1\n1 0 1 0 2\n0.5 0.5 0.5 0.5 0\n").unwrap();
        let ds = load_amat(&path).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 4);
        assert_eq!(ds.num_classes, 3);
    }

    #[test]
    fn amat_field_mapping() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.amat");
        std::fs::write(&path, "0 0.5 1 7.0\n").unwrap();
        let ds = load_amat(&path).unwrap();
        assert_eq!(ds.features.row(0), &[0.0, 0.5, 1.0]);
        assert_eq!(ds.labels, vec![7]);
    }

    #[test]
    fn amat_ragged_line_reports_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.amat");
        std::fs::write(&path, "0 0.5 1 7\n0 0.5 1\n").unwrap();
        match load_amat(&path).unwrap_err() {
            Error::Format(msg) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn amat_non_integer_label() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.amat");
        std::fs::write(&path, "0 0.5 1 7.3\n").unwrap();
        assert!(matches!(load_amat(&path), Err(Error::Label(_))));
        // Within tolerance is accepted.
        std::fs::write(&path, "0 0.5 1 6.9999999999\n").unwrap();
        assert_eq!(load_amat(&path).unwrap().labels, vec![7]);
    }

    #[test]
    fn amat_round_trip_exact() {
        let mut rng = Rng::new(10);
        let n = 17;
        let d = 5;
        let features =
            Mat::from_vec(n, d, (0..n * d).map(|_| rng.uniform()).collect()).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| rng.below(4) as usize).collect();
        let ds = Dataset::from_parts(features, labels).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.amat");
        save_amat(&ds, &path).unwrap();
        let back = load_amat(&path).unwrap();
        assert_eq!(back.features, ds.features);
        assert_eq!(back.labels, ds.labels);
    }

    #[test]
    fn csv_single_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        std::fs::write(&path, "1,0.0,1.0\n").unwrap();
        let ds = load_csv(&path, 0, false).unwrap();
        assert_eq!(ds.features.row(0), &[0.0, 1.0]);
        assert_eq!(ds.labels, vec![1]);
    }

    #[test]
    fn csv_bad_cell_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        std::fs::write(&path, "1,0.0,1.0\n2,x,0.5\n").unwrap();
        match load_csv(&path, 0, false).unwrap_err() {
            Error::Format(msg) => {
                assert!(msg.contains("row 2") && msg.contains("column 2"), "{msg}")
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn csv_inconsistent_width() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        std::fs::write(&path, "1,0.0,1.0\n2,0.5\n").unwrap();
        match load_csv(&path, 0, false).unwrap_err() {
            Error::Format(msg) => assert!(msg.contains("row 2"), "{msg}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn csv_header_skipped_and_normalized() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        std::fs::write(&path, "label,f1,f2\n0,2,6\n1,4,10\n").unwrap();
        let ds = load_csv(&path, 0, true).unwrap();
        // Global min 2 -> 0, max 10 -> 1.
        assert_eq!(ds.features.row(0), &[0.0, 0.5]);
        assert_eq!(ds.features.row(1), &[0.25, 1.0]);
    }

    #[test]
    fn normalize_identity_when_already_unit_range() {
        let features = Mat::from_vec(2, 2, vec![0.0, 0.5, 0.75, 1.0]).unwrap();
        let ds = Dataset::from_parts(features.clone(), vec![0, 0]).unwrap();
        assert_eq!(normalize(&ds).features, features);
    }

    #[test]
    fn normalize_hand_example() {
        let features = Mat::from_vec(1, 3, vec![0.0, 5.0, 10.0]).unwrap();
        let ds = Dataset::from_parts(features, vec![0]).unwrap();
        assert_eq!(normalize(&ds).features.row(0), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn normalize_constant_maps_to_zero() {
        let features = Mat::from_vec(2, 2, vec![3.0; 4]).unwrap();
        let ds = Dataset::from_parts(features, vec![0, 0]).unwrap();
        assert!(normalize(&ds).features.data().iter().all(|&x| x == 0.0));
    }

    fn numbered_dataset(n: usize) -> Dataset {
        let features = Mat::from_vec(n, 1, (0..n).map(|i| i as f64 / n as f64).collect()).unwrap();
        Dataset::from_parts(features, vec![0; n]).unwrap()
    }

    #[test]
    fn split_sizes_match_spec() {
        let ds = numbered_dataset(70_000);
        let spec = SplitSpec {
            n_train: 10_000,
            n_valid: 10_000,
            n_test: 50_000,
            seed: 1,
            shuffle: true,
        };
        let (tr, va, te) = split(&ds, &spec).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (10_000, 10_000, 50_000));
    }

    #[test]
    fn split_without_shuffle_preserves_order() {
        let ds = numbered_dataset(10);
        let spec = SplitSpec {
            n_train: 10,
            n_valid: 0,
            n_test: 0,
            seed: 9,
            shuffle: false,
        };
        let (tr, _, _) = split(&ds, &spec).unwrap();
        assert_eq!(tr.features, ds.features);
    }

    #[test]
    fn split_deterministic_and_disjoint() {
        let ds = numbered_dataset(100);
        let spec = SplitSpec {
            n_train: 50,
            n_valid: 20,
            n_test: 30,
            seed: 4,
            shuffle: true,
        };
        let (a1, b1, c1) = split(&ds, &spec).unwrap();
        let (a2, b2, c2) = split(&ds, &spec).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert_eq!(c1, c2);
        // Values identify the source index here, so disjointness is checkable.
        let mut seen: Vec<f64> = a1
            .features
            .data()
            .iter()
            .chain(b1.features.data())
            .chain(c1.features.data())
            .cloned()
            .collect();
        seen.sort_by(|x, y| x.partial_cmp(y).unwrap());
        seen.dedup();
        assert_eq!(seen.len(), 100);
    }

    #[test]
    fn split_oversubscribed() {
        let ds = numbered_dataset(10);
        let spec = SplitSpec {
            n_train: 8,
            n_valid: 2,
            n_test: 1,
            seed: 0,
            shuffle: false,
        };
        assert!(matches!(split(&ds, &spec), Err(Error::Size(_))));
    }

    #[test]
    fn modal_dataset_rejects_too_many_modes() {
        assert!(matches!(
            make_modal_dataset(10, 3, 4, 0.0, 1),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn modal_dataset_deterministic() {
        let (a, _) = make_modal_dataset(50, 8, 3, 0.05, 7).unwrap();
        let (b, _) = make_modal_dataset(50, 8, 3, 0.05, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn modal_psi_columns_orthonormal() {
        let (_, truth) = make_modal_dataset(20, 16, 5, 0.0, 3).unwrap();
        let gram = matmul(&truth.psi.transpose(), &truth.psi).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    assert!((gram[(i, j)] - 1.0).abs() < 1e-12);
                } else {
                    // Mutual orthogonality, i.e. |cos| below 1e-10.
                    assert!(gram[(i, j)].abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn modal_noiseless_rank_matches_mode_count() {
        // Singular-value oracle: exactly m singular values above 1e-8 before
        // the rescale.
        let (ds, truth) = make_modal_dataset(1000, 32, 4, 0.0, 11).unwrap();
        let raw = truth.unrescale(&ds.features);
        let sv = singular_values(&raw).unwrap();
        let rank = sv.iter().filter(|&&s| s > 1e-8).count();
        assert_eq!(rank, 4);
    }

    #[test]
    fn modal_noiseless_rows_lie_in_mode_span() {
        let (ds, truth) = make_modal_dataset(200, 12, 4, 0.0, 13).unwrap();
        let raw = truth.unrescale(&ds.features);
        // Least-squares residual against the orthonormal basis: since Ψ has
        // orthonormal columns the projection is Ψ Ψᵀ x.
        let proj = matmul(&matmul(&raw, &truth.psi).unwrap(), &truth.psi.transpose()).unwrap();
        for (x, p) in raw.data().iter().zip(proj.data()) {
            assert!((x - p).abs() < 1e-9);
        }
    }

    #[test]
    fn modal_square_case_full_rank() {
        let (ds, truth) = make_modal_dataset(100, 6, 6, 0.0, 17).unwrap();
        let raw = truth.unrescale(&ds.features);
        let sv = singular_values(&raw).unwrap();
        assert_eq!(sv.iter().filter(|&&s| s > 1e-8).count(), 6);
    }
}
