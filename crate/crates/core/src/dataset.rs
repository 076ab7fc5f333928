//! Dataset ingestion, z-score standardization and seeded splits.
//!
//! Datasets are described by a TOML manifest with one `[[dataset]]` table
//! per entry:
//!
//! ```toml
//! [[dataset]]
//! name = "housing"
//! path = "housing.csv"      # relative to the manifest's directory
//! delimiter = ","           # a single character, or "whitespace"
//! target_column = 13        # zero-based index, or a header name
//! skip_header = true
//! expected_rows = 506       # optional
//! expected_cols = 13        # optional; counts feature columns only
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Columns with a population std below this are treated as constant.
pub const DEGENERATE_STD: f64 = 1e-12;

pub const TEST_FRACTION: f64 = 0.30;
pub const INITIAL_LABELED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Delimiter {
    Char(char),
    Whitespace,
}

impl<'de> Deserialize<'de> for Delimiter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Delimiter::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl Delimiter {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        match s {
            "whitespace" | "ws" => Ok(Delimiter::Whitespace),
            "tab" | "\\t" => Ok(Delimiter::Char('\t')),
            _ => {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Ok(Delimiter::Char(c)),
                    _ => Err(format!(
                        "delimiter must be one character or \"whitespace\", got {s:?}"
                    )),
                }
            }
        }
    }

    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Whitespace => line.split_whitespace().collect(),
            Delimiter::Char(c) => line.split(*c).map(str::trim).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum TargetColumn {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub path: PathBuf,
    pub delimiter: Delimiter,
    pub target_column: TargetColumn,
    #[serde(default)]
    pub skip_header: bool,
    #[serde(default)]
    pub expected_rows: Option<usize>,
    #[serde(default)]
    pub expected_cols: Option<usize>,
}

/// A manifest file holding any number of dataset entries.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct Manifest {
    #[serde(default, rename = "dataset")]
    pub datasets: Vec<DatasetManifest>,
}

impl Manifest {
    /// Parses a manifest and resolves relative data paths against its directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::parse(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for d in &mut m.datasets {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        Ok(m)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        for (i, d) in m.datasets.iter().enumerate() {
            if m.datasets[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::Manifest(format!("duplicate dataset name {:?}", d.name)));
            }
        }
        Ok(m)
    }

    pub fn get(&self, name: &str) -> Result<&DatasetManifest> {
        self.datasets
            .iter()
            .find(|d| d.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Manifest(format!("no dataset named {name:?} in manifest")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Matrix,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Matrix, targets: Vec<f64>) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::InvalidInput("dataset needs n >= 1 and d >= 1".into()));
        }
        if targets.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                got: targets.len(),
            });
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("features"));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("targets"));
        }
        Ok(Self {
            name: name.into(),
            features,
            targets,
        })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }
}

fn strip_quotes(s: &str) -> &str {
    s.trim().trim_matches('"').trim_matches('\'')
}

/// Reads a delimited numeric file described by `manifest`.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<Dataset> {
    let path = &manifest.path;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(manifest, &text)
}

/// Parses already-read file contents; `load_dataset` minus the I/O.
pub fn parse_dataset(manifest: &DatasetManifest, text: &str) -> Result<Dataset> {
    let path = &manifest.path;
    let perr = |line: usize, message: String| Error::Parse {
        path: path.clone(),
        line,
        message,
    };

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let header: Option<Vec<String>> = if manifest.skip_header {
        lines.next().map(|(_, l)| {
            manifest
                .delimiter
                .split(l)
                .into_iter()
                .map(|c| strip_quotes(c).to_string())
                .collect()
        })
    } else {
        None
    };

    let mut ncols: Option<usize> = header.as_ref().map(Vec::len);
    let mut target_idx: Option<usize> = match &manifest.target_column {
        TargetColumn::Index(i) => Some(*i),
        TargetColumn::Name(name) => {
            let h = header.as_ref().ok_or_else(|| {
                Error::Manifest(format!(
                    "{}: target column given by name but skip_header is false",
                    manifest.name
                ))
            })?;
            let hits: Vec<usize> = h
                .iter()
                .enumerate()
                .filter(|(_, c)| *c == name)
                .map(|(i, _)| i)
                .collect();
            match hits.as_slice() {
                [i] => Some(*i),
                [] => {
                    return Err(Error::Manifest(format!(
                        "{}: no column named {name:?}",
                        manifest.name
                    )))
                }
                _ => {
                    return Err(Error::Manifest(format!(
                        "{}: column name {name:?} is ambiguous",
                        manifest.name
                    )))
                }
            }
        }
    };

    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut nrows = 0usize;
    for (lineno, line) in lines {
        let cells = manifest.delimiter.split(line);
        let width = *ncols.get_or_insert(cells.len());
        if cells.len() != width {
            return Err(perr(
                lineno,
                format!("expected {width} columns, found {}", cells.len()),
            ));
        }
        let t = *target_idx.get_or_insert(0);
        if t >= width {
            return Err(Error::Manifest(format!(
                "{}: target column {t} out of range for {width} columns",
                manifest.name
            )));
        }
        if width < 2 {
            return Err(perr(lineno, "need at least one feature and one target column".into()));
        }
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = strip_quotes(cell)
                .parse()
                .map_err(|_| perr(lineno, format!("column {j}: non-numeric cell {cell:?}")))?;
            if !v.is_finite() {
                return Err(perr(lineno, format!("column {j}: non-finite value {cell:?}")));
            }
            if j == t {
                targets.push(v);
            } else {
                features.push(v);
            }
        }
        nrows += 1;
    }

    if nrows == 0 {
        return Err(perr(0, "no data rows".into()));
    }
    let d = ncols.unwrap_or(1) - 1;
    if let Some(exp) = manifest.expected_rows {
        if exp != nrows {
            return Err(Error::CountMismatch {
                name: manifest.name.clone(),
                what: "rows",
                expected: exp,
                found: nrows,
            });
        }
    }
    if let Some(exp) = manifest.expected_cols {
        if exp != d {
            return Err(Error::CountMismatch {
                name: manifest.name.clone(),
                what: "feature columns",
                expected: exp,
                found: d,
            });
        }
    }
    Dataset::new(manifest.name.clone(), Matrix::new(nrows, d, features)?, targets)
}

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Population mean and std of a slice, with the degenerate-std floor applied.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn fit_standardizer(features: &Matrix) -> ScalerParams {
    let (means, stds) = (0..features.cols())
        .map(|j| {
            let (m, s) = mean_std(&features.column(j));
            (m, if s < DEGENERATE_STD { 1.0 } else { s })
        })
        .unzip();
    ScalerParams { means, stds }
}

pub fn apply_standardizer(features: &Matrix, params: &ScalerParams) -> Result<Matrix> {
    if features.cols() != params.means.len() || params.stds.len() != params.means.len() {
        return Err(Error::DimensionMismatch {
            expected: params.means.len(),
            got: features.cols(),
        });
    }
    let mut out = features.clone();
    for i in 0..out.rows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = (*v - params.means[j]) / params.stds[j];
        }
    }
    Ok(out)
}

/// Fits on `features` and returns the standardized copy.
pub fn standardize(features: &Matrix) -> Matrix {
    let p = fit_standardizer(features);
    apply_standardizer(features, &p).expect("params fit on the same matrix")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub test: Vec<usize>,
    pub initial_labeled: Vec<usize>,
    pub unlabeled_pool: Vec<usize>,
    pub seed: u64,
}

pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let test = (TEST_FRACTION * n as f64).round() as usize;
    let init = ((INITIAL_LABELED_FRACTION * n as f64).round() as usize).max(1);
    (test, init, n.saturating_sub(test + init))
}

/// Shuffles `0..n` with a seeded ChaCha8 stream; the first block is the test
/// set, the next the initial labeled set, the remainder the unlabeled pool.
/// Each set is returned sorted.
pub fn make_split(n: usize, seed: u64) -> Result<SplitIndices> {
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 instances to split, got {n}"
        )));
    }
    let (test_n, init_n, pool_n) = split_sizes(n);
    if test_n == 0 || pool_n == 0 {
        return Err(Error::InvalidInput(format!("{n} instances cannot form nonempty splits")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Ok(SplitIndices {
        test: sorted(&perm[..test_n]),
        initial_labeled: sorted(&perm[test_n..test_n + init_n]),
        unlabeled_pool: sorted(&perm[test_n + init_n..]),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(target: TargetColumn, header: bool) -> DatasetManifest {
        DatasetManifest {
            name: "t".into(),
            path: "mem.csv".into(),
            delimiter: Delimiter::Char(','),
            target_column: target,
            skip_header: header,
            expected_rows: None,
            expected_cols: None,
        }
    }

    #[test]
    fn minimal_parse() {
        let ds = parse_dataset(&manifest(TargetColumn::Index(1), false), "1.0,2.0\n").unwrap();
        assert_eq!(ds.features, Matrix::from_rows(&[[1.0]]).unwrap());
        assert_eq!(ds.targets, vec![2.0]);
    }

    #[test]
    fn target_by_name_and_whitespace() {
        let mut m = manifest(TargetColumn::Name("y".into()), true);
        m.delimiter = Delimiter::Whitespace;
        let ds = parse_dataset(&m, "y a b\n1 2 3\n4  5\t6\n").unwrap();
        assert_eq!(ds.targets, vec![1.0, 4.0]);
        assert_eq!(ds.features.row(1), &[5.0, 6.0]);
    }

    #[test]
    fn non_numeric_cell_reports_line() {
        let err = parse_dataset(&manifest(TargetColumn::Index(1), true), "a,b\n1,2\n3,x\n")
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn ragged_row_is_parse_error() {
        let err = parse_dataset(&manifest(TargetColumn::Index(0), false), "1,2\n3,4,5\n")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn count_mismatch() {
        let mut m = manifest(TargetColumn::Index(0), false);
        m.expected_rows = Some(3);
        assert!(matches!(
            parse_dataset(&m, "1,2\n3,4\n"),
            Err(Error::CountMismatch { what: "rows", .. })
        ));
        m.expected_rows = Some(2);
        m.expected_cols = Some(2);
        assert!(matches!(
            parse_dataset(&m, "1,2\n3,4\n"),
            Err(Error::CountMismatch { .. })
        ));
    }

    #[test]
    fn unknown_or_ambiguous_target_name() {
        let m = manifest(TargetColumn::Name("z".into()), true);
        assert!(matches!(parse_dataset(&m, "a,b\n1,2\n"), Err(Error::Manifest(_))));
        let m = manifest(TargetColumn::Name("a".into()), true);
        assert!(matches!(parse_dataset(&m, "a,a\n1,2\n"), Err(Error::Manifest(_))));
    }

    #[test]
    fn manifest_toml() {
        let m = Manifest::parse(
            r#"
            [[dataset]]
            name = "housing"
            path = "housing.csv"
            delimiter = ","
            target_column = "MEDV"
            skip_header = true
            expected_rows = 506
            expected_cols = 13

            [[dataset]]
            name = "yacht"
            path = "yacht.data"
            delimiter = "whitespace"
            target_column = 6
            "#,
        )
        .unwrap();
        assert_eq!(m.datasets.len(), 2);
        assert_eq!(m.get("Housing").unwrap().expected_rows, Some(506));
        assert_eq!(m.get("yacht").unwrap().delimiter, Delimiter::Whitespace);
        assert_eq!(m.get("yacht").unwrap().target_column, TargetColumn::Index(6));
        assert!(m.get("concrete").is_err());
    }

    #[test]
    fn fit_standardizer_examples() {
        let m = Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]).unwrap();
        let p = fit_standardizer(&m);
        assert!((p.means[0] - 2.0).abs() < 1e-15);
        // population std of [1,2,3] = sqrt(2/3)
        assert!((p.stds[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!((p.means[1], p.stds[1]), (5.0, 1.0));
        let z = apply_standardizer(&m, &p).unwrap();
        assert!(z.column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn apply_examples() {
        let p = ScalerParams {
            means: vec![2.0],
            stds: vec![2.0],
        };
        let x = Matrix::from_rows(&[[4.0], [2.0]]).unwrap();
        let z = apply_standardizer(&x, &p).unwrap();
        assert_eq!(z.column(0), vec![1.0, 0.0]);
        let wide = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(matches!(
            apply_standardizer(&wide, &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn split_sizes_housing() {
        let s = make_split(506, 7).unwrap();
        assert_eq!(s.test.len(), 152);
        assert_eq!(s.initial_labeled.len(), 5);
        assert_eq!(s.unlabeled_pool.len(), 349);
        assert_eq!(s, make_split(506, 7).unwrap());
        assert_ne!(s.test, make_split(506, 8).unwrap().test);
    }

    #[test]
    fn split_rejects_tiny() {
        assert!(make_split(3, 0).is_err());
        assert!(make_split(4, 0).is_ok());
    }
}
