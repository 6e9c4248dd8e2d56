use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const STD_FLOOR: f64 = 1e-8;
const MIN_ROWS: usize = 10;

/// Per-column affine maps fitted on the training split.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardization<T> {
    pub x_mean: Array1<T>,
    pub x_std: Array1<T>,
    pub y_mean: T,
    pub y_std: T,
}

impl<T: Scalar> Standardization<T> {
    fn fit(x: ArrayView2<T>, y: ArrayView1<T>) -> Self {
        let floor = T::lit(STD_FLOOR);
        let x_mean = x.mean_axis(Axis(0)).expect("non-empty training split");
        let x_std = x.std_axis(Axis(0), T::zero()).mapv(|s| s.max(floor));
        let y_mean = y.mean().expect("non-empty training split");
        let y_std = y.std(T::zero()).max(floor);
        Self {
            x_mean,
            x_std,
            y_mean,
            y_std,
        }
    }

    pub fn features(&self, x: ArrayView1<T>) -> Array1<T> {
        (&x - &self.x_mean) / &self.x_std
    }

    fn features_matrix(&self, x: ArrayView2<T>) -> Array2<T> {
        (&x - &self.x_mean) / &self.x_std
    }

    pub fn target(&self, y: T) -> T {
        (y - self.y_mean) / self.y_std
    }

    pub fn target_inverse(&self, z: T) -> T {
        z * self.y_std + self.y_mean
    }
}

/// Borrowed minibatch of standardized training rows.
#[derive(Clone, Copy, Debug)]
pub struct Batch<'a, T> {
    pub x: ArrayView2<'a, T>,
    pub y: ArrayView1<'a, T>,
}

/// Regression data split into train and test parts; features and targets are
/// stored standardized with training statistics.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub x_train: Array2<T>,
    pub y_train: Array1<T>,
    pub x_test: Array2<T>,
    pub y_test: Array1<T>,
    pub standardization: Standardization<T>,
    /// Source row of each training / test example.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

impl<T: Scalar> Dataset<T> {
    /// Build from raw (unstandardized) splits.
    pub fn from_split(
        x_train: Array2<T>,
        y_train: Array1<T>,
        x_test: Array2<T>,
        y_test: Array1<T>,
    ) -> Result<Self> {
        if x_train.nrows() == 0 || x_train.nrows() != y_train.len() {
            return Err(Error::arg(
                "training split needs matching non-empty x and y",
            ));
        }
        if x_test.nrows() != y_test.len() || x_test.ncols() != x_train.ncols() {
            return Err(Error::arg("test split does not match training split"));
        }
        let st = Standardization::fit(x_train.view(), y_train.view());
        let n_train = x_train.nrows();
        let n_test = x_test.nrows();
        Ok(Self {
            x_train: st.features_matrix(x_train.view()),
            y_train: y_train.mapv(|v| st.target(v)),
            x_test: st.features_matrix(x_test.view()),
            y_test: y_test.mapv(|v| st.target(v)),
            standardization: st,
            train_rows: (0..n_train).collect(),
            test_rows: (n_train..n_train + n_test).collect(),
        })
    }

    pub fn d_in(&self) -> usize {
        self.x_train.ncols()
    }

    pub fn n_train(&self) -> usize {
        self.x_train.nrows()
    }

    pub fn train(&self) -> Batch<'_, T> {
        Batch {
            x: self.x_train.view(),
            y: self.y_train.view(),
        }
    }

    /// Test targets in original units.
    pub fn y_test_raw(&self) -> Array1<T> {
        self.y_test.mapv(|v| self.standardization.target_inverse(v))
    }
}

fn parse_cell<T: Scalar>(cell: &str, row: usize, column: usize) -> Result<T> {
    cell.trim()
        .parse::<f64>()
        .map(T::lit)
        .map_err(|e| Error::Ingestion {
            row,
            column,
            message: format!("{:?}: {e}", cell),
        })
}

/// Read a numeric CSV (last column = target, optional header row), shuffle rows
/// under `seed`, hold out `round(test_frac · n)` rows and standardize with
/// training statistics.
///
/// Row and column numbers in ingestion errors are 1-based file positions.
pub fn load_regression_csv<T: Scalar>(
    path: impl AsRef<Path>,
    seed: u64,
    test_frac: f64,
) -> Result<Dataset<T>> {
    let path = path.as_ref();
    if !(0.0..1.0).contains(&test_frac) {
        return Err(Error::arg("test fraction must lie in [0, 1)"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let parsed: Result<Vec<T>> = record
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_cell(cell, line + 1, c + 1))
            .collect();
        match parsed {
            Ok(r) => rows.push(r),
            // a non-numeric first line is a header
            Err(_) if line == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    let n = rows.len();
    if n < MIN_ROWS {
        return Err(Error::arg(format!(
            "need at least {MIN_ROWS} data rows, found {n}"
        )));
    }
    let width = rows[0].len();
    if width < 2 {
        return Err(Error::arg("need at least one feature column and a target"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((n as f64) * test_frac).round() as usize;
    let (test_rows, train_rows) = order.split_at(n_test);
    let gather = |idx: &[usize]| {
        let x = Array2::from_shape_fn((idx.len(), width - 1), |(i, j)| rows[idx[i]][j]);
        let y = Array1::from_shape_fn(idx.len(), |i| rows[idx[i]][width - 1]);
        (x, y)
    };
    let (xtr, ytr) = gather(train_rows);
    let (xte, yte) = gather(test_rows);
    let mut data = Dataset::from_split(xtr, ytr, xte, yte)?;
    data.train_rows = train_rows.to_vec();
    data.test_rows = test_rows.to_vec();
    Ok(data)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let pos = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Ingestion {
            row: pos,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Raw `(x, y)` pairs with `x ~ U(-2, 2)` and `y = sin(3x) + 0.1·ε`, `ε ~ N(0, 1)`.
pub fn synthetic_sine<T: Scalar>(n: usize, seed: u64) -> (Array2<T>, Array1<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 1));
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let xi: f64 = rng.random_range(-2.0..2.0);
        let noise: f64 = rng.sample(StandardNormal);
        x[[i, 0]] = T::lit(xi);
        y[i] = T::lit((3.0 * xi).sin() + 0.1 * noise);
    }
    (x, y)
}
