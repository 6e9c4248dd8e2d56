//! Sample-quality and exploration metrics, plus CSV trace emission.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::bnn::{BnnShape, Dataset};
use crate::error::{check_dim, Error, Result};
use crate::kernels::sq_dist;
use crate::sampler::Ensemble;
use crate::scalar::Scalar;
use crate::targets::{log_sum_exp, TargetDensity};

fn mean_cross<T: Scalar>(x: ArrayView2<T>, y: ArrayView2<T>) -> T {
    let total: f64 = (0..x.nrows())
        .into_par_iter()
        .map(|i| x.row(i))
        .map(|a| {
            y.rows()
                .into_iter()
                .map(|b| sq_dist(a, b).sqrt().as_f64())
                .sum::<f64>()
        })
        .sum();
    T::lit(total / (x.nrows() * y.nrows()) as f64)
}

fn mean_within<T: Scalar>(x: ArrayView2<T>) -> T {
    let n = x.nrows();
    if n < 2 {
        return T::zero();
    }
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = x.row(i);
            (i + 1..n)
                .map(|j| sq_dist(a, x.row(j)).sqrt().as_f64())
                .sum::<f64>()
        })
        .sum();
    T::lit(2.0 * total / (n * (n - 1)) as f64)
}

/// Energy distance `2E‖x−y‖ − E‖x−x'‖ − E‖y−y'‖` with U-statistic within-set terms.
pub fn energy_distance<T: Scalar>(x: ArrayView2<T>, y: ArrayView2<T>) -> Result<T> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::arg("energy distance needs nonempty sample sets"));
    }
    check_dim(x.ncols(), y.ncols())?;
    Ok(T::lit(2.0) * mean_cross(x, y) - mean_within(x) - mean_within(y))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Occupancy<T> {
    pub fractions: Vec<T>,
    pub unassigned: T,
}

impl<T: Scalar> Occupancy<T> {
    /// Number of centers holding at least `threshold` of the particles.
    pub fn occupied(&self, threshold: T) -> usize {
        self.fractions.iter().filter(|&&f| f >= threshold).count()
    }
}

/// Fraction of θ-blocks within `radius` of their nearest center. Ties go to the lower index.
pub fn mode_occupancy<T: Scalar>(
    e: &Ensemble<T>,
    centers: &[Array1<T>],
    radius: T,
) -> Result<Occupancy<T>> {
    if centers.is_empty() {
        return Err(Error::arg("mode occupancy needs at least one center"));
    }
    if !(radius > T::zero()) {
        return Err(Error::arg("mode radius must be positive"));
    }
    let theta = e.theta();
    for c in centers {
        check_dim(theta.ncols(), c.len())?;
    }
    let r2 = radius * radius;
    let mut counts = vec![0usize; centers.len()];
    for p in theta.rows() {
        let mut best = 0;
        let mut best_d = sq_dist(p, centers[0].view());
        for (k, c) in centers.iter().enumerate().skip(1) {
            let d = sq_dist(p, c.view());
            if d < best_d {
                best = k;
                best_d = d;
            }
        }
        if best_d <= r2 {
            counts[best] += 1;
        }
    }
    let n = T::lit(e.len() as f64);
    let fractions: Vec<T> = counts.iter().map(|&c| T::lit(c as f64) / n).collect();
    let assigned: usize = counts.iter().sum();
    Ok(Occupancy {
        fractions,
        unassigned: T::lit((e.len() - assigned) as f64) / n,
    })
}

/// Local maxima of `target` reached by gradient ascent from each start, merged when
/// closer than `merge_tol`. Order follows the first start that reached each mode.
pub fn find_modes<T: Scalar>(
    target: &dyn TargetDensity<T>,
    starts: &[Array1<T>],
    step: T,
    max_iters: usize,
    merge_tol: T,
) -> Result<Vec<Array1<T>>> {
    let mut modes: Vec<Array1<T>> = Vec::new();
    for (k, start) in starts.iter().enumerate() {
        check_dim(target.dim(), start.len())?;
        let mut x = start.clone();
        for _ in 0..max_iters {
            let g = target.grad_logp(x.view());
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical {
                    what: "gradient during mode search",
                    particle: k,
                    iteration: None,
                });
            }
            if g.iter().map(|v| v.abs()).fold(T::zero(), T::max) < T::lit(1e-10) {
                break;
            }
            x.scaled_add(step, &g);
        }
        if !modes
            .iter()
            .any(|m| sq_dist(m.view(), x.view()).sqrt() < merge_tol)
        {
            modes.push(x);
        }
    }
    Ok(modes)
}

/// Mean over test points of the log posterior-mean predictive density, in original units.
/// `thetas` holds one BNN parameter vector per row.
pub fn test_log_likelihood<T: Scalar>(
    shape: BnnShape,
    thetas: ArrayView2<T>,
    data: &Dataset<T>,
) -> Result<T> {
    if thetas.nrows() == 0 {
        return Err(Error::arg(
            "test log-likelihood needs at least one particle",
        ));
    }
    if data.x_test.nrows() == 0 {
        return Err(Error::arg("empty test split"));
    }
    check_dim(shape.dim(), thetas.ncols())?;
    check_dim(shape.d_in, data.d_in())?;
    let half = T::lit(0.5);
    let ln_2pi = T::lit(2.0 * std::f64::consts::PI).ln();
    let n = thetas.nrows();
    // per particle: standardized predictions on the test split
    let preds: Vec<(T, Array1<T>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let theta = thetas.row(i);
            let out = crate::bnn::network_outputs(shape, theta, data.x_test.view());
            (theta[shape.log_gamma()], out)
        })
        .collect();
    let log_y_std = data.standardization.y_std.ln();
    let mut total = T::zero();
    let mut terms = vec![T::zero(); n];
    for (t, &y) in data.y_test.iter().enumerate() {
        for (i, (log_gamma, out)) in preds.iter().enumerate() {
            let e = y - out[t];
            terms[i] = half * *log_gamma - half * ln_2pi - half * log_gamma.exp() * e * e;
        }
        total += log_sum_exp(&terms) - T::lit(n as f64).ln() - log_y_std;
    }
    Ok(total / T::lit(data.y_test.len() as f64))
}

/// Per-row metrics; `None` leaves the cell empty.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceMetrics<T> {
    pub energy_dist: Option<T>,
    pub occupancy: Option<Occupancy<T>>,
    pub test_ll: Option<T>,
}

fn cell<T: Scalar>(v: Option<T>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

/// Single-writer CSV sink: `iter, energy_dist, mode_0..mode_k, unassigned, test_ll`.
pub struct TraceWriter {
    path: PathBuf,
    out: csv::Writer<BufWriter<File>>,
    n_modes: usize,
    rows: usize,
}

impl TraceWriter {
    pub fn create(path: impl AsRef<Path>, n_modes: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = csv::Writer::from_writer(BufWriter::new(file));
        let mut header = vec!["iter".to_string(), "energy_dist".to_string()];
        header.extend((0..n_modes).map(|k| format!("mode_{k}")));
        header.push("unassigned".into());
        header.push("test_ll".into());
        out.write_record(&header).map_err(|e| csv_io(&path, e))?;
        Ok(Self {
            path,
            out,
            n_modes,
            rows: 0,
        })
    }

    pub fn record<T: Scalar>(&mut self, iter: usize, m: &TraceMetrics<T>) -> Result<()> {
        let mut row = vec![iter.to_string(), cell(m.energy_dist)];
        match &m.occupancy {
            Some(o) => {
                if o.fractions.len() != self.n_modes {
                    return Err(Error::DimensionMismatch {
                        expected: self.n_modes,
                        got: o.fractions.len(),
                    });
                }
                row.extend(o.fractions.iter().map(|&f| cell(Some(f))));
                row.push(cell(Some(o.unassigned)));
            }
            None => row.extend(std::iter::repeat_n(String::new(), self.n_modes + 1)),
        }
        row.push(cell(m.test_ll));
        self.out
            .write_record(&row)
            .map_err(|e| csv_io(&self.path, e))?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Writes one row per particle with columns `p0..p{D-1}, iter`.
pub fn write_snapshot<T: Scalar>(
    path: impl AsRef<Path>,
    positions: ArrayView2<T>,
    iter: usize,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut text = String::new();
    let header: Vec<String> = (0..positions.ncols()).map(|k| format!("p{k}")).collect();
    text.push_str(&header.join(","));
    text.push_str(",iter\n");
    for row in positions.rows() {
        for v in row {
            text.push_str(&format!("{v:e},"));
        }
        text.push_str(&format!("{iter}\n"));
    }
    w.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// θ-block means and empirical covariance (normalized by N).
pub fn moments<T: Scalar>(samples: ArrayView2<T>) -> (Array1<T>, ndarray::Array2<T>) {
    let n = T::lit(samples.nrows() as f64);
    let mean = samples.mean_axis(Axis(0)).expect("nonempty");
    let centered = &samples - &mean.view().insert_axis(Axis(0));
    let cov = centered.t().dot(&centered) / n;
    (mean, cov)
}

/// Euclidean distance between two points; exposed for callers building custom metrics.
pub fn distance<T: Scalar>(a: ArrayView1<T>, b: ArrayView1<T>) -> T {
    sq_dist(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::BlockLayout;
    use ndarray::{array, Array2};

    fn ensemble(rows: Array2<f64>) -> Ensemble<f64> {
        let d = rows.ncols();
        Ensemble::new(rows, BlockLayout::plain(d)).unwrap()
    }

    #[test]
    fn energy_distance_trivial_cases() {
        let x: Array2<f64> = array![[0.0]];
        let y = array![[1.0]];
        assert_eq!(energy_distance(x.view(), y.view()).unwrap(), 2.0);
        assert_eq!(energy_distance(y.view(), y.view()).unwrap(), 0.0);
        // identical multisets: the cross term keeps the zero diagonal, the within terms drop it
        let z: Array2<f64> = array![[0.0, 0.0], [3.0, 4.0], [0.0, 4.0]];
        let s = 5.0 + 3.0 + 4.0;
        let want = 2.0 * (2.0 * s / 9.0) - 2.0 * (2.0 * s / 6.0);
        assert!((energy_distance(z.view(), z.view()).unwrap() - want).abs() < 1e-12);
        assert!(energy_distance(z.view(), x.view()).is_err());
        assert!(energy_distance(Array2::<f64>::zeros((0, 2)).view(), z.view()).is_err());
    }

    #[test]
    fn occupancy_examples() {
        let centers = vec![array![0.0, 0.0], array![2.0, 0.0], array![0.0, 2.0]];
        let at_first = ensemble(Array2::zeros((5, 2)));
        let o = mode_occupancy(&at_first, &centers, 1.0).unwrap();
        assert_eq!(o.fractions, vec![1.0, 0.0, 0.0]);
        assert_eq!(o.unassigned, 0.0);

        let tie = ensemble(array![[1.0, 0.0]]);
        let o = mode_occupancy(&tie, &centers, 1.0).unwrap();
        assert_eq!(o.fractions, vec![1.0, 0.0, 0.0]);

        let far = ensemble(array![[10.0, 10.0], [2.1, 0.0]]);
        let o = mode_occupancy(&far, &centers, 1.0).unwrap();
        assert_eq!(o.fractions, vec![0.0, 0.5, 0.0]);
        assert_eq!(o.unassigned, 0.5);
        assert!(mode_occupancy(&far, &centers, 0.0).is_err());
        assert!(mode_occupancy(&far, &[], 1.0).is_err());
    }

    #[test]
    fn find_modes_merges_duplicates() {
        let mix = crate::targets::GaussianMixture::new(
            vec![0.5, 0.5],
            vec![
                crate::targets::Gaussian::new(array![-3.0], array![[0.25]]).unwrap(),
                crate::targets::Gaussian::new(array![3.0], array![[0.25]]).unwrap(),
            ],
        )
        .unwrap();
        let starts: Vec<Array1<f64>> = vec![array![-2.0], array![-4.0], array![2.5]];
        let modes = find_modes(&mix, &starts, 0.05, 5000, 1e-3).unwrap();
        assert_eq!(modes.len(), 2);
        assert!((modes[0][0] + 3.0).abs() < 1e-6);
        assert!((modes[1][0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn trace_and_snapshot_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let mut w = TraceWriter::create(&path, 2).unwrap();
        w.record(
            0,
            &TraceMetrics::<f64> {
                energy_dist: Some(0.5),
                ..Default::default()
            },
        )
        .unwrap();
        w.record(
            1,
            &TraceMetrics {
                energy_dist: None,
                occupancy: Some(Occupancy {
                    fractions: vec![0.25, 0.5],
                    unassigned: 0.25,
                }),
                test_ll: Some(-1.0),
            },
        )
        .unwrap();
        assert_eq!(w.rows(), 2);
        w.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "iter,energy_dist,mode_0,mode_1,unassigned,test_ll"
        );
        assert_eq!(lines[1], "0,5e-1,,,,");
        assert_eq!(lines[2], "1,,2.5e-1,5e-1,2.5e-1,-1e0");

        let snap = dir.path().join("snap.csv");
        write_snapshot(&snap, array![[1.0, 2.0], [3.0, 4.5]].view(), 7).unwrap();
        let text = std::fs::read_to_string(&snap).unwrap();
        assert_eq!(text, "p0,p1,iter\n1e0,2e0,7\n3e0,4.5e0,7\n");
        assert!(write_snapshot(dir.path().join("missing/x.csv"), array![[1.0]].view(), 0).is_err());
    }
}
