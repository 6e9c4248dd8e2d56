//! Independent reference computations shared by the integration suites. Nothing
//! here calls into the library's numerical routines.
#![allow(dead_code, clippy::needless_range_loop)]

use ndarray::{Array1, Array2};
use rand::Rng;

/// `|a - b| / max(1, |b|)`: relative for large values, absolute near zero.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let x0 = x[i];
            x[i] = x0 + step;
            let up = f(&x);
            x[i] = x0 - step;
            let down = f(&x);
            x[i] = x0;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Gauss–Hermite rule for `∫ e^{-t²} g(t) dt`, nodes by Newton iteration on the
/// orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pi_m4 = std::f64::consts::PI.powf(-0.25);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pi_m4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j + 1) as f64).sqrt() * p2
                    - (j as f64 / (j + 1) as f64).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// Classic SVGD update with an RBF kernel of bandwidth `h`, written with plain loops:
/// `φ(x_i) = (1/N) Σ_j [k(x_j, x_i) s(x_j) + ∇_{x_j} k(x_j, x_i)]`.
pub fn svgd_reference(x: &[Vec<f64>], scores: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let d = x[0].len();
    let mut out = vec![vec![0.0; d]; n];
    for i in 0..n {
        for j in 0..n {
            let mut sq = 0.0;
            for a in 0..d {
                sq += (x[j][a] - x[i][a]).powi(2);
            }
            let k = (-sq / h).exp();
            for a in 0..d {
                out[i][a] += k * scores[j][a] - 2.0 / h * (x[j][a] - x[i][a]) * k;
            }
        }
        for a in 0..d {
            out[i][a] /= n as f64;
        }
    }
    out
}

pub fn brute_energy_distance(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut cross = 0.0;
    for a in x {
        for b in y {
            cross += dist(a, b);
        }
    }
    cross /= (x.len() * y.len()) as f64;
    let within = |s: &[Vec<f64>]| {
        if s.len() < 2 {
            return 0.0;
        }
        let mut t = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if i != j {
                    t += dist(&s[i], &s[j]);
                }
            }
        }
        t / (s.len() * (s.len() - 1)) as f64
    };
    2.0 * cross - within(x) - within(y)
}

pub fn random_spd(rng: &mut impl Rng, d: usize) -> Array2<f64> {
    let b = Array2::from_shape_fn((d, d), |_| rng.random_range(-1.0..1.0));
    b.dot(&b.t()) + Array2::<f64>::eye(d) * 0.5
}

pub fn uniform_point(rng: &mut impl Rng, d: usize, lo: f64, hi: f64) -> Array1<f64> {
    Array1::from_shape_fn(d, |_| rng.random_range(lo..hi))
}

pub fn to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
    m.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}
