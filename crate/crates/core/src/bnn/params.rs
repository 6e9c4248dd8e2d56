use std::ops::Range;

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{check_dim, Result};
use crate::scalar::Scalar;

pub const DEFAULT_HIDDEN: usize = 50;

/// Layer sizes and the flattening order of the parameter vector:
/// `W1` (row-major, `d_in × hidden`), `b1`, `w2`, `b2`, `log γ`, `log λ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BnnShape {
    pub d_in: usize,
    pub hidden: usize,
}

impl BnnShape {
    pub fn new(d_in: usize, hidden: usize) -> Self {
        Self { d_in, hidden }
    }

    pub fn dim(&self) -> usize {
        self.d_in * self.hidden + 2 * self.hidden + 3
    }

    /// Number of coordinates under the `N(0, λ⁻¹)` prior.
    pub fn n_weights(&self) -> usize {
        self.dim() - 2
    }

    pub fn w1(&self) -> Range<usize> {
        0..self.d_in * self.hidden
    }

    pub fn b1(&self) -> Range<usize> {
        let s = self.d_in * self.hidden;
        s..s + self.hidden
    }

    pub fn w2(&self) -> Range<usize> {
        let s = self.b1().end;
        s..s + self.hidden
    }

    pub fn b2(&self) -> usize {
        self.w2().end
    }

    pub fn log_gamma(&self) -> usize {
        self.b2() + 1
    }

    pub fn log_lambda(&self) -> usize {
        self.b2() + 2
    }
}

/// Structured view of a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct BnnParams<T> {
    pub w1: ndarray::Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array1<T>,
    pub b2: T,
    pub log_gamma: T,
    pub log_lambda: T,
}

impl<T: Scalar> BnnParams<T> {
    pub fn unflatten(shape: BnnShape, flat: ArrayView1<T>) -> Result<Self> {
        check_dim(shape.dim(), flat.len())?;
        let w1 = flat
            .slice(ndarray::s![shape.w1()])
            .to_owned()
            .into_shape_with_order((shape.d_in, shape.hidden))
            .expect("contiguous block");
        Ok(Self {
            w1,
            b1: flat.slice(ndarray::s![shape.b1()]).to_owned(),
            w2: flat.slice(ndarray::s![shape.w2()]).to_owned(),
            b2: flat[shape.b2()],
            log_gamma: flat[shape.log_gamma()],
            log_lambda: flat[shape.log_lambda()],
        })
    }

    pub fn flatten(&self) -> Array1<T> {
        let mut out = Vec::with_capacity(self.w1.len() + 2 * self.b1.len() + 3);
        out.extend(self.w1.iter().copied());
        out.extend(self.b1.iter().copied());
        out.extend(self.w2.iter().copied());
        out.extend([self.b2, self.log_gamma, self.log_lambda]);
        Array1::from(out)
    }

    pub fn shape(&self) -> BnnShape {
        BnnShape::new(self.w1.nrows(), self.w1.ncols())
    }
}

/// Hidden pre-activations `W1ᵀ x + b1` for each row of `x`, read directly from the flat vector.
pub(crate) fn pre_activations<T: Scalar>(
    shape: BnnShape,
    flat: ArrayView1<T>,
    x: ArrayView2<T>,
) -> ndarray::Array2<T> {
    let w1 = flat
        .slice(ndarray::s![shape.w1()])
        .into_shape_with_order((shape.d_in, shape.hidden))
        .expect("contiguous block");
    let b1 = flat.slice(ndarray::s![shape.b1()]);
    let mut pre = x.dot(&w1);
    for mut row in pre.rows_mut() {
        row += &b1;
    }
    pre
}
