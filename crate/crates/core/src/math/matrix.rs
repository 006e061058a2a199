use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::fmt;

/// Dense row-major matrix. Vectors are stored as `n x 1`.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} ", self.rows, self.cols)?;
        f.debug_list().entries(self.data.iter().take(16)).finish()
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_vec",
                format!("{rows}x{cols}"),
                format!("len {}", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Column vector.
    pub fn column(data: Vec<T>) -> Self {
        Self {
            rows: data.len(),
            cols: 1,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        let c = self.cols;
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: T) {
        self.data.iter_mut().for_each(|x| *x *= k);
    }

    pub fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    pub(crate) fn ensure_shape(&self, op: &'static str, rows: usize, cols: usize) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(Error::shape(op, self.shape_str(), format!("{rows}x{cols}")));
        }
        Ok(())
    }

    /// `y = W x`.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(self.cols, x.len());
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `y = W^T g`.
    pub fn matvec_t(&self, g: &[T]) -> Vec<T> {
        debug_assert_eq!(self.rows, g.len());
        let mut y = vec![T::zero(); self.cols];
        for (r, &gr) in g.iter().enumerate() {
            axpy(gr, self.row(r), &mut y);
        }
        y
    }

    /// `self += g x^T`.
    pub fn add_outer(&mut self, g: &[T], x: &[T]) {
        debug_assert_eq!(self.rows, g.len());
        debug_assert_eq!(self.cols, x.len());
        for (r, &gr) in g.iter().enumerate() {
            axpy(gr, x, self.row_mut(r));
        }
    }

    /// `X W^T` for `X: n x in` (one input per row) and `self = W: out x in`.
    pub fn apply_rows(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut y = Matrix::zeros(x.rows, self.rows);
        self.apply_rows_into(x, &mut y);
        y
    }

    /// Accumulates `X W^T` into `y`.
    pub fn apply_rows_into(&self, x: &Matrix<T>, y: &mut Matrix<T>) {
        assert_eq!(self.cols, x.cols, "apply_rows: inner dimension");
        assert_eq!((y.rows, y.cols), (x.rows, self.rows), "apply_rows: output shape");
        T::gemm(
            (x.rows, self.cols, self.rows),
            &x.data,
            (x.cols, 1),
            &self.data,
            (1, self.cols),
            T::one(),
            &mut y.data,
            (y.cols, 1),
        );
    }

    /// Backward of [`Matrix::apply_rows`] with respect to the input:
    /// accumulates `dY W` into `dx`.
    pub fn backprop_rows_into(&self, dy: &Matrix<T>, dx: &mut Matrix<T>) {
        assert_eq!(dy.cols, self.rows, "backprop_rows: inner dimension");
        assert_eq!((dx.rows, dx.cols), (dy.rows, self.cols), "backprop_rows: output shape");
        T::gemm(
            (dy.rows, self.rows, self.cols),
            &dy.data,
            (dy.cols, 1),
            &self.data,
            (self.cols, 1),
            T::one(),
            &mut dx.data,
            (dx.cols, 1),
        );
    }

    /// Backward of [`Matrix::apply_rows`] with respect to the weights:
    /// accumulates `dY^T X` into `self`.
    pub fn accumulate_rows_grad(&mut self, dy: &Matrix<T>, x: &Matrix<T>) {
        assert_eq!(dy.rows, x.rows, "accumulate_rows_grad: batch size");
        assert_eq!((self.rows, self.cols), (dy.cols, x.cols), "accumulate_rows_grad: output shape");
        let cols = self.cols;
        T::gemm(
            (dy.cols, dy.rows, x.cols),
            &dy.data,
            (1, dy.cols),
            &x.data,
            (x.cols, 1),
            T::one(),
            &mut self.data,
            (cols, 1),
        );
    }

    /// Sum over rows, as a vector of length `cols`.
    pub fn column_sums(&self) -> Vec<T> {
        let mut s = vec![T::zero(); self.cols];
        for r in 0..self.rows {
            for (a, &b) in s.iter_mut().zip(self.row(r)) {
                *a += b;
            }
        }
        s
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators keep the loop vectorizable without reassociation flags.
    let mut acc = [T::zero(); 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    s
}

/// `y += a x`.
#[inline]
pub fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
