//! Scalar abstraction shared by every numeric routine in the crate.

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating point type the model can be evaluated in.
///
/// Everything numeric (matrices, layers, optimizers, metrics) is written
/// against this trait. The concrete aliases at the crate root pin it to
/// `f64`, which is what training and gradient checking use.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    /// `c = a b + beta c` for strided `a: m x k`, `b: k x n`, `c: m x n`.
    /// Each layout is `(row stride, column stride)`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        dims: (usize, usize, usize),
        a: &[Self],
        la: Layout,
        b: &[Self],
        lb: Layout,
        beta: Self,
        c: &mut [Self],
        lc: Layout,
    );
}

/// Row and column strides of a matrix view.
pub type Layout = (usize, usize);

fn span(rows: usize, cols: usize, (rs, cs): Layout) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

macro_rules! impl_scalar {
    ($t:ty, $kernel:path) => {
        impl Scalar for $t {
            fn gemm(
                (m, k, n): (usize, usize, usize),
                a: &[Self],
                la: Layout,
                b: &[Self],
                lb: Layout,
                beta: Self,
                c: &mut [Self],
                lc: Layout,
            ) {
                assert!(span(m, k, la) <= a.len(), "gemm: a too short");
                assert!(span(k, n, lb) <= b.len(), "gemm: b too short");
                assert!(span(m, n, lc) <= c.len(), "gemm: c too short");
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every index reachable through the strides was bounds-checked above.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        la.0 as isize,
                        la.1 as isize,
                        b.as_ptr(),
                        lb.0 as isize,
                        lb.1 as isize,
                        beta,
                        c.as_mut_ptr(),
                        lc.0 as isize,
                        lc.1 as isize,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// Logistic sigmoid, written so large negative inputs do not overflow `exp`.
#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
