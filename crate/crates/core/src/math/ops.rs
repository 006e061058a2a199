//! Differentiable primitives. Each forward routine has a paired backward
//! routine taking the upstream gradient; composition is left to the caller.

use super::matrix::{axpy, Matrix};
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};

fn ensure_len(op: &'static str, what: usize, expected: usize) -> Result<()> {
    if what != expected {
        return Err(Error::shape(op, format!("len {what}"), format!("len {expected}")));
    }
    Ok(())
}

/// `W x + b`.
pub fn linear<T: Scalar>(x: &[T], w: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    if w.cols() != x.len() || w.rows() != b.len() {
        return Err(Error::shape(
            "linear",
            format!("W {}", w.shape_str()),
            format!("x {} / b {}", x.len(), b.len()),
        ));
    }
    let mut y = w.matvec(x);
    for (yi, &bi) in y.iter_mut().zip(b) {
        *yi += bi;
    }
    Ok(y)
}

#[derive(Debug, Clone)]
pub struct LinearGrads<T> {
    pub dx: Vec<T>,
    pub dw: Matrix<T>,
    pub db: Vec<T>,
}

pub fn linear_backward<T: Scalar>(x: &[T], w: &Matrix<T>, upstream: &[T]) -> Result<LinearGrads<T>> {
    if w.cols() != x.len() || w.rows() != upstream.len() {
        return Err(Error::shape(
            "linear_backward",
            format!("W {}", w.shape_str()),
            format!("x {} / grad {}", x.len(), upstream.len()),
        ));
    }
    let mut dw = Matrix::zeros(w.rows(), w.cols());
    dw.add_outer(upstream, x);
    Ok(LinearGrads {
        dx: w.matvec_t(upstream),
        dw,
        db: upstream.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's own output.
    #[inline]
    pub fn derivative_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Sigmoid => y * (T::one() - y),
            Activation::Tanh => T::one() - y * y,
        }
    }
}

pub fn activation<T: Scalar>(x: &[T], kind: Activation) -> Vec<T> {
    x.iter().map(|&v| kind.apply(v)).collect()
}

/// Takes the forward *output* `y`, not the input.
pub fn activation_backward<T: Scalar>(y: &[T], kind: Activation, upstream: &[T]) -> Vec<T> {
    y.iter()
        .zip(upstream)
        .map(|(&yi, &g)| g * kind.derivative_from_output(yi))
        .collect()
}

pub fn hadamard<T: Scalar>(x: &[T], y: &[T]) -> Result<Vec<T>> {
    ensure_len("hadamard", y.len(), x.len())?;
    Ok(x.iter().zip(y).map(|(&a, &b)| a * b).collect())
}

pub fn hadamard_backward<T: Scalar>(x: &[T], y: &[T], upstream: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    ensure_len("hadamard_backward", y.len(), x.len())?;
    ensure_len("hadamard_backward", upstream.len(), x.len())?;
    let dx = upstream.iter().zip(y).map(|(&g, &b)| g * b).collect();
    let dy = upstream.iter().zip(x).map(|(&g, &a)| g * a).collect();
    Ok((dx, dy))
}

/// Projected factors kept from the forward pass of [`lowrank_bilinear`].
#[derive(Debug, Clone)]
pub struct BilinearForward<T> {
    /// `tanh(U h_r)`
    pub left: Vec<T>,
    /// `tanh(V h_o)`
    pub right: Vec<T>,
    pub output: Vec<T>,
}

/// Low-rank bilinear fusion `tanh(U h_r) ⊙ tanh(V h_o)`.
pub fn lowrank_bilinear<T: Scalar>(
    h_r: &[T],
    h_o: &[T],
    u: &Matrix<T>,
    v: &Matrix<T>,
) -> Result<BilinearForward<T>> {
    if u.cols() != h_r.len() || v.cols() != h_o.len() || u.rows() != v.rows() {
        return Err(Error::shape(
            "lowrank_bilinear",
            format!("U {} / h_r {}", u.shape_str(), h_r.len()),
            format!("V {} / h_o {}", v.shape_str(), h_o.len()),
        ));
    }
    let left = activation(&u.matvec(h_r), Activation::Tanh);
    let right = activation(&v.matvec(h_o), Activation::Tanh);
    let output = hadamard(&left, &right)?;
    Ok(BilinearForward { left, right, output })
}

#[derive(Debug, Clone)]
pub struct BilinearGrads<T> {
    pub dh_r: Vec<T>,
    pub dh_o: Vec<T>,
    pub du: Matrix<T>,
    pub dv: Matrix<T>,
}

pub fn lowrank_bilinear_backward<T: Scalar>(
    h_r: &[T],
    h_o: &[T],
    u: &Matrix<T>,
    v: &Matrix<T>,
    fwd: &BilinearForward<T>,
    upstream: &[T],
) -> Result<BilinearGrads<T>> {
    ensure_len("lowrank_bilinear_backward", upstream.len(), u.rows())?;
    let (dl, dr) = hadamard_backward(&fwd.left, &fwd.right, upstream)?;
    let pre_l = activation_backward(&fwd.left, Activation::Tanh, &dl);
    let pre_r = activation_backward(&fwd.right, Activation::Tanh, &dr);
    let mut du = Matrix::zeros(u.rows(), u.cols());
    du.add_outer(&pre_l, h_r);
    let mut dv = Matrix::zeros(v.rows(), v.cols());
    dv.add_outer(&pre_r, h_o);
    Ok(BilinearGrads {
        dh_r: u.matvec_t(&pre_l),
        dh_o: v.matvec_t(&pre_r),
        du,
        dv,
    })
}

/// Max-shifted softmax.
pub fn softmax<T: Scalar>(s: &[T]) -> Vec<T> {
    let max = s.iter().copied().fold(T::neg_infinity(), T::max);
    let mut p: Vec<T> = s.iter().map(|&v| (v - max).exp()).collect();
    let z: T = p.iter().copied().sum();
    p.iter_mut().for_each(|v| *v /= z);
    p
}

/// Cross-entropy of softmax scores against class `y`; returns the loss and
/// its gradient with respect to the scores.
pub fn softmax_xent<T: Scalar>(s: &[T], y: usize) -> Result<(T, Vec<T>)> {
    if y >= s.len() {
        return Err(Error::Index {
            what: "class label",
            index: y,
            len: s.len(),
        });
    }
    let max = s.iter().copied().fold(T::neg_infinity(), T::max);
    let shifted: Vec<T> = s.iter().map(|&v| v - max).collect();
    let log_z = shifted.iter().map(|&v| v.exp()).sum::<T>().ln();
    let loss = log_z - shifted[y];
    let mut grad: Vec<T> = shifted.iter().map(|&v| (v - log_z).exp()).collect();
    grad[y] -= T::one();
    Ok((loss.max(T::zero()), grad))
}

/// Elementwise `dst += src`.
pub(crate) fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    axpy(T::one(), src, dst);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::gradcheck::{numeric_gradient, relative_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix<f64> {
        Matrix::from_vec(r, c, rand_vec(rng, r * c)).unwrap()
    }

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| relative_error(x, y))
            .fold(0.0, f64::max)
    }

    #[test]
    fn linear_identity_and_bias_cases() {
        let y = linear(&[1.0, 2.0], &Matrix::identity(2), &[0.0, 0.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0]);
        let w = Matrix::from_vec(2, 2, vec![3.0, -7.0, 0.5, 11.0]).unwrap();
        let y = linear(&[0.0, 0.0], &w, &[3.0, -1.0]).unwrap();
        assert_eq!(y, vec![3.0, -1.0]);
    }

    #[test]
    fn linear_shape_error_names_both_shapes() {
        let err = linear(&[1.0, 2.0, 3.0], &Matrix::<f64>::zeros(2, 2), &[0.0, 0.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x2") && msg.contains("x 3"), "{msg}");
    }

    #[test]
    fn linear_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_vec(&mut rng, 3);
        let w = rand_mat(&mut rng, 4, 3);
        let b = rand_vec(&mut rng, 4);
        let g = rand_vec(&mut rng, 4);
        let loss = |x: &[f64], w: &Matrix<f64>, b: &[f64]| -> f64 {
            linear(x, w, b).unwrap().iter().zip(&g).map(|(a, b)| a * b).sum()
        };
        let grads = linear_backward(&x, &w, &g).unwrap();
        let nx = numeric_gradient(&x, 1e-5, |xx| loss(xx, &w, &b));
        let nw = numeric_gradient(w.as_slice(), 1e-5, |ww| {
            loss(&x, &Matrix::from_vec(4, 3, ww.to_vec()).unwrap(), &b)
        });
        let nb = numeric_gradient(&b, 1e-5, |bb| loss(&x, &w, bb));
        assert!(max_err(&grads.dx, &nx) < 1e-4);
        assert!(max_err(grads.dw.as_slice(), &nw) < 1e-4);
        assert!(max_err(&grads.db, &nb) < 1e-4);
    }

    #[test]
    fn activation_scalar_values() {
        assert_eq!(activation(&[0.0_f64], Activation::Sigmoid), vec![0.5]);
        assert_eq!(activation(&[0.0_f64], Activation::Tanh), vec![0.0]);
        let s1 = activation(&[1.0_f64], Activation::Sigmoid)[0];
        // 1 / (1 + e^-1), evaluated independently in long form
        let oracle = 1.0 / (1.0 + (-1.0_f64).exp());
        assert_eq!(s1, oracle);
        assert!((s1 - 0.73106).abs() < 5e-6);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        let y = activation(&[-800.0_f64, 800.0], Activation::Sigmoid);
        assert_eq!(y, vec![0.0, 1.0]);
    }

    #[test]
    fn activation_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_vec(&mut rng, 6);
        let g = rand_vec(&mut rng, 6);
        for kind in [Activation::Sigmoid, Activation::Tanh] {
            let y = activation(&x, kind);
            let analytic = activation_backward(&y, kind, &g);
            let numeric = numeric_gradient(&x, 1e-5, |xx| {
                activation(xx, kind).iter().zip(&g).map(|(a, b)| a * b).sum()
            });
            assert!(max_err(&analytic, &numeric) < 1e-4, "{kind:?}");
        }
    }

    #[test]
    fn hadamard_identity_annihilator_and_gradient() {
        let y = vec![0.25, -3.0, 7.5];
        assert_eq!(hadamard(&[1.0, 1.0, 1.0], &y).unwrap(), y);
        assert_eq!(hadamard(&[0.0, 0.0], &[4.0, -2.0]).unwrap(), vec![0.0, 0.0]);
        assert!(hadamard(&[1.0], &[1.0, 2.0]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = rand_vec(&mut rng, 6);
        let b = rand_vec(&mut rng, 6);
        let g = rand_vec(&mut rng, 6);
        let f = |a: &[f64], b: &[f64]| -> f64 {
            hadamard(a, b).unwrap().iter().zip(&g).map(|(x, y)| x * y).sum()
        };
        let (da, db) = hadamard_backward(&a, &b, &g).unwrap();
        assert!(max_err(&da, &numeric_gradient(&a, 1e-5, |aa| f(aa, &b))) < 1e-4);
        assert!(max_err(&db, &numeric_gradient(&b, 1e-5, |bb| f(&a, bb))) < 1e-4);
    }

    #[test]
    fn bilinear_zero_left_input_annihilates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = rand_mat(&mut rng, 5, 3);
        let v = rand_mat(&mut rng, 5, 4);
        let out = lowrank_bilinear(&[0.0; 3], &rand_vec(&mut rng, 4), &u, &v).unwrap();
        assert!(out.output.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bilinear_scalar_case() {
        let one = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let out = lowrank_bilinear(&[1.0], &[1.0], &one, &one).unwrap().output;
        let t = 1.0_f64.tanh();
        assert_eq!(out, vec![t * t]);
        assert!((out[0] - 0.58002).abs() < 1e-5);
    }

    #[test]
    fn bilinear_rejects_rank_mismatch() {
        let u = Matrix::<f64>::zeros(3, 2);
        let v = Matrix::<f64>::zeros(4, 2);
        assert!(lowrank_bilinear(&[0.0; 2], &[0.0; 2], &u, &v).is_err());
    }

    #[test]
    fn bilinear_gradient_at_rank_8() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (dr, do_, rank) = (6, 5, 8);
        let hr = rand_vec(&mut rng, dr);
        let ho = rand_vec(&mut rng, do_);
        let u = rand_mat(&mut rng, rank, dr);
        let v = rand_mat(&mut rng, rank, do_);
        let g = rand_vec(&mut rng, rank);
        let f = |hr: &[f64], ho: &[f64], u: &Matrix<f64>, v: &Matrix<f64>| -> f64 {
            let out = lowrank_bilinear(hr, ho, u, v).unwrap().output;
            out.iter().zip(&g).map(|(a, b)| a * b).sum()
        };
        let fwd = lowrank_bilinear(&hr, &ho, &u, &v).unwrap();
        let grads = lowrank_bilinear_backward(&hr, &ho, &u, &v, &fwd, &g).unwrap();
        let n_hr = numeric_gradient(&hr, 1e-5, |x| f(x, &ho, &u, &v));
        let n_ho = numeric_gradient(&ho, 1e-5, |x| f(&hr, x, &u, &v));
        let n_u = numeric_gradient(u.as_slice(), 1e-5, |x| {
            f(&hr, &ho, &Matrix::from_vec(rank, dr, x.to_vec()).unwrap(), &v)
        });
        let n_v = numeric_gradient(v.as_slice(), 1e-5, |x| {
            f(&hr, &ho, &u, &Matrix::from_vec(rank, do_, x.to_vec()).unwrap())
        });
        assert!(max_err(&grads.dh_r, &n_hr) < 1e-4);
        assert!(max_err(&grads.dh_o, &n_ho) < 1e-4);
        assert!(max_err(grads.du.as_slice(), &n_u) < 1e-4);
        assert!(max_err(grads.dv.as_slice(), &n_v) < 1e-4);
    }

    #[test]
    fn xent_uniform_scores_give_log_m() {
        for y in 0..6 {
            let (loss, _) = softmax_xent(&[0.7_f64; 6], y).unwrap();
            assert!((loss - 6.0_f64.ln()).abs() < 1e-12);
            assert!((loss - 1.79176).abs() < 5e-6);
        }
    }

    #[test]
    fn xent_saturated_correct_class() {
        let (loss, _) = softmax_xent(&[0.0, 100.0, 0.0, 0.0], 1).unwrap();
        assert!(loss < 1e-10);
    }

    #[test]
    fn xent_rejects_out_of_range_label() {
        assert!(matches!(
            softmax_xent(&[0.0_f64; 3], 3),
            Err(Error::Index { index: 3, len: 3, .. })
        ));
    }

    #[test]
    fn xent_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = rand_vec(&mut rng, 6);
        let (_, grad) = softmax_xent(&s, 2).unwrap();
        let numeric = numeric_gradient(&s, 1e-5, |x| softmax_xent(x, 2).unwrap().0);
        assert!(max_err(&grad, &numeric) < 1e-4);
    }

    proptest::proptest! {
        #[test]
        fn softmax_sums_to_one_and_loss_nonnegative(
            s in proptest::collection::vec(-50.0f64..50.0, 1..12),
            pick in 0usize..12,
        ) {
            let p = softmax(&s);
            let total: f64 = p.iter().sum();
            proptest::prop_assert!((total - 1.0).abs() < 1e-12);
            let y = pick % s.len();
            let (loss, _) = softmax_xent(&s, y).unwrap();
            proptest::prop_assert!(loss >= 0.0);
        }

        #[test]
        fn ops_are_bit_deterministic(x in proptest::collection::vec(-1.0f64..1.0, 4)) {
            let w = Matrix::from_fn(3, 4, |r, c| ((r * 4 + c) as f64 * 0.37).sin());
            let b = [0.1, -0.2, 0.3];
            let y1 = linear(&x, &w, &b).unwrap();
            let y2 = linear(&x, &w, &b).unwrap();
            proptest::prop_assert_eq!(
                y1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                y2.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
