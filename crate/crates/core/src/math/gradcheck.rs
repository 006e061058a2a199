//! Central-difference gradient checking.

use super::params::ParamSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `|a - n| / max(|a|, |n|, 1e-6)`. The floor sits above central-difference
/// round-off, so exactly-zero gradients do not register as errors.
pub fn relative_error<T: Scalar>(analytic: T, numeric: T) -> T {
    let denom = analytic.abs().max(numeric.abs()).max(T::lit(1e-6));
    (analytic - numeric).abs() / denom
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient<T: Scalar>(x: &[T], step: T, mut f: impl FnMut(&[T]) -> T) -> Vec<T> {
    let mut probe = x.to_vec();
    let two = T::lit(2.0);
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let plus = f(&probe);
            probe[i] = orig - step;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (two * step)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GradCheck<T> {
    pub max_relative_error: T,
    /// `group/entry[flat index]` of the worst entry.
    pub worst: String,
    pub checked: usize,
}

/// Compares the analytic gradient returned by `f` against central
/// differences over every scalar in `params`.
///
/// `f` maps parameters to `(loss, gradient)`; only the loss is used at the
/// perturbed points.
pub fn grad_check<T, F>(params: &ParamSet<T>, step: T, mut f: F) -> Result<GradCheck<T>>
where
    T: Scalar,
    F: FnMut(&ParamSet<T>) -> Result<(T, ParamSet<T>)>,
{
    if !(step > T::zero()) {
        return Err(Error::Invalid("gradient check step must be positive".into()));
    }
    let (loss0, analytic) = f(params)?;
    if !loss0.is_finite() {
        return Err(Error::NonFinite("loss at unperturbed parameters".into()));
    }
    params.ensure_same_layout(&analytic, "grad_check")?;

    let mut probe = params.clone();
    let mut worst = (T::zero(), String::new());
    let mut checked = 0;
    let two = T::lit(2.0);
    for gi in 0..params.groups.len() {
        for ei in 0..params.groups[gi].entries.len() {
            for k in 0..params.groups[gi].entries[ei].value.len() {
                let label = || {
                    format!(
                        "{}/{}[{k}]",
                        params.groups[gi].name, params.groups[gi].entries[ei].name
                    )
                };
                let orig = params.groups[gi].entries[ei].value.as_slice()[k];
                probe.groups[gi].entries[ei].value.as_mut_slice()[k] = orig + step;
                let plus = f(&probe)?.0;
                probe.groups[gi].entries[ei].value.as_mut_slice()[k] = orig - step;
                let minus = f(&probe)?.0;
                probe.groups[gi].entries[ei].value.as_mut_slice()[k] = orig;
                if !plus.is_finite() || !minus.is_finite() {
                    return Err(Error::NonFinite(label()));
                }
                let numeric = (plus - minus) / (two * step);
                let a = analytic.groups[gi].entries[ei].value.as_slice()[k];
                let err = relative_error(a, numeric);
                if err > worst.0 || worst.1.is_empty() {
                    worst = (err, label());
                }
                checked += 1;
            }
        }
    }
    Ok(GradCheck {
        max_relative_error: worst.0,
        worst: worst.1,
        checked,
    })
}
