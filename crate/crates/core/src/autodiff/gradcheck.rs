use super::{zero_grads, Tensor};
use crate::error::Result;
use crate::Scalar;

/// Central-difference step used throughout the test suites.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for relative error, so that near-zero gradients are
/// compared on an absolute scale instead of dividing roundoff by zero.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradMismatch {
    pub param: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub failures: Vec<GradMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub(crate) fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares reverse-mode gradients of `loss_fn` against central finite
/// differences for every element of every parameter.
///
/// `loss_fn` must rebuild its graph from the current parameter values on
/// each call and return a scalar; it must be deterministic (dropout off).
/// Existing gradients on `params` are cleared.
pub fn grad_check<T, F>(params: &[Tensor<T>], mut loss_fn: F, step: f64, tolerance: f64) -> Result<GradCheckReport>
where
    T: Scalar,
    F: FnMut() -> Result<Tensor<T>>,
{
    zero_grads(params);
    loss_fn()?.backward()?;
    let analytic: Vec<Vec<T>> = params
        .iter()
        .map(|p| p.grad().unwrap_or_else(|| vec![T::zero(); p.numel()]))
        .collect();
    zero_grads(params);

    let h = T::from_f64_lossy(step);
    let mut report = GradCheckReport::default();
    for (pi, p) in params.iter().enumerate() {
        for i in 0..p.numel() {
            let original = p.data()[i];
            p.data_mut()[i] = original + h;
            let plus = loss_fn()?.item()?.to_f64_lossy();
            p.data_mut()[i] = original - h;
            let minus = loss_fn()?.item()?.to_f64_lossy();
            p.data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[pi][i].to_f64_lossy();
            let rel = relative_error(a, numeric);
            report.checked += 1;
            report.max_rel_error = report.max_rel_error.max(rel);
            if rel.is_nan() || rel > tolerance {
                report.failures.push(GradMismatch {
                    param: pi,
                    index: i,
                    analytic: a,
                    numeric,
                    rel_error: rel,
                });
            }
        }
    }
    Ok(report)
}
