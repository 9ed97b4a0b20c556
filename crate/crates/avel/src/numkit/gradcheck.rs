//! Finite-difference gradient checker.

use crate::error::{Error, Result};

/// Outcome of a gradient check over one parameter vector.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_coord: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

const STEP: f64 = 1e-5;

/// Compares an analytic gradient against central finite differences with
/// step `1e-5` per coordinate. The reported error is the maximum over
/// coordinates of `|analytic - numeric| / max(1, |numeric|)`.
///
/// `loss_fn` must be deterministic; it is evaluated twice per coordinate.
pub fn grad_check<F>(
    mut loss_fn: F,
    params: &[f64],
    analytic_grad: &[f64],
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if params.len() != analytic_grad.len() {
        return Err(Error::Dim(format!(
            "grad check: params {} vs analytic gradient {}",
            params.len(),
            analytic_grad.len()
        )));
    }
    let mut scratch = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_coord: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        tolerance,
    };
    for i in 0..params.len() {
        scratch[i] = params[i] + STEP;
        let plus = loss_fn(&scratch)?;
        scratch[i] = params[i] - STEP;
        let minus = loss_fn(&scratch)?;
        scratch[i] = params[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss while perturbing coordinate {i}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * STEP);
        let rel = (analytic_grad[i] - numeric).abs() / numeric.abs().max(1.0);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_coord = i;
            report.analytic_at_worst = analytic_grad[i];
            report.numeric_at_worst = numeric;
        }
    }
    Ok(report)
}
