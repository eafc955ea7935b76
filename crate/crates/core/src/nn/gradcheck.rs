use crate::error::{Error, Result};

/// Denominator floor for the relative error. Below this magnitude both
/// gradients are treated as numerically zero and the absolute difference is
/// scaled by the floor instead.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Flat index of the entry with the largest error.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// `|a - n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compare the analytic gradient returned by `f` against central finite
/// differences at every coordinate of `params`.
///
/// `f` maps a flat parameter vector to `(loss, gradient)`.
pub fn grad_check<F>(mut f: F, params: &[f64], eps: f64) -> Result<GradCheck>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::invalid(format!("finite-difference step {eps} outside (0, 1e-2]")));
    }
    let (_, analytic) = f(params)?;
    if analytic.len() != params.len() {
        return Err(Error::Dimension {
            context: "grad_check gradient",
            expected: params.len(),
            actual: analytic.len(),
        });
    }
    let mut worst = GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut probe = params.to_vec();
    for i in 0..params.len() {
        probe[i] = params[i] + eps;
        let (plus, _) = f(&probe)?;
        probe[i] = params[i] - eps;
        let (minus, _) = f(&probe)?;
        probe[i] = params[i];
        let numeric = (plus - minus) / (2.0 * eps);
        let err = relative_error(analytic[i], numeric);
        if !err.is_finite() {
            return Err(Error::NonFinite("grad_check"));
        }
        if err > worst.max_rel_error {
            worst = GradCheck {
                max_rel_error: err,
                worst_index: i,
                analytic: analytic[i],
                numeric,
            };
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let r = grad_check(|p| Ok((p[0] * p[0], vec![2.0 * p[0]])), &[3.0], 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn wrong_gradient_detected() {
        let r = grad_check(|p| Ok((p[0] * p[0], vec![3.0 * p[0]])), &[3.0], 1e-5).unwrap();
        assert!(r.max_rel_error > 0.3);
    }

    #[test]
    fn eps_out_of_range() {
        let f = |p: &[f64]| Ok((p[0], vec![1.0]));
        assert!(grad_check(f, &[0.0], 0.0).is_err());
        assert!(grad_check(f, &[0.0], 0.1).is_err());
    }
}
