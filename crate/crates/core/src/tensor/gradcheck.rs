/// Outcome of a finite-difference comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// `max_k |a_k - n_k| / max(|a_k|, |n_k|, 1e-8)`.
    pub max_rel_error: f64,
    /// Coordinate attaining the maximum.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares the analytic gradient returned by `f` at `point` with central
/// differences `(f(x+e) - f(x-e)) / 2e` for every coordinate.
///
/// `f` returns `(value, gradient)`; the gradient is only read at `point`.
pub fn grad_check<F>(mut f: F, point: &[f64], eps: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(point);
    assert_eq!(analytic.len(), point.len(), "gradient length mismatch");
    let mut x = point.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for k in 0..x.len() {
        let orig = x[k];
        x[k] = orig + eps;
        let (fp, _) = f(&x);
        x[k] = orig - eps;
        let (fm, _) = f(&x);
        x[k] = orig;
        let numeric = (fp - fm) / (2.0 * eps);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > report.max_rel_error || k == 0 {
            report = GradCheckReport {
                max_rel_error: rel,
                worst_index: k,
                analytic: a,
                numeric,
            };
        }
    }
    report
}
