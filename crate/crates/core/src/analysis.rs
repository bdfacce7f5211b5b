//! Post-processing helpers shared by the summary writer and the test suites.

/// First instant where the series comes within `tol` of zero or changes sign.
/// A sign change is located by linear interpolation inside the step.
pub fn first_reaching_time(times: &[f64], values: &[f64], tol: f64) -> Option<f64> {
    for (k, (&t, &v)) in times.iter().zip(values).enumerate() {
        if v.abs() <= tol {
            return Some(t);
        }
        if k + 1 < values.len() {
            let (t1, v1) = (times[k + 1], values[k + 1]);
            if v.signum() != v1.signum() && v1 != 0.0 {
                return Some(t + (t1 - t) * v / (v - v1));
            }
        }
    }
    None
}

/// Sum of absolute increments, a discrete measure of chattering.
pub fn total_variation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Root mean square of the series.
pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}
