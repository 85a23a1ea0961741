//! Small ordinary-least-squares helpers shared by the diagnostic layers.

/// Slope of the OLS line through `(x, y)` points.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let (slope, _) = least_squares_line(points);
    slope
}

/// `(slope, intercept)` of the OLS line through `(x, y)` points.
pub fn least_squares_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    assert!(points.len() >= 2, "need at least two points for a line fit");
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return (f64::NAN, f64::NAN);
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}
