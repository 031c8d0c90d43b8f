//! Small statistics helpers shared by the trace pipeline and its tests.

/// Arithmetic mean.
pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Mean-subtracted sample variance (population normalization).
pub fn variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Variance of the whole signal plus a standard error estimated from the
/// spread of per-segment variances over `n_segments` equal slices.
pub fn segmented_variance(x: &[f64], n_segments: usize) -> (f64, f64) {
    assert!(n_segments >= 2, "need at least two segments");
    let seg_len = x.len() / n_segments;
    assert!(seg_len >= 2, "segments too short");
    let vars: Vec<f64> = (0..n_segments)
        .map(|s| variance(&x[s * seg_len..(s + 1) * seg_len]))
        .collect();
    let v = mean(&vars);
    let spread = variance(&vars);
    let stderr = (spread / (n_segments as f64 - 1.0)).sqrt();
    (v, stderr)
}
