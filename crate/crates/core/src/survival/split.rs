/// Median of `xs` (mean of the two middle values for even counts).
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Indices of subjects above the median risk (`high`) and at or below it
/// (`low`).
pub fn median_risk_split(risks: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let Some(m) = median(risks) else {
        return (Vec::new(), Vec::new());
    };
    (0..risks.len()).partition(|&i| risks[i] > m)
}
