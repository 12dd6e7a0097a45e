//! Small descriptive-statistics helpers with fixed conventions: quantiles
//! interpolate linearly between order statistics and moments are population
//! moments.

/// Quantile of already sorted data, `p` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let v = sorted(values);
    (!v.is_empty()).then(|| quantile_sorted(&v, 0.5))
}

/// `(median, interquartile range)`.
pub fn median_iqr(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64)> {
    let v = sorted(values);
    if v.is_empty() {
        return None;
    }
    Some((
        quantile_sorted(&v, 0.5),
        quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25),
    ))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation.
pub fn std_pop(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Population skewness and excess kurtosis; both are 0 for zero variance.
pub fn skew_kurtosis(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = mean(values);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= 0.0 {
        return (0.0, 0.0);
    }
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_quantiles() {
        let (med, iqr) = median_iqr([5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!(med, 3.0);
        assert_eq!(iqr, 2.0);
        assert_eq!(median([1.0, 2.0, 3.0, 4.0]), Some(2.5));
        assert_eq!(median(std::iter::empty()), None);
    }

    #[test]
    fn moments_of_hand_example() {
        // deviations -2,-2,-2,6: m2 = 12, m3 = 48, m4 = 336
        let (skew, kurt) = skew_kurtosis(&[2.0, 2.0, 2.0, 10.0]);
        assert!((skew - 48.0 / 12f64.powf(1.5)).abs() < 1e-12);
        assert!((skew - 1.1547005383792515).abs() < 1e-9);
        assert!((kurt - (336.0 / 144.0 - 3.0)).abs() < 1e-12);
        assert_eq!(skew_kurtosis(&[95.0; 10]), (0.0, 0.0));
    }
}
