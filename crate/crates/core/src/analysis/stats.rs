//! Small descriptive statistics used by the experiment drivers.

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and
/// the uniform law on [a, b].
pub fn ks_distance_uniform(samples: &[f64], a: f64, b: f64) -> f64 {
    let mut v: Vec<f64> = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = ((x - a) / (b - a)).clamp(0.0, 1.0);
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max)
}

/// Median, averaging the two middle values for even lengths; NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    match m {
        0 => f64::NAN,
        _ if m % 2 == 1 => v[m / 2],
        _ => 0.5 * (v[m / 2 - 1] + v[m / 2]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_a_perfect_grid() {
        let n = 1000;
        let v: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!((ks_distance_uniform(&v, 0.0, 1.0) - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn ks_of_a_point_mass() {
        assert!((ks_distance_uniform(&[0.25; 10], 0.0, 1.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
