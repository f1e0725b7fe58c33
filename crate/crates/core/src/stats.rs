//! Replicate aggregation.
//!
//! Replicates are always collected into a vector indexed by replicate
//! number before reduction, and sums are pairwise, so the result is
//! bit-identical regardless of how many threads produced the values.

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Sample mean with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanSe { mean: f64::NAN, std_error: f64::NAN, n };
        }
        if xs.iter().all(|&x| x == xs[0]) {
            return MeanSe { mean: xs[0], std_error: 0.0, n };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let std_error = if n > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        MeanSe { mean, std_error, n }
    }

    /// Normal-approximation two-sided confidence interval.
    pub fn confidence_interval(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.std_error, self.mean + z * self.std_error)
    }
}

/// Shortest decimal rendering of `x` rounded to twelve significant digits.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.11e}");
    let Ok(v) = s.parse::<f64>() else { return s };
    if v == 0.0 || (1e-6..1e16).contains(&v.abs()) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// `sqrt(a² + b²)` for combining independent standard errors.
pub fn combined_se(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_have_zero_error() {
        let s = MeanSe::from_samples(&[0.25; 100]);
        assert_eq!(s.mean, 0.25);
        assert_eq!(s.std_error, 0.0);
    }

    #[test]
    fn known_mean_and_se() {
        let s = MeanSe::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert!((s.mean - 2.5).abs() < 1e-15);
        // sample var = 5/3, se = sqrt(5/12)
        assert!((s.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        let (lo, hi) = s.confidence_interval(2.0);
        assert!(lo < 2.5 && hi > 2.5);
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_sig12(0.1), "0.1");
        assert_eq!(format_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig12(-2.0 / 3.0e-7), "-6666666.66667");
        assert_eq!(format_sig12(0.0), "0");
        assert_eq!(format_sig12(4.361_114_070_412_345e70), "4.36111407041e70");
        assert_eq!(format_sig12(1.5e-9), "1.5e-9");
    }
}
