use crate::error::{Error, Result};
use crate::special::{normal_sf, student_t_sf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    /// `μ > 0`
    OneSided,
    /// `μ ≠ 0`
    TwoSided,
}

impl std::str::FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" | "one-sided" => Ok(Alternative::OneSided),
            "two" | "two-sided" => Ok(Alternative::TwoSided),
            other => Err(Error::param(format!("unknown alternative `{other}`"))),
        }
    }
}

impl std::fmt::Display for Alternative {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Alternative::OneSided => "one",
            Alternative::TwoSided => "two",
        })
    }
}

/// z-test p-values: `Φ(−x)` one-sided, `2Φ(−|x|)` two-sided.
pub fn z_pvalues(statistics: &[f64], alternative: Alternative) -> Vec<f64> {
    statistics
        .iter()
        .map(|&x| match alternative {
            Alternative::OneSided => normal_sf(x),
            Alternative::TwoSided => (2.0 * normal_sf(x.abs())).min(1.0),
        })
        .collect()
}

/// One-sample t-test p-values with `df` degrees of freedom. Non-finite
/// statistics (zero sample variance) map to `floor`.
pub fn t_pvalues(statistics: &[f64], df: f64, alternative: Alternative, floor: f64) -> Vec<f64> {
    statistics
        .iter()
        .map(|&t| {
            if !t.is_finite() {
                return floor;
            }
            match alternative {
                Alternative::OneSided => student_t_sf(t, df),
                Alternative::TwoSided => (2.0 * student_t_sf(t.abs(), df)).min(1.0),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_quantile;

    #[test]
    fn z_examples() {
        assert_eq!(z_pvalues(&[0.0], Alternative::OneSided)[0], 0.5);
        assert!((z_pvalues(&[1.6449], Alternative::OneSided)[0] - 0.05).abs() < 1e-4);
        let x = normal_quantile(0.95);
        assert!((z_pvalues(&[x], Alternative::OneSided)[0] - 0.05).abs() < 1e-14);
        let two = z_pvalues(&[1.3, -1.3], Alternative::TwoSided);
        assert_eq!(two[0], two[1]);
        assert_eq!(z_pvalues(&[0.0], Alternative::TwoSided)[0], 1.0);
    }

    #[test]
    fn t_examples() {
        for df in [1.0, 4.0, 9.0, 30.0] {
            assert!((t_pvalues(&[0.0], df, Alternative::OneSided, 1e-6)[0] - 0.5).abs() < 1e-14);
        }
        assert_eq!(t_pvalues(&[f64::NAN], 9.0, Alternative::OneSided, 1e-6)[0], 1e-6);
        let two = t_pvalues(&[2.0, -2.0], 9.0, Alternative::TwoSided, 1e-6);
        assert_eq!(two[0], two[1]);
    }
}
