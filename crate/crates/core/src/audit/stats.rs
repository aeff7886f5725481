//! Significance tests.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub chi2: f64,
    pub p_value: f64,
}

/// Upper tail of the χ² distribution with one degree of freedom.
pub fn chi2_df1_p_value(chi2: f64) -> f64 {
    erfc((chi2 / 2.0).sqrt()).clamp(0.0, 1.0)
}

/// Pearson χ² test of homogeneity on the 2x2 table
///
/// ```text
///            positive  negative
/// sample a    a_pos     a_neg
/// sample b    b_pos     b_neg
/// ```
///
/// without continuity correction. `None` when a row or column total is zero.
pub fn chi_square_homogeneity(a_pos: u64, a_neg: u64, b_pos: u64, b_neg: u64) -> Option<ChiSquare> {
    let (a, b, c, d) = (a_pos as f64, a_neg as f64, b_pos as f64, b_neg as f64);
    let (r1, r2, c1, c2) = (a + b, c + d, a + c, b + d);
    if r1 == 0.0 || r2 == 0.0 || c1 == 0.0 || c2 == 0.0 {
        return None;
    }
    let n = r1 + r2;
    let cross = a * d - b * c;
    let chi2 = n * cross * cross / (r1 * r2 * c1 * c2);
    Some(ChiSquare {
        chi2,
        p_value: chi2_df1_p_value(chi2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanComparison {
    pub mean_a: f64,
    pub mean_b: f64,
    pub z: f64,
    pub p_value: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Two-sided Welch test with a normal approximation to the null distribution.
/// `None` when either sample is empty. With zero variance on both sides the
/// p-value is 1 for equal means and 0 otherwise.
pub fn welch_normal_test(a: &[f64], b: &[f64]) -> Option<MeanComparison> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let se = (va / a.len() as f64 + vb / b.len() as f64).sqrt();
    let (z, p) = if se > 0.0 {
        let z = (ma - mb) / se;
        (z, erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
    } else if ma == mb {
        (0.0, 1.0)
    } else {
        ((ma - mb).signum() * f64::INFINITY, 0.0)
    };
    Some(MeanComparison {
        mean_a: ma,
        mean_b: mb,
        z,
        p_value: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn identical_proportions() {
        let r = chi_square_homogeneity(30, 70, 30, 70).unwrap();
        assert_eq!(r.chi2, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn hand_computed_table() {
        // 200 * (10*50 - 90*50)^2 / (100 * 100 * 60 * 140) = 38.0952...
        let r = chi_square_homogeneity(10, 90, 50, 50).unwrap();
        assert!((r.chi2 - 3.2e9 / 8.4e7).abs() < 1e-9);
        assert!(r.p_value < 1e-9);
    }

    #[test]
    fn p_value_matches_gamma_based_cdf() {
        let dist = ChiSquared::new(1.0).unwrap();
        for &x in &[0.001, 0.1, 1.0, 2.5, 3.841, 6.63, 10.0, 20.0] {
            let oracle = 1.0 - dist.cdf(x);
            assert!((chi2_df1_p_value(x) - oracle).abs() < 1e-9, "x={x}");
        }
        assert!((chi2_df1_p_value(3.841) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn zero_margins_are_undefined() {
        assert!(chi_square_homogeneity(0, 0, 3, 4).is_none());
        assert!(chi_square_homogeneity(0, 5, 0, 4).is_none());
        assert!(chi_square_homogeneity(5, 0, 4, 0).is_none());
    }

    #[test]
    fn welch_degenerate_and_separated() {
        let r = welch_normal_test(&[1.0; 10], &[1.0; 50]).unwrap();
        assert_eq!((r.mean_a, r.mean_b, r.p_value), (1.0, 1.0, 1.0));
        let a: Vec<f64> = (0..50).map(|i| 4.0 + (i % 3) as f64 * 0.1).collect();
        let b: Vec<f64> = (0..500).map(|i| 1.0 + (i % 2) as f64 * 0.1).collect();
        assert!(welch_normal_test(&a, &b).unwrap().p_value < 1e-6);
        assert!(welch_normal_test(&[], &b).is_none());
    }
}
