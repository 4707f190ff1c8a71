//! Small descriptive-statistics helpers shared by the Monte Carlo drivers.

use serde::{Deserialize, Serialize};

/// Sample mean with its standard error `s / sqrt(N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

/// Mean and standard error; `se` is 0 for fewer than two values.
pub fn mean_se(values: &[f64]) -> MeanSe {
    let count = values.len();
    if count == 0 {
        return MeanSe {
            mean: f64::NAN,
            se: f64::NAN,
            count,
        };
    }
    let n = count as f64;
    let mean = values.iter().sum::<f64>() / n;
    let se = if count > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    MeanSe { mean, se, count }
}

/// Standard error of an empirical proportion `p` over `n` draws.
pub fn proportion_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Share of the total contributed by the largest `ceil(fraction * N)` values.
///
/// The heavy-tail diagnostic used by the experiments: for a variable with
/// infinite mean a handful of top order statistics carry much of the sum.
pub fn top_fraction_share(values: &[f64], fraction: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = ((fraction * sorted.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let total: f64 = sorted.iter().sum();
    let top: f64 = sorted[..k.min(sorted.len())].iter().sum();
    top / total
}

/// Inverse-variance-free pooling of independent estimates weighted by their
/// sample counts: `mean = sum n_i m_i / sum n_i`, `se = sqrt(sum n_i^2 se_i^2) / sum n_i`.
pub fn pool(estimates: &[MeanSe]) -> MeanSe {
    let total: f64 = estimates.iter().map(|e| e.count as f64).sum();
    if total == 0.0 {
        return mean_se(&[]);
    }
    let mean = estimates
        .iter()
        .map(|e| e.count as f64 * e.mean)
        .sum::<f64>()
        / total;
    let var: f64 = estimates
        .iter()
        .map(|e| (e.count as f64 * e.se).powi(2))
        .sum();
    MeanSe {
        mean,
        se: var.sqrt() / total,
        count: total as usize,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_basic() {
        let m = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        // sample variance 5/3
        assert!((m.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        let b: Vec<f64> = (200..300).map(f64::from).collect();
        assert_eq!(ks_two_sample(&a, &b), 1.0);
    }

    #[test]
    fn top_share() {
        let mut v = vec![1.0; 19];
        v.push(81.0);
        assert!((top_fraction_share(&v, 0.05) - 0.81).abs() < 1e-12);
    }

    #[test]
    fn pooling_two_equal_halves() {
        let a = MeanSe {
            mean: 1.0,
            se: 0.2,
            count: 100,
        };
        let b = MeanSe {
            mean: 3.0,
            se: 0.2,
            count: 100,
        };
        let p = pool(&[a, b]);
        assert_eq!(p.mean, 2.0);
        assert!((p.se - 0.2 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.count, 200);
    }
}
