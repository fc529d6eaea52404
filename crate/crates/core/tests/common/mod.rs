//! Shared oracle helpers for the integration suites. Everything here is
//! deliberately independent of the crate's solver path: plain Gauss-Jordan
//! elimination, textbook ANOVA mean squares, the classical paired t-test,
//! and the Kolmogorov-Smirnov uniformity statistic.

#![allow(dead_code)]

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Solve the normal equations `X'X b = X'y` by Gauss-Jordan elimination over
/// explicitly accumulated cross-products. `columns` are the design columns.
pub fn normal_equations_solve(columns: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = columns.len();
    let n = y.len();
    let mut aug = vec![vec![0.0; k + 1]; k];
    for r in 0..k {
        for c in 0..k {
            aug[r][c] = (0..n).map(|i| columns[r][i] * columns[c][i]).sum();
        }
        aug[r][k] = (0..n).map(|i| columns[r][i] * y[i]).sum();
    }
    for col in 0..k {
        // partial pivot
        let pivot_row = (col..k)
            .max_by(|&a, &b| {
                aug[a][col]
                    .abs()
                    .partial_cmp(&aug[b][col].abs())
                    .unwrap()
            })
            .unwrap();
        aug.swap(col, pivot_row);
        let pivot = aug[col][col];
        for r in 0..k {
            if r != col {
                let factor = aug[r][col] / pivot;
                for c in 0..=k {
                    aug[r][c] -= factor * aug[col][c];
                }
            }
        }
    }
    (0..k).map(|r| aug[r][k] / aug[r][r]).collect()
}

/// Residual sum of squares of a fitted linear combination.
pub fn rss(columns: &[Vec<f64>], beta: &[f64], y: &[f64]) -> f64 {
    (0..y.len())
        .map(|i| {
            let fitted: f64 = columns.iter().zip(beta).map(|(c, b)| c[i] * b).sum();
            (y[i] - fitted) * (y[i] - fitted)
        })
        .sum()
}

/// Closed-form Gaussian ML deviance of a saturated-variance linear model.
pub fn gaussian_ml_deviance(rss: f64, n: usize) -> f64 {
    let nf = n as f64;
    nf * (std::f64::consts::TAU * rss / nf).ln() + nf
}

/// Balanced one-way ANOVA mean squares from group assignments.
/// Returns (msb, msw, groups, per_group).
pub fn balanced_anova(y: &[f64], group_of: &[usize], n_groups: usize) -> (f64, f64, usize, usize) {
    let n = y.len();
    let per_group = n / n_groups;
    assert_eq!(per_group * n_groups, n, "layout must be balanced");
    let grand = y.iter().sum::<f64>() / n as f64;
    let mut sums = vec![0.0; n_groups];
    for (v, &g) in y.iter().zip(group_of) {
        sums[g] += v;
    }
    let means: Vec<f64> = sums.iter().map(|s| s / per_group as f64).collect();
    let ssb: f64 = means
        .iter()
        .map(|m| per_group as f64 * (m - grand) * (m - grand))
        .sum();
    let ssw: f64 = y
        .iter()
        .zip(group_of)
        .map(|(v, &g)| (v - means[g]) * (v - means[g]))
        .sum();
    let msb = ssb / (n_groups as f64 - 1.0);
    let msw = ssw / (n as f64 - n_groups as f64);
    (msb, msw, n_groups, per_group)
}

/// Two-sided paired t-test p-value from per-item differences.
pub fn paired_t_test_p(differences: &[f64]) -> f64 {
    let n = differences.len() as f64;
    let mean = differences.iter().sum::<f64>() / n;
    let var = differences
        .iter()
        .map(|d| (d - mean) * (d - mean))
        .sum::<f64>()
        / (n - 1.0);
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).unwrap();
    2.0 * dist.sf(t.abs())
}

/// Kolmogorov-Smirnov statistic of a sample against Uniform(0, 1).
pub fn ks_uniform_stat(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        let above = (i as f64 + 1.0) / n - v;
        let below = v - i as f64 / n;
        d = d.max(above).max(below);
    }
    d
}

/// Asymptotic KS critical value at significance `alpha = 0.01`.
pub fn ks_critical_01(n: usize) -> f64 {
    // K with Q(K) = alpha; sqrt(-ln(alpha/2)/2) = 1.62762 for alpha = 0.01
    1.6276236115189503 / (n as f64).sqrt()
}

/// xorshift-based deterministic uniform values for test-data construction.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Roughly standard normal (sum of 12 uniforms, shifted).
    pub fn normal(&mut self) -> f64 {
        (0..12).map(|_| self.uniform()).sum::<f64>() - 6.0
    }

    pub fn below(&mut self, bound: usize) -> usize {
        (self.next_u64() % bound as u64) as usize
    }
}
