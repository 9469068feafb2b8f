//! Empirical distribution functions and Kolmogorov–Smirnov distances.

use crate::error::Result;

/// Critical value factor of the one-sample KS test at the 1% level.
pub const KS_CRIT_1PCT: f64 = 1.63;

#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        EmpiricalCdf { sorted: values }
    }

    /// Moves values within `tol` of one of `levels` onto it. Points lying
    /// exactly on a level set evaluate a few ulps away from the level, which
    /// would otherwise straddle a jump of the reference law.
    pub fn snapped(mut self, levels: &[f64], tol: f64) -> Self {
        for v in self.sorted.iter_mut() {
            if let Some(&l) = levels.iter().find(|&&l| (*v - l).abs() <= tol) {
                *v = l;
            }
        }
        self.sorted.sort_by(f64::total_cmp);
        self
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of values `≤ x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// Fraction of values `< x`.
    pub fn left_limit(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v < x) as f64 / self.len() as f64
    }

    /// `sup |F_n − F|`, using `F(x−)` where `F` may jump. Each distinct sample
    /// value costs one call to `cdf` and one to `left`.
    pub fn ks_distance<F, L>(&self, mut cdf: F, mut left: L) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
        L: FnMut(f64) -> Result<f64>,
    {
        let n = self.len() as f64;
        let mut worst: f64 = 0.0;
        let mut i = 0;
        while i < self.sorted.len() {
            let x = self.sorted[i];
            let mut j = i;
            while j < self.sorted.len() && self.sorted[j] == x {
                j += 1;
            }
            // Below x the empirical function equals i/n, at x it equals j/n.
            let (f, l) = (cdf(x)?, left(x)?);
            worst = worst
                .max((j as f64 / n - f).abs())
                .max((l - i as f64 / n).abs());
            i = j;
        }
        Ok(worst)
    }
}

/// KS distance of a sample from the uniform law on `[0,1]`.
pub fn ks_uniform(values: Vec<f64>) -> f64 {
    let e = EmpiricalCdf::new(values);
    let f = |x: f64| Ok(x.clamp(0.0, 1.0));
    e.ks_distance(f, f).expect("infallible")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_grid_against_uniform() {
        let n = 100;
        let v: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!((ks_uniform(v) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn ks_handles_jumps() {
        // Sample exactly matching a two-point law.
        let e = EmpiricalCdf::new(vec![0.0, 0.0, 0.0, 1.0]);
        let cdf = |x: f64| Ok(if x < 1.0 { 0.75 } else { 1.0 });
        let left = |x: f64| Ok(if x <= 0.0 { 0.0 } else if x <= 1.0 { 0.75 } else { 1.0 });
        assert_eq!(e.ks_distance(cdf, left).unwrap(), 0.0);
    }

    #[test]
    fn snapping_onto_levels() {
        let e = EmpiricalCdf::new(vec![-0.0, 1e-18, 0.5 - 1e-16, 0.7]).snapped(&[0.0, 0.5], 1e-9);
        assert_eq!(e.values(), &[0.0, 0.0, 0.5, 0.7]);
    }

    #[test]
    fn empirical_evaluation() {
        let e = EmpiricalCdf::new(vec![0.3, 0.1, 0.2, 0.2]);
        assert_eq!(e.eval(0.2), 0.75);
        assert_eq!(e.left_limit(0.2), 0.25);
    }
}
