//! The copula `C(x) = ψ(φ(x₁) + ⋯ + φ(x_d))` and the objects derived from
//! its Williamson measure: Markov kernel, level-set masses, Kendall function.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::{Extended, Generator, SNAP};
use crate::measure::{Cut, Regularity, Term, WilliamsonMeasure};
use crate::quadrature;

/// Which of two independent formulas to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Derivatives of the generator.
    PsiForm,
    /// Truncated moments of the Williamson measure.
    GammaForm,
    /// Intercept of the left Taylor polynomial (Kendall function only).
    TaylorForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `x = (1,…,1)` or `C^{1:d−1}(x) = 0`; the kernel is conventionally `δ_0`.
    Degenerate,
    /// `y < f⁰(x)`.
    BelowF0,
    Main,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelEval {
    pub x: Vec<f64>,
    pub y: f64,
    pub value: f64,
    pub branch: Branch,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn check_unit(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("coordinate {v} outside [0,1]")))
    }
}

#[derive(Debug, Clone)]
pub struct ArchimedeanCopula {
    g: Generator,
}

impl ArchimedeanCopula {
    pub fn new(g: Generator) -> Self {
        ArchimedeanCopula { g }
    }

    pub fn from_measure(gamma: WilliamsonMeasure) -> Self {
        Self::new(Generator::new(gamma))
    }

    pub fn generator(&self) -> &Generator {
        &self.g
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    fn phi_sum(&self, x: &[f64]) -> Result<Extended> {
        let mut s = 0.0;
        for &xi in x {
            check_unit(xi)?;
            match self.g.phi(xi)? {
                Extended::Finite(v) => s += v,
                Extended::Infinite => return Ok(Extended::Infinite),
            }
        }
        Ok(Extended::Finite(s))
    }

    /// `ψ(Σ φ(xᵢ))` for any number of coordinates (a lower-dimensional margin
    /// when `x.len() < d`).
    pub fn marginal_value(&self, x: &[f64]) -> Result<f64> {
        for &xi in x {
            check_unit(xi)?;
        }
        if x.contains(&0.0) {
            return Ok(0.0);
        }
        let mut free = x.iter().filter(|&&v| v < 1.0);
        match (free.next(), free.next()) {
            (None, _) => return Ok(1.0),
            (Some(&v), None) => return Ok(v),
            _ => {}
        }
        match self.phi_sum(x)? {
            Extended::Finite(s) => self.g.psi(s),
            Extended::Infinite => Ok(0.0),
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.expect_len(x, self.dim())?;
        self.marginal_value(x)
    }

    fn expect_len(&self, x: &[f64], n: usize) -> Result<()> {
        if x.len() != n {
            return Err(Error::domain(format!(
                "expected {n} coordinates, got {}",
                x.len()
            )));
        }
        Ok(())
    }

    /// `f⁰(x) = ψ(φ(0) − Σφ(xᵢ))`, and `1` on the zero set `L₀^{1:d−1}`.
    fn f0_from_sum(&self, s: Extended) -> Result<f64> {
        match (self.g.phi_zero(), s) {
            (_, Extended::Infinite) => Ok(1.0),
            (Extended::Infinite, _) => Ok(0.0),
            (Extended::Finite(z0), Extended::Finite(s)) => {
                if s >= z0 {
                    Ok(1.0)
                } else {
                    self.g.psi(z0 - s)
                }
            }
        }
    }

    /// Level function `fᵗ(x) = ψ(φ(t) − Σφ(xᵢ))` on the upper `t`-cut.
    pub fn level_function(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.expect_len(x, self.dim() - 1)?;
        check_unit(t)?;
        let s = self.phi_sum(x)?;
        if t == 0.0 {
            return self.f0_from_sum(s);
        }
        let zt = self.g.phi_finite(t)?;
        match s {
            Extended::Finite(s) if s <= zt * (1.0 + 1e-15) => self.g.psi((zt - s).max(0.0)),
            _ => Err(Error::domain(format!(
                "point lies outside the upper {t}-cut of the marginal copula"
            ))),
        }
    }

    /// `K_C(x, [0, y])`.
    pub fn markov_kernel(&self, x: &[f64], y: f64, method: Method) -> Result<KernelEval> {
        self.expect_len(x, self.dim() - 1)?;
        check_unit(y)?;
        let eval = |value: f64, branch: Branch| KernelEval {
            x: x.to_vec(),
            y,
            value,
            branch,
        };
        let s = self.phi_sum(x)?;
        let degenerate = x.iter().all(|&v| v == 1.0)
            || match (s, self.g.phi_zero()) {
                (Extended::Infinite, _) => true,
                (Extended::Finite(s), Extended::Finite(z0)) => s >= z0,
                _ => false,
            };
        if degenerate {
            return Ok(eval(1.0, Branch::Degenerate));
        }
        let s = s.to_f64();
        let zy = self.g.phi(y)?.to_f64();
        match method {
            Method::PsiForm => {
                if y < self.f0_from_sum(Extended::Finite(s))? {
                    return Ok(eval(0.0, Branch::BelowF0));
                }
                let num = if zy.is_infinite() {
                    0.0
                } else {
                    self.g.left_derivative_top(s + zy)?
                };
                let den = self.g.left_derivative_top(s)?;
                if den == 0.0 {
                    // C^{1:d−1}(x) underflows: numerically the degenerate case.
                    return Ok(eval(1.0, Branch::Degenerate));
                }
                Ok(eval((num / den).clamp(0.0, 1.0), Branch::Main))
            }
            Method::GammaForm | Method::TaylorForm => {
                let gamma = self.g.gamma();
                let n = self.dim() - 1;
                let num = if zy.is_infinite() {
                    0.0
                } else {
                    gamma.moment_trunc(n, s + zy)?
                };
                let den = gamma.moment_trunc(n, s)?;
                if den == 0.0 {
                    return Ok(eval(1.0, Branch::Degenerate));
                }
                let value = (num / den).clamp(0.0, 1.0);
                let branch = if y < self.f0_from_sum(Extended::Finite(s))? {
                    Branch::BelowF0
                } else {
                    Branch::Main
                };
                Ok(eval(value, branch))
            }
        }
    }

    /// `μ_C(L_t)` where `L_t = {C = t}`.
    pub fn level_mass(&self, t: f64, method: Method) -> Result<f64> {
        check_unit(t)?;
        let z = match self.g.phi(t)? {
            Extended::Infinite => return Ok(0.0),
            Extended::Finite(z) => z,
        };
        if z == 0.0 {
            // L_1 is the single point (1,…,1).
            return Ok(0.0);
        }
        match method {
            Method::GammaForm => Ok(self.g.law().atom_mass(1.0 / z, SNAP)),
            Method::PsiForm | Method::TaylorForm => {
                let n = self.dim() - 1;
                let jump = if t == 0.0 {
                    self.g.left_derivative_top_snapped(z)?
                } else {
                    self.g.left_derivative_top_snapped(z)?
                        - self.g.right_derivative_top_snapped(z)?
                };
                let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
                Ok(sign * z.powi(n as i32) / factorial(n) * jump)
            }
        }
    }

    /// Kendall distribution function `F_K(t) = P(C(U) ≤ t)`.
    pub fn kendall_cdf(&self, t: f64, method: Method) -> Result<f64> {
        check_unit(t)?;
        if t == 1.0 {
            return Ok(1.0);
        }
        let z = match self.g.phi(t)? {
            Extended::Infinite => return Ok(0.0),
            Extended::Finite(z) => z,
        };
        let n = self.dim() - 1;
        match method {
            Method::GammaForm => self
                .g
                .law()
                .integrate(Term::ONE, Cut::closed(1.0 / z).with_slack(SNAP)),
            Method::PsiForm => {
                let mut acc = self.g.left_derivative_top_snapped(z)? * (-z).powi(n as i32)
                    / factorial(n);
                if t > 0.0 {
                    for k in 0..n {
                        acc += self.g.derivative(k, z)? * (-z).powi(k as i32) / factorial(k);
                    }
                }
                Ok(acc)
            }
            Method::TaylorForm => {
                let top = self.g.left_derivative_top_snapped(z)?;
                self.taylor_intercept(z, top)
            }
        }
    }

    /// `F_K(t−)`, the Kendall function just left of `t`.
    pub fn kendall_left_limit(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let z = self.g.phi_finite(t)?;
        if z == 0.0 {
            return Ok(1.0);
        }
        self.g
            .law()
            .integrate(Term::ONE, Cut::open(1.0 / z).with_slack(SNAP))
    }

    /// Value at 0 of the order-(d−1) Taylor polynomial of `ψ` around `a`,
    /// built with the supplied one-sided top derivative.
    fn taylor_intercept(&self, a: f64, top: f64) -> Result<f64> {
        let n = self.dim() - 1;
        // Coefficients c_k = ψ^{(k)}(a)/k! of (z − a)^k, evaluated by Horner at z − a = −a.
        let mut coeffs = Vec::with_capacity(n + 1);
        for k in 0..n {
            coeffs.push(if a < self.g.phi_zero().to_f64() {
                self.g.derivative(k, a)? / factorial(k)
            } else {
                0.0
            });
        }
        coeffs.push(top / factorial(n));
        Ok(coeffs.iter().rev().fold(0.0, |acc, c| acc * (-a) + c))
    }

    /// Left and right Taylor intercepts at `φ(t)`; their difference is the
    /// level-set mass.
    pub fn taylor_intercepts(&self, t: f64) -> Result<(f64, f64)> {
        let a = self.g.phi_finite(t)?;
        if a == 0.0 {
            return Ok((1.0, 1.0));
        }
        let left = self.taylor_intercept(a, self.g.left_derivative_top_snapped(a)?)?;
        let right = self.taylor_intercept(a, self.g.right_derivative_top_snapped(a)?)?;
        Ok((left, right))
    }

    fn phi_prime(&self, x: f64) -> Result<f64> {
        let z = self.g.phi_finite(x)?;
        let slope = if self.dim() >= 3 {
            self.g.derivative(1, z)?
        } else {
            self.g.left_derivative_top(z)?
        };
        if slope == 0.0 {
            return Err(Error::domain(format!(
                "phi is not differentiable at {x}: psi'(phi(x)) = 0"
            )));
        }
        Ok(1.0 / slope)
    }

    /// Density of the `m`-dimensional margin, `2 ≤ m ≤ d−1`.
    pub fn marginal_density(&self, m: usize, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        if !(2..d).contains(&m) {
            return Err(Error::domain(format!(
                "marginal density order {m} outside 2..={}",
                d - 1
            )));
        }
        self.expect_len(x, m)?;
        if x.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::domain("density needs a point in (0,1)^m"));
        }
        let s = self.phi_sum(x)?.to_f64();
        let deriv = if m == d - 1 {
            self.g.left_derivative_top(s)?
        } else {
            self.g.derivative(m, s)?
        };
        if deriv == 0.0 {
            return Ok(0.0);
        }
        let mut prod = deriv;
        for &xi in x {
            prod *= self.phi_prime(xi)?;
        }
        Ok(prod.max(0.0))
    }

    /// Full density; requires an absolutely continuous Williamson measure.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        self.expect_len(x, d)?;
        if self.g.law().regularity() != Regularity::AbsolutelyContinuous {
            return Err(Error::domain(
                "copula density exists only for absolutely continuous Williamson measures",
            ));
        }
        if x.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::domain("density needs a point in (0,1)^d"));
        }
        let s = self.phi_sum(x)?.to_f64();
        let f = self.g.law().density(1.0 / s).unwrap_or(0.0);
        if f == 0.0 {
            return Ok(0.0);
        }
        // d-th derivative of ψ: (−1)^d (d−1)! z^{−(d+1)} f(1/z).
        let sign = if d.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut prod = sign * factorial(d - 1) * s.powi(-(d as i32 + 1)) * f;
        for &xi in x {
            prod *= self.phi_prime(xi)?;
        }
        Ok(prod.max(0.0))
    }

    /// `|C(x, y) − ∫_{[0,x]} K_C(s, [0,y]) dμ_{C^{1:2}}(s)|` for `d = 3`.
    pub fn disintegration_check(&self, x: &[f64], y: f64) -> Result<f64> {
        if self.dim() != 3 {
            return Err(Error::domain(
                "disintegration check is implemented for d = 3",
            ));
        }
        self.expect_len(x, 2)?;
        check_unit(y)?;
        if y == 1.0 || x.contains(&0.0) {
            return Ok(0.0);
        }
        let lhs = self.value(&[x[0], x[1], y])?;
        let zy = self.g.phi_finite(y)?;
        let mut levels: Vec<f64> = self.g.kinks().to_vec();
        if let Some(z0) = self.g.phi_zero().finite() {
            levels.push(z0);
        }
        let tol = 1e-9;
        let mut failure: Option<Error> = None;
        // s = w² removes the square-root blow-up of φ' at 0.
        let outer = |w1: f64| -> f64 {
            if failure.is_some() {
                return 0.0;
            }
            let s1 = w1 * w1;
            if s1 == 0.0 {
                return 0.0;
            }
            let inner = (|| -> Result<f64> {
                let p1 = self.g.phi_finite(s1)?;
                let mut breaks = Vec::new();
                for &z in &levels {
                    for shift in [p1, p1 + zy] {
                        if z > shift {
                            breaks.push(self.g.psi(z - shift)?.sqrt());
                        }
                    }
                }
                let mut err = None;
                let q = quadrature::integrate(
                    |w2| {
                        let s2 = w2 * w2;
                        if s2 == 0.0 || err.is_some() {
                            return 0.0;
                        }
                        let r = (|| -> Result<f64> {
                            let k = self.markov_kernel(&[s1, s2], y, Method::GammaForm)?;
                            if k.value == 0.0 {
                                return Ok(0.0);
                            }
                            let c = self.marginal_density(2, &[s1, s2])?;
                            Ok(k.value * c * 4.0 * w1 * w2)
                        })();
                        r.unwrap_or_else(|e| {
                            err = Some(e);
                            0.0
                        })
                    },
                    0.0,
                    x[1].sqrt(),
                    &breaks,
                    tol,
                )?;
                match err {
                    Some(e) => Err(e),
                    None => Ok(q.value),
                }
            })();
            inner.unwrap_or_else(|e| {
                failure = Some(e);
                0.0
            })
        };
        let q = quadrature::integrate(outer, 0.0, x[0].sqrt(), &[], 1e-8)?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok((lhs - q.value).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, Law};

    fn cstar() -> ArchimedeanCopula {
        let law = Law::discrete(vec![Atom::new(0.25, 0.875), Atom::new(0.75, 0.125)]).unwrap();
        ArchimedeanCopula::from_measure(WilliamsonMeasure::new(law, 3).unwrap())
    }

    const X: f64 = 29.0 / 36.0;

    #[test]
    fn copula_values() {
        let c = cstar();
        let v = c.value(&[X, X, 0.5]).unwrap();
        assert!((v - 343.0 / 1152.0).abs() < 1e-13);
        assert_eq!(c.value(&[1.0, 1.0, 0.3]).unwrap(), 0.3);
        assert_eq!(c.value(&[0.0, 0.4, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn level_function_values() {
        let c = cstar();
        let f0 = c.level_function(0.0, &[X, X]).unwrap();
        assert!((f0 - 7.0 / 288.0).abs() < 1e-13);
        let ft = c.level_function(0.3, &[1.0, 1.0]).unwrap();
        assert!((ft - 0.3).abs() < 1e-13);
        assert!(c.level_function(0.9, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn kernel_values() {
        let c = cstar();
        for method in [Method::PsiForm, Method::GammaForm] {
            let k = c.markov_kernel(&[X, X], 0.5, method).unwrap();
            assert!((k.value - 7.0 / 16.0).abs() < 1e-12, "{method:?}");
            assert_eq!(k.branch, Branch::Main);
            let below = c.markov_kernel(&[X, X], 0.02, method).unwrap();
            assert_eq!(below.value, 0.0);
            assert_eq!(below.branch, Branch::BelowF0);
            assert_eq!(c.markov_kernel(&[X, X], 1.0, method).unwrap().value, 1.0);
        }
        let k = c.markov_kernel(&[1.0, 1.0], 0.3, Method::PsiForm).unwrap();
        assert_eq!(k.branch, Branch::Degenerate);
    }

    #[test]
    fn level_masses() {
        let c = cstar();
        for method in [Method::GammaForm, Method::PsiForm] {
            assert!((c.level_mass(0.0, method).unwrap() - 0.875).abs() < 1e-12);
            assert!((c.level_mass(7.0 / 18.0, method).unwrap() - 0.125).abs() < 1e-12);
            assert!(c.level_mass(0.6, method).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn kendall_forms() {
        let c = cstar();
        for method in [Method::GammaForm, Method::PsiForm, Method::TaylorForm] {
            assert!((c.kendall_cdf(0.0, method).unwrap() - 0.875).abs() < 1e-12);
            assert!((c.kendall_cdf(0.5, method).unwrap() - 1.0).abs() < 1e-12);
            assert!((c.kendall_cdf(7.0 / 18.0, method).unwrap() - 1.0).abs() < 1e-12);
            assert!((c.kendall_cdf(0.2, method).unwrap() - 0.875).abs() < 1e-12);
        }
        let left = c.kendall_left_limit(7.0 / 18.0).unwrap();
        assert!((left - 0.875).abs() < 1e-15);
        let (l, r) = c.taylor_intercepts(7.0 / 18.0).unwrap();
        assert!((l - r - 0.125).abs() < 1e-12);
    }

    #[test]
    fn marginal_density_matches_finite_differences() {
        let c = cstar();
        let v = c.marginal_density(2, &[X, X]).unwrap();
        assert!((v - 144.0 / 169.0).abs() < 1e-10, "{v}");
        let h = 1e-4;
        let cv = |a: f64, b: f64| c.marginal_value(&[a, b]).unwrap();
        let fd = (cv(X + h, X + h) - cv(X + h, X - h) - cv(X - h, X + h) + cv(X - h, X - h))
            / (4.0 * h * h);
        assert!((fd - v).abs() < 1e-5, "{fd} vs {v}");
    }

    #[test]
    fn disintegration_on_gamma_star() {
        let c = cstar();
        let r = c.disintegration_check(&[0.8, 0.8], 0.5).unwrap();
        assert!(r < 1e-5, "{r}");
        assert_eq!(c.disintegration_check(&[0.8, 0.8], 1.0).unwrap(), 0.0);
        assert_eq!(c.disintegration_check(&[0.0, 0.8], 0.4).unwrap(), 0.0);
    }
}
