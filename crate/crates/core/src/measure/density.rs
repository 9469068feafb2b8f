use std::fmt;
use std::sync::Arc;

use super::{expand, Cut, Term, MASS_TOL};
use crate::error::{Error, Result};
use crate::quadrature::{self, INTEGRATION_TOL};

/// Density `Σ_k c_k t^k · e^{−rate·(t−lo)}` on `[lo, hi)`. `hi` may be
/// infinite when `rate > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<f64>,
    pub rate: f64,
}

impl Piece {
    pub fn polynomial(lo: f64, hi: f64, coeffs: Vec<f64>) -> Self {
        Piece {
            lo,
            hi,
            coeffs,
            rate: 0.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let poly = self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c);
        if self.rate == 0.0 {
            poly
        } else {
            poly * (-self.rate * (t - self.lo)).exp()
        }
    }

    /// `∫_lo^b t^q e^{−rate(t−lo)} dt` for q = 0..=n, `rate > 0`.
    fn base_integrals(&self, b: f64, n: usize) -> Vec<f64> {
        let lo = self.lo;
        let mut out = Vec::with_capacity(n + 1);
        let r = self.rate;
        // b^q e^{−r(b−lo)}, kept finite for large b.
        let boundary = |q: usize| -> f64 {
            if b.is_infinite() {
                0.0
            } else if q == 0 {
                (-r * (b - lo)).exp()
            } else if b == 0.0 {
                0.0
            } else {
                (q as f64 * b.ln() - r * (b - lo)).exp()
            }
        };
        out.push((1.0 - boundary(0)) / r);
        for q in 1..=n {
            let prev = out[q - 1];
            out.push((lo.powi(q as i32) - boundary(q)) / r + q as f64 / r * prev);
        }
        out
    }

    /// `∫_{[lo, min(b,hi))} term(t)·density(t) dt`.
    pub(crate) fn integrate(&self, term: Term, b: f64) -> f64 {
        let b = b.min(self.hi);
        if b <= self.lo {
            return 0.0;
        }
        if self.rate == 0.0 {
            return self.integrate_local(term, b);
        }
        let tc = term.coeffs();
        let mut prod = vec![0.0; tc.len() + self.coeffs.len() - 1];
        for (i, &x) in tc.iter().enumerate() {
            for (j, &y) in self.coeffs.iter().enumerate() {
                prod[i + j] += x * y;
            }
        }
        let base = self.base_integrals(b, prod.len() - 1);
        prod.iter().zip(&base).map(|(c, j)| c * j).sum()
    }

    /// Polynomial case in the local variable `t = lo + w·x`, which keeps
    /// narrow pieces far from the origin free of cancellation.
    fn integrate_local(&self, term: Term, b: f64) -> f64 {
        let w = b - self.lo;
        let tc = term.local_coeffs(self.lo, w);
        let mut pc = vec![0.0; self.coeffs.len()];
        for (k, &c) in self.coeffs.iter().enumerate() {
            for (j, e) in expand(self.lo, w, k).into_iter().enumerate() {
                pc[j] += c * e;
            }
        }
        let mut total = 0.0;
        for (i, &x) in tc.iter().enumerate() {
            for (j, &y) in pc.iter().enumerate() {
                total += x * y / (i + j + 1) as f64;
            }
        }
        w * total
    }

    fn probe_points(&self) -> Vec<f64> {
        if self.hi.is_finite() {
            (0..=32)
                .map(|k| self.lo + (self.hi - self.lo) * k as f64 / 32.0)
                .collect()
        } else {
            (0..=64).map(|k| self.lo + k as f64 / self.rate).collect()
        }
    }
}

/// Black-box density with declared support `[lo, hi]`.
#[derive(Clone)]
pub struct BlackBox {
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub lo: f64,
    pub hi: f64,
}

impl fmt::Debug for BlackBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBox")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Density {
    Piecewise(Vec<Piece>),
    BlackBox(BlackBox),
}

impl Density {
    pub fn piecewise(mut pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::invariant("total mass", "density without pieces"));
        }
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for (i, p) in pieces.iter().enumerate() {
            if !(p.lo.is_finite() && p.lo >= 0.0 && p.hi > p.lo) {
                return Err(Error::Spec(format!(
                    "piece [{}, {}) is not a valid interval in [0, inf)",
                    p.lo, p.hi
                )));
            }
            if p.coeffs.is_empty() || p.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::Spec("piece coefficients must be finite".into()));
            }
            if !(p.rate.is_finite() && p.rate >= 0.0) {
                return Err(Error::Spec("piece rate must be finite and >= 0".into()));
            }
            if p.hi.is_infinite() && p.rate == 0.0 {
                return Err(Error::Spec("unbounded piece needs a positive rate".into()));
            }
            if i > 0 && p.lo < pieces[i - 1].hi {
                return Err(Error::Spec("density pieces overlap".into()));
            }
            if p.probe_points().iter().any(|&t| p.value(t) < -1e-12) {
                return Err(Error::invariant(
                    "non-negative density",
                    format!("density negative on [{}, {})", p.lo, p.hi),
                ));
            }
        }
        let total: f64 = pieces
            .iter()
            .map(|p| p.integrate(Term::ONE, f64::INFINITY))
            .sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::invariant(
                "total mass",
                format!("density integrates to {total}"),
            ));
        }
        Ok(Density::Piecewise(pieces))
    }

    pub fn black_box(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lo: f64,
        hi: f64,
    ) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
            return Err(Error::Spec(format!("invalid support [{lo}, {hi}]")));
        }
        let bb = BlackBox {
            f: Arc::new(f),
            lo,
            hi,
        };
        for k in 0..=64 {
            let t = lo + (hi - lo) * k as f64 / 64.0;
            let v = (bb.f)(t);
            if !(v >= 0.0) {
                return Err(Error::invariant(
                    "non-negative density",
                    format!("density {v} at {t}"),
                ));
            }
        }
        let q = quadrature::integrate(|t| (bb.f)(t), lo, hi, &[], INTEGRATION_TOL)?;
        if (q.value - 1.0).abs() > MASS_TOL + q.error {
            return Err(Error::invariant(
                "total mass",
                format!("density integrates to {} (error bound {})", q.value, q.error),
            ));
        }
        Ok(Density::BlackBox(bb))
    }

    pub(crate) fn integrate(&self, term: Term, cut: Cut) -> Result<f64> {
        match self {
            Density::Piecewise(pieces) => Ok(pieces
                .iter()
                .take_while(|p| p.lo < cut.at)
                .map(|p| p.integrate(term, cut.at))
                .sum()),
            Density::BlackBox(bb) => {
                let b = cut.at.min(bb.hi);
                let q = quadrature::integrate(
                    |t| (bb.f)(t) * term.eval(t),
                    bb.lo,
                    b,
                    &[],
                    INTEGRATION_TOL,
                )?;
                Ok(q.value)
            }
        }
    }

    pub(crate) fn value(&self, t: f64) -> f64 {
        match self {
            Density::Piecewise(pieces) => pieces
                .iter()
                .find(|p| p.lo <= t && t < p.hi)
                .map_or(0.0, |p| p.value(t)),
            Density::BlackBox(bb) => {
                if bb.lo <= t && t <= bb.hi {
                    (bb.f)(t)
                } else {
                    0.0
                }
            }
        }
    }

    pub(crate) fn support_inf(&self) -> f64 {
        match self {
            Density::Piecewise(pieces) => pieces
                .iter()
                .find(|p| p.integrate(Term::ONE, p.hi) > 0.0)
                .map_or(f64::INFINITY, |p| p.lo),
            Density::BlackBox(bb) => bb.lo,
        }
    }

    pub(crate) fn upper_hint(&self) -> f64 {
        match self {
            Density::Piecewise(pieces) => {
                let last = pieces.last().expect("non-empty");
                if last.hi.is_finite() {
                    last.hi
                } else {
                    last.lo + 40.0 / last.rate
                }
            }
            Density::BlackBox(bb) => bb.hi,
        }
    }

    /// Push-forward under `t ↦ a·t`.
    pub(crate) fn scaled(&self, a: f64) -> Density {
        match self {
            Density::Piecewise(pieces) => Density::Piecewise(
                pieces
                    .iter()
                    .map(|p| {
                        // g(t) = f(t/a)/a
                        let (lo, hi) = (p.lo * a, p.hi * a);
                        let mut scale = 1.0 / a;
                        // Absorb the rounding of the new endpoints so that
                        // narrow pieces keep their mass.
                        if p.rate == 0.0 && hi.is_finite() {
                            scale *= (p.hi - p.lo) * a / (hi - lo);
                        }
                        let coeffs = p
                            .coeffs
                            .iter()
                            .map(|c| {
                                let v = c * scale;
                                scale /= a;
                                v
                            })
                            .collect();
                        Piece {
                            lo,
                            hi,
                            coeffs,
                            rate: p.rate / a,
                        }
                    })
                    .collect(),
            ),
            Density::BlackBox(bb) => {
                let f = bb.f.clone();
                Density::BlackBox(BlackBox {
                    f: Arc::new(move |t| f(t / a) / a),
                    lo: bb.lo * a,
                    hi: bb.hi * a,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_moments() {
        let d = Density::piecewise(vec![Piece::polynomial(0.0, 1.0, vec![1.0])]).unwrap();
        let m2 = d
            .integrate(Term::moment(2), Cut::closed(f64::INFINITY))
            .unwrap();
        assert!((m2 - 1.0 / 3.0).abs() < 1e-15);
        let half = d.integrate(Term::ONE, Cut::closed(0.5)).unwrap();
        assert!((half - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exponential_tail_moments() {
        let ln2 = std::f64::consts::LN_2;
        let p = Piece {
            lo: 1.0,
            hi: f64::INFINITY,
            coeffs: vec![ln2],
            rate: ln2,
        };
        let d = Density::piecewise(vec![p]).unwrap();
        // E[T] = 1 + 1/ln2
        let m1 = d
            .integrate(Term::moment(1), Cut::closed(f64::INFINITY))
            .unwrap();
        assert!((m1 - (1.0 + 1.0 / ln2)).abs() < 1e-12);
        let q = quadrature::integrate(|t| ln2 * (-ln2 * (t - 1.0)).exp() * t * t, 1.0, 3.0, &[], 1e-13)
            .unwrap();
        let m2 = d.integrate(Term::moment(2), Cut::closed(3.0)).unwrap();
        assert!((m2 - q.value).abs() < 1e-12);
    }

    #[test]
    fn truncated_term_matches_quadrature() {
        let d = Density::piecewise(vec![
            Piece::polynomial(0.0, 0.5, vec![0.0, 4.0]),
            Piece::polynomial(0.5, 1.0, vec![1.0]),
        ])
        .unwrap();
        let term = Term {
            power: 2,
            order: 3,
            scale: 1.3,
        };
        let exact = d.integrate(term, Cut::closed(0.7)).unwrap();
        let f = |t: f64| d.value(t) * term.eval(t);
        let q = quadrature::integrate(f, 0.0, 0.7, &[0.5], 1e-14).unwrap();
        assert!((exact - q.value).abs() < 1e-13);
    }

    #[test]
    fn scaling_preserves_mass() {
        let d = Density::piecewise(vec![Piece::polynomial(0.0, 1.0, vec![0.0, 2.0])]).unwrap();
        let s = d.scaled(0.3);
        let m = s.integrate(Term::ONE, Cut::closed(f64::INFINITY)).unwrap();
        assert!((m - 1.0).abs() < 1e-14);
        assert!((s.value(0.15) - d.value(0.5) / 0.3).abs() < 1e-12);
    }

    #[test]
    fn black_box_rejects_bad_mass() {
        let err = Density::black_box(|_| 2.0, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Invariant { invariant: "total mass", .. }));
    }
}
