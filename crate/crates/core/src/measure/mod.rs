//! Williamson measures: probability laws on `(0, ∞)` without an atom at 0.
//!
//! Every quantity the rest of the crate needs reduces to an integral
//! `∫_{(0,u]} t^m (1 − s·t)_+^n dγ(t)`; [`Term`] names the integrand and
//! [`Cut`] the upper end of the range.

mod density;
mod discrete;
mod singular;
pub mod spec;

pub use density::{BlackBox, Density, Piece};
pub use discrete::{Atom, DiscreteLaw};
pub use singular::{Block, DeRham, GeometricTail, SingularLaw};

use crate::error::{Error, Result};

/// Tolerance on total mass.
pub const MASS_TOL: f64 = 1e-12;
/// Tolerance on `∫_{[0,1]} (1−t)^{d−1} dγ = 1/2`.
pub const NORM_TOL: f64 = 1e-10;
/// Bisection tolerance for roots and inverses.
pub const ROOT_TOL: f64 = 1e-13;
/// Relative distance below which atom locations are merged.
pub const MERGE_TOL: f64 = 1e-14;
/// Largest supported dimension.
pub const MAX_DIM: usize = 64;

/// Integrand `t^power · (1 − scale·t)_+^order`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub power: usize,
    pub order: usize,
    pub scale: f64,
}

impl Term {
    pub const ONE: Term = Term {
        power: 0,
        order: 0,
        scale: 0.0,
    };

    pub fn moment(power: usize) -> Term {
        Term {
            power,
            order: 0,
            scale: 0.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let base = (1.0 - self.scale * t).max(0.0);
        t.powi(self.power as i32) * base.powi(self.order as i32)
    }

    /// Coefficients in `x` of the polynomial part at `t = lo + width·x`,
    /// ignoring the positive-part truncation.
    pub fn local_coeffs(&self, lo: f64, width: f64) -> Vec<f64> {
        let a = expand(lo, width, self.power);
        let b = expand(1.0 - self.scale * lo, -self.scale * width, self.order);
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    pub fn coeffs(&self) -> Vec<f64> {
        self.local_coeffs(0.0, 1.0)
    }

    /// Point past which the integrand vanishes.
    fn support_end(&self) -> f64 {
        if self.order > 0 && self.scale > 0.0 {
            1.0 / self.scale
        } else {
            f64::INFINITY
        }
    }
}

/// Ascending coefficients of `(u + v·x)^n`.
fn expand(u: f64, v: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut binom = 1.0;
    for k in 0..=n {
        out.push(binom * u.powi((n - k) as i32) * v.powi(k as i32));
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    out
}

/// Upper end of an integration range `(0, at]` or `(0, at)`.
///
/// `slack` widens (closed) or narrows (open) the end by a relative amount when
/// deciding whether an atom lies inside; continuous parts ignore it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cut {
    pub at: f64,
    pub closed: bool,
    pub slack: f64,
}

impl Cut {
    pub fn closed(at: f64) -> Cut {
        Cut {
            at,
            closed: true,
            slack: 0.0,
        }
    }

    pub fn open(at: f64) -> Cut {
        Cut {
            at,
            closed: false,
            slack: 0.0,
        }
    }

    pub fn with_slack(self, slack: f64) -> Cut {
        Cut { slack, ..self }
    }

    pub(crate) fn admits_atom(&self, t: f64) -> bool {
        if self.at.is_infinite() {
            return true;
        }
        if self.closed {
            t <= self.at + self.slack * self.at
        } else {
            t < self.at - self.slack * self.at
        }
    }
}

/// Lebesgue type of a law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularity {
    Discrete,
    AbsolutelyContinuous,
    SingularContinuous,
    Mixed,
}

/// A probability law on `(0, ∞)` in one of four representations.
#[derive(Debug, Clone)]
pub enum Law {
    Discrete(DiscreteLaw),
    AbsolutelyContinuous(Density),
    SingularContinuous(SingularLaw),
    Mixture(Vec<(f64, Law)>),
}

impl Law {
    pub fn discrete(atoms: Vec<Atom>) -> Result<Law> {
        Ok(Law::Discrete(DiscreteLaw::new(atoms, 0.0)?))
    }

    pub fn mixture(components: Vec<(f64, Law)>) -> Result<Law> {
        if components.is_empty() {
            return Err(Error::invariant("total mass", "empty mixture"));
        }
        if components.iter().any(|(w, _)| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invariant(
                "positive weights",
                "mixture weights must be positive",
            ));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::invariant(
                "total mass",
                format!("mixture weights sum to {total}"),
            ));
        }
        Ok(Law::Mixture(components))
    }

    /// `∫_{(0, cut]} term dγ`.
    pub fn integrate(&self, term: Term, cut: Cut) -> Result<f64> {
        let end = term.support_end();
        let cut = if end < cut.at {
            Cut { at: end, ..cut }
        } else {
            cut
        };
        match self {
            Law::Discrete(law) => Ok(law.integrate(term, cut)),
            Law::AbsolutelyContinuous(density) => density.integrate(term, cut),
            Law::SingularContinuous(law) => law.integrate(term, cut),
            Law::Mixture(parts) => parts
                .iter()
                .map(|(w, law)| Ok(w * law.integrate(term, cut)?))
                .sum(),
        }
    }

    pub fn cdf(&self, z: f64) -> Result<f64> {
        if z <= 0.0 {
            return Ok(0.0);
        }
        match self {
            Law::SingularContinuous(law) => Ok(law.cdf(z)),
            _ => self.integrate(Term::ONE, Cut::closed(z)),
        }
    }

    /// Mass of atoms within relative distance `slack` of `at`.
    pub fn atom_mass(&self, at: f64, slack: f64) -> f64 {
        match self {
            Law::Discrete(law) => law.atom_mass(at, slack),
            Law::Mixture(parts) => parts.iter().map(|(w, l)| w * l.atom_mass(at, slack)).sum(),
            _ => 0.0,
        }
    }

    /// All atoms with their (mixture-weighted) masses, sorted by location.
    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        self.collect_atoms(1.0, &mut out);
        out.sort_by(|a, b| a.t.total_cmp(&b.t));
        out
    }

    fn collect_atoms(&self, weight: f64, out: &mut Vec<Atom>) {
        match self {
            Law::Discrete(law) => out.extend(
                law.atoms()
                    .iter()
                    .map(|a| Atom::new(a.t, a.w * weight)),
            ),
            Law::Mixture(parts) => {
                for (w, l) in parts {
                    l.collect_atoms(weight * w, out);
                }
            }
            _ => {}
        }
    }

    /// Upper bound on mass not represented explicitly (lazy atom lists).
    pub fn tail_mass(&self) -> f64 {
        match self {
            Law::Discrete(law) => law.tail_mass(),
            Law::Mixture(parts) => parts.iter().map(|(w, l)| w * l.tail_mass()).sum(),
            _ => 0.0,
        }
    }

    pub fn regularity(&self) -> Regularity {
        match self {
            Law::Discrete(_) => Regularity::Discrete,
            Law::AbsolutelyContinuous(_) => Regularity::AbsolutelyContinuous,
            Law::SingularContinuous(_) => Regularity::SingularContinuous,
            Law::Mixture(parts) => {
                let first = parts[0].1.regularity();
                if parts.iter().all(|(_, l)| l.regularity() == first) {
                    first
                } else {
                    Regularity::Mixed
                }
            }
        }
    }

    /// `inf supp γ`.
    pub fn support_inf(&self) -> f64 {
        match self {
            Law::Discrete(law) => law.atoms()[0].t,
            Law::AbsolutelyContinuous(density) => density.support_inf(),
            Law::SingularContinuous(law) => law.support_inf(),
            Law::Mixture(parts) => parts
                .iter()
                .map(|(_, l)| l.support_inf())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Lebesgue density at `t` for absolutely continuous laws.
    pub fn density(&self, t: f64) -> Option<f64> {
        match self {
            Law::AbsolutelyContinuous(density) => Some(density.value(t)),
            Law::Mixture(parts) => parts
                .iter()
                .map(|(w, l)| l.density(t).map(|v| w * v))
                .sum(),
            _ => None,
        }
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!("quantile level {u} outside (0,1)")));
        }
        match self {
            Law::Discrete(law) => Ok(law.quantile(u)),
            Law::SingularContinuous(law) => Ok(law.quantile(u)),
            _ => self.quantile_by_bisection(u),
        }
    }

    fn upper_hint(&self) -> f64 {
        match self {
            Law::Discrete(law) => law.atoms().last().map_or(1.0, |a| a.t),
            Law::AbsolutelyContinuous(density) => density.upper_hint(),
            Law::SingularContinuous(law) => law.quantile(0.5),
            Law::Mixture(parts) => parts
                .iter()
                .map(|(_, l)| l.upper_hint())
                .fold(0.0, f64::max),
        }
    }

    fn quantile_by_bisection(&self, u: f64) -> Result<f64> {
        let mut lo = 0.0;
        let mut hi = self.upper_hint().max(f64::MIN_POSITIVE);
        while self.cdf(hi)? < u {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Bracket(format!("quantile {u} not bracketed")));
            }
        }
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
                return Ok(hi);
            }
            if self.cdf(mid)? >= u {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    /// Push-forward under `t ↦ a·t`.
    pub fn scaled(&self, a: f64) -> Law {
        match self {
            Law::Discrete(law) => Law::Discrete(law.scaled(a)),
            Law::AbsolutelyContinuous(density) => Law::AbsolutelyContinuous(density.scaled(a)),
            Law::SingularContinuous(law) => Law::SingularContinuous(law.scaled(a)),
            Law::Mixture(parts) => {
                Law::Mixture(parts.iter().map(|(w, l)| (*w, l.scaled(a))).collect())
            }
        }
    }
}

/// A law together with the dimension `d` whose normalization it satisfies.
#[derive(Debug, Clone)]
pub struct WilliamsonMeasure {
    law: Law,
    d: usize,
}

impl WilliamsonMeasure {
    pub fn new(law: Law, d: usize) -> Result<Self> {
        check_dim(d)?;
        let norm = normalization(&law, d)?;
        let slack = NORM_TOL + law.tail_mass();
        if (norm - 0.5).abs() > slack {
            return Err(Error::invariant(
                "normalization",
                format!("integral of (1-t)^{} over [0,1] is {norm}, expected 1/2", d - 1),
            ));
        }
        Ok(WilliamsonMeasure { law, d })
    }

    pub fn law(&self) -> &Law {
        &self.law
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `γ([0, z])`.
    pub fn cdf(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(Error::domain(format!("cdf argument {z} must be >= 0")));
        }
        self.law.cdf(z)
    }

    /// `∫_{(0, 1/z]} t^p dγ(t)`.
    pub fn moment_trunc(&self, p: usize, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::domain(format!("moment_trunc needs z > 0, got {z}")));
        }
        self.law.integrate(Term::moment(p), Cut::closed(1.0 / z))
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        self.law.quantile(u)
    }

    /// `∫_{[0,1]} (1−t)^{d−1} dγ`.
    pub fn normalization(&self) -> Result<f64> {
        normalization(&self.law, self.d)
    }
}

fn check_dim(d: usize) -> Result<()> {
    if !(2..=MAX_DIM).contains(&d) {
        return Err(Error::Spec(format!("dimension {d} outside 2..={MAX_DIM}")));
    }
    Ok(())
}

fn normalization(law: &Law, d: usize) -> Result<f64> {
    law.integrate(
        Term {
            power: 0,
            order: d - 1,
            scale: 1.0,
        },
        Cut::closed(1.0),
    )
}

/// `∫ (1 − a·t)_+^{d−1} dβ(t)`.
fn psi_of(beta: &Law, d: usize, a: f64) -> Result<f64> {
    beta.integrate(
        Term {
            power: 0,
            order: d - 1,
            scale: a,
        },
        Cut::closed(f64::INFINITY),
    )
}

/// Scales `β` by the unique `a` with `∫ (1 − a·t)_+^{d−1} dβ = 1/2`, so that
/// the push-forward under `t ↦ a·t` is normalized.
pub fn rescale(beta: &Law, d: usize) -> Result<(f64, WilliamsonMeasure)> {
    check_dim(d)?;
    if (psi_of(beta, d, 1.0)? - 0.5).abs() <= 1e-15 {
        return Ok((1.0, WilliamsonMeasure::new(beta.clone(), d)?));
    }
    let mass = 1.0 - beta.tail_mass();
    if mass <= 0.5 {
        return Err(Error::Bracket(format!(
            "represented mass {mass} cannot reach 1/2"
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while psi_of(beta, d, hi)? >= 0.5 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Bracket("no root of psi = 1/2 below 1e300".into()));
        }
    }
    for _ in 0..4000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= ROOT_TOL * hi {
            break;
        }
        if psi_of(beta, d, mid)? >= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    Ok((a, WilliamsonMeasure::new(beta.scaled(a), d)?))
}
