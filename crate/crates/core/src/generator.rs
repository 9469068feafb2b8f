//! The generator `ψ = 𝒲_d γ`, its pseudo-inverse and derivatives.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::measure::{Cut, Law, Term, WilliamsonMeasure, ROOT_TOL};

/// Relative slack used when a cut `1/z` is meant to hit an atom exactly.
pub const SNAP: f64 = 1e-12;

/// Non-negative extended real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(x) => Some(x),
            Extended::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }

    /// Value as `f64`, mapping infinity to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(x) => write!(f, "{x}"),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(x) => s.serialize_f64(*x),
            Extended::Infinite => s.serialize_str("inf"),
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn sign(m: usize) -> f64 {
    if m.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone)]
pub struct Generator {
    gamma: WilliamsonMeasure,
    d: usize,
    phi_zero: Extended,
    single_atom: Option<f64>,
    kinks: Vec<f64>,
}

impl Generator {
    pub fn new(gamma: WilliamsonMeasure) -> Self {
        let d = gamma.dim();
        let inf = gamma.law().support_inf();
        let phi_zero = if inf > 0.0 {
            Extended::Finite(1.0 / inf)
        } else {
            Extended::Infinite
        };
        let atoms = gamma.law().atoms();
        let single_atom = match (gamma.law(), atoms.as_slice()) {
            (Law::Discrete(_), [a]) if gamma.law().tail_mass() == 0.0 => Some(a.t),
            _ => None,
        };
        let mut kinks: Vec<f64> = atoms.iter().map(|a| 1.0 / a.t).collect();
        kinks.sort_by(f64::total_cmp);
        Generator {
            gamma,
            d,
            phi_zero,
            single_atom,
            kinks,
        }
    }

    pub fn gamma(&self) -> &WilliamsonMeasure {
        &self.gamma
    }

    pub fn law(&self) -> &Law {
        self.gamma.law()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `φ(0) = 1 / inf supp γ`.
    pub fn phi_zero(&self) -> Extended {
        self.phi_zero
    }

    pub fn strict(&self) -> bool {
        self.phi_zero.is_infinite()
    }

    /// Points where `D⁻ψ^{(d−2)}` jumps, i.e. reciprocals of atoms, ascending.
    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    /// `∫_{(0, cut]} t^power (1 − z·t)_+^order dγ`.
    pub(crate) fn integral(&self, power: usize, order: usize, z: f64, cut: Cut) -> Result<f64> {
        self.law().integrate(
            Term {
                power,
                order,
                scale: z,
            },
            cut,
        )
    }

    pub fn psi(&self, z: f64) -> Result<f64> {
        if z <= 0.0 {
            return Ok(1.0);
        }
        if z.is_infinite() {
            return Ok(0.0);
        }
        if let Some(a) = self.single_atom {
            return Ok((1.0 - a * z).max(0.0).powi(self.d as i32 - 1));
        }
        self.integral(0, self.d - 1, z, Cut::closed(f64::INFINITY))
    }

    /// `ψ^{(m)}(z)` for `0 ≤ m ≤ d−2`.
    pub fn derivative(&self, m: usize, z: f64) -> Result<f64> {
        if m > self.d - 2 {
            return Err(Error::domain(format!(
                "derivative order {m} exceeds d-2 = {}",
                self.d - 2
            )));
        }
        if m == 0 {
            return self.psi(z);
        }
        if !(z > 0.0) {
            return Err(Error::domain(format!("derivative needs z > 0, got {z}")));
        }
        let n = self.d - 1;
        let c = sign(m) * factorial(n) / factorial(n - m);
        Ok(c * self.integral(m, n - m, z, Cut::closed(f64::INFINITY))?)
    }

    fn top(&self, cut: Cut) -> Result<f64> {
        let n = self.d - 1;
        Ok(sign(n) * factorial(n) * self.integral(n, 0, 0.0, cut)?)
    }

    /// `D⁻ψ^{(d−2)}(z)`, left-continuous in `z`.
    pub fn left_derivative_top(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::domain(format!("derivative needs z > 0, got {z}")));
        }
        self.top(Cut::closed(1.0 / z))
    }

    /// `D⁺ψ^{(d−2)}(z)`, right-continuous in `z`.
    pub fn right_derivative_top(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::domain(format!("derivative needs z > 0, got {z}")));
        }
        self.top(Cut::open(1.0 / z))
    }

    /// `D⁻ψ^{(d−2)}` with atoms within relative [`SNAP`] of `1/z` counted in.
    pub(crate) fn left_derivative_top_snapped(&self, z: f64) -> Result<f64> {
        self.top(Cut::closed(1.0 / z).with_slack(SNAP))
    }

    /// `D⁺ψ^{(d−2)}` with atoms within relative [`SNAP`] of `1/z` left out.
    pub(crate) fn right_derivative_top_snapped(&self, z: f64) -> Result<f64> {
        self.top(Cut::open(1.0 / z).with_slack(SNAP))
    }

    /// Pseudo-inverse `φ(y) = inf{z : ψ(z) = y}`.
    pub fn phi(&self, y: f64) -> Result<Extended> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::domain(format!("phi argument {y} outside [0,1]")));
        }
        if y == 1.0 {
            return Ok(Extended::Finite(0.0));
        }
        if y == 0.0 {
            return Ok(self.phi_zero);
        }
        if let Some(a) = self.single_atom {
            let r = y.powf(1.0 / (self.d - 1) as f64);
            return Ok(Extended::Finite((1.0 - r) / a));
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        match self.phi_zero {
            Extended::Finite(z0) if z0 <= 1.0 => hi = z0,
            _ => {
                while self.psi(hi)? > y {
                    lo = hi;
                    hi *= 2.0;
                    if hi > 1e300 {
                        return Err(Error::Bracket(format!("phi({y}) not bracketed")));
                    }
                }
            }
        }
        if let Extended::Finite(z0) = self.phi_zero {
            hi = hi.min(z0);
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.psi(mid)? > y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        debug_assert!(hi - lo <= ROOT_TOL * hi.max(1.0));
        Ok(Extended::Finite(0.5 * (lo + hi)))
    }

    /// Finite `φ(y)`; errors at `y = 0` for strict generators.
    pub(crate) fn phi_finite(&self, y: f64) -> Result<f64> {
        self.phi(y)?
            .finite()
            .ok_or_else(|| Error::domain("phi(0) is infinite for a strict generator"))
    }

    /// `γ([0, z])` recovered from `ψ` and its derivatives at `1/z`.
    pub fn inverse_williamson(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::domain(format!("inverse transform needs z > 0, got {z}")));
        }
        let d = self.d;
        let w = 1.0 / z;
        let mut acc = 0.0;
        for k in 0..=d - 2 {
            acc += sign(k) * self.derivative(k, w)? / (factorial(k) * z.powi(k as i32));
        }
        acc += sign(d - 1) * self.left_derivative_top(w)?
            / (factorial(d - 1) * z.powi(d as i32 - 1));
        Ok(acc)
    }
}
