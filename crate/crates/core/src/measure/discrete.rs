use serde::{Deserialize, Serialize};

use super::{Cut, Term, MASS_TOL, MERGE_TOL};
use crate::error::{Error, Result};

/// A point mass `w·δ_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: f64,
    pub w: f64,
}

impl Atom {
    pub fn new(t: f64, w: f64) -> Self {
        Atom { t, w }
    }
}

/// Finite list of atoms, optionally standing in for a longer (lazily
/// enumerated) list whose unenumerated remainder carries at most `tail` mass.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    atoms: Vec<Atom>,
    cumulative: Vec<f64>,
    tail: f64,
}

impl DiscreteLaw {
    /// Canonicalizes the atom list: sorts by location and merges locations
    /// that agree to within a relative 1e-14 by summing their weights.
    pub fn new(atoms: Vec<Atom>, tail: f64) -> Result<Self> {
        if !(tail.is_finite() && (0.0..0.5).contains(&tail)) {
            return Err(Error::invariant(
                "tail mass bound",
                format!("tail bound {tail} must lie in [0, 1/2)"),
            ));
        }
        for a in &atoms {
            if !(a.t.is_finite() && a.t > 0.0) {
                return Err(Error::invariant(
                    "no atom at 0",
                    format!("atom location {} must be a positive finite number", a.t),
                ));
            }
            if !(a.w.is_finite() && a.w > 0.0 && a.w <= 1.0 + MASS_TOL) {
                return Err(Error::invariant(
                    "positive weights",
                    format!("atom weight {} at {} must lie in (0, 1]", a.w, a.t),
                ));
            }
        }
        if atoms.is_empty() {
            return Err(Error::invariant("total mass", "discrete law without atoms"));
        }
        let mut sorted = atoms;
        sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut merged: Vec<Atom> = Vec::with_capacity(sorted.len());
        for a in sorted {
            match merged.last_mut() {
                Some(last) if a.t - last.t <= MERGE_TOL * a.t => last.w += a.w,
                _ => merged.push(a),
            }
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = merged
            .iter()
            .map(|a| {
                acc += a.w;
                acc
            })
            .collect();
        let total = acc;
        // With a lazy tail the enumerated atoms form a sub-probability.
        if total > 1.0 + MASS_TOL || total + tail < 1.0 - MASS_TOL {
            return Err(Error::invariant(
                "total mass",
                format!("atom weights sum to {total} with tail bound {tail}; expected 1"),
            ));
        }
        Ok(DiscreteLaw {
            atoms: merged,
            cumulative,
            tail,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Upper bound on the mass not represented by the enumerated atoms.
    pub fn tail_mass(&self) -> f64 {
        self.tail
    }

    pub fn enumerated_mass(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    pub(crate) fn integrate(&self, term: Term, cut: Cut) -> f64 {
        self.atoms
            .iter()
            .take_while(|a| cut.admits_atom(a.t))
            .map(|a| a.w * term.eval(a.t))
            .sum()
    }

    pub(crate) fn atom_mass(&self, at: f64, slack: f64) -> f64 {
        let tol = slack * at.abs();
        let start = self.atoms.partition_point(|a| a.t < at - tol);
        self.atoms[start..]
            .iter()
            .take_while(|a| a.t <= at + tol)
            .map(|a| a.w)
            .sum()
    }

    /// Generalized inverse of the (renormalized) enumerated distribution.
    pub(crate) fn quantile(&self, u: f64) -> f64 {
        let target = u * self.enumerated_mass();
        let idx = self.cumulative.partition_point(|&c| c < target);
        self.atoms[idx.min(self.atoms.len() - 1)].t
    }

    pub(crate) fn scaled(&self, a: f64) -> Self {
        DiscreteLaw {
            atoms: self
                .atoms
                .iter()
                .map(|x| Atom::new(x.t * a, x.w))
                .collect(),
            cumulative: self.cumulative.clone(),
            tail: self.tail,
        }
    }
}
