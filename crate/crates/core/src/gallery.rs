//! Named Williamson measures: worked examples and pathological constructions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{
    rescale, Atom, Block, Density, DiscreteLaw, GeometricTail, Law, Piece, SingularLaw,
    WilliamsonMeasure,
};

/// Default truncation depth of the dense-atom measure (tail mass `2^{-40}`).
pub const DEFAULT_DEPTH: usize = 40;
/// Default de Rham parameter for the singular full-support measure.
pub const DEFAULT_P: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct GalleryEntry {
    pub name: String,
    pub gamma: WilliamsonMeasure,
    pub d: usize,
    /// Scale applied to the raw construction to reach `ψ(1) = 1/2`.
    pub scale: f64,
    pub notes: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntrySummary {
    pub name: String,
    pub d: usize,
    pub scale: f64,
    pub regularity: crate::measure::Regularity,
    pub notes: String,
}

impl GalleryEntry {
    fn build(name: &str, beta: Law, d: usize, notes: &str) -> Result<Self> {
        let (scale, gamma) = rescale(&beta, d)?;
        Ok(GalleryEntry {
            name: name.to_string(),
            gamma,
            d,
            scale,
            notes: notes.to_string(),
        })
    }

    pub fn summary(&self) -> EntrySummary {
        EntrySummary {
            name: self.name.clone(),
            d: self.d,
            scale: self.scale,
            regularity: self.gamma.law().regularity(),
            notes: self.notes.clone(),
        }
    }
}

/// `γ = (7/8)δ_{1/4} + (1/8)δ_{3/4}`; normalized for `d = 3`, rescaled otherwise.
pub fn example_5_7(d: usize) -> Result<GalleryEntry> {
    let beta = Law::discrete(vec![Atom::new(0.25, 0.875), Atom::new(0.75, 0.125)])?;
    GalleryEntry::build(
        "example_5_7",
        beta,
        d,
        "two atoms (7/8 at 1/4, 1/8 at 3/4); non-strict with phi(0) = 4 when d = 3",
    )
}

/// Knots `(zⱼ, vⱼ)` of a piecewise-linear profile for `−ψ̃′`, starting at
/// `z = 0` and ending at the support end where the value is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub knots: Vec<(f64, f64)>,
}

impl Default for Profile {
    fn default() -> Self {
        Profile {
            knots: vec![(0.0, 3.0), (1.0, 1.0), (5.0, 0.0)],
        }
    }
}

impl Profile {
    /// Williamson measure of `ψ̃/ψ̃(0)` for `d = 3`: an atom at `1/zⱼ` for each
    /// knot where the slope of `−ψ̃′` increases, weighted `zⱼ²·Δslopeⱼ/(2ψ̃(0))`.
    pub fn atoms(&self) -> Result<Vec<Atom>> {
        let k = &self.knots;
        if k.len() < 2 || k[0].0 != 0.0 {
            return Err(Error::invariant(
                "profile shape",
                "profile needs at least two knots starting at z = 0",
            ));
        }
        if k.last().unwrap().1 != 0.0 {
            return Err(Error::invariant(
                "profile shape",
                "profile must end with value 0 (compact support)",
            ));
        }
        let mut slopes = Vec::with_capacity(k.len());
        let mut area = 0.0;
        for w in k.windows(2) {
            let ((z0, v0), (z1, v1)) = (w[0], w[1]);
            if !(z1 > z0) {
                return Err(Error::invariant("profile shape", "knots must increase"));
            }
            if !(v1 < v0) {
                return Err(Error::invariant(
                    "decreasing profile",
                    format!("profile does not decrease on [{z0}, {z1}]"),
                ));
            }
            slopes.push((v1 - v0) / (z1 - z0));
            area += 0.5 * (v0 + v1) * (z1 - z0);
        }
        slopes.push(0.0);
        let mut atoms = Vec::new();
        for j in 1..k.len() {
            let jump = slopes[j] - slopes[j - 1];
            if jump < 0.0 {
                return Err(Error::invariant(
                    "convex profile",
                    format!("slope decreases at z = {}", k[j].0),
                ));
            }
            if jump > 0.0 {
                let z = k[j].0;
                atoms.push(Atom::new(1.0 / z, z * z * jump / (2.0 * area)));
            }
        }
        Ok(atoms)
    }
}

/// Generator built by integrating a convex piecewise-linear `−ψ̃′` twice.
pub fn example_3_3(profile: &Profile, d: usize) -> Result<GalleryEntry> {
    let beta = Law::discrete(profile.atoms()?)?;
    GalleryEntry::build(
        "example_3_3",
        beta,
        d,
        "generator from a piecewise-linear convex profile of -psi'; each kink carries level-set mass",
    )
}

/// `δ_a` with `a = 1 − 2^{−1/(d−1)}`.
pub fn single_atom(d: usize) -> Result<GalleryEntry> {
    GalleryEntry::build(
        "single_atom",
        Law::discrete(vec![Atom::new(1.0, 1.0)])?,
        d,
        "point mass; psi(z) = (1 - a z)_+^(d-1)",
    )
}

/// Rescaled uniform law on `(0, 1)`.
pub fn uniform(d: usize) -> Result<GalleryEntry> {
    let beta = Law::AbsolutelyContinuous(Density::piecewise(vec![Piece::polynomial(
        0.0,
        1.0,
        vec![1.0],
    )])?);
    GalleryEntry::build(
        "uniform",
        beta,
        d,
        "absolutely continuous; strict since the support reaches 0",
    )
}

/// Half an atom, half a uniform density.
pub fn mixture(d: usize) -> Result<GalleryEntry> {
    let beta = Law::mixture(vec![
        (0.5, Law::discrete(vec![Atom::new(1.5, 1.0)])?),
        (
            0.5,
            Law::AbsolutelyContinuous(Density::piecewise(vec![Piece::polynomial(
                0.0,
                2.0,
                vec![0.5],
            )])?),
        ),
    ])?;
    GalleryEntry::build(
        "mixture",
        beta,
        d,
        "mixture of an atom and a uniform density",
    )
}

/// Singular continuous law with full support `[0, ∞)`:
/// `F = ½h(x/2)` on `[0,2)` and `F = 1 − 2^{−i} + 2^{−(i+1)}h((x−2^i)/2^i)` on
/// `[2^i, 2^{i+1})`, with `h` the de Rham function of parameter `p`.
pub fn singular_full_support(d: usize, p: f64) -> Result<GalleryEntry> {
    if p == 0.5 {
        return Err(Error::Spec(
            "p = 1/2 makes h the identity, which is absolutely continuous".into(),
        ));
    }
    let law = SingularLaw::new(
        p,
        vec![Block {
            lo: 0.0,
            hi: 2.0,
            c: 0.0,
            d: 0.5,
        }],
        Some(GeometricTail {
            lo: 2.0,
            width: 2.0,
            c: 0.5,
        }),
    )?;
    GalleryEntry::build(
        "singular_full_support",
        Law::SingularContinuous(law),
        d,
        "singular continuous with full support; strict copula without level-set mass",
    )
}

/// Positive rationals in Stern–Brocot breadth-first order.
pub fn stern_brocot(count: usize) -> Vec<(u64, u64)> {
    let mut out = Vec::with_capacity(count);
    let mut row: Vec<(u64, u64)> = vec![(0, 1), (1, 0)];
    while out.len() < count {
        let mut next = Vec::with_capacity(2 * row.len());
        for w in row.windows(2) {
            let (a, b) = (w[0], w[1]);
            let m = (a.0 + b.0, a.1 + b.1);
            next.push(a);
            next.push(m);
            out.push(m);
            if out.len() == count {
                return out;
            }
        }
        next.push(*row.last().unwrap());
        row = next;
    }
    out
}

/// `β = Σ_{i ≤ depth} 2^{−i} δ_{qᵢ}` over the first rationals `qᵢ`, with the
/// remaining mass `2^{−depth}` declared as tail.
pub fn dense_atoms(d: usize, depth: usize) -> Result<GalleryEntry> {
    if !(8..=60).contains(&depth) {
        return Err(Error::Spec(format!("depth {depth} outside 8..=60")));
    }
    let atoms = stern_brocot(depth)
        .into_iter()
        .enumerate()
        .map(|(i, (p, q))| Atom::new(p as f64 / q as f64, 0.5f64.powi(i as i32 + 1)))
        .collect();
    let law = DiscreteLaw::new(atoms, 0.5f64.powi(depth as i32))?;
    GalleryEntry::build(
        "dense_atoms",
        Law::Discrete(law),
        d,
        "atoms at the positive rationals; truncated, with the tail mass bound declared",
    )
}

pub const NAMES: [&str; 7] = [
    "example_5_7",
    "example_3_3",
    "single_atom",
    "uniform",
    "mixture",
    "singular_full_support",
    "dense_atoms",
];

/// Looks up an entry by name with default parameters.
pub fn by_name(name: &str, d: usize) -> Result<GalleryEntry> {
    match name {
        "example_5_7" => example_5_7(d),
        "example_3_3" => example_3_3(&Profile::default(), d),
        "single_atom" => single_atom(d),
        "uniform" => uniform(d),
        "mixture" => mixture(d),
        "singular_full_support" => singular_full_support(d, DEFAULT_P),
        "dense_atoms" => dense_atoms(d, DEFAULT_DEPTH),
        _ => Err(Error::Spec(format!(
            "unknown gallery entry \"{name}\"; known: {}",
            NAMES.join(", ")
        ))),
    }
}

/// Every entry at dimension `d`.
pub fn catalog(d: usize) -> Result<Vec<GalleryEntry>> {
    NAMES.iter().map(|n| by_name(n, d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{ArchimedeanCopula, Method};
    use crate::generator::Generator;

    #[test]
    fn example_5_7_is_exact_in_three_dimensions() {
        let e = example_5_7(3).unwrap();
        assert_eq!(e.scale, 1.0);
        let g = Generator::new(e.gamma);
        for &z in &[0.1, 0.7, 1.2] {
            assert!((g.psi(z).unwrap() - (1.0 - 5.0 * z / 8.0 + z * z / 8.0)).abs() < 1e-15);
        }
        assert!((g.psi(2.0).unwrap() - 0.875 * 0.25).abs() < 1e-15);
        assert_eq!(g.psi(5.0).unwrap(), 0.0);
    }

    #[test]
    fn default_profile_atoms() {
        let atoms = Profile::default().atoms().unwrap();
        assert_eq!(atoms.len(), 2);
        assert!((atoms[0].t - 1.0).abs() < 1e-15 && (atoms[0].w - 7.0 / 32.0).abs() < 1e-15);
        assert!((atoms[1].t - 0.2).abs() < 1e-15 && (atoms[1].w - 25.0 / 32.0).abs() < 1e-15);
        let e = example_3_3(&Profile::default(), 3).unwrap();
        assert_eq!(e.scale, 1.0);
    }

    #[test]
    fn profile_kink_carries_taylor_gap() {
        let e = example_3_3(&Profile::default(), 3).unwrap();
        let c = ArchimedeanCopula::from_measure(e.gamma);
        let t = c.generator().psi(1.0).unwrap();
        let mass = c.level_mass(t, Method::GammaForm).unwrap();
        let (left, right) = c.taylor_intercepts(t).unwrap();
        assert!((mass - 7.0 / 32.0).abs() < 1e-12);
        assert!((left - right - mass).abs() < 1e-12);
    }

    #[test]
    fn kink_free_profile_has_no_positive_levels() {
        let p = Profile {
            knots: vec![(0.0, 1.0), (2.0, 0.0)],
        };
        let e = example_3_3(&p, 3).unwrap();
        let c = ArchimedeanCopula::from_measure(e.gamma);
        for k in 1..20 {
            let t = k as f64 / 20.0;
            assert_eq!(c.level_mass(t, Method::GammaForm).unwrap(), 0.0);
        }
    }

    #[test]
    fn profile_validation() {
        let concave = Profile {
            knots: vec![(0.0, 3.0), (1.0, 2.5), (2.0, 0.0)],
        };
        assert!(matches!(
            concave.atoms(),
            Err(Error::Invariant { invariant: "convex profile", .. })
        ));
        let rising = Profile {
            knots: vec![(0.0, 1.0), (1.0, 2.0), (2.0, 0.0)],
        };
        assert!(rising.atoms().is_err());
    }

    #[test]
    fn stern_brocot_order() {
        assert_eq!(
            stern_brocot(7),
            vec![(1, 1), (1, 2), (2, 1), (1, 3), (2, 3), (3, 2), (3, 1)]
        );
        let mut v = stern_brocot(200);
        v.sort();
        v.dedup();
        assert_eq!(v.len(), 200);
    }

    #[test]
    fn single_atom_location() {
        let e = single_atom(3).unwrap();
        let a = e.gamma.law().atoms()[0].t;
        assert!((a - (1.0 - 0.5f64.sqrt())).abs() < 1e-13);
    }

    #[test]
    fn singular_rejects_half() {
        assert!(singular_full_support(3, 0.5).is_err());
    }

    #[test]
    fn catalog_is_normalized() {
        for d in 2..=5 {
            for e in catalog(d).unwrap() {
                let g = Generator::new(e.gamma.clone());
                assert!((g.psi(1.0).unwrap() - 0.5).abs() < 1e-10, "{} d={d}", e.name);
            }
        }
    }
}
