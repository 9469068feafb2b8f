//! Approximation of a Williamson measure by discrete, absolutely continuous or
//! singular ones that agree with its distribution function on a growing set of
//! anchor points, and numerical diagnostics of the resulting convergence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::copula::{ArchimedeanCopula, Branch, Method};
use crate::error::{Error, Result};
use crate::generator::{Extended, Generator};
use crate::measure::{
    rescale, Atom, Block, Density, DiscreteLaw, GeometricTail, Law, Piece, SingularLaw,
    WilliamsonMeasure,
};

/// Largest supported stage.
pub const MAX_STAGE: usize = 4096;
/// de Rham parameter of the singular block profile.
pub const SINGULAR_PROFILE_P: f64 = 0.25;
/// Number of steps of the discrete geometric tail.
const TAIL_STEPS: i32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Discrete,
    AbsolutelyContinuous,
    Singular,
}

impl Flavor {
    pub const ALL: [Flavor; 3] = [
        Flavor::Discrete,
        Flavor::AbsolutelyContinuous,
        Flavor::Singular,
    ];
}

#[derive(Debug, Clone)]
pub struct Approximation {
    pub gamma: WilliamsonMeasure,
    /// Rescaling constant `aₙ`.
    pub scale: f64,
    /// Anchors `q₀ = 0, q₁, …, qₙ` in order of generation.
    pub anchors: Vec<f64>,
}

fn is_atom(law: &Law, q: f64) -> bool {
    law.atom_mass(q, 1e-12) > 0.0
}

/// Anchors `q₀ = 0, q₁ = Q, …` in order of generation: dyadic points of
/// `(0, Q]` avoiding atoms of `γ`, where `Q` is a power of two with
/// `F(Q) > 1 − 10⁻⁶`. Each new anchor splits the block with the largest
/// `γ`-mass times square-root width, so mass far out in a heavy tail does not
/// starve the bulk.
pub fn anchor_points(gamma: &WilliamsonMeasure, n: usize) -> Result<Vec<f64>> {
    let law = gamma.law();
    let hi = law.quantile(1.0 - 1e-6)?;
    let mut top = 2f64.powi(hi.log2().ceil() as i32);
    while is_atom(law, top) || law.cdf(top)? <= 1.0 - 1e-6 {
        top *= 2.0;
    }
    let mut anchors = vec![0.0, top];
    // (lo, hi, F(lo), F(hi))
    let mut blocks = vec![(0.0, top, 0.0, law.cdf(top)?)];
    while anchors.len() < n + 1 {
        let weight = |b: &(f64, f64, f64, f64)| (b.3 - b.2) * (b.1 - b.0).sqrt();
        let (i, _) = blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.3 > b.2)
            .max_by(|(_, a), (_, b)| weight(a).total_cmp(&weight(b)))
            .ok_or_else(|| Error::domain("no block left to refine"))?;
        let (lo, width) = (blocks[i].0, blocks[i].1 - blocks[i].0);
        let q = split_point(law, lo, width)?;
        let fq = law.cdf(q)?;
        let (l, h, fl, fh) = blocks[i];
        blocks[i] = (l, q, fl, fq);
        blocks.insert(i + 1, (q, h, fq, fh));
        anchors.push(q);
    }
    Ok(anchors)
}

/// First non-atom among `lo + width·k/2^j`, odd `k`, by increasing `j`.
fn split_point(law: &Law, lo: f64, width: f64) -> Result<f64> {
    for level in 1..=30 {
        let denom = 2f64.powi(level);
        let mut k = 1.0;
        while k < denom {
            let q = lo + width * k / denom;
            if q > lo && !is_atom(law, q) {
                return Ok(q);
            }
            k += 2.0;
        }
    }
    Err(Error::domain("could not place an anchor off the atoms"))
}

/// Stage-`n` approximation of the given flavor.
pub fn approximate(gamma: &WilliamsonMeasure, flavor: Flavor, n: usize) -> Result<Approximation> {
    if !(1..=MAX_STAGE).contains(&n) {
        return Err(Error::domain(format!("stage {n} outside 1..={MAX_STAGE}")));
    }
    let anchors = anchor_points(gamma, n)?;
    let mut sorted = anchors.clone();
    sorted.sort_by(f64::total_cmp);
    let law = gamma.law();
    let values = sorted
        .iter()
        .map(|&q| law.cdf(q))
        .collect::<Result<Vec<f64>>>()?;
    let last = *sorted.last().unwrap();
    let rest = 1.0 - values.last().unwrap();
    let blocks = sorted
        .windows(2)
        .zip(values.windows(2))
        .map(|(q, f)| (q[0], q[1], f[0], f[1]));
    let beta = match flavor {
        Flavor::Discrete => {
            let mut atoms = Vec::new();
            for (lo, hi, c, d) in blocks {
                if d > c {
                    atoms.push(Atom::new(0.5 * (lo + hi), 0.5 * (d - c)));
                    atoms.push(Atom::new(hi, 0.5 * (d - c)));
                }
            }
            if rest > 0.0 {
                for k in 1..=TAIL_STEPS {
                    let w = if k == TAIL_STEPS {
                        rest * 0.5f64.powi(TAIL_STEPS - 1)
                    } else {
                        rest * 0.5f64.powi(k)
                    };
                    atoms.push(Atom::new(last + k as f64, w));
                }
            }
            Law::Discrete(DiscreteLaw::new(atoms, 0.0)?)
        }
        Flavor::AbsolutelyContinuous => {
            let mut pieces: Vec<Piece> = blocks
                .filter(|(_, _, c, d)| d > c)
                .map(|(lo, hi, c, d)| Piece::polynomial(lo, hi, vec![(d - c) / (hi - lo)]))
                .collect();
            if rest > 0.0 {
                let ln2 = std::f64::consts::LN_2;
                pieces.push(Piece {
                    lo: last,
                    hi: f64::INFINITY,
                    coeffs: vec![rest * ln2],
                    rate: ln2,
                });
            }
            Law::AbsolutelyContinuous(Density::piecewise(pieces)?)
        }
        Flavor::Singular => {
            let blocks: Vec<Block> = blocks
                .map(|(lo, hi, c, d)| Block { lo, hi, c, d })
                .collect();
            let tail = (rest > 0.0).then_some(GeometricTail {
                lo: last,
                width: 1.0,
                c: 1.0 - rest,
            });
            Law::SingularContinuous(SingularLaw::new(SINGULAR_PROFILE_P, blocks, tail)?)
        }
    };
    let (scale, gamma) = rescale(&beta, gamma.dim())?;
    Ok(Approximation {
        gamma,
        scale,
        anchors,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeGap {
    /// Derivative order; `d−1` stands for `D⁻ψ^{(d−2)}`.
    pub order: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityGap {
    pub m: usize,
    pub gap: f64,
}

/// Distances between a target copula and an approximant, one per criterion.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    /// `max |Cₙ − C|` on the grid `{k/r}^d`.
    pub copula_sup: f64,
    /// `max |Cₙ^{1:2} − C^{1:2}|` on the grid.
    pub bivariate_sup: f64,
    /// `max |φₙ − φ|` on grid points in `(0,1]`.
    pub phi_gap: f64,
    /// `max |ψₙ − ψ|` at `z = u/(1−u)` for grid points `u ∈ [0,1)`.
    pub generator_sup: f64,
    /// Derivative gaps at grid points that are continuity points of both.
    pub derivative_gaps: Vec<DerivativeGap>,
    /// Marginal density gaps at random points; orders `2` and `d−1` only.
    pub marginal_density_gaps: Vec<DensityGap>,
    /// `max |γₙ([0,z]) − γ([0,z])|` at grid points away from atoms of `γ`.
    pub measure_cdf_gap: f64,
    /// Mean `|Kₙ(x,[0,y]) − K(x,[0,y])|` over random `(x,y)`.
    pub kernel_mean_gap: f64,
    pub grid_resolution: usize,
    pub sample_count: usize,
    pub seed: u64,
}

impl ConvergenceReport {
    /// Every scalar entry, for monotonicity checks.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("copula_sup".to_string(), self.copula_sup),
            ("bivariate_sup".to_string(), self.bivariate_sup),
            ("phi_gap".to_string(), self.phi_gap),
            ("generator_sup".to_string(), self.generator_sup),
        ];
        for g in &self.derivative_gaps {
            out.push((format!("derivative_gap_{}", g.order), g.gap));
        }
        for g in &self.marginal_density_gaps {
            out.push((format!("marginal_density_gap_{}", g.m), g.gap));
        }
        out.push(("measure_cdf_gap".to_string(), self.measure_cdf_gap));
        out.push(("kernel_mean_gap".to_string(), self.kernel_mean_gap));
        out
    }
}

fn phi_table(g: &Generator, grid: &[f64]) -> Result<Vec<Extended>> {
    grid.par_iter().map(|&u| g.phi(u)).collect()
}

fn near_kink(z: f64, kinks: &[f64]) -> bool {
    kinks.iter().any(|&k| (z - k).abs() <= 1e-9 * k.max(1.0))
}

fn grid_copula_sup(
    target: &Generator,
    approx: &Generator,
    pt: &[Extended],
    pa: &[Extended],
    dim: usize,
) -> Result<f64> {
    let r = pt.len();
    let total = r.pow(dim as u32);
    (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let (mut st, mut sa) = (0.0, 0.0);
            for _ in 0..dim {
                let k = idx % r;
                idx /= r;
                st += pt[k].to_f64();
                sa += pa[k].to_f64();
            }
            Ok((target.psi(st)? - approx.psi(sa)?).abs())
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Compares `approximant` against `target` on every convergence criterion.
pub fn convergence_report(
    target: &ArchimedeanCopula,
    approximant: &ArchimedeanCopula,
    grid_resolution: usize,
    sample_count: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    let d = target.dim();
    if approximant.dim() != d {
        return Err(Error::domain("target and approximant differ in dimension"));
    }
    let r = grid_resolution.max(2);
    let (gt, ga) = (target.generator(), approximant.generator());
    let grid: Vec<f64> = (0..=r).map(|k| k as f64 / r as f64).collect();
    let pt = phi_table(gt, &grid)?;
    let pa = phi_table(ga, &grid)?;

    // A d-dimensional grid gets expensive quickly; thin it for larger d.
    let (cgrid_t, cgrid_a): (Vec<Extended>, Vec<Extended>) = {
        let step = ((r + 1) as f64).powf(3.0 / d.max(3) as f64).max(2.0) as usize;
        let stride = ((r + 1) / step.max(1)).max(1);
        let idx: Vec<usize> = (0..=r).step_by(stride).chain(std::iter::once(r)).collect();
        (
            idx.iter().map(|&i| pt[i]).collect(),
            idx.iter().map(|&i| pa[i]).collect(),
        )
    };
    let copula_sup = grid_copula_sup(gt, ga, &cgrid_t, &cgrid_a, d)?;
    let bivariate_sup = grid_copula_sup(gt, ga, &pt, &pa, 2)?;
    let phi_gap = grid
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, _)| (pt[i].to_f64() - pa[i].to_f64()).abs())
        .fold(0.0, f64::max);

    let zs: Vec<f64> = grid[..r].iter().map(|&u| u / (1.0 - u)).collect();
    let generator_sup = zs
        .par_iter()
        .map(|&z| Ok((gt.psi(z)? - ga.psi(z)?).abs()))
        .try_reduce(|| 0.0, |a: f64, b| Ok(a.max(b)))?;

    let kinks: Vec<f64> = gt.kinks().iter().chain(ga.kinks()).copied().collect();
    let mut derivative_gaps = Vec::new();
    for order in 1..d {
        let gap = zs
            .par_iter()
            .skip(1)
            .filter(|&&z| !near_kink(z, &kinks))
            .map(|&z| {
                let (a, b) = if order == d - 1 {
                    (gt.left_derivative_top(z)?, ga.left_derivative_top(z)?)
                } else {
                    (gt.derivative(order, z)?, ga.derivative(order, z)?)
                };
                Ok((a - b).abs())
            })
            .try_reduce(|| 0.0, |a: f64, b| Ok(a.max(b)))?;
        derivative_gaps.push(DerivativeGap { order, gap });
    }

    let mut orders = vec![2, d - 1];
    orders.dedup();
    let mut marginal_density_gaps = Vec::new();
    for &m in orders.iter().filter(|&&m| m >= 2 && m < d) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (m as u64) << 48);
        let points: Vec<Vec<f64>> = (0..sample_count)
            .map(|_| (0..m).map(|_| rng.random_range(0.01..0.99)).collect())
            .collect();
        let gap = points
            .par_iter()
            .map(|x| {
                let a = target.marginal_density(m, x);
                let b = approximant.marginal_density(m, x);
                match (a, b) {
                    (Ok(a), Ok(b)) => Ok((a - b).abs()),
                    // φ' undefined at the point for one of them: skip it.
                    (Err(Error::Domain(_)), _) | (_, Err(Error::Domain(_))) => Ok(0.0),
                    (Err(e), _) | (_, Err(e)) => Err(e),
                }
            })
            .try_reduce(|| 0.0, |a: f64, b| Ok(a.max(b)))?;
        marginal_density_gaps.push(DensityGap { m, gap });
    }

    let (lt, la) = (gt.law(), ga.law());
    let measure_cdf_gap = zs
        .iter()
        .skip(1)
        .filter(|&&z| !is_atom(lt, z))
        .map(|&z| Ok((lt.cdf(z)? - la.cdf(z)?).abs()))
        .try_fold(0.0, |a: f64, b: Result<f64>| Ok::<f64, Error>(a.max(b?)))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(Vec<f64>, f64)> = (0..sample_count)
        .map(|_| {
            let x = (0..d - 1).map(|_| rng.random_range(0.01..0.99)).collect();
            (x, rng.random_range(0.01..0.99))
        })
        .collect();
    let gaps: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|(x, y)| {
            let a = target.markov_kernel(x, *y, Method::GammaForm)?;
            let b = approximant.markov_kernel(x, *y, Method::GammaForm)?;
            Ok(
                (a.branch != Branch::Degenerate && b.branch != Branch::Degenerate)
                    .then(|| (a.value - b.value).abs()),
            )
        })
        .collect::<Result<_>>()?;
    let used: Vec<f64> = gaps.into_iter().flatten().collect();
    let kernel_mean_gap = if used.is_empty() {
        0.0
    } else {
        used.iter().sum::<f64>() / used.len() as f64
    };

    Ok(ConvergenceReport {
        copula_sup,
        bivariate_sup,
        phi_gap,
        generator_sup,
        derivative_gaps,
        marginal_density_gaps,
        measure_cdf_gap,
        kernel_mean_gap,
        grid_resolution: r,
        sample_count,
        seed,
    })
}

/// One row of a convergence ladder.
#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub n: usize,
    pub scale: f64,
    pub report: ConvergenceReport,
}

/// Reports for `approximate(γ, flavor, n)` over the given stages.
pub fn ladder(
    gamma: &WilliamsonMeasure,
    flavor: Flavor,
    stages: &[usize],
    grid_resolution: usize,
    sample_count: usize,
    seed: u64,
) -> Result<Vec<Stage>> {
    let target = ArchimedeanCopula::from_measure(gamma.clone());
    stages
        .iter()
        .map(|&n| {
            let a = approximate(gamma, flavor, n)?;
            let c = ArchimedeanCopula::from_measure(a.gamma);
            Ok(Stage {
                n,
                scale: a.scale,
                report: convergence_report(&target, &c, grid_resolution, sample_count, seed)?,
            })
        })
        .collect()
}
