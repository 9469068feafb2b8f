//! Adaptive Gauss–Kronrod quadrature and Riemann–Stieltjes bracketing.
//!
//! Both routines refine globally (largest local error first) and stop with a
//! [`Error::Tolerance`] once the panel cap is reached. The cap defaults to
//! 2^16 panels and can be overridden with the `COPULA_MAX_SUBDIV` environment
//! variable.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Absolute tolerance used for black-box densities.
pub const INTEGRATION_TOL: f64 = 1e-10;

const DEFAULT_MAX_PANELS: usize = 1 << 16;

/// Panel cap, honouring `COPULA_MAX_SUBDIV`.
pub fn max_panels() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("COPULA_MAX_SUBDIV")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&v| v > 0)
            .unwrap_or(DEFAULT_MAX_PANELS)
    })
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Integrates `f` over `[a, b]`, splitting first at the given interior
/// breakpoints (discontinuities or kinks of the integrand).
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    abs_tol: f64,
) -> Result<Quadrature> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("quadrature bounds must be finite"));
    }
    if b <= a {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            panels: 0,
        });
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let cap = max_panels();
    let mut heap = BinaryHeap::new();
    let mut lo = a;
    for &x in cuts.iter().chain(std::iter::once(&b)) {
        heap.push(gk15(&mut f, lo, x));
        lo = x;
    }
    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        if error <= abs_tol {
            return Ok(Quadrature {
                value,
                error,
                panels: heap.len(),
            });
        }
        if heap.len() >= cap {
            return Err(Error::Tolerance {
                what: "adaptive quadrature panel cap reached",
                requested: abs_tol,
                achieved: error,
            });
        }
        let worst = heap.pop().expect("non-empty panel set");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            return Err(Error::Tolerance {
                what: "adaptive quadrature panel underflow",
                requested: abs_tol,
                achieved: error,
            });
        }
        heap.push(gk15(&mut f, worst.a, mid));
        heap.push(gk15(&mut f, mid, worst.b));
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    a: f64,
    b: f64,
    lower: f64,
    upper: f64,
}

impl Cell {
    fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.gap() == other.gap()
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gap().total_cmp(&other.gap())
    }
}

/// Lower and upper Riemann–Stieltjes sums of `∫_{(a,b]} g dF` for a continuous
/// distribution function `F`, refined on dyadic cells until the gap between
/// them drops below `gap_tol`.
///
/// `g` must be monotone between consecutive `monotone_breaks`; cell bounds are
/// then attained at the cell endpoints.
pub fn stieltjes_bounds<F, G>(
    cdf: F,
    g: G,
    a: f64,
    b: f64,
    monotone_breaks: &[f64],
    gap_tol: f64,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if b <= a {
        return Ok((0.0, 0.0));
    }
    let cell = |lo: f64, hi: f64| {
        let mass = (cdf(hi) - cdf(lo)).max(0.0);
        let (ga, gb) = (g(lo), g(hi));
        Cell {
            a: lo,
            b: hi,
            lower: mass * ga.min(gb),
            upper: mass * ga.max(gb),
        }
    };
    let mut cuts: Vec<f64> = monotone_breaks
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut heap = BinaryHeap::new();
    let mut lo = a;
    for &x in cuts.iter().chain(std::iter::once(&b)) {
        heap.push(cell(lo, x));
        lo = x;
    }
    let mut lower: f64 = heap.iter().map(|c| c.lower).sum();
    let mut upper: f64 = heap.iter().map(|c| c.upper).sum();
    let cap = max_panels() * 16;
    while upper - lower > gap_tol {
        if heap.len() >= cap {
            return Err(Error::Tolerance {
                what: "Riemann-Stieltjes refinement cap reached",
                requested: gap_tol,
                achieved: upper - lower,
            });
        }
        let worst = heap.pop().expect("non-empty cell set");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Tolerance {
                what: "Riemann-Stieltjes cell underflow",
                requested: gap_tol,
                achieved: upper - lower,
            });
        }
        let (left, right) = (cell(worst.a, mid), cell(mid, worst.b));
        lower += left.lower + right.lower - worst.lower;
        upper += left.upper + right.upper - worst.upper;
        heap.push(left);
        heap.push(right);
        // Resum occasionally to shed accumulated rounding drift.
        if heap.len() % 4096 == 0 {
            lower = heap.iter().map(|c| c.lower).sum();
            upper = heap.iter().map(|c| c.upper).sum();
        }
    }
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| 3.0 * x * x + 1.0, 0.0, 2.0, &[], 1e-12).unwrap();
        assert!((q.value - 10.0).abs() < 1e-13);
    }

    #[test]
    fn jump_with_breakpoint_converges_immediately() {
        let f = |x: f64| if x < 0.3 { 1.0 } else { 2.0 };
        let q = integrate(f, 0.0, 1.0, &[0.3], 1e-12).unwrap();
        assert!((q.value - 1.7).abs() < 1e-13);
        assert_eq!(q.panels, 2);
    }

    #[test]
    fn endpoint_singularity_is_integrable() {
        let q = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, &[], 1e-9).unwrap();
        assert!((q.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn empty_interval_is_zero() {
        let q = integrate(|x| x, 1.0, 1.0, &[], 1e-12).unwrap();
        assert_eq!(q.value, 0.0);
    }

    #[test]
    fn stieltjes_brackets_lebesgue_moment() {
        let (lo, hi) = stieltjes_bounds(|x| x, |x| x * x, 0.0, 1.0, &[], 1e-6).unwrap();
        assert!(lo <= 1.0 / 3.0 && 1.0 / 3.0 <= hi);
        assert!(hi - lo <= 1e-6);
    }
}
