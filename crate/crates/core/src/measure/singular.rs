use serde::{Deserialize, Serialize};

use super::{Cut, Term, MASS_TOL};
use crate::error::{Error, Result};

const MAX_DEGREE: usize = 160;

/// de Rham's singular distribution function `h_p` on `[0,1]`, the unique
/// continuous solution of `h(x/2) = p·h(x)`, `h((x+1)/2) = p + (1−p)·h(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeRham {
    p: f64,
    moments: Vec<f64>,
}

fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0; n + 1];
    for k in 1..n {
        row[k] = row[k - 1] * (n - k + 1) as f64 / k as f64;
    }
    row
}

/// Coefficients of `Q(x/2)`.
fn compose_left(q: &[f64]) -> Vec<f64> {
    let mut scale = 1.0;
    q.iter()
        .map(|&c| {
            let v = c * scale;
            scale *= 0.5;
            v
        })
        .collect()
}

/// Coefficients of `Q((x+1)/2)`.
fn compose_right(q: &[f64]) -> Vec<f64> {
    let n = q.len();
    let mut out = vec![0.0; n];
    let mut half_pow = 1.0;
    for (j, &c) in q.iter().enumerate() {
        if c != 0.0 {
            let row = binomial_row(j);
            for (i, b) in row.iter().enumerate() {
                out[i] += c * b * half_pow;
            }
        }
        half_pow *= 0.5;
    }
    out
}

impl DeRham {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Spec(format!("de Rham parameter {p} must lie in (0,1)")));
        }
        if p == 0.5 {
            return Err(Error::invariant(
                "singular profile",
                "de Rham parameter 1/2 gives the uniform law, which is not singular",
            ));
        }
        // m_k = (1−p)/(2^k − 1) Σ_{j<k} C(k,j) m_j, from the self-similarity.
        let mut moments = vec![1.0];
        for k in 1..=MAX_DEGREE {
            let row = binomial_row(k);
            let s: f64 = (0..k).map(|j| row[j] * moments[j]).sum();
            moments.push((1.0 - p) * s / (2f64.powi(k as i32) - 1.0));
        }
        Ok(DeRham { p, moments })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let p = self.p;
        let mut x = x;
        let mut acc = 0.0;
        let mut weight = 1.0;
        for _ in 0..1100 {
            if x <= 0.0 {
                break;
            }
            if x >= 1.0 {
                acc += weight;
                break;
            }
            x *= 2.0;
            if x < 1.0 {
                weight *= p;
            } else {
                acc += weight * p;
                weight *= 1.0 - p;
                x -= 1.0;
            }
            if weight < 1e-300 {
                break;
            }
        }
        acc
    }

    /// Generalized inverse, read off digit by digit.
    pub fn inverse(&self, u: f64) -> f64 {
        let p = self.p;
        let mut u = u.clamp(0.0, 1.0);
        let mut x = 0.0;
        let mut step = 0.5;
        for _ in 0..1100 {
            if u <= 0.0 || step == 0.0 {
                break;
            }
            if u <= p {
                u /= p;
            } else {
                u = ((u - p) / (1.0 - p)).min(1.0);
                x += step;
            }
            step *= 0.5;
        }
        x
    }

    /// `∫_{[0,1]} Q dh` for a polynomial `Q` given by ascending coefficients.
    pub fn full(&self, q: &[f64]) -> f64 {
        assert!(q.len() <= self.moments.len(), "polynomial degree too high");
        q.iter().zip(&self.moments).map(|(c, m)| c * m).sum()
    }

    /// `∫_{[0,v]} Q dh`.
    pub fn partial(&self, q: &[f64], v: f64) -> f64 {
        let p = self.p;
        let mut q = q.to_vec();
        let mut v = v;
        let mut weight = 1.0;
        let mut acc = 0.0;
        let scale: f64 = q.iter().map(|c| c.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        for _ in 0..1100 {
            if v <= 0.0 {
                break;
            }
            if v >= 1.0 {
                acc += weight * self.full(&q);
                break;
            }
            let bound = weight * q.iter().map(|c| c.abs()).sum::<f64>();
            if bound < 1e-18 * scale {
                break;
            }
            let left = compose_left(&q);
            if v < 0.5 {
                q = left;
                weight *= p;
                v *= 2.0;
            } else {
                acc += weight * p * self.full(&left);
                q = compose_right(&q);
                weight *= 1.0 - p;
                v = 2.0 * v - 1.0;
            }
        }
        acc
    }
}

/// Block `[lo, hi)` on which `F(t) = c + (d−c)·h((t−lo)/(hi−lo))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub lo: f64,
    pub hi: f64,
    pub c: f64,
    pub d: f64,
}

impl Block {
    fn mass(&self) -> f64 {
        self.d - self.c
    }
}

/// Infinite sequence of blocks starting at `lo`: block `k` spans
/// `[lo + w(2^k−1), lo + w(2^{k+1}−1))` and carries mass `(1−c)·2^{−(k+1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricTail {
    pub lo: f64,
    pub width: f64,
    pub c: f64,
}

impl GeometricTail {
    fn block(&self, k: i32) -> Block {
        let e = 2f64.powi(k);
        let (lo, w, c) = (self.lo, self.width, self.c);
        Block {
            lo: lo + w * (e - 1.0),
            hi: lo + w * (2.0 * e - 1.0),
            c: c + (1.0 - c) * (1.0 - 1.0 / e),
            d: c + (1.0 - c) * (1.0 - 0.5 / e),
        }
    }
}

/// Continuous distribution built from de Rham blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularLaw {
    profile: DeRham,
    blocks: Vec<Block>,
    tail: Option<GeometricTail>,
}

const MAX_TAIL_BLOCKS: i32 = 1000;

impl SingularLaw {
    pub fn new(p: f64, blocks: Vec<Block>, tail: Option<GeometricTail>) -> Result<Self> {
        let profile = DeRham::new(p)?;
        let mut prev_hi = 0.0;
        let mut prev_d = 0.0;
        for b in &blocks {
            if !(b.lo.is_finite() && b.hi.is_finite() && b.lo >= prev_hi && b.hi > b.lo) {
                return Err(Error::Spec(format!(
                    "block [{}, {}) is not ordered after {prev_hi}",
                    b.lo, b.hi
                )));
            }
            if (b.c - prev_d).abs() > MASS_TOL {
                return Err(Error::invariant(
                    "continuous cdf",
                    format!("block at {} starts at {} but F = {prev_d} there", b.lo, b.c),
                ));
            }
            if !(b.d >= b.c && b.d <= 1.0 + MASS_TOL) {
                return Err(Error::invariant(
                    "non-decreasing cdf",
                    format!("block [{}, {}) has F values {} -> {}", b.lo, b.hi, b.c, b.d),
                ));
            }
            prev_hi = b.hi;
            prev_d = b.d;
        }
        match &tail {
            Some(t) => {
                if !(t.lo.is_finite() && t.lo >= prev_hi && t.width.is_finite() && t.width > 0.0) {
                    return Err(Error::Spec("tail must start after the last block".into()));
                }
                if (t.c - prev_d).abs() > MASS_TOL || !(t.c < 1.0) {
                    return Err(Error::invariant(
                        "continuous cdf",
                        format!("tail starts at F = {} but F = {prev_d} there", t.c),
                    ));
                }
            }
            None => {
                if (prev_d - 1.0).abs() > MASS_TOL {
                    return Err(Error::invariant(
                        "total mass",
                        format!("singular cdf ends at {prev_d}"),
                    ));
                }
            }
        }
        Ok(SingularLaw {
            profile,
            blocks,
            tail,
        })
    }

    pub fn p(&self) -> f64 {
        self.profile.p
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn tail(&self) -> Option<&GeometricTail> {
        self.tail.as_ref()
    }

    pub fn profile(&self) -> &DeRham {
        &self.profile
    }

    /// Every block (finite ones first, then tail blocks) that starts below `upto`.
    fn blocks_below(&self, upto: f64) -> impl Iterator<Item = Block> + '_ {
        let fixed = self.blocks.iter().copied().take_while(move |b| b.lo < upto);
        let tail = self.tail.iter().flat_map(move |t| {
            (0..MAX_TAIL_BLOCKS)
                .map(move |k| t.block(k))
                .take_while(move |b| b.lo < upto)
        });
        fixed.chain(tail)
    }

    pub(crate) fn integrate(&self, term: Term, cut: Cut) -> Result<f64> {
        if cut.at.is_infinite() && self.tail.is_some() {
            if term.power == 0 && term.order == 0 {
                return Ok(1.0);
            }
            return Err(Error::domain(
                "moment over the unbounded support of a singular law",
            ));
        }
        let mut acc = 0.0;
        for b in self.blocks_below(cut.at) {
            let mass = b.mass();
            if mass <= 0.0 {
                continue;
            }
            let width = b.hi - b.lo;
            let q = term.local_coeffs(b.lo, width);
            acc += if b.hi <= cut.at {
                mass * self.profile.full(&q)
            } else {
                mass * self.profile.partial(&q, (cut.at - b.lo) / width)
            };
        }
        Ok(acc)
    }

    pub(crate) fn cdf(&self, z: f64) -> f64 {
        let mut last = 0.0;
        for b in self.blocks_below(f64::INFINITY) {
            if z < b.lo {
                return last;
            }
            if z < b.hi {
                return b.c + b.mass() * self.profile.cdf((z - b.lo) / (b.hi - b.lo));
            }
            last = b.d;
        }
        1.0
    }

    pub(crate) fn quantile(&self, u: f64) -> f64 {
        for b in self.blocks.iter() {
            if b.d >= u && b.mass() > 0.0 {
                let r = ((u - b.c) / b.mass()).clamp(0.0, 1.0);
                return b.lo + (b.hi - b.lo) * self.profile.inverse(r);
            }
        }
        match &self.tail {
            Some(t) => {
                let rel = ((1.0 - u) / (1.0 - t.c)).max(f64::MIN_POSITIVE);
                let mut k = (-rel.log2()).floor().max(0.0) as i32;
                k = k.min(MAX_TAIL_BLOCKS - 1);
                let mut b = t.block(k);
                while k > 0 && b.c >= u {
                    k -= 1;
                    b = t.block(k);
                }
                while b.d < u && k < MAX_TAIL_BLOCKS - 1 {
                    k += 1;
                    b = t.block(k);
                }
                let r = ((u - b.c) / b.mass()).clamp(0.0, 1.0);
                b.lo + (b.hi - b.lo) * self.profile.inverse(r)
            }
            None => self.blocks.last().map_or(0.0, |b| b.hi),
        }
    }

    pub(crate) fn support_inf(&self) -> f64 {
        self.blocks
            .iter()
            .find(|b| b.mass() > 0.0)
            .map(|b| b.lo)
            .or(self.tail.map(|t| t.lo))
            .unwrap_or(f64::INFINITY)
    }

    pub(crate) fn scaled(&self, a: f64) -> Self {
        SingularLaw {
            profile: self.profile.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    lo: b.lo * a,
                    hi: b.hi * a,
                    ..*b
                })
                .collect(),
            tail: self.tail.map(|t| GeometricTail {
                lo: t.lo * a,
                width: t.width * a,
                c: t.c,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::stieltjes_bounds;

    #[test]
    fn functional_equation_holds() {
        let h = DeRham::new(0.25).unwrap();
        assert_eq!(h.cdf(0.5), 0.25);
        for &x in &[0.1, 0.37, 0.5, 0.81, 0.999] {
            assert!((h.cdf(x / 2.0) - 0.25 * h.cdf(x)).abs() < 1e-15);
            assert!((h.cdf((x + 1.0) / 2.0) - (0.25 + 0.75 * h.cdf(x))).abs() < 1e-15);
        }
        assert_eq!(h.cdf(0.0), 0.0);
        assert_eq!(h.cdf(1.0), 1.0);
    }

    #[test]
    fn inverse_round_trips() {
        let h = DeRham::new(0.3).unwrap();
        for k in 1..100 {
            let u = k as f64 / 100.0;
            let x = h.inverse(u);
            // h is steep near 1, so bracket by neighbouring floats instead of values.
            assert!(h.cdf(x - 1e-15) <= u + 1e-15 && h.cdf(x + 1e-15) >= u - 1e-15, "u={u}");
            assert!((h.cdf(x) - u).abs() < 1e-11);
        }
    }

    #[test]
    fn moments_match_stieltjes_sums() {
        let h = DeRham::new(0.25).unwrap();
        for k in 1..5 {
            let (lo, hi) = stieltjes_bounds(
                |x| h.cdf(x),
                |x| x.powi(k),
                0.0,
                1.0,
                &[],
                1e-6,
            )
            .unwrap();
            let mut q = vec![0.0; k as usize + 1];
            q[k as usize] = 1.0;
            let m = h.full(&q);
            assert!(lo - 1e-15 <= m && m <= hi + 1e-15, "k={k}: {lo} {m} {hi}");
        }
        assert!((h.moments[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn partial_integrals_match_stieltjes_sums() {
        let h = DeRham::new(0.7).unwrap();
        let q = [1.0, -2.0, 0.5];
        let g = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x;
        for &v in &[0.2, 0.5, 0.77] {
            let (lo, hi) = stieltjes_bounds(|x| h.cdf(x), g, 0.0, v, &[], 1e-6).unwrap();
            let exact = h.partial(&q, v);
            assert!(lo - 1e-14 <= exact && exact <= hi + 1e-14, "v={v}");
        }
        assert!((h.partial(&q, 1.0) - h.full(&q)).abs() < 1e-15);
    }

    #[test]
    fn rejects_half() {
        assert!(DeRham::new(0.5).is_err());
    }

    fn full_support_law() -> SingularLaw {
        SingularLaw::new(
            0.25,
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
        )
        .unwrap()
    }

    #[test]
    fn geometric_tail_blocks() {
        let law = full_support_law();
        assert_eq!(law.cdf(2.0), 0.5);
        assert_eq!(law.cdf(4.0), 0.75);
        assert_eq!(law.cdf(8.0), 0.875);
        assert!((law.cdf(6.0) - (0.75 + 0.125 * 0.25)).abs() < 1e-15);
        for &u in &[0.1, 0.5, 0.6, 0.9, 0.999, 1.0 - 1e-9] {
            let z = law.quantile(u);
            assert!((law.cdf(z) - u).abs() < 1e-10, "u={u}");
        }
    }

    #[test]
    fn integrate_matches_cdf() {
        let law = full_support_law();
        for &z in &[0.3, 1.0, 2.5, 9.0, 100.0] {
            let m = law.integrate(Term::ONE, Cut::closed(z)).unwrap();
            assert!((m - law.cdf(z)).abs() < 1e-13, "z={z}");
        }
    }
}
