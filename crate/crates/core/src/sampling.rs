//! Exact sampling through the radial representation `U = ψ(R·S)` with
//! `R = 1/T`, `T ~ γ` and `S` uniform on the unit simplex.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::copula::{ArchimedeanCopula, Branch, Method};
use crate::error::{Error, Result};
use crate::generator::Extended;
use crate::measure::{Cut, Law, Term};
use crate::stats::EmpiricalCdf;

/// Points generated per RNG stream.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub n: usize,
    pub stream_id: u64,
}

impl SamplerConfig {
    pub fn new(seed: u64, n: usize) -> Self {
        SamplerConfig {
            seed,
            n,
            stream_id: 0,
        }
    }

    /// RNG for one chunk; chunks are independent streams of the same seed.
    fn rng(&self, chunk: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((self.stream_id << 32) | chunk as u64);
        rng
    }

    fn chunks(&self) -> Vec<(usize, usize)> {
        (0..self.n.div_ceil(CHUNK))
            .map(|k| (k, CHUNK.min(self.n - k * CHUNK)))
            .collect()
    }
}

/// Row-major sample of `n` points in `[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    pub d: usize,
    pub data: Vec<f64>,
}

impl Points {
    pub fn len(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Draws `n` points from the copula.
pub fn sample_copula(c: &ArchimedeanCopula, cfg: SamplerConfig) -> Result<Points> {
    let d = c.dim();
    let g = c.generator();
    let chunks: Vec<Result<Vec<f64>>> = cfg
        .chunks()
        .into_par_iter()
        .map(|(k, len)| {
            let mut rng = cfg.rng(k);
            let mut out = Vec::with_capacity(len * d);
            let mut e = vec![0.0; d];
            for _ in 0..len {
                let t = g.law().quantile(open_unit(&mut rng))?;
                let r = 1.0 / t;
                for v in e.iter_mut() {
                    *v = rng.sample(Exp1);
                }
                let total: f64 = e.iter().sum();
                for &v in &e {
                    out.push(g.psi(r * v / total)?);
                }
            }
            Ok(out)
        })
        .collect();
    let mut data = Vec::with_capacity(cfg.n * d);
    for chunk in chunks {
        data.extend(chunk?);
    }
    Ok(Points { d, data })
}

/// Draws from `y ↦ K_C(x, [0, y])`.
///
/// With `s = Σφ(xᵢ)` the kernel is the law of `ψ(1/T − s)` where `T` has
/// distribution `∝ t^{d−1} γ(dt)` on `(0, 1/s]`.
pub fn sample_conditional(c: &ArchimedeanCopula, x: &[f64], cfg: SamplerConfig) -> Result<Vec<f64>> {
    let probe = c.markov_kernel(x, 1.0, Method::GammaForm)?;
    if probe.branch == Branch::Degenerate {
        return Err(Error::domain(
            "conditioning point lies on the degenerate branch of the kernel",
        ));
    }
    let g = c.generator();
    let n = c.dim() - 1;
    let mut s = 0.0;
    for &xi in x {
        match g.phi(xi)? {
            Extended::Finite(v) => s += v,
            Extended::Infinite => unreachable!("degenerate branch handled above"),
        }
    }
    let top = 1.0 / s;
    let mass_below = |r: f64| g.law().integrate(Term::moment(n), Cut::closed(r));
    let total = mass_below(top)?;
    // Discrete laws: pick an atom directly.
    let discrete: Option<(Vec<f64>, Vec<f64>)> = match g.law() {
        Law::Discrete(_) => {
            let atoms: Vec<_> = g.law().atoms().into_iter().filter(|a| a.t <= top).collect();
            let mut acc = 0.0;
            let cum = atoms
                .iter()
                .map(|a| {
                    acc += a.w * a.t.powi(n as i32);
                    acc
                })
                .collect();
            Some((atoms.iter().map(|a| a.t).collect(), cum))
        }
        _ => None,
    };
    let draw = |u: f64| -> Result<f64> {
        let target = u * total;
        let r = match &discrete {
            Some((locs, cum)) => {
                let idx = cum.partition_point(|&c| c < target).min(locs.len() - 1);
                locs[idx]
            }
            None => {
                let (mut lo, mut hi) = (0.0, top);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
                        break;
                    }
                    if mass_below(mid)? >= target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        };
        g.psi((1.0 / r - s).max(0.0))
    };
    let chunks: Vec<Result<Vec<f64>>> = cfg
        .chunks()
        .into_par_iter()
        .map(|(k, len)| {
            let mut rng = cfg.rng(k);
            (0..len).map(|_| draw(open_unit(&mut rng))).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(cfg.n);
    for chunk in chunks {
        out.extend(chunk?);
    }
    Ok(out)
}

/// Empirical law of `C(U)` over exact samples `U`.
pub fn kendall_mc_oracle(c: &ArchimedeanCopula, cfg: SamplerConfig) -> Result<EmpiricalCdf> {
    let points = sample_copula(c, cfg)?;
    let values: Result<Vec<f64>> = points
        .data
        .par_chunks_exact(points.d)
        .map(|row| c.value(row))
        .collect();
    Ok(EmpiricalCdf::new(values?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, WilliamsonMeasure};
    use crate::stats::{ks_uniform, KS_CRIT_1PCT};

    fn cstar() -> ArchimedeanCopula {
        let law = Law::discrete(vec![Atom::new(0.25, 0.875), Atom::new(0.75, 0.125)]).unwrap();
        ArchimedeanCopula::from_measure(WilliamsonMeasure::new(law, 3).unwrap())
    }

    #[test]
    fn reproducible() {
        let c = cstar();
        let cfg = SamplerConfig::new(7, 5000);
        assert_eq!(sample_copula(&c, cfg).unwrap(), sample_copula(&c, cfg).unwrap());
        let other = SamplerConfig {
            stream_id: 1,
            ..cfg
        };
        assert_ne!(sample_copula(&c, cfg).unwrap(), sample_copula(&c, other).unwrap());
    }

    #[test]
    fn margins_are_uniform() {
        let c = cstar();
        let n = 20_000;
        let p = sample_copula(&c, SamplerConfig::new(11, n)).unwrap();
        for j in 0..3 {
            assert!(ks_uniform(p.column(j)) < KS_CRIT_1PCT / (n as f64).sqrt());
        }
    }

    #[test]
    fn conditional_two_values() {
        let c = cstar();
        let x = [29.0 / 36.0, 29.0 / 36.0];
        let ys = sample_conditional(&c, &x, SamplerConfig::new(3, 10_000)).unwrap();
        let mut distinct = ys.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        assert_eq!(distinct.len(), 2);
        let frac = ys.iter().filter(|&&y| y <= 0.5).count() as f64 / ys.len() as f64;
        assert!((frac - 7.0 / 16.0).abs() < 0.02, "{frac}");
    }

    #[test]
    fn degenerate_point_rejected() {
        let c = cstar();
        assert!(sample_conditional(&c, &[1.0, 1.0], SamplerConfig::new(1, 10)).is_err());
    }
}
