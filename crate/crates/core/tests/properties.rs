use archimedean::measure::{Density, Piece};
use archimedean::{rescale, sampling, ArchimedeanCopula, Atom, Law, Method, SamplerConfig};
use proptest::prelude::*;

/// A rescaled discrete law, optionally mixed with a uniform density.
fn law_strategy() -> impl Strategy<Value = (usize, Law)> {
    let atoms = prop::collection::vec((0.05f64..5.0, 0.05f64..1.0), 1..5);
    (2usize..=5, atoms, prop::option::of(0.2f64..4.0)).prop_map(|(d, raw, uniform)| {
        let total: f64 = raw.iter().map(|a| a.1).sum();
        let atoms: Vec<Atom> = raw.iter().map(|&(t, w)| Atom::new(t, w / total)).collect();
        let discrete = Law::discrete(atoms).unwrap();
        let law = match uniform {
            None => discrete,
            Some(b) => {
                let density = Density::piecewise(vec![Piece::polynomial(0.0, b, vec![1.0 / b])]).unwrap();
                Law::mixture(vec![(0.5, discrete), (0.5, Law::AbsolutelyContinuous(density))]).unwrap()
            }
        };
        (d, law)
    })
}

fn copula_of(d: usize, law: &Law) -> ArchimedeanCopula {
    ArchimedeanCopula::from_measure(rescale(law, d).unwrap().1)
}

fn unit_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generator_shape((d, law) in law_strategy(), a in 0.0f64..6.0, b in 0.0f64..6.0) {
        let c = copula_of(d, &law);
        let g = c.generator();
        prop_assert!((g.psi(1.0).unwrap() - 0.5).abs() < 1e-10);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        for m in 0..=d - 2 {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let (at_lo, at_hi) = (sign * g.derivative(m, lo).unwrap(), sign * g.derivative(m, hi).unwrap());
            prop_assert!(at_hi >= -1e-15);
            prop_assert!(at_hi <= at_lo + 1e-12, "m={m}: {at_lo} then {at_hi}");
        }
    }

    #[test]
    fn pseudo_inverse_round_trip((d, law) in law_strategy(), y in 0.0f64..=1.0) {
        let g = copula_of(d, &law).generator().clone();
        let z = g.phi(y).unwrap();
        if let Some(z) = z.finite() {
            prop_assert!((g.psi(z).unwrap() - y).abs() < 1e-10);
        } else {
            prop_assert_eq!(y, 0.0);
        }
    }

    #[test]
    fn copula_within_frechet_bounds((d, law) in law_strategy(), seed in any::<u64>()) {
        let c = copula_of(d, &law);
        let x: Vec<f64> = (0..d).map(|i| ((seed >> (8 * i)) & 0xff) as f64 / 255.0).collect();
        let v = c.value(&x).unwrap();
        let upper = x.iter().cloned().fold(1.0, f64::min);
        let lower = (x.iter().sum::<f64>() - (d as f64 - 1.0)).max(0.0);
        prop_assert!(v <= upper + 1e-12 && v >= lower - 1e-12, "{v} outside [{lower}, {upper}]");
    }

    #[test]
    fn copula_monotone_in_each_coordinate(
        (d, law) in law_strategy(),
        x in unit_point(5),
        i in 0usize..5,
        step in 0.0f64..0.5,
    ) {
        let c = copula_of(d, &law);
        let mut x = x[..d].to_vec();
        let i = i % d;
        let before = c.value(&x).unwrap();
        x[i] = (x[i] + step).min(1.0);
        prop_assert!(c.value(&x).unwrap() >= before - 1e-12);
    }

    #[test]
    fn kernel_is_a_distribution_function(
        (d, law) in law_strategy(),
        x in unit_point(4),
        y1 in 0.0f64..=1.0,
        y2 in 0.0f64..=1.0,
    ) {
        prop_assume!(d >= 3);
        let c = copula_of(d, &law);
        let x = &x[..d - 1];
        let (lo, hi) = if y1 < y2 { (y1, y2) } else { (y2, y1) };
        let k_lo = c.markov_kernel(x, lo, Method::GammaForm).unwrap();
        let k_hi = c.markov_kernel(x, hi, Method::GammaForm).unwrap();
        prop_assert!((0.0..=1.0).contains(&k_lo.value));
        prop_assert!(k_hi.value >= k_lo.value - 1e-12);
        prop_assert_eq!(c.markov_kernel(x, 1.0, Method::GammaForm).unwrap().value, 1.0);
        let psi = c.markov_kernel(x, lo, Method::PsiForm).unwrap();
        prop_assert!((psi.value - k_lo.value).abs() < 1e-9);
    }

    #[test]
    fn kendall_dominates_identity((d, law) in law_strategy(), t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
        let c = copula_of(d, &law);
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let f_lo = c.kendall_cdf(lo, Method::GammaForm).unwrap();
        let f_hi = c.kendall_cdf(hi, Method::GammaForm).unwrap();
        prop_assert!(f_lo >= lo - 1e-12, "F_K({lo}) = {f_lo}");
        prop_assert!(f_hi >= f_lo - 1e-12);
        for method in [Method::PsiForm, Method::TaylorForm] {
            prop_assert!((c.kendall_cdf(lo, method).unwrap() - f_lo).abs() < 1e-9);
        }
        let jump = f_lo - c.kendall_left_limit(lo).unwrap();
        prop_assert!((c.level_mass(lo, Method::GammaForm).unwrap() - jump).abs() < 1e-9);
    }

    #[test]
    fn samples_in_cube_and_reproducible((d, law) in law_strategy(), seed in any::<u64>(), stream in 0u64..4) {
        let c = copula_of(d, &law);
        let cfg = SamplerConfig { seed, n: 64, stream_id: stream };
        let a = sampling::sample_copula(&c, cfg).unwrap();
        prop_assert_eq!(a.d, d);
        prop_assert!(a.data.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(&a, &sampling::sample_copula(&c, cfg).unwrap());
    }
}
