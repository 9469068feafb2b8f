//! Discrete laws with rational atoms against exact rational arithmetic.

use archimedean::{ArchimedeanCopula, Atom, Law, Method, WilliamsonMeasure};
use num_rational::Ratio;

type Q = Ratio<i128>;

fn q(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

fn f(v: Q) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}

/// Normalized rational laws: (d, [(t, w)]).
fn laws() -> Vec<(usize, Vec<(Q, Q)>)> {
    vec![
        (3, vec![(q(1, 4), q(7, 8)), (q(3, 4), q(1, 8))]),
        (2, vec![(q(1, 4), q(1, 3)), (q(5, 8), q(2, 3))]),
        (2, vec![(q(1, 2), q(1, 1))]),
        (4, vec![(q(1, 8), q(64, 93)), (q(1, 2), q(29, 93))]),
    ]
}

fn build(d: usize, atoms: &[(Q, Q)]) -> WilliamsonMeasure {
    let atoms = atoms.iter().map(|&(t, w)| Atom::new(f(t), f(w))).collect();
    WilliamsonMeasure::new(Law::discrete(atoms).unwrap(), d).unwrap()
}

fn falling(n: usize, m: usize) -> i128 {
    (0..m).map(|k| (n - k) as i128).product()
}

/// `ψ^{(m)}(z)` summed atom by atom.
fn psi_exact(d: usize, atoms: &[(Q, Q)], m: usize, z: Q) -> Q {
    let sign = if m.is_multiple_of(2) { 1 } else { -1 };
    let mut total = q(0, 1);
    for &(t, w) in atoms {
        let base = q(1, 1) - t * z;
        if base > q(0, 1) || (m == d - 1 && base == q(0, 1)) {
            total += w * t.pow(m as i32) * base.pow((d - 1 - m) as i32);
        }
    }
    total * q(sign * falling(d - 1, m), 1)
}

/// `∫_{(0, 1/z]} t^p dγ`.
fn moment_exact(atoms: &[(Q, Q)], p: usize, z: Q) -> Q {
    atoms
        .iter()
        .filter(|&&(t, _)| t * z <= q(1, 1))
        .map(|&(t, w)| w * t.pow(p as i32))
        .sum()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

const ZS: [(i128, i128); 9] = [(1, 10), (1, 2), (1, 1), (4, 3), (3, 2), (2, 1), (3, 1), (7, 2), (7, 1)];

#[test]
fn derivatives_match_exact_sums() {
    for (d, atoms) in laws() {
        let g = ArchimedeanCopula::from_measure(build(d, &atoms)).generator().clone();
        for (n, m) in ZS {
            let z = q(n, m);
            for order in 0..=d - 2 {
                let exact = f(psi_exact(d, &atoms, order, z));
                let got = g.derivative(order, f(z)).unwrap();
                assert!(close(got, exact, 1e-14), "d={d} m={order} z={z}: {got} vs {exact}");
            }
        }
        assert_eq!(g.psi(1.0).unwrap(), 0.5);
    }
}

#[test]
fn one_sided_top_derivatives_at_kinks() {
    for (d, atoms) in laws() {
        if d < 3 {
            continue;
        }
        let g = ArchimedeanCopula::from_measure(build(d, &atoms)).generator().clone();
        for &(t, _) in &atoms {
            let z = q(1, 1) / t;
            // The closed cut keeps the atom at 1/z on the left, the open cut drops it.
            let left = f(psi_exact(d, &atoms, d - 1, z));
            let right = left
                - f(atoms
                    .iter()
                    .filter(|a| a.0 == t)
                    .map(|&(t, w)| w * t.pow((d - 1) as i32))
                    .sum::<Q>()
                    * q(if (d - 1) % 2 == 0 { 1 } else { -1 } * falling(d - 1, d - 1), 1));
            assert!(close(g.left_derivative_top(f(z)).unwrap(), left, 1e-13));
            assert!(close(g.right_derivative_top(f(z)).unwrap(), right, 1e-13));
        }
    }
}

#[test]
fn truncated_moments_and_cdf() {
    for (d, atoms) in laws() {
        let gamma = build(d, &atoms);
        let mut zs: Vec<Q> = ZS.iter().map(|&(n, m)| q(n, m)).collect();
        zs.extend(atoms.iter().map(|&(t, _)| q(1, 1) / t));
        for z in zs {
            for p in 0..=d {
                let exact = f(moment_exact(&atoms, p, z));
                let got = gamma.moment_trunc(p, f(z)).unwrap();
                assert!(close(got, exact, 1e-15), "p={p} z={z}: {got} vs {exact}");
            }
            let cdf_exact = f(moment_exact(&atoms, 0, q(1, 1) / z));
            assert!(close(gamma.cdf(f(z)).unwrap(), cdf_exact, 1e-15));
        }
    }
}

#[test]
fn copula_kernel_and_kendall_at_rational_generator_arguments() {
    for (d, atoms) in laws() {
        let c = ArchimedeanCopula::from_measure(build(d, &atoms));
        let g = c.generator().clone();
        let z0 = g.phi_zero().finite().unwrap_or(f64::INFINITY);
        let zs: Vec<Q> = [(1, 10), (1, 3), (2, 5), (3, 4), (1, 1)]
            .iter()
            .map(|&(n, m)| q(n, m))
            .filter(|&z| f(z) < z0 && atoms.iter().all(|a| a.0 * z != q(1, 1)))
            .collect();
        for i in 0..zs.len() {
            let parts: Vec<Q> = (0..d).map(|k| zs[(i + k) % zs.len()]).collect();
            let x: Vec<f64> = parts.iter().map(|&z| g.psi(f(z)).unwrap()).collect();
            let s: Q = parts.iter().copied().sum();
            let exact = f(psi_exact(d, &atoms, 0, s));
            assert!(close(c.value(&x).unwrap(), exact, 1e-12), "d={d} x={x:?}");

            if d >= 3 {
                let head: Q = parts[..d - 1].iter().copied().sum();
                let zy = parts[d - 1];
                let den = moment_exact(&atoms, d - 1, head);
                if den > q(0, 1) && atoms.iter().all(|a| a.0 * (head + zy) != q(1, 1)) {
                    let want = f(moment_exact(&atoms, d - 1, head + zy) / den);
                    for method in [Method::GammaForm, Method::PsiForm] {
                        let k = c.markov_kernel(&x[..d - 1], x[d - 1], method).unwrap();
                        assert!(close(k.value, want, 1e-10), "{method:?}: {} vs {want}", k.value);
                    }
                }
            }

            let t = g.psi(f(zs[i])).unwrap();
            let want = f(moment_exact(&atoms, 0, zs[i]));
            assert!(close(c.kendall_cdf(t, Method::GammaForm).unwrap(), want, 1e-12));
        }
    }
}

#[test]
fn level_masses_are_atom_weights() {
    for (d, mut atoms) in laws() {
        atoms.sort();
        let c = ArchimedeanCopula::from_measure(build(d, &atoms));
        let g = c.generator().clone();
        // The smallest atom sits at 1/φ(0): its level set is {C = 0}.
        let mut total = c.level_mass(0.0, Method::GammaForm).unwrap();
        assert!(close(total, f(atoms[0].1), 1e-12));
        for &(t, w) in &atoms[1..] {
            let level = g.psi(f(q(1, 1) / t)).unwrap();
            let mass = c.level_mass(level, Method::GammaForm).unwrap();
            assert!(close(mass, f(w), 1e-12), "d={d} t={t}");
            total += mass;
        }
        assert!((total - 1.0).abs() < 1e-12, "d={d}: {total}");
    }
}
