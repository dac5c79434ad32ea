use std::collections::HashSet;
use std::f64::consts::PI;

use ilwlab_core::evolve::{solve, EvolutionProblem, Nonlinearity, Stepper};
use ilwlab_core::normalform::{
    edelta_majorant, enumerate_trees, eval_bilinear, eval_multilinear, measure_bounds, n2_tilde,
    reconstruct, set_membership, verify_step1, IndexAssignment, LatticeVector, Membership,
    NfParams, OperatorKind, OrderedTree,
};
use ilwlab_core::spectral::{Grid, SpectralField};
use ilwlab_core::symbols::{phi_delta, DispersionSymbol};
use ilwlab_core::Error;
use num_complex::Complex64;

fn cos_field(m: usize) -> SpectralField {
    let grid = Grid::new(m).unwrap();
    SpectralField::from_fn(grid, f64::cos).galilean_reduce().0
}

fn leaf_tuples(n: usize, cut: i64, total: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; n];
    fn rec(k: usize, n: usize, cut: i64, total: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if k + 1 == n {
            let last = total - cur[..k].iter().sum::<i64>();
            if last.abs() <= cut {
                cur[k] = last;
                out.push(cur.clone());
            }
            return;
        }
        for f in -cut..=cut {
            cur[k] = f;
            rec(k + 1, n, cut, total, cur, out);
        }
    }
    rec(0, n, cut, total, &mut cur, &mut out);
    out
}

// Sum over every index assignment of every tree, membership decided by set_membership.
fn brute_force(kind: OperatorKind, j: usize, t: f64, u: &SpectralField, params: &NfParams, xi: i64) -> Complex64 {
    let cut = params.lattice_cut;
    let mut total = Complex64::new(0.0, 0.0);
    for tree in enumerate_trees(j).unwrap() {
        for leaves in leaf_tuples(j + 1, cut, xi) {
            let a = IndexAssignment::new(&tree, &leaves).unwrap();
            if !a.all_nonzero() || a.max_abs() > cut {
                continue;
            }
            let ok = (1..=j).all(|k| {
                let m = set_membership(&a, k, params).unwrap();
                if k < j {
                    return m == Membership::NonResonant;
                }
                match kind {
                    OperatorKind::N0 | OperatorKind::N2 => m == Membership::NonResonant,
                    OperatorKind::N1 => m == Membership::Resonant,
                    OperatorKind::Full | OperatorKind::Edelta => true,
                }
            });
            if !ok {
                continue;
            }
            let numer: f64 = (1..=j).map(|k| a.triple(k).0 as f64).product();
            let last = if kind == OperatorKind::N0 { j } else { j - 1 };
            let denom: f64 = (1..=last).map(|k| a.mu_tilde(k)).product();
            let phase = if kind == OperatorKind::Edelta {
                let (x, x1, x2) = a.triple(j);
                phi_delta(t, x as f64, x1 as f64, x2 as f64, params.delta.unwrap()).unwrap()
                    * Complex64::from_polar(1.0, t * a.mu_tilde(j - 1))
            } else {
                Complex64::from_polar(1.0, t * a.mu_tilde(j))
            };
            let prod: Complex64 = leaves.iter().map(|&f| u.coeff(f)).product();
            total += phase * prod * (numer / denom);
        }
    }
    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
    let unit = if kind == OperatorKind::N0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(0.0, 1.0)
    };
    total * unit * sign * (2.0 * PI).powf(-(j as f64) / 2.0)
}

#[test]
fn tree_counts_are_factorials() {
    let mut fact = 1usize;
    for j in 1..=6 {
        fact *= j;
        let trees = enumerate_trees(j).unwrap();
        assert_eq!(trees.len(), fact);
        let distinct: HashSet<Vec<usize>> = trees.iter().map(|t| t.chronicle().to_vec()).collect();
        assert_eq!(distinct.len(), fact);
        for t in &trees {
            assert_eq!(t.generations(), j);
            assert_eq!(&OrderedTree::from_chronicle(t.chronicle()).unwrap(), t);
        }
    }
    assert!(matches!(enumerate_trees(7), Err(Error::CostGuard { .. })));
}

#[test]
fn operators_match_brute_force_enumeration() {
    let grid = Grid::new(32).unwrap();
    let u = SpectralField::random_band_limited(grid, 10, 5).unwrap();
    let params = NfParams::new(1.0, 10).unwrap().with_delta(0.3).unwrap();
    let kinds = [
        OperatorKind::N0,
        OperatorKind::N1,
        OperatorKind::N2,
        OperatorKind::Full,
        OperatorKind::Edelta,
    ];
    for j in 1..=2 {
        for kind in kinds {
            let fast = eval_multilinear(kind, j, 0.37, &u, &params).unwrap();
            for xi in -10..=10 {
                let slow = brute_force(kind, j, 0.37, &u, &params, xi);
                let d = (fast.get(xi) - slow).norm();
                assert!(d <= 1e-12 * (1.0 + slow.norm()), "{kind:?} j={j} xi={xi}: {d:e}");
            }
        }
    }
}

#[test]
fn third_generation_matches_brute_force() {
    let grid = Grid::new(16).unwrap();
    let u = SpectralField::random_band_limited(grid, 7, 8).unwrap();
    let params = NfParams::new(1.0, 7).unwrap().with_delta(0.3).unwrap();
    for kind in [OperatorKind::N0, OperatorKind::N1, OperatorKind::Full, OperatorKind::Edelta] {
        let fast = eval_multilinear(kind, 3, 0.2, &u, &params).unwrap();
        for xi in [-7, -3, 1, 2, 6] {
            let slow = brute_force(kind, 3, 0.2, &u, &params, xi);
            assert!((fast.get(xi) - slow).norm() <= 1e-12 * (1.0 + slow.norm()), "{kind:?} xi={xi}");
        }
    }
}

#[test]
fn nonresonant_chains_have_nonzero_phases() {
    let params = NfParams::new(1.0, 16).unwrap();
    for tree in enumerate_trees(2).unwrap() {
        for xi in 1..=16 {
            for leaves in leaf_tuples(3, 16, xi) {
                let a = IndexAssignment::new(&tree, &leaves).unwrap();
                if !a.all_nonzero() || a.max_abs() > 16 {
                    continue;
                }
                for (k, &node) in tree.expanded().iter().enumerate() {
                    let (x, x1, x2) = a.triple(k + 1);
                    let (l, r) = tree.nodes()[node].children.unwrap();
                    assert_eq!(x, a.freq(l) + a.freq(r));
                    assert_eq!((x1, x2), (a.freq(l), a.freq(r)));
                }
                let chain = (1..=2).take_while(|&k| set_membership(&a, k, &params).unwrap() == Membership::NonResonant);
                for k in chain {
                    assert!(a.mu(k) != 0.0 && a.mu_tilde(k) != 0.0);
                }
            }
        }
    }
}

#[test]
fn partition_identities_hold() {
    let grid = Grid::new(32).unwrap();
    let kc = grid.dealias_cut();
    let params = NfParams::new(1.0, kc).unwrap();
    for seed in 0..3u64 {
        let w = SpectralField::random_band_limited(grid, kc, seed).unwrap();
        let t = 0.3;
        let b = eval_bilinear(t, &w);
        let full = eval_multilinear(OperatorKind::Full, 1, t, &w, &params).unwrap();
        for j in 1..=3 {
            let f = eval_multilinear(OperatorKind::Full, j, t, &w, &params).unwrap();
            let n1 = eval_multilinear(OperatorKind::N1, j, t, &w, &params).unwrap();
            let n2 = eval_multilinear(OperatorKind::N2, j, t, &w, &params).unwrap();
            assert!(f.sub(&n1.add(&n2)).sup() <= 1e-12 * (1.0 + f.sup()), "j={j}");
        }
        for xi in -kc..=kc {
            assert!((b.get(xi) - full.get(xi)).norm() < 1e-12);
        }
    }
}

#[test]
fn bilinear_term_is_the_solver_nonlinearity() {
    let grid = Grid::new(32).unwrap();
    let kc = grid.dealias_cut();
    let w = SpectralField::random_band_limited(grid, kc, 21).unwrap();
    let symbol = DispersionSymbol::kdv();
    let stepper = Stepper::new(grid, symbol, 1e-3, Nonlinearity::Quadratic);
    for t in [0.0, 0.13, 0.5] {
        let v = ilwlab_core::evolve::from_interaction(&w, t, &symbol);
        let rhs = SpectralField::from_coeffs(grid, stepper.nonlinear_term(v.coeffs())).unwrap();
        let rhs = ilwlab_core::evolve::to_interaction(&rhs, t, &symbol);
        let b = eval_bilinear(t, &w);
        for xi in -kc..=kc {
            assert!((b.get(xi) - rhs.coeff(xi)).norm() < 1e-10, "t={t} xi={xi}");
        }
    }
}

#[test]
fn error_operator_vanishes_at_time_zero_and_small_depth() {
    let grid = Grid::new(32).unwrap();
    let w = SpectralField::random_band_limited(grid, 10, 3).unwrap();
    let p = NfParams::new(1.0, 10).unwrap().with_delta(0.3).unwrap();
    assert_eq!(eval_multilinear(OperatorKind::Edelta, 1, 0.0, &w, &p).unwrap().sup(), 0.0);
    let tiny = NfParams::new(1.0, 10).unwrap().with_delta(1e-6).unwrap();
    for j in 1..=2 {
        let e = eval_multilinear(OperatorKind::Edelta, j, 0.3, &w, &tiny).unwrap();
        assert!(e.norm() < 1e-6, "j={j}: {:e}", e.norm());
    }
}

#[test]
fn error_operator_decreases_with_depth() {
    let u = cos_field(16);
    let mut prev = f64::INFINITY;
    for delta in [0.4, 0.2, 0.1, 0.05] {
        let p = NfParams::new(1.0, 8).unwrap().with_delta(delta).unwrap();
        let e = eval_multilinear(OperatorKind::Edelta, 1, 0.1, &u, &p).unwrap().norm();
        let bound = edelta_majorant(0.1, &u, &p).unwrap();
        assert!(e < prev, "delta {delta}: {e:e} >= {prev:e}");
        assert!(e <= bound * (1.0 + 1e-12), "delta {delta}: {e:e} > {bound:e}");
        prev = e;
    }
}

#[test]
fn step_one_residual_is_second_order() {
    let u = cos_field(32);
    let p = NfParams::new(1.0, 10).unwrap();
    let mut residuals = Vec::new();
    for every in [4usize, 2, 1] {
        let pr = EvolutionProblem::new(DispersionSymbol::kdv(), u.clone(), 0.02, 2.5e-5, every).unwrap();
        let traj = solve(&pr).unwrap();
        residuals.push(verify_step1(&traj, &p, 0.01).unwrap());
    }
    assert!(residuals.iter().all(|&r| r < 1e-4));
    for w in residuals.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.0..=5.0).contains(&ratio), "{residuals:?}");
    }
}

#[test]
fn reconstruction_within_budget() {
    let u = cos_field(32);
    let p = NfParams::new(1.0, 10).unwrap();
    let pr = EvolutionProblem::new(DispersionSymbol::kdv(), u, 0.25, 1e-3, 1).unwrap();
    let traj = solve(&pr).unwrap();
    assert_eq!(reconstruct(&traj, 2, &p, 0.0).unwrap().residual, 0.0);
    let one = reconstruct(&traj, 1, &p, 0.25).unwrap();
    let two = reconstruct(&traj, 2, &p, 0.25).unwrap();
    assert!(two.residual <= 10.0 * two.budget(), "{two:?}");
    assert!(two.residual <= one.residual, "{one:?} {two:?}");
}

#[test]
fn normal_form_checks_need_kdv() {
    let u = cos_field(32);
    let p = NfParams::new(1.0, 10).unwrap();
    let pr = EvolutionProblem::new(DispersionSymbol::benjamin_ono(), u, 0.01, 1e-3, 1).unwrap();
    let traj = solve(&pr).unwrap();
    assert!(matches!(verify_step1(&traj, &p, 0.005), Err(Error::Config(_))));
    assert!(matches!(reconstruct(&traj, 1, &p, 0.005), Err(Error::Config(_))));
}

#[test]
fn generation_cap_and_cost_guard() {
    let u = cos_field(32);
    let p = NfParams::new(1.0, 10).unwrap();
    assert!(matches!(eval_multilinear(OperatorKind::Full, 4, 0.0, &u, &p), Err(Error::Config(_))));
    assert!(NfParams::new(1.0, 10).unwrap().with_max_gen(5).is_err());
    let wide = NfParams::new(1.0, 200).unwrap().with_max_gen(4).unwrap();
    assert!(matches!(eval_multilinear(OperatorKind::Full, 4, 0.0, &u, &wide), Err(Error::CostGuard { .. })));
    assert!(NfParams::new(0.5, 10).is_err());
}

#[test]
fn bound_trends() {
    let k2 = NfParams::new(2.0, 16).unwrap();
    let one = measure_bounds(1, &k2, 4, 7).unwrap();
    let two = measure_bounds(2, &k2, 4, 7).unwrap();
    assert_eq!(one.samples, 4);
    assert!(one.n2_tilde_sup > 0.0);
    assert!(two.n2_tilde_sup <= one.n2_tilde_sup, "{one:?} {two:?}");

    let grid = Grid::new(34).unwrap();
    let fields: Vec<SpectralField> = (0..4)
        .map(|s| SpectralField::random_band_limited(grid, 16, 7 + s).unwrap())
        .collect();
    let norm = |k: f64| -> f64 {
        let p = NfParams::new(k, 16).unwrap();
        fields
            .iter()
            .map(|u| eval_multilinear(OperatorKind::N0, 1, 0.0, u, &p).unwrap().norm())
            .fold(0.0, f64::max)
    };
    assert!(norm(2.0) <= norm(1.0));
    let n2 = n2_tilde(1, 0.0, &fields[0], &k2).unwrap();
    assert_eq!(n2.get(0), Complex64::new(0.0, 0.0));
}

#[test]
fn lattice_vector_arithmetic() {
    let mut a = LatticeVector::zeros(2);
    a.set(1, Complex64::new(3.0, 0.0));
    a.set(-1, Complex64::new(0.0, 4.0));
    assert_eq!(a.norm(), 5.0);
    assert_eq!(a.sup(), 4.0);
    let b = a.scale(2.0).sub(&a);
    assert_eq!(b, a);
    assert_eq!(a.get(7), Complex64::new(0.0, 0.0));
    let wide = LatticeVector::zeros(4).add(&a);
    assert_eq!(wide.cut(), 4);
    assert_eq!(wide.get(1), a.get(1));
}
