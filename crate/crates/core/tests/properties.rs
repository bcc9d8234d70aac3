use std::collections::BTreeMap;

use lrclt_core::bounds::{a_beta, alpha_constants, d_beta, origin_law, sample_boundaries};
use lrclt_core::cluster::ursell;
use lrclt_core::lclt::{detect_span, kolmogorov_distance, lclt_discrepancy};
use lrclt_core::polymer::{enumerate_polymers, ActivityContext, ActivityKind, Cutoffs, Polymer};
use lrclt_core::{
    hamiltonian, potential_norm, BoundaryCondition, Coupling, ExactGibbs, Model, PairConvention,
    PairPotential, Region, Site, SpinSpace,
};
use proptest::prelude::*;

fn chain_at(start: i64, n: usize) -> Region {
    Region::from_sites(1, (start..start + n as i64).map(|x| Site::new(vec![x]))).unwrap()
}

fn three_state(ratio: f64, r: u32) -> Model {
    let spins = SpinSpace::new(
        vec!["a".into(), "b".into(), "c".into()],
        vec![1.0, 2.0, 0.5],
        vec![-1, 0, 2],
    )
    .unwrap();
    let phi = PairPotential::product(
        1,
        Coupling::Geometric {
            amplitude: 1.0,
            ratio,
        },
        vec![-1.0, 0.0, 2.0],
        r,
    )
    .unwrap();
    Model::new(spins, phi, PairConvention::Unordered).unwrap()
}

fn explicit_bc(labels: &[usize], from: i64) -> BoundaryCondition {
    BoundaryCondition::Explicit {
        spins: labels
            .iter()
            .enumerate()
            .map(|(i, l)| (Site::new(vec![from + i as i64]), *l))
            .collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hamiltonian_is_translation_invariant(
        n in 1usize..6,
        shift in -20i64..20,
        sigma in prop::collection::vec(0usize..3, 6),
        ext in prop::collection::vec(0usize..3, 40),
        alpha_ratio in 0.1f64..0.6,
    ) {
        let m = three_state(alpha_ratio, 4);
        let sigma = &sigma[..n];
        // exterior labels on [-20, 20) cover every site within range 4 of the chain
        let bc = explicit_bc(&ext, -20);
        let h0 = hamiltonian(&m, &chain_at(0, n), sigma, &bc).unwrap();
        let h1 = hamiltonian(&m, &chain_at(shift, n), sigma, &bc.translated(&[shift])).unwrap();
        prop_assert!((h0 - h1).abs() <= 1e-12 * (1.0 + h0.abs()), "{h0} {h1}");
    }

    #[test]
    fn ising_free_hamiltonian_is_flip_symmetric(
        sigma in prop::collection::vec(0usize..2, 1..9),
        alpha in 0.0f64..0.99,
    ) {
        let m = Model::long_range_ising(1.0, alpha, 8).unwrap();
        let region = chain_at(0, sigma.len());
        let flipped: Vec<usize> = sigma.iter().map(|s| 1 - s).collect();
        let h = hamiltonian(&m, &region, &sigma, &BoundaryCondition::Free).unwrap();
        let hf = hamiltonian(&m, &region, &flipped, &BoundaryCondition::Free).unwrap();
        prop_assert!((h - hf).abs() <= 1e-12 * (1.0 + h.abs()));
    }

    #[test]
    fn norm_partial_sums_grow_below_tail_bound(alpha in 0.0f64..0.95, r in 1u64..200) {
        let phi = PairPotential::long_range_ising(1.0, alpha, 1).unwrap();
        let a = potential_norm(&phi, r);
        let b = potential_norm(&phi, 2 * r + 7);
        prop_assert!(b.partial_sum >= a.partial_sum);
        let tail = a.tail.pessimistic().unwrap();
        prop_assert!(b.partial_sum <= a.partial_sum + tail + 1e-12);
    }

    #[test]
    fn exact_gibbs_is_normalized_with_bounded_charfn(
        n in 1usize..7,
        beta in 0.0f64..1.0,
        plus in any::<bool>(),
        ts in prop::collection::vec(-10.0f64..10.0, 8),
    ) {
        let m = Model::long_range_ising(1.0, 0.5, 5).unwrap();
        let bc = if plus { BoundaryCondition::Constant { label: 0 } } else { BoundaryCondition::Free };
        let g = ExactGibbs::build(&m, &chain_at(0, n), beta, &bc).unwrap();
        let total: f64 = (0..g.n_configs()).map(|i| g.probability(i)).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        let stats = g.sk_statistics();
        prop_assert!((stats.mass.values().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(stats.variance >= 0.0);
        let sd = stats.variance.sqrt();
        for t in ts {
            let c = stats.characteristic_function(t, true).unwrap();
            prop_assert!(c.norm() <= 1.0 + 1e-12);
            // centring only changes the phase
            prop_assert!((c.norm() - stats.raw_charfn(t / sd).norm()).abs() <= 1e-12);
        }
        if !plus {
            for (s, p) in &stats.mass {
                let q = stats.mass.get(&-s).copied().unwrap_or(0.0);
                prop_assert!((p - q).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn activity_bounds_on_enumerated_polymers(
        beta in 0.0f64..0.4,
        frac in -0.99f64..0.99,
        c in 0.0f64..2.0,
        plus in any::<bool>(),
    ) {
        let m = Model::long_range_ising(1.0, 0.0, 4).unwrap();
        let region = chain_at(0, 4);
        let bc = if plus { BoundaryCondition::Constant { label: 1 } } else { BoundaryCondition::Free };
        let d_k = ExactGibbs::build(&m, &region, beta, &bc).unwrap().sk_statistics().variance;
        let delta = 0.3;
        let t = frac * delta * d_k.sqrt();
        let ctx = ActivityContext::new(&m, &region, beta, &bc, t, Some(d_k)).unwrap();
        let family = enumerate_polymers(&region, 4, Cutoffs { max_bonds: 3, max_pair_range: 4, restrict_to_r2: false }).unwrap();
        let q = delta * m.spins.f_norm();
        for r in &family {
            let zt = ctx.activity(r, ActivityKind::ZetaT).unwrap().norm();
            let hat2 = ctx.activity(&r.gamma2_polymer(), ActivityKind::ZetaHat).unwrap().re;
            prop_assert!(zt <= q.powi(r.n_singles() as i32) * hat2 * (1.0 + 1e-12) + 1e-15, "{r:?}");
            if r.is_pair_only() {
                let hat = ctx.activity(r, ActivityKind::ZetaHat).unwrap().re;
                let tilde = ctx.activity(r, ActivityKind::ZetaTilde).unwrap().norm();
                prop_assert!(tilde <= hat * (1.0 + 1e-12) + 1e-15);
                let eta = ctx.activity(r, ActivityKind::EtaC(c)).unwrap().re;
                let want = (c * r.support().len() as f64).exp() * hat;
                prop_assert!((eta - want).abs() <= 1e-12 * want.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn ursell_is_permutation_invariant(
        picks in prop::collection::vec(0usize..1000, 2..5),
        perm_seed in any::<u64>(),
    ) {
        let region = chain_at(0, 5);
        let family = enumerate_polymers(&region, 5, Cutoffs { max_bonds: 2, max_pair_range: 5, restrict_to_r2: false }).unwrap();
        let tuple: Vec<Polymer> = picks.iter().map(|i| family[i % family.len()].clone()).collect();
        let mut shuffled = tuple.clone();
        // a fixed rotation plus a swap chosen by the seed
        shuffled.rotate_left((perm_seed % tuple.len() as u64) as usize);
        let last = shuffled.len() - 1;
        shuffled.swap(0, last);
        prop_assert_eq!(ursell(&tuple).unwrap(), ursell(&shuffled).unwrap());
    }

    #[test]
    fn single_site_density_lower_bound(beta in 0.0f64..0.5, seed in any::<u64>()) {
        let m = three_state(0.4, 6);
        let norm = potential_norm(&m.potential, 6).partial_sum;
        let floor = (-2.0 * beta * norm).exp();
        let total = m.spins.total_mass();
        for bc in sample_boundaries(&m, 4, seed) {
            let p = origin_law(&m, beta, &bc).unwrap();
            for (e, pe) in p.iter().enumerate() {
                prop_assert!(pe * total / m.spins.weights()[e] >= floor * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn constants_are_monotone_in_beta(b1 in 0.0f64..0.3, b2 in 0.0f64..0.3, alpha in 0.0f64..0.9) {
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let m = Model::long_range_ising(1.0, alpha, 30).unwrap();
        let phi = &m.potential;
        let f = m.spins.f_norm();
        prop_assert!(a_beta(0.1, lo, phi, 2, 30).unwrap().partial <= a_beta(0.1, hi, phi, 2, 30).unwrap().partial);
        let (x, y) = (
            alpha_constants(0.05, lo, 0.1, phi, 2, 30, f).unwrap(),
            alpha_constants(0.05, hi, 0.1, phi, 2, 30, f).unwrap(),
        );
        prop_assert!(x.alpha_delta_beta <= y.alpha_delta_beta);
        prop_assert!(x.alpha_bar_c_beta <= y.alpha_bar_c_beta);
        prop_assert!(d_beta(&m.spins, phi, lo, 30) >= d_beta(&m.spins, phi, hi, 30));
    }

    #[test]
    fn span_and_lclt_table(n in 1usize..7, beta in 0.0f64..0.5, plus in any::<bool>()) {
        let m = three_state(0.3, 3);
        let bc = if plus { BoundaryCondition::Constant { label: 2 } } else { BoundaryCondition::Free };
        let g = ExactGibbs::build(&m, &chain_at(0, n), beta, &bc).unwrap();
        let stats = g.sk_statistics();
        let span = detect_span(&m.spins).unwrap();
        for s in stats.mass.keys() {
            let rel = s - n as i64 * span.a;
            prop_assert!(rel % span.h == 0 && rel >= 0 && rel <= n as i64 * span.q * span.h);
        }
        let table = lclt_discrepancy(&stats, n, &span).unwrap();
        let total: f64 = table.cells.iter().map(|c| c.p).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(table.cells.iter().all(|c| c.discrepancy >= 0.0));
        prop_assert_eq!(table.cells.len() as i64, n as i64 * span.q + 1);
        let ks = kolmogorov_distance(&stats).unwrap();
        prop_assert!((0.0..=1.0).contains(&ks));
    }
}

#[test]
fn enumeration_is_deterministic() {
    let region = chain_at(-2, 5);
    let cut = Cutoffs {
        max_bonds: 3,
        max_pair_range: 3,
        restrict_to_r2: false,
    };
    let a = enumerate_polymers(&region, 3, cut).unwrap();
    let b = enumerate_polymers(&region, 3, cut).unwrap();
    assert_eq!(a, b);
    let mut seen = BTreeMap::new();
    for p in &a {
        assert!(
            seen.insert(format!("{p:?}"), ()).is_none(),
            "duplicate {p:?}"
        );
    }
}

#[test]
fn singletons_vanish_at_t_zero() {
    let m = Model::long_range_ising(1.0, 0.0, 4).unwrap();
    let region = chain_at(0, 4);
    let ctx = ActivityContext::new(&m, &region, 0.2, &BoundaryCondition::Free, 0.0, None).unwrap();
    let family = enumerate_polymers(
        &region,
        4,
        Cutoffs {
            max_bonds: 3,
            max_pair_range: 4,
            restrict_to_r2: false,
        },
    )
    .unwrap();
    for r in &family {
        let z = ctx.activity(r, ActivityKind::ZetaT).unwrap();
        if r.n_singles() > 0 {
            assert_eq!(z.norm(), 0.0, "{r:?}");
        }
    }
}
