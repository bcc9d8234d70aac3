use lrclt_core::bounds::{
    a_beta, alpha_constants, beta_c_solve, cct_b, cct_c, d_beta, grid_sup, kp_pinned_verify,
    law_charfn_modulus, lemma_constants, origin_law, series_constants, LemmaInputs, DEFAULT_GRID,
};
use lrclt_core::cluster::factorization_check;
use lrclt_core::lclt::{
    charfn_bound_check, composite_boundary, decimation_experiment, decimation_split, detect_span,
    exact_sweep, DecimationBounds, Regime,
};
use lrclt_core::polymer::{ActivityContext, ActivityKind, Bond, Cutoffs, Polymer};
use lrclt_core::{
    metropolis_run, BoundaryCondition, ExactGibbs, LatticeBox, McOptions, Model, PairPotential,
    Region, Site,
};
use num_complex::Complex64;

fn chain(n: usize) -> Region {
    Region::from_sites(1, (0..n as i64).map(|x| Site::new(vec![x]))).unwrap()
}

fn j(r: i64, alpha: f64) -> f64 {
    if r == 1 {
        1.0
    } else {
        (r as f64).powf(-2.0 + alpha)
    }
}

fn spin(label: usize) -> f64 {
    if label == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Free-boundary Ising energy on sites `0..n`, written out pair by pair.
fn chain_energy(sigma: &[usize], alpha: f64, r: i64) -> f64 {
    let mut h = 0.0;
    for a in 0..sigma.len() {
        for b in a + 1..sigma.len() {
            let d = (b - a) as i64;
            if d <= r {
                h -= j(d, alpha) * spin(sigma[a]) * spin(sigma[b]);
            }
        }
    }
    h
}

#[test]
fn mass_function_matches_histogram() {
    let (n, beta) = (7usize, 0.15);
    let m = Model::long_range_ising(1.0, 0.0, 6).unwrap();
    let g = ExactGibbs::build(&m, &chain(n), beta, &BoundaryCondition::Free).unwrap();
    let mut hist = std::collections::BTreeMap::new();
    let mut z = 0.0;
    for mask in 0..1usize << n {
        let sigma: Vec<usize> = (0..n).map(|i| mask >> i & 1).collect();
        let w = (-beta * chain_energy(&sigma, 0.0, 6)).exp();
        let s: i64 = sigma.iter().map(|l| spin(*l) as i64).sum();
        *hist.entry(s).or_insert(0.0) += w;
        z += w;
    }
    let stats = g.sk_statistics();
    assert_eq!(stats.mass.len(), hist.len());
    for (s, w) in hist {
        assert!((stats.mass[&s] - w / z).abs() < 1e-14, "S = {s}");
    }
}

#[test]
fn centered_charfn_matches_direct_sum() {
    let (n, beta, t) = (6usize, 0.1, 0.7);
    let m = Model::long_range_ising(1.0, 0.0, 6).unwrap();
    let g = ExactGibbs::build(&m, &chain(n), beta, &BoundaryCondition::Free).unwrap();
    let mut configs = Vec::new();
    let mut z = 0.0;
    for mask in 0..1usize << n {
        let sigma: Vec<usize> = (0..n).map(|i| mask >> i & 1).collect();
        let w = (-beta * chain_energy(&sigma, 0.0, 6)).exp();
        let s: f64 = sigma.iter().map(|l| spin(*l)).sum();
        configs.push((w, s));
        z += w;
    }
    let mean: f64 = configs.iter().map(|(w, s)| w * s).sum::<f64>() / z;
    let var: f64 = configs
        .iter()
        .map(|(w, s)| w * (s - mean).powi(2))
        .sum::<f64>()
        / z;
    let want: Complex64 = configs
        .iter()
        .map(|(w, s)| Complex64::from_polar(w / z, t * (s - mean) / var.sqrt()))
        .sum();
    let got = g.characteristic_function(t, true).unwrap();
    assert!((got - want).norm() < 1e-12, "{got} {want}");
}

#[test]
fn metropolis_is_seed_deterministic() {
    let m = Model::long_range_ising(1.0, 0.0, 4).unwrap();
    let opts = McOptions {
        seed: 42,
        sweeps: 2000,
        burn_in: 10,
        thinning: 3,
    };
    let a = metropolis_run(&m, &chain(5), 0.3, &BoundaryCondition::Free, opts).unwrap();
    let b = metropolis_run(&m, &chain(5), 0.3, &BoundaryCondition::Free, opts).unwrap();
    assert_eq!(a.samples, b.samples);
    let c = metropolis_run(
        &m,
        &chain(5),
        0.3,
        &BoundaryCondition::Free,
        McOptions { seed: 43, ..opts },
    )
    .unwrap();
    assert_ne!(a.samples, c.samples);
}

#[test]
fn single_site_law_with_plus_boundary() {
    // box [-2, 2], truncation 3: the site -2 sees exterior sites -3, -4, -5
    let (beta, r) = (0.3, 3u32);
    let m = Model::long_range_ising(1.0, 0.0, r).unwrap();
    let region = LatticeBox::new(1, 2).unwrap().region();
    let ctx = ActivityContext::new(
        &m,
        &region,
        beta,
        &BoundaryCondition::Constant { label: 0 },
        0.0,
        None,
    )
    .unwrap();
    let field = j(1, 0.0) + j(2, 0.0) + j(3, 0.0);
    let plus = (beta * field).exp();
    let minus = (-beta * field).exp();
    let p = ctx.single_site_density_at(&Site::new(vec![-2])).unwrap();
    assert!((p[0] - plus / (plus + minus)).abs() < 1e-14);
    assert!((p[1] - minus / (plus + minus)).abs() < 1e-14);
    // the centre sees exterior sites only at distance 3
    let field = 2.0 * j(3, 0.0);
    let p = ctx.single_site_density_at(&Site::new(vec![0])).unwrap();
    assert!((p[0] - 1.0 / (1.0 + (-2.0 * beta * field).exp())).abs() < 1e-14);
}

#[test]
fn zeta_t_of_three_site_polymer() {
    let (beta, t) = (0.1, 0.4);
    let m = Model::long_range_ising(1.0, 0.0, 6).unwrap();
    let region = chain(3);
    let bc = BoundaryCondition::Free;
    let d_k = ExactGibbs::build(&m, &region, beta, &bc)
        .unwrap()
        .sk_statistics()
        .variance;
    let ctx = ActivityContext::new(&m, &region, beta, &bc, t, Some(d_k)).unwrap();
    let r = Polymer::new(vec![
        Bond::pair(0, 1),
        Bond::pair(1, 2),
        Bond::pair(0, 2),
        Bond::Single(1),
    ])
    .unwrap();
    let u = t / d_k.sqrt();
    let mut want = Complex64::new(0.0, 0.0);
    for a in [1.0, -1.0] {
        for b in [1.0, -1.0] {
            for c in [1.0f64, -1.0] {
                let pairs = ((beta * j(1, 0.0) * a * b).exp() - 1.0)
                    * ((beta * j(1, 0.0) * b * c).exp() - 1.0)
                    * ((beta * j(2, 0.0) * a * c).exp() - 1.0);
                let single = Complex64::from_polar(1.0, u * b) - 1.0;
                want += single * pairs / 8.0;
            }
        }
    }
    let got = ctx.activity(&r, ActivityKind::ZetaT).unwrap();
    assert!((got - want).norm() < 1e-12, "{got} {want}");
}

#[test]
fn factorization_at_infinite_temperature_is_exact() {
    let m = Model::long_range_ising(1.0, 0.5, 6).unwrap();
    let rep = factorization_check(&m, &chain(5), 0.0, &BoundaryCondition::Free, 0.0).unwrap();
    assert_eq!(rep.rel_error, 0.0);
    assert_eq!(rep.lhs[0], 32.0);
}

#[test]
fn alpha_bar_against_direct_sum() {
    let (beta, c, r) = (0.02, 0.1, 50u32);
    let m = Model::long_range_ising(1.0, 0.0, r).unwrap();
    let al = alpha_constants(0.05, beta, c, &m.potential, 2, r as u64, 1.0).unwrap();
    let sum: f64 = (1..=r as i64)
        .map(|d| 2.0 * (beta * j(d, 0.0)).exp_m1())
        .sum();
    let want = (2.0 * (2.0 + c)).exp() * sum;
    assert!((al.alpha_bar_c_beta - want).abs() <= 1e-12 * want);
    let zero = alpha_constants(0.0, 0.0, c, &m.potential, 2, r as u64, 1.0).unwrap();
    assert_eq!(
        (
            zero.alpha_delta_beta,
            zero.alpha_beta,
            zero.alpha_bar_c_beta
        ),
        (0.0, 0.0, 0.0)
    );
}

#[test]
fn ising_law_vanishes_at_half_period() {
    let w = [0.5, 0.5];
    assert!(law_charfn_modulus(&w, &[1, -1], std::f64::consts::FRAC_PI_2) < 1e-16);
}

#[test]
fn c_b_grid_converges_for_plus_boundary() {
    let m = Model::long_range_ising(1.0, 0.0, 16).unwrap();
    let law = origin_law(&m, 0.1, &BoundaryCondition::Constant { label: 0 }).unwrap();
    let span = detect_span(&m.spins).unwrap();
    let top = 2.0 * std::f64::consts::PI / span.h as f64 - 0.5;
    let g = grid_sup(0.5, top, DEFAULT_GRID, |t| {
        law_charfn_modulus(&law, m.spins.f(), t)
    });
    assert!((g.sup - g.refined_sup).abs() < 1e-6);
    assert!(g.converged);
}

#[test]
fn cct_constants_vanish_with_z() {
    assert!((cct_b(0.01, 2.0).unwrap() - 0.25).abs() < 1e-15);
    for z in [1e-4, 1e-8, 1e-12] {
        assert!(cct_b(z, 3.0).unwrap() < 4.0 * z.sqrt());
        assert!(cct_c(z, 3.0).unwrap() < 2.0 * z);
    }
}

#[test]
fn d_positive_at_infinite_temperature() {
    let m = Model::long_range_ising(1.0, 0.0, 16).unwrap();
    let inp = LemmaInputs {
        delta: 0.01,
        beta: 0.0,
        c_high_t: 0.0,
        c_cam: 0.0,
        r0: 3,
        radius: 2000,
    };
    let l = lemma_constants(&m, &inp).unwrap();
    assert!(l.d_high_t.positive);
    assert_eq!(l.alpha_beta, 0.0);
    assert_eq!(d_beta(&m.spins, &m.potential, 0.0, 2000), 1.0);
}

#[test]
fn lemma_constants_re_evaluated() {
    let m = Model::long_range_ising(1.0, 0.5, 400).unwrap();
    let (delta, beta, c, radius) = (0.05, 0.02, 0.3, 400u64);
    let inp = LemmaInputs {
        delta,
        beta,
        c_high_t: c,
        c_cam: c,
        r0: 8,
        radius,
    };
    let l = lemma_constants(&m, &inp).unwrap();
    let f = m.spins.f_norm();
    let q = delta * f;
    let s = series_constants(delta, f).unwrap();
    let th = beta_c_solve(4.0 * q, &m.potential, 2, radius).unwrap();
    let dbc = d_beta(&m.spins, &m.potential, th.beta, radius);
    let a = a_beta(4.0 * q, beta, &m.potential, 2, radius)
        .unwrap()
        .pessimistic();
    let d = 0.5 * (q.cos() * dbc - delta * f.powi(3) - s.b_delta * f * f - f * f * a / q);
    assert!((l.d_high_t.value.unwrap() - d).abs() <= 1e-12 * d.abs().max(1.0));
    let ab = a_beta(0.0, beta, &m.potential, 2, radius)
        .unwrap()
        .pessimistic();
    let bar = alpha_constants(delta, beta, c, &m.potential, 2, radius, f).unwrap();
    assert_eq!(l.alpha_beta, ab);
    // alpha_constants reports partial sums; the lemma uses the pessimistic value
    assert!(l.alpha_bar_c_beta >= bar.alpha_bar_c_beta);
    let ch = c - l.alpha_beta - l.alpha_bar_c_beta;
    assert!((l.c_high_t.value.unwrap() - ch).abs() <= 1e-12);
    // Psi^{1/2} ~ r^{-3/4} is not summable on any sublattice
    assert!(!l.c_cam.positive && l.c_cam.value.is_none());
}

#[test]
fn kp_sum_at_infinite_temperature_counts_singletons() {
    let m = Model::long_range_ising(1.0, 0.0, 4).unwrap();
    let region = chain(4);
    let ctx = ActivityContext::new(&m, &region, 0.0, &BoundaryCondition::Free, 0.0, None).unwrap();
    let cut = Cutoffs {
        max_bonds: 3,
        max_pair_range: 4,
        restrict_to_r2: false,
    };
    let rep = kp_pinned_verify(&ctx, &m, 0.1, &Polymer::single(1), cut).unwrap();
    assert!((rep.lhs - 0.1 * std::f64::consts::E).abs() < 1e-15);
    let zero = Model::new(
        m.spins.clone(),
        PairPotential::zero(1, 2, 4),
        Default::default(),
    )
    .unwrap();
    let ctx =
        ActivityContext::new(&zero, &region, 0.5, &BoundaryCondition::Free, 0.0, None).unwrap();
    assert_eq!(
        kp_pinned_verify(&ctx, &zero, 0.0, &Polymer::single(1), cut)
            .unwrap()
            .lhs,
        0.0
    );
}

#[test]
fn infinite_temperature_sweep() {
    let m = Model::long_range_ising(1.0, 0.0, 8).unwrap();
    let rows = exact_sweep(&m, 0.0, &BoundaryCondition::Free, &[1, 2, 3, 4, 5, 6, 7]).unwrap();
    for r in &rows {
        assert!((r.iclt.d_k_per_site - 1.0).abs() < 1e-12);
    }
    assert!(rows
        .windows(2)
        .all(|w| w[1].iclt.kolmogorov < w[0].iclt.kolmogorov));
}

#[test]
fn charfn_at_infinite_temperature_is_a_cosine_power() {
    let m = Model::long_range_ising(1.0, 0.0, 8).unwrap();
    let region = LatticeBox::new(1, 3).unwrap().region();
    let g = ExactGibbs::build(&m, &region, 0.0, &BoundaryCondition::Free).unwrap();
    let span = detect_span(&m.spins).unwrap();
    let check = charfn_bound_check(
        &g.sk_statistics(),
        7,
        &span,
        Regime::HighT { delta: 0.5, d: 0.1 },
        257,
    )
    .unwrap();
    for p in &check.points {
        let want = (p.t / 7f64.sqrt()).cos().powi(7).abs();
        assert!((p.modulus - want).abs() < 1e-12);
    }
    let at_zero = g
        .sk_statistics()
        .characteristic_function(0.0, true)
        .unwrap();
    assert!((at_zero - 1.0).norm() < 1e-15 && at_zero.im == 0.0);
}

#[test]
fn decimation_with_one_sublattice_site() {
    let m = Model::long_range_ising(1.0, 0.0, 6).unwrap();
    let bx = LatticeBox::new(1, 2).unwrap();
    let bc = BoundaryCondition::Constant { label: 0 };
    let bounds = DecimationBounds {
        delta: 0.3,
        d_cam: None,
        c_cam: None,
    };
    let rep = decimation_experiment(&m, &bx, &bc, 0.25, 5, 6, 9, bounds, 513).unwrap();
    assert_eq!(rep.sublattice_sites, 1);
    let (_, rest) = decimation_split(&bx, 5).unwrap();
    for s in &rep.samples {
        let law = origin_law(&m, 0.25, &composite_boundary(rest.sites(), &s.omega, &bc)).unwrap();
        // for a two-point law the modulus decreases on [0, pi/2]
        let want = law_charfn_modulus(&law, m.spins.f(), 0.3);
        assert!((s.sup_modulus - want).abs() < 1e-12);
        assert_eq!(s.argmax_u, 0.3);
    }
}

#[test]
fn decimation_at_infinite_temperature_ignores_the_boundary() {
    let m = Model::long_range_ising(1.0, 0.0, 6).unwrap();
    let bx = LatticeBox::new(1, 4).unwrap();
    let bounds = DecimationBounds {
        delta: 0.3,
        d_cam: None,
        c_cam: None,
    };
    let rep = decimation_experiment(&m, &bx, &BoundaryCondition::Free, 0.0, 3, 8, 1, bounds, 129)
        .unwrap();
    let first = rep.samples[0].sup_modulus;
    assert!(rep.samples.iter().all(|s| s.sup_modulus == first));
}
