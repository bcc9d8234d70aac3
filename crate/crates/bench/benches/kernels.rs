use criterion::{black_box, criterion_group, criterion_main, Criterion};
use lrclt_core::cluster::{
    full_family_partition_function, truncated_log_series, ursell, SeriesOptions,
};
use lrclt_core::lclt::{detect_span, integral_decomposition, lclt_discrepancy};
use lrclt_core::polymer::{enumerate_polymers, ActivityContext, ActivityKind, Cutoffs};
use lrclt_core::{metropolis_run, BoundaryCondition, ExactGibbs, LatticeBox, McOptions, Model};

fn model() -> Model {
    Model::long_range_ising(1.0, 0.0, 16).unwrap()
}

fn gibbs(c: &mut Criterion) {
    let m = model();
    let region = LatticeBox::new(1, 6).unwrap().region();
    c.bench_function("exact_gibbs_13_sites", |b| {
        b.iter(|| ExactGibbs::build(&m, &region, black_box(0.1), &BoundaryCondition::Free).unwrap())
    });
    let small = LatticeBox::new(1, 4).unwrap().region();
    let opts = McOptions {
        seed: 1,
        sweeps: 10_000,
        burn_in: 100,
        thinning: 1,
    };
    c.bench_function("metropolis_9_sites_10k_sweeps", |b| {
        b.iter(|| metropolis_run(&m, &small, 0.2, &BoundaryCondition::Free, opts).unwrap())
    });
}

fn expansion(c: &mut Criterion) {
    let m = model();
    let region = LatticeBox::new(1, 2).unwrap().region();
    let g = ExactGibbs::build(&m, &region, 0.2, &BoundaryCondition::Free).unwrap();
    let d = g.sk_statistics().variance;
    let ctx =
        ActivityContext::new(&m, &region, 0.2, &BoundaryCondition::Free, 0.5, Some(d)).unwrap();
    c.bench_function("full_family_xi_5_sites", |b| {
        b.iter(|| full_family_partition_function(&ctx).unwrap())
    });
    let cut = Cutoffs {
        max_bonds: 3,
        max_pair_range: 16,
        restrict_to_r2: false,
    };
    c.bench_function("enumerate_polymers_5_sites", |b| {
        b.iter(|| enumerate_polymers(&region, 16, cut).unwrap())
    });
    let family = enumerate_polymers(
        &region,
        16,
        Cutoffs {
            max_bonds: 2,
            ..cut
        },
    )
    .unwrap();
    let tuple = vec![
        family[3].clone(),
        family[7].clone(),
        family[11].clone(),
        family[3].clone(),
    ];
    c.bench_function("ursell_4_tuple", |b| {
        b.iter(|| ursell(black_box(&tuple)).unwrap())
    });
    c.bench_function("log_series_order_2", |b| {
        b.iter(|| {
            truncated_log_series(&ctx, &family, ActivityKind::ZetaT, &SeriesOptions::plain(2))
                .unwrap()
        })
    });
}

fn lclt(c: &mut Criterion) {
    let m = model();
    let region = LatticeBox::new(1, 5).unwrap().region();
    let stats = ExactGibbs::build(&m, &region, 0.1, &BoundaryCondition::Free)
        .unwrap()
        .sk_statistics();
    let span = detect_span(&m.spins).unwrap();
    c.bench_function("lclt_table_11_sites", |b| {
        b.iter(|| lclt_discrepancy(&stats, 11, &span).unwrap())
    });
    c.bench_function("integral_decomposition_4096", |b| {
        b.iter(|| integral_decomposition(&stats, &span, 3.0, 1.0, 4096).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = gibbs, expansion, lclt
}
criterion_main!(benches);
