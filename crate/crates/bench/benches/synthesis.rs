use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use printax_bench::load;
use printax_core::synth::AreaTable;
use printax_core::{approximate_model, compute_phi, phi_grid, profile, prune, synth_model, CellLibrary, Interval, PruneConfig};

fn synthesis(c: &mut Criterion) {
    let lib = CellLibrary::default_printed();
    let mut g = c.benchmark_group("synthesis");
    for (ds, kind) in [("balance_scale", "mlp_c"), ("redwine", "svm_c"), ("iris", "svm_r")] {
        let (q, train, _) = load(ds, kind);
        let id = format!("{ds}/{kind}");
        g.bench_function(BenchmarkId::new("synth_model", &id), |b| b.iter(|| synth_model(&q)));
        let n = synth_model(&q);
        g.bench_function(BenchmarkId::new("const_propagate", &id), |b| b.iter(|| n.const_propagate()));
        let p = profile(&n, &train.features).unwrap();
        let sig = compute_phi(&n);
        let phi_c = *phi_grid(&p, &sig, 0.9).last().unwrap();
        let cfg = PruneConfig { tau_c: 0.9, phi_c };
        g.bench_function(BenchmarkId::new("prune", &id), |b| b.iter(|| prune(&n, &p, &sig, cfg).unwrap()));
    }
    g.sample_size(10);
    g.bench_function("area_table_8bit", |b| b.iter(|| AreaTable::new(-128, 127, Interval::new(0, 15), &lib)));
    let (q, _, _) = load("balance_scale", "mlp_c");
    g.bench_function("coeff_approx/balance_scale/mlp_c", |b| b.iter(|| approximate_model(&q, 4, &lib, false)));
    g.finish();
}

criterion_group!(benches, synthesis);
criterion_main!(benches);
