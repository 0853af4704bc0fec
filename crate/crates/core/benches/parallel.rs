use std::hint::black_box;
use std::sync::Arc;

use bergman_lab::atomic::{sampling_check, SequenceSpaceParams};
use bergman_lab::bergman::builtin_family;
use bergman_lab::hilbert::norm_estimate;
use bergman_lab::lattice::{build_lattice, covering_audit, sample_sets, LatticeConfig};
use bergman_lab::par;
use bergman_lab::quadrature::{mixed_norm_fn, PanelScheme, SpaceParams};
use bergman_lab::weights::WeightSpec;
use criterion::{criterion_group, criterion_main, Criterion};

fn compare<R>(c: &mut Criterion, name: &str, op: impl Fn() -> R + Send + Sync)
where
    R: Send,
{
    let mut g = c.benchmark_group(name);
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| black_box(op())));
    g.bench_function("sequential", |b| b.iter(|| black_box(par::sequential(&op))));
    g.finish();
}

fn benches(c: &mut Criterion) {
    let spec = WeightSpec::trivial();
    let params = SpaceParams::new(2.0, 2.0, 0.0, 0.0).unwrap();
    let scheme = PanelScheme { j_lo: -30, j_hi: 30, nodes_per_panel: 4, panels_per_octave: 2 };
    compare(c, "norm_estimate", || norm_estimate(&params, &spec, &scheme).unwrap().value);

    let f = Arc::new(builtin_family()[0].clone());
    let mixed = SpaceParams::new(1.5, 3.0, 0.5, 0.5).unwrap();
    compare(c, "mixed_norm", || mixed_norm_fn(f.clone(), &mixed, &spec, &PanelScheme::default()).unwrap().norm);

    let lat = build_lattice(&LatticeConfig::symmetric(0.3, 200, 40).unwrap());
    let samples = sample_sets(&lat, 20_000, 1);
    compare(c, "covering_audit", || covering_audit(&lat, &samples).all_pass());

    let lat = build_lattice(&LatticeConfig::symmetric(0.3, 400_000, 2000).unwrap());
    let sp = SequenceSpaceParams::for_lattice(2.0, 2.0, 0.0, &spec, &lat).unwrap();
    let g = builtin_family()[1].clone();
    compare(c, "sampling_check", || sampling_check(&g, &lat, &sp, &PanelScheme::default()).unwrap().normalized);
}

criterion_group!(parallel, benches);
criterion_main!(parallel);
