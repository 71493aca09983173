use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use tmce_core::{
    build_domain, energy_gradient, relaxed_energy, solve_indicator, solve_nodal, subgraph_indicator,
    weighted_perimeter, DomainSpec, ScalarField, SolverConfig,
};

fn bowl(mesh: &tmce_core::DomainMesh) -> ScalarField {
    ScalarField::new(
        (0..mesh.n_nodes())
            .map(|v| {
                let [x, y] = mesh.param_coords(v);
                0.5 * (x * x + y * y)
            })
            .collect(),
    )
}

fn energy(c: &mut Criterion) {
    let mut g = c.benchmark_group("energy");
    for h in [1.0 / 32.0, 1.0 / 64.0] {
        let mesh = build_domain(DomainSpec::EuclideanDisk { r: 1.0 }, h).unwrap();
        let u = bowl(&mesh);
        let psi = ScalarField::constant(mesh.n_nodes(), 0.0);
        g.bench_with_input(BenchmarkId::new("relaxed_energy", mesh.n_nodes()), &u, |b, u| {
            b.iter(|| relaxed_energy(&mesh, black_box(u), &psi, 1.0).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("energy_gradient", mesh.n_nodes()), &u, |b, u| {
            b.iter(|| energy_gradient(&mesh, black_box(u), &psi, 1.0, 1e-3).unwrap())
        });
    }
    g.finish();
}

fn perimeter(c: &mut Criterion) {
    let mesh = build_domain(DomainSpec::EuclideanSquare { l: 1.0 }, 1.0 / 32.0).unwrap();
    let u = bowl(&mesh);
    let ind = subgraph_indicator(&mesh, &u, 1.0, 1.0 / 32.0, 1.0).unwrap();
    c.bench_function("weighted_perimeter_32x32x64", |b| {
        b.iter(|| weighted_perimeter(black_box(&ind)).unwrap())
    });
}

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    let interval = build_domain(DomainSpec::Interval { a: 1.0 }, 1.0 / 256.0).unwrap();
    let psi = ScalarField::new(
        (0..interval.n_nodes())
            .map(|v| -interval.param_coords(v)[0].cos().ln())
            .collect(),
    );
    let config = SolverConfig {
        cap_schedule: vec![5.0],
        ..SolverConfig::default()
    };
    g.bench_function("nodal_grim_reaper_h256", |b| {
        b.iter(|| solve_nodal(&interval, black_box(&psi), 1.0, &config).unwrap())
    });
    let disk = build_domain(DomainSpec::EuclideanDisk { r: 1.0 }, 1.0 / 32.0).unwrap();
    let zero = ScalarField::constant(disk.n_nodes(), 0.0);
    g.bench_function("nodal_disk_h32", |b| {
        b.iter(|| solve_nodal(&disk, black_box(&zero), 1.0, &config).unwrap())
    });
    let coarse = build_domain(DomainSpec::Interval { a: 1.0 }, 1.0 / 16.0).unwrap();
    let psi = ScalarField::new(
        (0..coarse.n_nodes())
            .map(|v| -coarse.param_coords(v)[0].cos().ln())
            .collect(),
    );
    let ind_config = SolverConfig {
        h_r: 1.0 / 16.0,
        ..SolverConfig::default()
    };
    g.bench_function("indicator_interval_h16", |b| {
        b.iter(|| solve_indicator(&coarse, black_box(&psi), 1.0, &ind_config).unwrap())
    });
    g.finish();
}

criterion_group!(benches, energy, perimeter, solvers);
criterion_main!(benches);
