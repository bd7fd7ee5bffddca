use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use debris_twin_bench::{fuse, grid, scene, tables, GRID_SIZE, PATCH, THRESHOLD};
use debris_twin_core::projection::{build_depth_maps, default_eps, project_labels};
use debris_twin_core::risk::build_risk_maps;
use debris_twin_core::volumetry::{cluster_instances, register_ground, resample};

fn stages(c: &mut Criterion) {
    let s = scene(3, 800.0);
    let maps = build_depth_maps(&s.scene.cloud.points, &s.scene.cameras, PATCH);
    let eps = default_eps(&s.scene.cloud.points);
    let cloud = fuse(&s);
    let plane = register_ground(&cloud, THRESHOLD, 1000, 0).unwrap();
    let (g, instances) = grid(&cloud);
    let (classes, materials, winds) = tables();

    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("depth_maps", |b| {
        b.iter(|| build_depth_maps(black_box(&s.scene.cloud.points), &s.scene.cameras, PATCH))
    });
    group.bench_function("default_eps", |b| b.iter(|| default_eps(black_box(&s.scene.cloud.points))));
    group.bench_function("project_labels", |b| {
        b.iter(|| project_labels(black_box(&s.scene), &s.masks, &maps, eps))
    });
    group.bench_function("register_ground", |b| {
        b.iter(|| register_ground(black_box(&cloud), THRESHOLD, 1000, 0).unwrap())
    });
    group.bench_function("resample", |b| {
        b.iter(|| resample(black_box(&cloud), &plane, GRID_SIZE, THRESHOLD).unwrap())
    });
    group.bench_function("cluster_instances", |b| b.iter(|| cluster_instances(black_box(&g), 4)));
    group.bench_function("risk_maps", |b| {
        b.iter(|| build_risk_maps(black_box(&g), &instances, &materials, &classes, &winds).unwrap())
    });
    group.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
