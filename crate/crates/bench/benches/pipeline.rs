use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spelaeo_bench::bundle;
use spelaeo_core::skeleton::{self, SkeletonParams};
use spelaeo_core::{align, depth, mst, survey, Trajectory};

fn fuse(c: &mut Criterion) {
    let mut g = c.benchmark_group("fuse_depth");
    g.sample_size(10);
    for duration in [900.0, 3600.0] {
        let b = bundle(duration);
        let traj = &b.cameras[1].trajectory;
        g.bench_with_input(BenchmarkId::from_parameter(duration as u64), &duration, |bench, _| {
            bench.iter(|| depth::fuse(traj, &b.depth_log, depth::DEFAULT_RATE_HZ, 600.0).unwrap())
        });
    }
    g.finish();
}

fn spanning_tree(c: &mut Criterion) {
    let mut g = c.benchmark_group("mst");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [500, 2000] {
        let pts: Vec<Vector3<f64>> = (0..n)
            .map(|_| Vector3::new(rng.gen_range(0.0..500.0), rng.gen_range(0.0..50.0), rng.gen_range(0.0..30.0)))
            .collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &pts, |bench, pts| {
            bench.iter(|| mst::minimum_spanning_tree(pts))
        });
    }
    g.finish();
}

fn skeleton_build(c: &mut Criterion) {
    let b = bundle(900.0);
    let trajs: Vec<Trajectory> = b.cameras.iter().map(|cam| cam.world_trajectory.clone()).collect();
    let params = SkeletonParams {
        center_index: 1,
        ..SkeletonParams::default()
    };
    let mut g = c.benchmark_group("skeleton");
    g.sample_size(10);
    g.bench_function("900s", |bench| {
        bench.iter(|| skeleton::build_skeleton(&trajs, &b.world_cloud, &params).unwrap())
    });
    g.finish();
}

fn target_and_survey(c: &mut Criterion) {
    let b = bundle(900.0);
    let cam = &b.cameras[0];
    c.bench_function("estimate_target", |bench| {
        bench.iter(|| align::estimate_target(&cam.trajectory, &cam.observations, align::DEFAULT_ASSOCIATION_TOLERANCE_S).unwrap())
    });
    let anchor = b.survey.station_names()[0].clone();
    c.bench_function("survey_adjust", |bench| {
        bench.iter(|| survey::adjust_loops(&b.survey, &anchor).unwrap())
    });
}

criterion_group!(benches, fuse, spanning_tree, skeleton_build, target_and_survey);
criterion_main!(benches);
