use std::collections::HashSet;

use nalgebra::{Vector2, Vector3};
use spelaeo_core::cloud::PointCloud;
use spelaeo_core::skeleton::{build_skeleton, extract_lr, extract_ud, lateral_offset, SkeletonParams};
use spelaeo_core::synth::{self, CorridorSpec, CENTER_CAMERA};
use spelaeo_core::{CenterlineNode, Pose, Trajectory};

fn corridor(waypoints: Vec<[f64; 3]>, seed: u64) -> spelaeo_core::Bundle {
    synth::generate(&CorridorSpec {
        seed,
        waypoints,
        width_m: 4.0,
        height_m: 2.0,
        wall_density: 40.0,
        vertical_wander_m: 0.05,
        duration_s: 300.0,
        misalign_frames: false,
        ..CorridorSpec::default()
    })
    .unwrap()
}

fn world_trajs(b: &spelaeo_core::Bundle) -> Vec<Trajectory> {
    b.cameras.iter().map(|c| c.world_trajectory.clone()).collect()
}

#[test]
fn straight_corridor_geometry() {
    let b = corridor(vec![[0.0, 0.0, 15.0], [40.0, 0.0, 15.0]], 3);
    let trajs = world_trajs(&b);
    let params = SkeletonParams {
        center_index: CENTER_CAMERA,
        ..SkeletonParams::default()
    };
    let skel = build_skeleton(&trajs, &b.world_cloud, &params).unwrap();

    let sq: f64 = skel.nodes.iter().map(|n| n.position().y.powi(2) + (n.position().z - 15.0).powi(2)).sum();
    let rms = (sq / skel.nodes.len() as f64).sqrt();
    assert!(rms < 0.1, "centerline rms {rms}");

    let widths: Vec<f64> = skel
        .lrud
        .iter()
        .filter_map(|l| Some(l.walls.left?.distance + l.walls.right?.distance))
        .collect();
    let heights: Vec<f64> = skel
        .lrud
        .iter()
        .filter_map(|l| Some(l.vertical.up?.distance + l.vertical.down?.distance))
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(!widths.is_empty() && !heights.is_empty());
    assert!((mean(&widths) - 4.0).abs() < 0.4, "width {}", mean(&widths));
    assert!((mean(&heights) - 2.0).abs() < 0.2, "height {}", mean(&heights));

    let total: usize = trajs.iter().map(Trajectory::len).sum();
    let mut seen = HashSet::new();
    for n in &skel.nodes {
        for s in &n.sources {
            assert!(seen.insert(*s), "pose {s:?} absorbed twice");
        }
    }
    assert_eq!(skel.unabsorbed, total - seen.len());
    assert_eq!(skel.edges.len(), skel.nodes.len() - 1);
}

#[test]
fn l_shaped_corridor_tree_follows_the_bend() {
    let b = corridor(vec![[0.0, 0.0, 15.0], [20.0, 0.0, 15.0], [20.0, 20.0, 15.0]], 4);
    let params = SkeletonParams {
        center_index: CENTER_CAMERA,
        ..SkeletonParams::default()
    };
    let skel = build_skeleton(&world_trajs(&b), &b.world_cloud, &params).unwrap();
    // Nodes are spaced about one flag radius apart; any shortcut across the
    // bend would be far longer.
    for e in &skel.edges {
        assert!(e.length < 2.5, "edge {e:?}");
    }
    let near = |p: Vector3<f64>, q: Vector2<f64>| (Vector2::new(p.x, p.y) - q).norm() < 1.5;
    let start = skel.nodes.iter().position(|n| near(n.position(), Vector2::new(0.0, 0.0))).unwrap();
    let end = skel.nodes.iter().position(|n| near(n.position(), Vector2::new(20.0, 20.0))).unwrap();
    assert!(!skel
        .edges
        .iter()
        .any(|e| (e.a, e.b) == (start.min(end), start.max(end))));
}

fn node_at(p: Vector3<f64>) -> CenterlineNode {
    CenterlineNode {
        id: 0,
        pose: Pose::from_translation(p),
        source_count: 1,
        sources: vec![(0, 0)],
    }
}

#[test]
fn left_is_negative_lateral_and_distances_are_planar() {
    let node = node_at(Vector3::new(0.0, 0.0, 10.0));
    let north = Vector3::new(0.0, 1.0, 0.0);
    // Heading north, the negative-lateral side is west (x < 0).
    assert!(lateral_offset(&node.position(), &Vector2::new(0.0, 1.0), &Vector3::new(-1.0, 0.0, 10.0)) < 0.0);
    let cloud = PointCloud::new(vec![
        Vector3::new(-2.0, 0.5, 10.1),
        Vector3::new(-1.5, 0.0, 10.3),
        Vector3::new(3.0, 0.0, 9.9),
        Vector3::new(0.1, 0.0, 8.8),
        Vector3::new(0.0, 0.2, 8.5),
        Vector3::new(0.0, 0.0, 11.2),
        Vector3::new(0.0, 0.1, 11.6),
    ]);
    let walls = extract_lr(&node, &north, &cloud, 0.2).unwrap();
    assert!((walls.left.unwrap().distance - 0.5f64.hypot(2.0)).abs() < 1e-12);
    assert_eq!(walls.left_candidates, 1);
    assert!((walls.right.unwrap().distance - 3.0).abs() < 1e-12);
    let ud = extract_ud(&node, &cloud, 0.5);
    assert!((ud.up.unwrap().distance - 1.5).abs() < 1e-12);
    assert!((ud.down.unwrap().distance - 1.6).abs() < 1e-12);
    assert_eq!((ud.up_candidates, ud.down_candidates), (2, 2));
}
