use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spelaeo_core::recon::{export_manifest, parse_manifest, select_keyframes, DEFAULT_IMAGE_PATTERN};
use spelaeo_core::{Keyframe, Pose, Trajectory};

fn random_trajectory(rng: &mut ChaCha8Rng, id: &str, n: usize) -> Trajectory {
    let mut t = rng.gen_range(0.0..10.0);
    let kfs = (0..n)
        .map(|_| {
            t += rng.gen_range(0.01..1.0);
            let p = Vector3::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(0.0..15.0));
            let q = UnitQuaternion::from_euler_angles(rng.gen_range(-3.0..3.0), rng.gen_range(-1.5..1.5), rng.gen_range(-3.0..3.0));
            Keyframe { timestamp: t, pose: Pose::new(p, q) }
        })
        .collect();
    Trajectory::new(id, kfs).unwrap()
}

/// Straight scan, sorted the same way as the selection.
fn brute_force(cams: &[(String, Trajectory)], center: &Vector3<f64>, r: f64) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for (id, traj) in cams {
        for k in traj.keyframes() {
            let d = k.pose.translation() - center;
            if (d.x * d.x + d.y * d.y + d.z * d.z).sqrt() <= r {
                out.push((id.clone(), k.timestamp));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out
}

#[test]
fn thousand_configurations_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let ncam = rng.gen_range(1..4);
        let cams: Vec<(String, Trajectory)> = (0..ncam)
            .map(|i| {
                let id = format!("cam{i}");
                let n = rng.gen_range(1..60);
                let t = random_trajectory(&mut rng, &id, n);
                (id, t)
            })
            .collect();
        let center = Pose::from_translation(Vector3::new(
            rng.gen_range(-20.0..20.0),
            rng.gen_range(-20.0..20.0),
            rng.gen_range(0.0..15.0),
        ));
        let mut previous: Option<Vec<(String, f64)>> = None;
        for r in [1.0, 2.5, 5.0] {
            let sel = select_keyframes(cams.iter().map(|(i, t)| (i.as_str(), t)), &center, r).unwrap();
            let got: Vec<(String, f64)> = sel.members.iter().map(|m| (m.camera_id.clone(), m.timestamp)).collect();
            assert_eq!(got, brute_force(&cams, &center.translation(), r));
            if let Some(prev) = &previous {
                assert!(prev.iter().all(|m| got.contains(m)), "radius {r} lost a member");
            }
            previous = Some(got);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn manifest_round_trips(seed in any::<u64>(), r in 1.0..30.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_trajectory(&mut rng, "left", 40);
        let b = random_trajectory(&mut rng, "right", 40);
        let center = a.keyframes()[0].pose;
        let sel = select_keyframes([("left", &a), ("right", &b)], &center, r).unwrap();
        let text = export_manifest(&sel, DEFAULT_IMAGE_PATTERN).unwrap();
        let rows = parse_manifest(&text).unwrap();
        prop_assert_eq!(rows.len(), sel.members.len());
        for (row, m) in rows.iter().zip(&sel.members) {
            prop_assert_eq!(&row.image_id, &format!("{}/{}.png", m.camera_id, m.timestamp));
            prop_assert_eq!(&row.member.camera_id, &m.camera_id);
            prop_assert_eq!(row.member.timestamp, m.timestamp);
            prop_assert_eq!(row.member.pose.translation(), m.pose.translation());
            prop_assert!(row.member.pose.angle_to(&m.pose) < 1e-12);
        }
    }
}

#[test]
fn bad_pattern_and_radius_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let a = random_trajectory(&mut rng, "a", 5);
    let c = a.keyframes()[0].pose;
    assert!(select_keyframes([("a", &a)], &c, 0.0).is_err());
    let sel = select_keyframes([("a", &a)], &c, 1.0).unwrap();
    assert!(export_manifest(&sel, "{camera}.png").is_err());
    assert!(export_manifest(&sel, "{camera},{timestamp}").is_err());
}
