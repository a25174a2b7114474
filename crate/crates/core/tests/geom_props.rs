use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Matrix4, UnitQuaternion, Vector3, Vector4};
use proptest::prelude::*;
use spelaeo_core::geom::{circular_mean, compose, euler_angles, invert, mean_pose, wrap_angle};
use spelaeo_core::{Error, EulerAngles, Pose};

/// Rotation matrix written out from quaternion components, independent of
/// nalgebra's conversions.
fn matrix_from_xyzw(q: [f64; 4]) -> Matrix3<f64> {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let (x, y, z, w) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - z * w),
        2.0 * (x * z + y * w),
        2.0 * (x * y + z * w),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - x * w),
        2.0 * (x * z - y * w),
        2.0 * (y * z + x * w),
        1.0 - 2.0 * (x * x + y * y),
    )
}

fn homogeneous(t: [f64; 3], q: [f64; 4]) -> Matrix4<f64> {
    let r = matrix_from_xyzw(q);
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m[(0, 3)] = t[0];
    m[(1, 3)] = t[1];
    m[(2, 3)] = t[2];
    m
}

fn pose_matrix(p: &Pose) -> Matrix4<f64> {
    homogeneous(p.translation().into(), p.quaternion_xyzw())
}

fn max_abs(m: Matrix4<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

prop_compose! {
    fn raw_pose()(t in prop::array::uniform3(-100.0..100.0f64),
                  q in prop::array::uniform4(-1.0..1.0f64)
                      .prop_filter("non-degenerate quaternion", |q| q.iter().map(|v| v * v).sum::<f64>() > 1e-3))
                  -> ([f64; 3], [f64; 4]) {
        (t, q)
    }
}

fn pose() -> impl Strategy<Value = Pose> {
    raw_pose().prop_map(|(t, q)| Pose::from_components(t, q))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn compose_matches_matrix_product((ta, qa) in raw_pose(), (tb, qb) in raw_pose()) {
        let a = Pose::from_components(ta, qa);
        let b = Pose::from_components(tb, qb);
        let oracle = homogeneous(ta, qa) * homogeneous(tb, qb);
        prop_assert!(max_abs(pose_matrix(&compose(&a, &b)) - oracle) < 1e-9);
    }

    #[test]
    fn inverse_matches_matrix_inverse((t, q) in raw_pose()) {
        let p = Pose::from_components(t, q);
        let oracle = homogeneous(t, q).try_inverse().unwrap();
        prop_assert!(max_abs(pose_matrix(&invert(&p)) - oracle) < 1e-9);
        prop_assert!(max_abs(pose_matrix(&compose(&p, &invert(&p))) - Matrix4::identity()) < 1e-9);
    }

    #[test]
    fn transform_point_matches_matrix((t, q) in raw_pose(), v in prop::array::uniform3(-50.0..50.0f64)) {
        let p = Pose::from_components(t, q);
        let h = homogeneous(t, q) * Vector4::new(v[0], v[1], v[2], 1.0);
        let got = p.transform_point(&Vector3::from(v));
        prop_assert!((got - h.xyz()).norm() < 1e-9);
    }

    #[test]
    fn compose_is_associative(a in pose(), b in pose(), c in pose()) {
        let l = compose(&compose(&a, &b), &c);
        let r = compose(&a, &compose(&b, &c));
        prop_assert!(max_abs(pose_matrix(&l) - pose_matrix(&r)) < 1e-9);
    }

    #[test]
    fn quaternion_is_canonical(p in pose()) {
        let q = p.quaternion_xyzw();
        prop_assert!(q[3] >= 0.0);
        prop_assert!((q.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negated_quaternion_is_same_pose((t, q) in raw_pose()) {
        let neg = [-q[0], -q[1], -q[2], -q[3]];
        prop_assert_eq!(Pose::from_components(t, q), Pose::from_components(t, neg));
    }

    #[test]
    fn euler_round_trip(roll in -PI..PI, pitch in -1.55..1.55f64, yaw in -PI..PI) {
        let e = EulerAngles::new(roll, pitch, yaw);
        let p = Pose::from_rotation(e.to_rotation());
        let back = euler_angles(&p);
        prop_assert!(wrap_angle(back.roll - roll).abs() < 1e-9);
        prop_assert!((back.pitch - pitch).abs() < 1e-9);
        prop_assert!(wrap_angle(back.yaw - yaw).abs() < 1e-9);
        prop_assert!(back.roll > -PI - 1e-12 && back.roll <= PI);
        prop_assert!(back.yaw > -PI - 1e-12 && back.yaw <= PI);
    }

    #[test]
    fn euler_rotation_is_zyx(roll in -PI..PI, pitch in -1.5..1.5f64, yaw in -PI..PI) {
        let (sr, cr) = roll.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let (sy, cy) = yaw.sin_cos();
        let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
        let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
        let got = EulerAngles::new(roll, pitch, yaw).to_rotation_matrix();
        prop_assert!((got.matrix() - rz * ry * rx).abs().max() < 1e-12);
    }

    #[test]
    fn mean_pose_ignores_order_and_sign(poses in prop::collection::vec(raw_pose(), 1..8), seed in any::<u64>()) {
        // Keep rotations within a hemisphere of each other so the mean is well defined.
        let base: Vec<Pose> = poses
            .iter()
            .map(|(t, q)| {
                let p = Pose::from_components(*t, *q);
                let small = UnitQuaternion::from_scaled_axis(p.rotation().scaled_axis() * 0.3);
                Pose::new(p.translation(), small)
            })
            .collect();
        let mut shuffled = base.clone();
        let n = shuffled.len();
        shuffled.rotate_left((seed % n as u64) as usize);
        shuffled.reverse();
        let flipped: Vec<Pose> = base
            .iter()
            .map(|p| {
                let q = p.quaternion_xyzw();
                Pose::from_components(p.translation().into(), [-q[0], -q[1], -q[2], -q[3]])
            })
            .collect();
        let m = mean_pose(&base).unwrap();
        for other in [mean_pose(&shuffled).unwrap(), mean_pose(&flipped).unwrap()] {
            prop_assert!((m.translation() - other.translation()).norm() < 1e-9);
            prop_assert!(m.angle_to(&other) < 1e-9);
        }
    }
}

#[test]
fn hundred_thousand_matrix_checks() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        let t = [rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)];
        let q = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.05..1.0)];
        (t, q)
    };
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let (ta, qa) = draw(&mut rng);
        let (tb, qb) = draw(&mut rng);
        let a = Pose::from_components(ta, qa);
        let b = Pose::from_components(tb, qb);
        let ma = homogeneous(ta, qa);
        let mb = homogeneous(tb, qb);
        worst = worst.max(max_abs(pose_matrix(&compose(&a, &b)) - ma * mb));
        worst = worst.max(max_abs(pose_matrix(&invert(&a)) - ma.try_inverse().unwrap()));
        worst = worst.max(max_abs(pose_matrix(&compose(&invert(&a), &compose(&a, &b))) - mb));
    }
    assert!(worst < 1e-9, "max error {worst:e}");
}

#[test]
fn gimbal_lock_zeroes_roll() {
    for pitch in [FRAC_PI_2, -FRAC_PI_2] {
        let e = EulerAngles::new(0.4, pitch, 1.1);
        let back = EulerAngles::from_rotation(&e.to_rotation());
        assert_eq!(back.roll, 0.0);
        assert!((back.pitch - pitch).abs() < 1e-6);
        // Same rotation regardless of how roll and yaw were split.
        let diff = back.to_rotation().angle_to(&e.to_rotation());
        assert!(diff < 1e-6, "{diff}");
    }
}

#[test]
fn circular_mean_cases() {
    let m = circular_mean(&[179f64.to_radians(), (-179f64).to_radians()]).unwrap();
    assert!((m.abs() - PI).abs() < 1e-12);
    assert!(matches!(circular_mean(&[0.0, PI]), Err(Error::DegenerateMean(_))));
    assert!(matches!(circular_mean(&[]), Err(Error::EmptyInput)));
}

/// Sum of squared chordal distances `Σ ‖R − R_i‖²_F`.
fn chordal_cost(r: &UnitQuaternion<f64>, rots: &[UnitQuaternion<f64>]) -> f64 {
    let m = r.to_rotation_matrix();
    rots.iter()
        .map(|q| (m.matrix() - q.to_rotation_matrix().matrix()).norm_squared())
        .sum()
}

#[test]
fn rotation_mean_matches_grid_search() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let center = UnitQuaternion::from_scaled_axis(Vector3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        ));
        let rots: Vec<UnitQuaternion<f64>> = (0..7)
            .map(|_| {
                let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    .normalize();
                center * UnitQuaternion::from_scaled_axis(axis * rng.gen_range(0.0..10f64.to_radians()))
            })
            .collect();
        let poses: Vec<Pose> = rots.iter().map(|q| Pose::from_rotation(*q)).collect();
        let got = mean_pose(&poses).unwrap().rotation();

        // Coarse-to-fine grid over perturbations of the cone center.
        let mut best = center;
        let mut step = 2f64.to_radians();
        for _ in 0..4 {
            let origin = best;
            let mut best_cost = chordal_cost(&best, &rots);
            for i in -6..=6 {
                for j in -6..=6 {
                    for k in -6..=6 {
                        let cand = origin
                            * UnitQuaternion::from_scaled_axis(Vector3::new(i as f64, j as f64, k as f64) * step);
                        let c = chordal_cost(&cand, &rots);
                        if c < best_cost {
                            best_cost = c;
                            best = cand;
                        }
                    }
                }
            }
            step /= 6.0;
        }
        let err = got.angle_to(&best).to_degrees();
        assert!(err < 0.5, "mean off the grid optimum by {err} deg");
    }
}
