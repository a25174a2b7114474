//! Co-registration of trajectories through a shared fiducial target.
//!
//! Each dataset observes the same target from several keyframes. Those
//! observations are lifted into the dataset's world frame, outliers are
//! rejected in two one-sigma passes (position, then orientation) and the
//! surviving poses are averaged. Two such estimates give the rigid
//! transform between the datasets' frames.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{angle_diff, circular_mean, mean_pose, EulerAngles, Pose};
use crate::textio;
use crate::trajectory::{parse_pose_rows, write_pose_rows, Keyframe, Trajectory};

/// Maximum gap between an observation and the keyframe it is attached to.
pub const DEFAULT_ASSOCIATION_TOLERANCE_S: f64 = 0.02;
/// Absolute slack (meters for distances, radians for angles) added to the
/// one-sigma thresholds.
pub const DEVIATION_FLOOR: f64 = 1e-9;

/// Camera-to-target relative pose detected at `timestamp`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetObservation {
    pub timestamp: f64,
    pub camera_id: String,
    pub rel_pose: Pose,
}

/// Parses an observation file (same columns as a trajectory).
pub fn parse_observations(camera_id: &str, text: &str) -> Result<Vec<TargetObservation>> {
    Ok(parse_pose_rows(text)?
        .into_iter()
        .map(|k| TargetObservation {
            timestamp: k.timestamp,
            camera_id: camera_id.to_owned(),
            rel_pose: k.pose,
        })
        .collect())
}

pub fn load_observations(path: &Path) -> Result<Vec<TargetObservation>> {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_observations(&id, &textio::read_file(path)?)
}

pub fn observations_to_csv(obs: &[TargetObservation]) -> String {
    let rows: Vec<Keyframe> = obs
        .iter()
        .map(|o| Keyframe {
            timestamp: o.timestamp,
            pose: o.rel_pose,
        })
        .collect();
    write_pose_rows(&rows)
}

/// Spread of the per-axis Euler angles over the stage-one survivors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AngleSigmas {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

/// Outlier-rejected average of one dataset's target world poses.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEstimate {
    /// Frame the estimate is expressed in; empty when unknown.
    pub frame_id: String,
    pub world_pose: Pose,
    pub inlier_count: usize,
    pub total_count: usize,
    /// Survivors of the distance pass.
    pub distance_inliers: usize,
    pub distance_sigma: f64,
    pub angle_sigmas: AngleSigmas,
    /// Set when the orientation pass rejected everything and the estimate
    /// fell back to the distance-pass mean.
    pub fallback: bool,
}

/// Rigid transform taking coordinates in `from_frame` to `to_frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTransform {
    pub from_frame: String,
    pub to_frame: String,
    pub transform: Pose,
}

/// Target pose in the trajectory's world frame for every observation:
/// `P_world_camera · T_camera_target`.
pub fn target_world_poses(
    traj: &Trajectory,
    observations: &[TargetObservation],
    tolerance: f64,
) -> Result<Vec<Pose>> {
    observations
        .iter()
        .map(|o| {
            let k = traj
                .keyframe_near(o.timestamp, tolerance)
                .ok_or(Error::UnmatchedObservation {
                    timestamp: o.timestamp,
                    tolerance,
                })?;
            Ok(k.pose.compose(&o.rel_pose))
        })
        .collect()
}

fn population_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Two-pass one-sigma outlier rejection followed by averaging.
///
/// 1. Distances `D_i` of each position from the mean position; poses with
///    `D_i > σ_D` are dropped.
/// 2. Over the survivors, roll/pitch/yaw deviations from their mean (yaw on
///    the circle) are compared with the per-angle standard deviation; a
///    pose is dropped if any angle deviates by more than one sigma.
///
/// Both comparisons are strict, so a pose exactly at one sigma survives.
/// Deviations within [`DEVIATION_FLOOR`] of the threshold also survive, so
/// rounding noise alone never rejects a pose.
pub fn filter_and_average(world_poses: &[Pose]) -> Result<TargetEstimate> {
    let total = world_poses.len();
    if total < 3 {
        return Err(Error::TooFewObservations(total));
    }
    let overall = mean_pose(world_poses)?;
    let center = overall.translation();
    let dists: Vec<f64> = world_poses
        .iter()
        .map(|p| (p.translation() - center).norm())
        .collect();
    let sigma_d = population_std(dists.iter().copied());
    let stage1: Vec<Pose> = world_poses
        .iter()
        .zip(&dists)
        .filter(|(_, d)| **d <= sigma_d + DEVIATION_FLOOR)
        .map(|(p, _)| *p)
        .collect();
    let stage1 = if stage1.is_empty() {
        log::warn!("distance filter rejected all {total} target poses; keeping all");
        world_poses.to_vec()
    } else {
        stage1
    };

    let angles: Vec<EulerAngles> = stage1.iter().map(Pose::euler_angles).collect();
    let n1 = angles.len() as f64;
    let mean_roll = angles.iter().map(|a| a.roll).sum::<f64>() / n1;
    let mean_pitch = angles.iter().map(|a| a.pitch).sum::<f64>() / n1;
    let yaws: Vec<f64> = angles.iter().map(|a| a.yaw).collect();
    // Antipodal yaw sets have no circular mean; fall back to the arithmetic one.
    let mean_yaw = circular_mean(&yaws).unwrap_or_else(|_| yaws.iter().sum::<f64>() / n1);
    let sigmas = AngleSigmas {
        roll: population_std(angles.iter().map(|a| a.roll)),
        pitch: population_std(angles.iter().map(|a| a.pitch)),
        yaw: (yaws
            .iter()
            .map(|y| angle_diff(*y, mean_yaw).powi(2))
            .sum::<f64>()
            / n1)
            .sqrt(),
    };
    let inliers: Vec<Pose> = stage1
        .iter()
        .zip(&angles)
        .filter(|(_, a)| {
            (a.roll - mean_roll).abs() <= sigmas.roll + DEVIATION_FLOOR
                && (a.pitch - mean_pitch).abs() <= sigmas.pitch + DEVIATION_FLOOR
                && angle_diff(a.yaw, mean_yaw).abs() <= sigmas.yaw + DEVIATION_FLOOR
        })
        .map(|(p, _)| *p)
        .collect();

    let (world_pose, inlier_count, fallback) = if inliers.is_empty() {
        log::warn!("orientation filter rejected all target poses; using distance-filter mean");
        (mean_pose(&stage1)?, stage1.len(), true)
    } else {
        (mean_pose(&inliers)?, inliers.len(), false)
    };
    Ok(TargetEstimate {
        frame_id: String::new(),
        world_pose,
        inlier_count,
        total_count: total,
        distance_inliers: stage1.len(),
        distance_sigma: sigma_d,
        angle_sigmas: sigmas,
        fallback,
    })
}

/// Lifts observations into `traj`'s frame and filters them.
pub fn estimate_target(
    traj: &Trajectory,
    observations: &[TargetObservation],
    tolerance: f64,
) -> Result<TargetEstimate> {
    let poses = target_world_poses(traj, observations, tolerance)?;
    let mut est = filter_and_average(&poses)?;
    est.frame_id = traj.frame_id().to_owned();
    Ok(est)
}

/// Transform from B's world frame into A's: `P_A · P_B⁻¹`.
pub fn estimate_frame_transform(est_a: &TargetEstimate, est_b: &TargetEstimate) -> FrameTransform {
    FrameTransform {
        from_frame: est_b.frame_id.clone(),
        to_frame: est_a.frame_id.clone(),
        transform: est_a.world_pose.compose(&est_b.world_pose.inverse()),
    }
}

/// Left-multiplies every pose by the transform and relabels the frame.
pub fn apply_frame_transform(traj: &Trajectory, ft: &FrameTransform) -> Result<Trajectory> {
    if traj.frame_id() != ft.from_frame {
        return Err(Error::FrameMismatch {
            expected: ft.from_frame.clone(),
            found: traj.frame_id().to_owned(),
        });
    }
    traj.map_keyframes(ft.to_frame.clone(), |k| Keyframe {
        timestamp: k.timestamp,
        pose: ft.transform.compose(&k.pose),
    })
}
