//! Synthetic cave and sensor-data generator.
//!
//! Builds a rectangular-section corridor along a waypoint polyline, swims a
//! three-camera rig through it, and emits everything the real sensors would:
//! per-camera trajectories in their own gravity-aligned SLAM frames, sparse
//! wall clouds, a dive-computer depth log on its own clock, fiducial-target
//! detections and a caveline survey. Every injected distortion is recorded
//! in [`GroundTruth`].
//!
//! World frame: x = east, y = north, z = depth (positive down). Camera body
//! frames have x pointing forward.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `CorridorSpec::seed`; draws happen in a fixed order so a given spec always
//! produces the same bundle.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::align::{observations_to_csv, TargetObservation};
use crate::cloud::PointCloud;
use crate::depth::DepthLog;
use crate::error::{Error, Result};
use crate::geom::{EulerAngles, Pose};
use crate::pipeline::{
    AlignConfig, AreaConfig, CameraConfig, FuseConfig, PipelineConfig, SelectConfig, SkeletonConfig, SurveyConfig,
};
use crate::survey::{normalize_azimuth, SurveyNetwork, SurveySegment};
use crate::textio;
use crate::trajectory::{Keyframe, Trajectory};

pub const CAMERA_NAMES: [&str; 3] = ["left", "center", "right"];
/// Index of the center camera in [`CAMERA_NAMES`].
pub const CENTER_CAMERA: usize = 1;
/// Extra depth-log coverage before and after the swim, seconds.
const LOG_MARGIN_S: f64 = 60.0;

/// Every knob of the generator. Deserializes from a flat TOML table; missing
/// keys take the defaults, unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorridorSpec {
    pub seed: u64,
    /// Centerline vertices `[east, north, depth]` in meters.
    pub waypoints: Vec<[f64; 3]>,
    pub width_m: f64,
    pub height_m: f64,
    /// Wall, ceiling and floor samples per square meter.
    pub wall_density: f64,
    /// Yaw of the left, center and right cameras relative to the swim direction.
    pub camera_yaw_offsets_deg: [f64; 3],
    /// Upward tilt of the center camera.
    pub center_pitch_deg: f64,
    /// Lateral distance between the left and right cameras.
    pub rig_baseline_m: f64,
    pub keyframe_rate_hz: f64,
    pub depth_log_rate_hz: f64,
    pub duration_s: f64,
    pub swim_speed_mps: f64,
    /// Amplitude of the diver's slow vertical wander about the centerline.
    pub vertical_wander_m: f64,
    /// SLAM keyframe position noise (per axis).
    pub position_noise_m: f64,
    /// SLAM keyframe rotation noise (per axis).
    pub rotation_noise_deg: f64,
    /// Dive-computer depth noise.
    pub depth_noise_m: f64,
    /// Cloud noise along the surface normal.
    pub cloud_noise_m: f64,
    pub time_shift_s: f64,
    pub depth_offset_m: f64,
    /// +1: SLAM z points down; −1: SLAM z points up.
    pub z_sign: i32,
    /// Random yaw and origin per SLAM frame.
    pub misalign_frames: bool,
    pub target_observations: usize,
    pub outlier_fraction: f64,
    /// Target observation noise, per axis.
    pub observation_noise_m: f64,
    pub observation_noise_deg: f64,
    /// Distance of the target ahead of the swim start.
    pub target_distance_m: f64,
    pub survey_shot_spacing_m: f64,
    pub survey_azimuth_noise_deg: f64,
    /// Relative standard deviation of shot lengths.
    pub survey_length_noise: f64,
    pub declination_deg: f64,
}

impl Default for CorridorSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            waypoints: vec![[0.0, 0.0, 15.0], [30.0, 0.0, 18.0], [30.0, 25.0, 16.0], [55.0, 30.0, 19.0]],
            width_m: 4.0,
            height_m: 2.0,
            wall_density: 10.0,
            camera_yaw_offsets_deg: [30.0, 0.0, -30.0],
            center_pitch_deg: 30.0,
            rig_baseline_m: 0.3,
            keyframe_rate_hz: 3.0,
            depth_log_rate_hz: 0.1,
            duration_s: 900.0,
            swim_speed_mps: 0.25,
            vertical_wander_m: 0.3,
            position_noise_m: 0.0,
            rotation_noise_deg: 0.0,
            depth_noise_m: 0.0,
            cloud_noise_m: 0.0,
            time_shift_s: 0.0,
            depth_offset_m: 0.0,
            z_sign: 1,
            misalign_frames: true,
            target_observations: 10,
            outlier_fraction: 0.0,
            observation_noise_m: 0.0,
            observation_noise_deg: 0.0,
            target_distance_m: 1.5,
            survey_shot_spacing_m: 5.0,
            survey_azimuth_noise_deg: 0.0,
            survey_length_noise: 0.0,
            declination_deg: 0.0,
        }
    }
}

impl CorridorSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("width_m", self.width_m),
            ("height_m", self.height_m),
            ("wall_density", self.wall_density),
            ("keyframe_rate_hz", self.keyframe_rate_hz),
            ("depth_log_rate_hz", self.depth_log_rate_hz),
            ("duration_s", self.duration_s),
            ("swim_speed_mps", self.swim_speed_mps),
            ("survey_shot_spacing_m", self.survey_shot_spacing_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Spec(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("vertical_wander_m", self.vertical_wander_m),
            ("position_noise_m", self.position_noise_m),
            ("rotation_noise_deg", self.rotation_noise_deg),
            ("depth_noise_m", self.depth_noise_m),
            ("cloud_noise_m", self.cloud_noise_m),
            ("observation_noise_m", self.observation_noise_m),
            ("observation_noise_deg", self.observation_noise_deg),
            ("rig_baseline_m", self.rig_baseline_m),
            ("survey_azimuth_noise_deg", self.survey_azimuth_noise_deg),
            ("survey_length_noise", self.survey_length_noise),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Spec(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::Spec("outlier_fraction must be in [0, 1)".into()));
        }
        if self.z_sign != 1 && self.z_sign != -1 {
            return Err(Error::Spec("z_sign must be 1 or -1".into()));
        }
        if self.waypoints.len() < 2 {
            return Err(Error::Spec("need at least two waypoints".into()));
        }
        for w in self.waypoints.windows(2) {
            let a = Vector3::from(w[0]);
            let b = Vector3::from(w[1]);
            if (b - a).norm() < 1e-6 {
                return Err(Error::Spec("consecutive waypoints coincide".into()));
            }
            if Vector2::new(b.x - a.x, b.y - a.y).norm() < 1e-6 {
                return Err(Error::Spec("vertical centerline segments are not supported".into()));
            }
        }
        let min_depth = self.waypoints.iter().map(|w| w[2]).fold(f64::INFINITY, f64::min);
        if min_depth - self.vertical_wander_m < 0.0 {
            return Err(Error::Spec("diver would rise above the surface".into()));
        }
        Ok(())
    }
}

/// Pose in a serializable form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub t: [f64; 3],
    /// (x, y, z, w)
    pub q: [f64; 4],
}

impl From<&Pose> for PoseRecord {
    fn from(p: &Pose) -> Self {
        Self {
            t: p.translation().into(),
            q: p.quaternion_xyzw(),
        }
    }
}

impl From<&PoseRecord> for Pose {
    fn from(r: &PoseRecord) -> Self {
        Pose::from_components(r.t, r.q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraTruth {
    pub name: String,
    /// Maps world coordinates into this camera's SLAM frame.
    pub slam_from_world: PoseRecord,
    pub outlier_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationTruth {
    pub name: String,
    pub position: [f64; 3],
}

/// Every parameter the generator injected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub time_shift_s: f64,
    pub depth_offset_m: f64,
    pub z_sign: i32,
    pub width_m: f64,
    pub height_m: f64,
    pub waypoints: Vec<[f64; 3]>,
    pub target_world: PoseRecord,
    pub cameras: Vec<CameraTruth>,
    pub stations: Vec<StationTruth>,
}

impl GroundTruth {
    /// Rigid transform taking camera `b`'s SLAM frame into camera `a`'s.
    pub fn frame_transform(&self, a: usize, b: usize) -> Pose {
        let a = Pose::from(&self.cameras[a].slam_from_world);
        let b = Pose::from(&self.cameras[b].slam_from_world);
        a.compose(&b.inverse())
    }
}

#[derive(Debug, Clone)]
pub struct CameraData {
    pub name: String,
    /// Keyframes in the SLAM frame, on the SLAM clock, with noise.
    pub trajectory: Trajectory,
    /// Noise-free keyframes in the world frame on the true clock.
    pub world_trajectory: Trajectory,
    pub observations: Vec<TargetObservation>,
    /// This camera's share of the wall samples, in its SLAM frame.
    pub cloud: PointCloud,
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub spec: CorridorSpec,
    pub cameras: Vec<CameraData>,
    pub world_cloud: PointCloud,
    /// Normal distance of every world-cloud point from its noise-free surface
    /// (signed, outward positive).
    pub cloud_deviation: Vec<f64>,
    pub depth_log: DepthLog,
    pub survey: SurveyNetwork,
    pub truth: GroundTruth,
}

struct Centerline {
    pts: Vec<Vector3<f64>>,
    cum: Vec<f64>,
}

impl Centerline {
    fn new(waypoints: &[[f64; 3]]) -> Self {
        let pts: Vec<Vector3<f64>> = waypoints.iter().map(|w| Vector3::from(*w)).collect();
        let mut cum = vec![0.0];
        for w in pts.windows(2) {
            cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
        }
        Self { pts, cum }
    }

    fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    fn segment_at(&self, s: f64) -> usize {
        let i = self.cum.partition_point(|c| *c <= s);
        i.saturating_sub(1).min(self.pts.len() - 2)
    }

    fn point_at(&self, s: f64) -> Vector3<f64> {
        let i = self.segment_at(s);
        let len = self.cum[i + 1] - self.cum[i];
        let f = ((s - self.cum[i]) / len).clamp(0.0, 1.0);
        self.pts[i] + (self.pts[i + 1] - self.pts[i]) * f
    }

    /// Unit horizontal direction of segment `i`.
    fn direction(&self, i: usize) -> Vector2<f64> {
        let d = self.pts[i + 1] - self.pts[i];
        Vector2::new(d.x, d.y).normalize()
    }
}

/// Left of a horizontal heading, consistent with
/// [`crate::skeleton::lateral_offset`] (negative lateral is left).
fn left_of(h: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-h.y, h.x)
}

struct Motion {
    speed_period: f64,
    speed_phase: f64,
    wander: [(f64, f64); 3],
}

impl Motion {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let speed_period = rng.gen_range(200.0..400.0);
        let speed_phase = rng.gen_range(0.0..TAU);
        let mut wander = [(0.0, 0.0); 3];
        for w in &mut wander {
            *w = (rng.gen_range(300.0..900.0), rng.gen_range(0.0..TAU));
        }
        Self {
            speed_period,
            speed_phase,
            wander,
        }
    }

    /// Distance swum after `t` seconds; speed varies ±30% around the mean.
    fn distance(&self, t: f64, v0: f64) -> f64 {
        let w = TAU / self.speed_period;
        v0 * (t - 0.3 / w * ((w * t + self.speed_phase).cos() - self.speed_phase.cos()))
    }

    fn wander(&self, t: f64, amplitude: f64) -> f64 {
        amplitude / 3.0
            * self
                .wander
                .iter()
                .map(|(p, ph)| (TAU * t / p + ph).sin())
                .sum::<f64>()
    }
}

/// Rig state at true time `t`: centerline-following position plus vertical
/// wander, and the horizontal swim direction.
fn rig_state(spec: &CorridorSpec, line: &Centerline, motion: &Motion, t: f64) -> (Vector3<f64>, Vector2<f64>) {
    let len = line.length();
    let d = motion.distance(t.max(0.0), spec.swim_speed_mps).rem_euclid(2.0 * len);
    let (s, dir) = if d <= len { (d, 1.0) } else { (2.0 * len - d, -1.0) };
    let mut p = line.point_at(s);
    p.z += motion.wander(t, spec.vertical_wander_m);
    (p, line.direction(line.segment_at(s)) * dir)
}

fn camera_pose(spec: &CorridorSpec, k: usize, pos: Vector3<f64>, heading: Vector2<f64>) -> Pose {
    let left = left_of(&heading);
    let lateral = match k {
        0 => 0.5 * spec.rig_baseline_m,
        2 => -0.5 * spec.rig_baseline_m,
        _ => 0.0,
    };
    let p = pos + Vector3::new(left.x, left.y, 0.0) * lateral;
    let yaw = heading.y.atan2(heading.x) + spec.camera_yaw_offsets_deg[k].to_radians();
    let pitch = if k == CENTER_CAMERA {
        spec.center_pitch_deg.to_radians()
    } else {
        0.0
    };
    Pose::new(p, EulerAngles::new(0.0, pitch, yaw).to_rotation())
}

fn small_rotation(rng: &mut ChaCha8Rng, sigma_rad: f64) -> UnitQuaternion<f64> {
    if sigma_rad == 0.0 {
        return UnitQuaternion::identity();
    }
    let n = Normal::new(0.0, sigma_rad).unwrap();
    UnitQuaternion::from_scaled_axis(Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng)))
}

fn noise_vec(rng: &mut ChaCha8Rng, sigma: f64) -> Vector3<f64> {
    if sigma == 0.0 {
        return Vector3::zeros();
    }
    let n = Normal::new(0.0, sigma).unwrap();
    Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng))
}

fn gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        Normal::new(0.0, sigma).unwrap().sample(rng)
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = noise_vec(rng, 1.0);
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// World → SLAM transform for one camera. The SLAM frame is gravity aligned
/// (possibly z-up), yawed, and has its horizontal origin near `start`.
fn slam_frame(spec: &CorridorSpec, rng: &mut ChaCha8Rng, start: Vector3<f64>) -> Pose {
    let (yaw, jitter) = if spec.misalign_frames {
        let yaw = rng.gen_range(-PI..PI);
        let j = Vector3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), 0.0);
        (yaw, j)
    } else {
        (0.0, Vector3::zeros())
    };
    let flip = if spec.z_sign < 0 {
        UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI)
    } else {
        UnitQuaternion::identity()
    };
    let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw) * flip;
    let origin = if spec.misalign_frames {
        start + jitter
    } else {
        Vector3::zeros()
    };
    let ro = rot * origin;
    let z_sign = f64::from(spec.z_sign);
    Pose::new(Vector3::new(-ro.x, -ro.y, -z_sign * spec.depth_offset_m), rot)
}

/// Index of the segment box containing `p` (strictly inside), if any.
fn inside_other_segment(line: &Centerline, spec: &CorridorSpec, p: &Vector3<f64>, own: usize) -> bool {
    (0..line.pts.len() - 1).any(|i| {
        if i == own {
            return false;
        }
        let a = line.pts[i];
        let b = line.pts[i + 1];
        let u = line.direction(i);
        let horiz_len = Vector2::new(b.x - a.x, b.y - a.y).norm();
        let d = Vector2::new(p.x - a.x, p.y - a.y);
        let along = d.dot(&u);
        if along <= 0.0 || along >= horiz_len {
            return false;
        }
        let lateral = d.dot(&left_of(&u));
        let center_z = a.z + (b.z - a.z) * along / horiz_len;
        lateral.abs() < 0.5 * spec.width_m - 1e-9 && (p.z - center_z).abs() < 0.5 * spec.height_m - 1e-9
    })
}

/// Which surface a cloud sample came from.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Surface {
    Left,
    Right,
    Ceiling,
    Floor,
}

fn generate_cloud(
    spec: &CorridorSpec,
    line: &Centerline,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vector3<f64>>, Vec<f64>, Vec<Surface>) {
    let mut pts = Vec::new();
    let mut dev = Vec::new();
    let mut surf = Vec::new();
    let (hw, hh) = (0.5 * spec.width_m, 0.5 * spec.height_m);
    for i in 0..line.pts.len() - 1 {
        let a = line.pts[i];
        let b = line.pts[i + 1];
        let u = line.direction(i);
        let left = left_of(&u);
        let horiz_len = Vector2::new(b.x - a.x, b.y - a.y).norm();
        let wall_n = (spec.wall_density * horiz_len * spec.height_m).round() as usize;
        let roof_n = (spec.wall_density * horiz_len * spec.width_m).round() as usize;
        for (surface, count) in [
            (Surface::Left, wall_n),
            (Surface::Right, wall_n),
            (Surface::Ceiling, roof_n),
            (Surface::Floor, roof_n),
        ] {
            for _ in 0..count {
                let along = rng.gen_range(0.0..horiz_len);
                let across = rng.gen_range(-1.0..1.0);
                let noise = gauss(rng, spec.cloud_noise_m);
                let center_z = a.z + (b.z - a.z) * along / horiz_len;
                let base = Vector2::new(a.x, a.y) + u * along;
                let (lat, dz) = match surface {
                    Surface::Left => (hw + noise, across * hh),
                    Surface::Right => (-(hw + noise), across * hh),
                    Surface::Ceiling => (across * hw, -(hh + noise)),
                    Surface::Floor => (across * hw, hh + noise),
                };
                let xy = base + left * lat;
                let p = Vector3::new(xy.x, xy.y, center_z + dz);
                if inside_other_segment(line, spec, &p, i) {
                    continue;
                }
                pts.push(p);
                dev.push(noise);
                surf.push(surface);
            }
        }
    }
    (pts, dev, surf)
}

fn generate_survey(spec: &CorridorSpec, line: &Centerline, rng: &mut ChaCha8Rng) -> (SurveyNetwork, Vec<StationTruth>) {
    let mut stations: Vec<Vector3<f64>> = vec![line.pts[0]];
    for w in line.pts.windows(2) {
        let n = ((w[1] - w[0]).norm() / spec.survey_shot_spacing_m).ceil().max(1.0) as usize;
        for j in 1..=n {
            stations.push(w[0] + (w[1] - w[0]) * (j as f64 / n as f64));
        }
    }
    let closed = (line.pts[line.pts.len() - 1] - line.pts[0]).norm() < 1e-9;
    let names: Vec<String> = (0..stations.len()).map(|i| format!("S{i}")).collect();
    let origin = stations[0];
    let mut segments = Vec::new();
    for i in 0..stations.len() - 1 {
        let d = stations[i + 1] - stations[i];
        let mut length = d.norm() * (1.0 + gauss(rng, spec.survey_length_noise));
        length = length.max(d.z.abs());
        let true_az = d.x.atan2(d.y).to_degrees();
        let az_in = normalize_azimuth(true_az + gauss(rng, spec.survey_azimuth_noise_deg));
        let az_out = normalize_azimuth(true_az + gauss(rng, spec.survey_azimuth_noise_deg));
        segments.push(SurveySegment {
            from: names[i].clone(),
            to: names[i + 1].clone(),
            length,
            azimuth_in: az_in,
            azimuth_out: az_out,
            depth_from: stations[i].z,
            depth_to: stations[i + 1].z,
        });
    }
    let closures = if closed {
        vec![(names[0].clone(), names[names.len() - 1].clone())]
    } else {
        Vec::new()
    };
    let truth = names
        .iter()
        .zip(&stations)
        .map(|(n, p)| StationTruth {
            name: n.clone(),
            position: [p.x - origin.x, p.y - origin.y, p.z - origin.z],
        })
        .collect();
    (
        SurveyNetwork {
            segments,
            closures,
            declination: spec.declination_deg,
        },
        truth,
    )
}

pub fn generate(spec: &CorridorSpec) -> Result<Bundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let line = Centerline::new(&spec.waypoints);
    let motion = Motion::draw(&mut rng);

    let (start_pos, start_heading) = rig_state(spec, &line, &motion, 0.0);
    let target_pos = start_pos + Vector3::new(start_heading.x, start_heading.y, 0.0) * spec.target_distance_m;
    let target_tilt = EulerAngles::new(
        rng.gen_range(-0.1..0.1),
        rng.gen_range(-0.1..0.1),
        start_heading.y.atan2(start_heading.x) + PI,
    );
    let target_world = Pose::new(target_pos, target_tilt.to_rotation());

    let mut cameras = Vec::with_capacity(3);
    let mut camera_truth = Vec::with_capacity(3);
    for (k, name) in CAMERA_NAMES.iter().enumerate() {
        let start = camera_pose(spec, k, start_pos, start_heading).translation();
        let slam_from_world = slam_frame(spec, &mut rng, start);
        let t0 = k as f64 / (3.0 * spec.keyframe_rate_hz);
        let count = ((spec.duration_s - t0) * spec.keyframe_rate_hz).floor() as usize + 1;
        let mut world = Vec::with_capacity(count);
        let mut slam = Vec::with_capacity(count);
        for j in 0..count {
            let t = t0 + j as f64 / spec.keyframe_rate_hz;
            let (p, h) = rig_state(spec, &line, &motion, t);
            let pose = camera_pose(spec, k, p, h);
            world.push(Keyframe { timestamp: t, pose });
            let noisy = slam_from_world.compose(&pose);
            let noisy = Pose::new(
                noisy.translation() + noise_vec(&mut rng, spec.position_noise_m),
                noisy.rotation() * small_rotation(&mut rng, spec.rotation_noise_deg.to_radians()),
            );
            slam.push(Keyframe {
                timestamp: t - spec.time_shift_s,
                pose: noisy,
            });
        }

        let n_obs = spec.target_observations.min(slam.len());
        let n_out = (spec.outlier_fraction * n_obs as f64).round() as usize;
        let mut outliers: Vec<usize> = Vec::new();
        while outliers.len() < n_out {
            let i = rng.gen_range(0..n_obs);
            if !outliers.contains(&i) {
                outliers.push(i);
            }
        }
        outliers.sort_unstable();
        let target_slam = slam_from_world.compose(&target_world);
        let observations = (0..n_obs)
            .map(|i| {
                let delta = if outliers.contains(&i) {
                    let shift = random_unit(&mut rng) * rng.gen_range(1.0..2.0);
                    let axis = nalgebra::Unit::new_normalize(random_unit(&mut rng));
                    let angle = rng.gen_range(20f64..40.0).to_radians();
                    Pose::new(shift, UnitQuaternion::from_axis_angle(&axis, angle))
                } else {
                    Pose::new(
                        noise_vec(&mut rng, spec.observation_noise_m),
                        small_rotation(&mut rng, spec.observation_noise_deg.to_radians()),
                    )
                };
                TargetObservation {
                    timestamp: slam[i].timestamp,
                    camera_id: (*name).to_owned(),
                    rel_pose: slam[i].pose.inverse().compose(&target_slam).compose(&delta),
                }
            })
            .collect();

        camera_truth.push(CameraTruth {
            name: (*name).to_owned(),
            slam_from_world: PoseRecord::from(&slam_from_world),
            outlier_indices: outliers,
        });
        cameras.push(CameraData {
            name: (*name).to_owned(),
            trajectory: Trajectory::new(*name, slam)?,
            world_trajectory: Trajectory::new(format!("{name}:world"), world)?,
            observations,
            cloud: PointCloud::default(),
        });
    }

    let (pts, cloud_deviation, surfaces) = generate_cloud(spec, &line, &mut rng);
    let mut floor_toggle = false;
    for (p, s) in pts.iter().zip(&surfaces) {
        let k = match s {
            Surface::Left => 0,
            Surface::Right => 2,
            Surface::Ceiling => CENTER_CAMERA,
            Surface::Floor => {
                floor_toggle = !floor_toggle;
                if floor_toggle {
                    0
                } else {
                    2
                }
            }
        };
        let frame = Pose::from(&camera_truth[k].slam_from_world);
        cameras[k].cloud.points.push(frame.transform_point(p));
    }
    let world_cloud = PointCloud::new(pts);

    let log_start = -LOG_MARGIN_S;
    let log_count = ((spec.duration_s + 2.0 * LOG_MARGIN_S) * spec.depth_log_rate_hz).floor() as usize + 1;
    let mut log_samples = Vec::with_capacity(log_count);
    for i in 0..log_count {
        let t = log_start + i as f64 / spec.depth_log_rate_hz;
        let (p, _) = rig_state(spec, &line, &motion, t);
        let depth = (p.z + gauss(&mut rng, spec.depth_noise_m)).max(0.0);
        log_samples.push((t, depth));
    }
    let depth_log = DepthLog::new(log_samples)?;

    let (survey, stations) = generate_survey(spec, &line, &mut rng);

    let truth = GroundTruth {
        time_shift_s: spec.time_shift_s,
        depth_offset_m: spec.depth_offset_m,
        z_sign: spec.z_sign,
        width_m: spec.width_m,
        height_m: spec.height_m,
        waypoints: spec.waypoints.clone(),
        target_world: PoseRecord::from(&target_world),
        cameras: camera_truth,
        stations,
    };
    Ok(Bundle {
        spec: spec.clone(),
        cameras,
        world_cloud,
        cloud_deviation,
        depth_log,
        survey,
        truth,
    })
}

impl Bundle {
    /// Pipeline configuration matching the fixture file names written by
    /// [`Bundle::write_fixtures`].
    pub fn pipeline_config(&self) -> PipelineConfig {
        let center = &self.cameras[CENTER_CAMERA].world_trajectory;
        let pick = |frac: f64| center.keyframes()[((center.len() - 1) as f64 * frac) as usize].timestamp;
        PipelineConfig {
            depth_log: "depth.csv".into(),
            reference: CAMERA_NAMES[CENTER_CAMERA].into(),
            cameras: self
                .cameras
                .iter()
                .map(|c| CameraConfig {
                    name: c.name.clone(),
                    trajectory: format!("{}.csv", c.name).into(),
                    observations: format!("{}_obs.csv", c.name).into(),
                    cloud: Some(format!("{}_cloud.ply", c.name).into()),
                })
                .collect(),
            fuse: FuseConfig::default(),
            align: AlignConfig::default(),
            skeleton: SkeletonConfig {
                center: CAMERA_NAMES[CENTER_CAMERA].into(),
                ..SkeletonConfig::default()
            },
            select: SelectConfig {
                areas: vec![
                    AreaConfig {
                        name: "area1".into(),
                        center_camera: CAMERA_NAMES[CENTER_CAMERA].into(),
                        center_time_s: pick(0.25),
                        radius_m: 2.5,
                    },
                    AreaConfig {
                        name: "area2".into(),
                        center_camera: CAMERA_NAMES[CENTER_CAMERA].into(),
                        center_time_s: pick(0.6),
                        radius_m: 5.0,
                    },
                ],
                ..SelectConfig::default()
            },
            survey: Some(SurveyConfig {
                shots: "shots.csv".into(),
                closures: Some("loops.csv".into()),
                anchor: Some("S0".into()),
                declination_deg: self.spec.declination_deg,
            }),
        }
    }

    /// Writes every artifact into `dir`, plus `truth.toml`, `spec.toml` and
    /// `pipeline.toml`.
    pub fn write_fixtures(&self, dir: &Path) -> Result<()> {
        for c in &self.cameras {
            c.trajectory.save(&dir.join(format!("{}.csv", c.name)))?;
            textio::write_file(
                &dir.join(format!("{}_obs.csv", c.name)),
                &observations_to_csv(&c.observations),
            )?;
            c.cloud.save(&dir.join(format!("{}_cloud.ply", c.name)))?;
            c.world_trajectory
                .save(&dir.join("truth").join(format!("{}_world.csv", c.name)))?;
        }
        self.world_cloud.save(&dir.join("truth").join("world_cloud.ply"))?;
        textio::write_file(&dir.join("depth.csv"), &self.depth_log.to_csv())?;
        textio::write_file(&dir.join("shots.csv"), &self.survey.shots_csv())?;
        textio::write_file(&dir.join("loops.csv"), &self.survey.closures_csv())?;
        let truth = toml::to_string(&self.truth).map_err(|e| Error::Spec(e.to_string()))?;
        textio::write_file(&dir.join("truth.toml"), &truth)?;
        textio::write_file(&dir.join("spec.toml"), &self.spec.to_toml())?;
        textio::write_file(&dir.join("pipeline.toml"), &self.pipeline_config().to_toml())
    }
}
