//! Configuration and driver for the full fuse → align → skeleton →
//! select-area chain (plus an optional survey adjustment).
//!
//! Input paths in a [`PipelineConfig`] are relative to a base directory,
//! normally the directory holding the config file. Everything is written
//! below a single output directory:
//!
//! ```text
//! corrected/<camera>.csv   depth-corrected trajectories
//! aligned/<camera>.csv     trajectories in the reference camera's frame
//! fused.ply                merged clouds in the reference frame
//! skeleton/                nodes.csv, edges.csv, lrud.csv, diagnostics.csv
//! areas/<name>.csv         pose-prior manifests
//! survey/                  stations.csv, residuals.csv, map.svg
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::align::{self, FrameTransform, TargetEstimate};
use crate::cloud::PointCloud;
use crate::depth::{self, DepthCorrection, DepthLog};
use crate::error::{Error, Result};
use crate::recon;
use crate::skeleton::{self, SkeletonParams};
use crate::survey::{self, SurveyNetwork};
use crate::textio;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub name: String,
    pub trajectory: PathBuf,
    pub observations: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuseConfig {
    pub rate_hz: f64,
    pub max_shift_s: f64,
}

impl Default for FuseConfig {
    fn default() -> Self {
        Self {
            rate_hz: depth::DEFAULT_RATE_HZ,
            max_shift_s: depth::DEFAULT_MAX_SHIFT_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub tolerance_s: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            tolerance_s: align::DEFAULT_ASSOCIATION_TOLERANCE_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkeletonConfig {
    /// Camera whose trajectory seeds the centerline; defaults to the
    /// reference camera when empty.
    pub center: String,
    pub flag_radius_m: f64,
    pub depth_tol_m: f64,
    pub lateral_radius_m: f64,
}

impl Default for SkeletonConfig {
    fn default() -> Self {
        let p = SkeletonParams::default();
        Self {
            center: String::new(),
            flag_radius_m: p.flag_radius,
            depth_tol_m: p.depth_tol,
            lateral_radius_m: p.lateral_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaConfig {
    pub name: String,
    pub center_camera: String,
    /// On the dive-computer clock.
    pub center_time_s: f64,
    pub radius_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    pub image_pattern: String,
    pub areas: Vec<AreaConfig>,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            image_pattern: recon::DEFAULT_IMAGE_PATTERN.to_owned(),
            areas: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveyConfig {
    pub shots: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closures: Option<PathBuf>,
    /// First station of the shot list when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    #[serde(default)]
    pub declination_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub depth_log: PathBuf,
    /// Camera whose SLAM frame the others are aligned into.
    pub reference: String,
    pub cameras: Vec<CameraConfig>,
    #[serde(default)]
    pub fuse: FuseConfig,
    #[serde(default)]
    pub align: AlignConfig,
    #[serde(default)]
    pub skeleton: SkeletonConfig,
    #[serde(default)]
    pub select: SelectConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survey: Option<SurveyConfig>,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&textio::read_file(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn camera_index(&self, name: &str) -> Result<usize> {
        self.cameras
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown camera '{name}'")))
    }

    fn skeleton_center(&self) -> &str {
        if self.skeleton.center.is_empty() {
            &self.reference
        } else {
            &self.skeleton.center
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cameras.is_empty() {
            return Err(Error::InvalidArgument("no cameras configured".into()));
        }
        for (i, c) in self.cameras.iter().enumerate() {
            if c.name.is_empty() || c.name.contains(['/', '\\', ',']) {
                return Err(Error::InvalidArgument(format!("bad camera name '{}'", c.name)));
            }
            if self.cameras[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::InvalidArgument(format!("duplicate camera '{}'", c.name)));
            }
        }
        self.camera_index(&self.reference)?;
        self.camera_index(self.skeleton_center())?;
        check_positive("fuse.rate_hz", self.fuse.rate_hz)?;
        check_positive("fuse.max_shift_s", self.fuse.max_shift_s)?;
        check_positive("align.tolerance_s", self.align.tolerance_s)?;
        check_positive("skeleton.flag_radius_m", self.skeleton.flag_radius_m)?;
        check_positive("skeleton.depth_tol_m", self.skeleton.depth_tol_m)?;
        check_positive("skeleton.lateral_radius_m", self.skeleton.lateral_radius_m)?;
        for (i, a) in self.select.areas.iter().enumerate() {
            if a.name.is_empty() || a.name.contains(['/', '\\']) {
                return Err(Error::InvalidArgument(format!("bad area name '{}'", a.name)));
            }
            if self.select.areas[..i].iter().any(|o| o.name == a.name) {
                return Err(Error::InvalidArgument(format!("duplicate area '{}'", a.name)));
            }
            self.camera_index(&a.center_camera)?;
            check_positive("select.areas.radius_m", a.radius_m)?;
            if !a.center_time_s.is_finite() {
                return Err(Error::InvalidArgument("select.areas.center_time_s must be finite".into()));
            }
        }
        if let Some(s) = &self.survey {
            if !s.declination_deg.is_finite() {
                return Err(Error::InvalidArgument("survey.declination_deg must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CameraReport {
    pub name: String,
    pub keyframes: usize,
    pub time_shift_s: f64,
    pub scale: f64,
    pub offset_m: f64,
    pub residual_rms_m: f64,
    pub inliers: usize,
    pub observations: usize,
    pub fallback: bool,
    /// Into the reference frame: translation and quaternion (x, y, z, w).
    pub transform_t: [f64; 3],
    pub transform_q: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaReport {
    pub name: String,
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveyReport {
    pub stations: usize,
    pub max_residual_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub reference: String,
    pub cameras: Vec<CameraReport>,
    pub fused_points: usize,
    pub skeleton_nodes: usize,
    pub skeleton_edges: usize,
    pub unabsorbed_poses: usize,
    pub areas: Vec<AreaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub survey: Option<SurveyReport>,
}

struct CameraRun {
    corrected: Trajectory,
    correction: DepthCorrection,
    estimate: TargetEstimate,
    cloud: Option<PointCloud>,
}

/// Runs every stage and writes the output tree under `out_dir`.
pub fn run(cfg: &PipelineConfig, base_dir: &Path, out_dir: &Path) -> Result<PipelineReport> {
    cfg.validate()?;
    let log = DepthLog::load(&base_dir.join(&cfg.depth_log))?;

    let mut runs = Vec::with_capacity(cfg.cameras.len());
    for cam in &cfg.cameras {
        let raw = Trajectory::parse_csv(cam.name.clone(), &textio::read_file(&base_dir.join(&cam.trajectory))?)?;
        let (corrected, correction) = depth::fuse(&raw, &log, cfg.fuse.rate_hz, cfg.fuse.max_shift_s)?;
        if correction.scale < 0.0 {
            log::warn!(
                "{}: SLAM z points up; x/y are left unchanged so the corrected frame is mirrored",
                cam.name
            );
        }
        log::info!(
            "{}: shift {:.3} s, scale {:.4}, offset {:.3} m",
            cam.name,
            correction.time_shift,
            correction.scale,
            correction.offset
        );
        let mut obs = align::load_observations(&base_dir.join(&cam.observations))?;
        for o in &mut obs {
            o.timestamp += correction.time_shift;
        }
        let estimate = align::estimate_target(&corrected, &obs, cfg.align.tolerance_s)?;
        let cloud = match &cam.cloud {
            Some(p) => {
                let c = PointCloud::load(&base_dir.join(p))?;
                Some(c.map_points(|p| nalgebra::Vector3::new(p.x, p.y, correction.depth_of(p.z))))
            }
            None => None,
        };
        runs.push(CameraRun {
            corrected,
            correction,
            estimate,
            cloud,
        });
    }

    let ref_idx = cfg.camera_index(&cfg.reference)?;
    let ref_est = runs[ref_idx].estimate.clone();
    let mut aligned = Vec::with_capacity(runs.len());
    let mut transforms: Vec<FrameTransform> = Vec::with_capacity(runs.len());
    let mut clouds = Vec::new();
    for run in &runs {
        let ft = align::estimate_frame_transform(&ref_est, &run.estimate);
        let traj = align::apply_frame_transform(&run.corrected, &ft)?;
        if let Some(c) = &run.cloud {
            clouds.push(c.map_points(|p| ft.transform.transform_point(p)));
        }
        aligned.push(traj);
        transforms.push(ft);
    }
    let fused = PointCloud::merge(&clouds);

    let params = SkeletonParams {
        center_index: cfg.camera_index(cfg.skeleton_center())?,
        flag_radius: cfg.skeleton.flag_radius_m,
        depth_tol: cfg.skeleton.depth_tol_m,
        lateral_radius: cfg.skeleton.lateral_radius_m,
    };
    let skel = skeleton::build_skeleton(&aligned, &fused, &params)?;

    let mut manifests = Vec::with_capacity(cfg.select.areas.len());
    for area in &cfg.select.areas {
        let center_traj = &aligned[cfg.camera_index(&area.center_camera)?];
        let center = center_traj.keyframes()[center_traj.nearest_index(area.center_time_s)].pose;
        let sel = recon::select_keyframes(
            cfg.cameras.iter().zip(&aligned).map(|(c, t)| (c.name.as_str(), t)),
            &center,
            area.radius_m,
        )?;
        let text = recon::export_manifest(&sel, &cfg.select.image_pattern)?;
        manifests.push((area.name.clone(), sel.members.len(), text));
    }

    let survey_out = match &cfg.survey {
        Some(s) => {
            let net = SurveyNetwork::load(
                &base_dir.join(&s.shots),
                s.closures.as_ref().map(|p| base_dir.join(p)).as_deref(),
                s.declination_deg,
            )?;
            let anchor = match &s.anchor {
                Some(a) => a.clone(),
                None => net.segments[0].from.clone(),
            };
            let map = survey::adjust_loops(&net, &anchor)?;
            Some((net, map))
        }
        None => None,
    };

    // All computation succeeded; write outputs.
    for (cam, run) in cfg.cameras.iter().zip(&runs) {
        run.corrected.save(&out_dir.join("corrected").join(format!("{}.csv", cam.name)))?;
    }
    for (cam, traj) in cfg.cameras.iter().zip(&aligned) {
        traj.save(&out_dir.join("aligned").join(format!("{}.csv", cam.name)))?;
    }
    fused.save(&out_dir.join("fused.ply"))?;
    skel.write_dir(&out_dir.join("skeleton"))?;
    for (name, _, text) in &manifests {
        textio::write_file(&out_dir.join("areas").join(format!("{name}.csv")), text)?;
    }
    if let Some((net, map)) = &survey_out {
        let dir = out_dir.join("survey");
        textio::write_file(&dir.join("stations.csv"), &map.stations_csv())?;
        textio::write_file(&dir.join("residuals.csv"), &map.residuals_csv(net))?;
        textio::write_file(&dir.join("map.svg"), &survey::stickmap_svg(map, net))?;
    }

    Ok(PipelineReport {
        reference: cfg.reference.clone(),
        cameras: cfg
            .cameras
            .iter()
            .zip(&runs)
            .zip(&transforms)
            .map(|((cam, run), ft)| CameraReport {
                name: cam.name.clone(),
                keyframes: run.corrected.len(),
                time_shift_s: run.correction.time_shift,
                scale: run.correction.scale,
                offset_m: run.correction.offset,
                residual_rms_m: run.correction.residual_rms,
                inliers: run.estimate.inlier_count,
                observations: run.estimate.total_count,
                fallback: run.estimate.fallback,
                transform_t: ft.transform.translation().into(),
                transform_q: ft.transform.quaternion_xyzw(),
            })
            .collect(),
        fused_points: fused.len(),
        skeleton_nodes: skel.nodes.len(),
        skeleton_edges: skel.edges.len(),
        unabsorbed_poses: skel.unabsorbed,
        areas: manifests
            .iter()
            .map(|(name, n, _)| AreaReport {
                name: name.clone(),
                members: *n,
            })
            .collect(),
        survey: survey_out.as_ref().map(|(_, map)| SurveyReport {
            stations: map.stations.len(),
            max_residual_m: map.residuals.iter().copied().fold(0.0, f64::max),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
depth_log = "depth.csv"
reference = "a"

[[cameras]]
name = "a"
trajectory = "a.csv"
observations = "a_obs.csv"
"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = PipelineConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.fuse, FuseConfig::default());
        assert_eq!(cfg.skeleton_center(), "a");
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_ranges() {
        assert!(PipelineConfig::from_toml(&format!("{MINIMAL}\n[fuse]\nrate = 3\n")).is_err());
        assert!(PipelineConfig::from_toml(&format!("{MINIMAL}\n[fuse]\nrate_hz = -1\n")).is_err());
        let bad_ref = MINIMAL.replace("reference = \"a\"", "reference = \"b\"");
        assert!(matches!(PipelineConfig::from_toml(&bad_ref), Err(Error::InvalidArgument(_))));
    }
}
