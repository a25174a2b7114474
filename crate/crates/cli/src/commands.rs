use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use spelaeo_core::align::{self, AngleSigmas, TargetEstimate};
use spelaeo_core::depth;
use spelaeo_core::pipeline::{self, PipelineConfig};
use spelaeo_core::recon;
use spelaeo_core::skeleton::{self, SkeletonParams};
use spelaeo_core::survey::{self, StickMap, SurveyNetwork};
use spelaeo_core::synth::{self, CorridorSpec};
use spelaeo_core::{write_file, DepthLog, Error, PointCloud, Trajectory};

use crate::{
    AlignArgs, FuseDepthArgs, PipelineArgs, SelectAreaArgs, SkeletonArgs, StickmapArgs, SurveyAdjustArgs,
    SurveyInput, SynthArgs,
};

/// A core error plus the file it came from, when known.
#[derive(Debug)]
pub struct Failure {
    path: Option<PathBuf>,
    error: Error,
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        if self.error.is_numerical() {
            3
        } else {
            2
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.path, &self.error) {
            // Io errors already name their path.
            (Some(p), e) if !matches!(e, Error::Io { .. }) => write!(f, "{}: {e}", p.display()),
            (_, e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Self { path: None, error }
    }
}

type CmdResult = std::result::Result<(), Failure>;

trait WithPath<T> {
    fn at(self, path: &Path) -> std::result::Result<T, Failure>;
}

impl<T> WithPath<T> for spelaeo_core::Result<T> {
    fn at(self, path: &Path) -> std::result::Result<T, Failure> {
        self.map_err(|error| Failure {
            path: Some(path.to_owned()),
            error,
        })
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    write_file(path, &text).at(path)
}

#[derive(Serialize)]
struct CorrectionReport {
    time_shift_s: f64,
    scale: f64,
    offset_m: f64,
    residual_rms_m: f64,
}

pub fn fuse_depth(a: &FuseDepthArgs) -> CmdResult {
    let traj = Trajectory::load(&a.trajectory).at(&a.trajectory)?;
    let log = DepthLog::load(&a.depth_log).at(&a.depth_log)?;
    let (corrected, c) = depth::fuse(&traj, &log, a.rate, a.max_shift)?;
    log::info!(
        "shift {:.3} s, scale {:.4}, offset {:.3} m, residual {:.3} m",
        c.time_shift,
        c.scale,
        c.offset,
        c.residual_rms
    );
    if c.scale < 0.0 {
        log::warn!("SLAM z points up; x/y are left unchanged so the corrected frame is mirrored");
    }
    corrected.save(&a.out).at(&a.out)?;
    if let Some(r) = &a.report {
        write_json(
            r,
            &CorrectionReport {
                time_shift_s: c.time_shift,
                scale: c.scale,
                offset_m: c.offset,
                residual_rms_m: c.residual_rms,
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EstimateReport {
    frame: String,
    observations: usize,
    distance_inliers: usize,
    inliers: usize,
    distance_sigma_m: f64,
    angle_sigmas_deg: [f64; 3],
    fallback: bool,
}

impl From<&TargetEstimate> for EstimateReport {
    fn from(e: &TargetEstimate) -> Self {
        let AngleSigmas { roll, pitch, yaw } = e.angle_sigmas;
        Self {
            frame: e.frame_id.clone(),
            observations: e.total_count,
            distance_inliers: e.distance_inliers,
            inliers: e.inlier_count,
            distance_sigma_m: e.distance_sigma,
            angle_sigmas_deg: [roll.to_degrees(), pitch.to_degrees(), yaw.to_degrees()],
            fallback: e.fallback,
        }
    }
}

#[derive(Serialize)]
struct AlignReport {
    reference: EstimateReport,
    moving: EstimateReport,
    from_frame: String,
    to_frame: String,
    translation: [f64; 3],
    /// (x, y, z, w)
    quaternion: [f64; 4],
}

pub fn align(a: &AlignArgs) -> CmdResult {
    let ref_traj = Trajectory::load(&a.reference).at(&a.reference)?;
    let mov_traj = Trajectory::load(&a.mov).at(&a.mov)?;
    let ref_obs = align::load_observations(&a.ref_obs).at(&a.ref_obs)?;
    let mov_obs = align::load_observations(&a.mov_obs).at(&a.mov_obs)?;
    let ref_est = align::estimate_target(&ref_traj, &ref_obs, a.tolerance).at(&a.ref_obs)?;
    let mov_est = align::estimate_target(&mov_traj, &mov_obs, a.tolerance).at(&a.mov_obs)?;
    for e in [&ref_est, &mov_est] {
        log::info!(
            "{}: {}/{} target observations kept",
            e.frame_id,
            e.inlier_count,
            e.total_count
        );
        if e.fallback {
            log::warn!("{}: orientation pass rejected everything; using the distance-pass mean", e.frame_id);
        }
    }
    let ft = align::estimate_frame_transform(&ref_est, &mov_est);
    align::apply_frame_transform(&mov_traj, &ft)?.save(&a.out).at(&a.out)?;
    if let Some(r) = &a.report {
        write_json(
            r,
            &AlignReport {
                reference: (&ref_est).into(),
                moving: (&mov_est).into(),
                from_frame: ft.from_frame.clone(),
                to_frame: ft.to_frame.clone(),
                translation: ft.transform.translation().into(),
                quaternion: ft.transform.quaternion_xyzw(),
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SkeletonReport {
    nodes: usize,
    edges: usize,
    total_length_m: f64,
    unabsorbed_poses: usize,
}

fn load_trajectories(paths: &[PathBuf]) -> std::result::Result<Vec<Trajectory>, Failure> {
    paths.iter().map(|p| Trajectory::load(p).at(p)).collect()
}

pub fn skeleton(a: &SkeletonArgs) -> CmdResult {
    let trajs = load_trajectories(&a.trajectories)?;
    let cloud = PointCloud::load(&a.cloud).at(&a.cloud)?;
    let params = SkeletonParams {
        center_index: a.center_index,
        flag_radius: a.flag_radius,
        depth_tol: a.depth_tol,
        lateral_radius: a.lateral_radius,
    };
    let skel = skeleton::build_skeleton(&trajs, &cloud, &params)?;
    log::info!("{} nodes, {} edges", skel.nodes.len(), skel.edges.len());
    if skel.unabsorbed > 0 {
        log::warn!("{} poses were not absorbed by any node", skel.unabsorbed);
    }
    skel.write_dir(&a.out_dir).at(&a.out_dir)?;
    if let Some(r) = &a.report {
        write_json(
            r,
            &SkeletonReport {
                nodes: skel.nodes.len(),
                edges: skel.edges.len(),
                total_length_m: skel.edges.iter().map(|e| e.length).sum(),
                unabsorbed_poses: skel.unabsorbed,
            },
        )?;
    }
    Ok(())
}

pub fn select_area(a: &SelectAreaArgs) -> CmdResult {
    let trajs = load_trajectories(&a.trajectories)?;
    let center_traj = Trajectory::load(&a.center_traj).at(&a.center_traj)?;
    let k = &center_traj.keyframes()[center_traj.nearest_index(a.center_time)];
    if (k.timestamp - a.center_time).abs() > 1.0 {
        log::warn!("nearest center keyframe is {:.3} s from the requested time", k.timestamp - a.center_time);
    }
    let sel = recon::select_keyframes(trajs.iter().map(|t| (t.frame_id(), t)), &k.pose, a.radius)?;
    log::info!("{} keyframes within {} m", sel.members.len(), a.radius);
    let text = recon::export_manifest(&sel, &a.image_pattern)?;
    write_file(&a.out, &text).at(&a.out)
}

fn load_survey(input: &SurveyInput) -> std::result::Result<(SurveyNetwork, String), Failure> {
    let net = SurveyNetwork::load(&input.shots, input.closures.as_deref(), input.declination).at(&input.shots)?;
    let anchor = input.anchor.clone().unwrap_or_else(|| net.segments[0].from.clone());
    Ok((net, anchor))
}

#[derive(Serialize)]
struct SurveyReport {
    anchor: String,
    stations: usize,
    segments: usize,
    closures: usize,
    /// Per station reached twice while dead reckoning, before adjustment.
    misclosures_m: Vec<(String, f64)>,
    max_residual_m: f64,
}

pub fn survey_adjust(a: &SurveyAdjustArgs) -> CmdResult {
    let (net, anchor) = load_survey(&a.input)?;
    let raw = survey::dead_reckon(&net, &anchor)?;
    let map = survey::adjust_loops(&net, &anchor)?;
    let max_residual = map.residuals.iter().copied().fold(0.0, f64::max);
    log::info!("{} stations adjusted, largest residual {:.3} m", map.stations.len(), max_residual);
    write_file(&a.out, &map.stations_csv()).at(&a.out)?;
    if let Some(p) = &a.residuals {
        write_file(p, &map.residuals_csv(&net)).at(p)?;
    }
    if let Some(p) = &a.svg {
        write_file(p, &survey::stickmap_svg(&map, &net)).at(p)?;
    }
    if let Some(r) = &a.report {
        write_json(
            r,
            &SurveyReport {
                anchor,
                stations: map.stations.len(),
                segments: net.segments.len(),
                closures: net.closures.len(),
                misclosures_m: raw.misclosures.clone(),
                max_residual_m: max_residual,
            },
        )?;
    }
    Ok(())
}

pub fn survey_stickmap(a: &StickmapArgs) -> CmdResult {
    let (net, anchor) = load_survey(&a.input)?;
    let map: StickMap = if a.raw {
        survey::dead_reckon(&net, &anchor)?
    } else {
        survey::adjust_loops(&net, &anchor)?
    };
    write_file(&a.svg, &survey::stickmap_svg(&map, &net)).at(&a.svg)
}

pub fn synth(a: &SynthArgs) -> CmdResult {
    let mut spec = match &a.spec {
        Some(p) => CorridorSpec::from_toml(&spelaeo_core::read_file(p).at(p)?).at(p)?,
        None => CorridorSpec::default(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let bundle = synth::generate(&spec)?;
    bundle.write_fixtures(&a.out_dir).at(&a.out_dir)?;
    log::info!(
        "wrote {} cameras, {} depth samples, {} survey shots to {}",
        bundle.cameras.len(),
        bundle.depth_log.samples().len(),
        bundle.survey.segments.len(),
        a.out_dir.display()
    );
    Ok(())
}

pub fn pipeline(a: &PipelineArgs) -> CmdResult {
    let mut cfg = PipelineConfig::load(&a.config).at(&a.config)?;
    if let Some(r) = &a.reference {
        cfg.reference = r.clone();
    }
    if let Some(v) = a.rate {
        cfg.fuse.rate_hz = v;
    }
    if let Some(v) = a.max_shift {
        cfg.fuse.max_shift_s = v;
    }
    if let Some(v) = a.tolerance {
        cfg.align.tolerance_s = v;
    }
    if let Some(v) = a.flag_radius {
        cfg.skeleton.flag_radius_m = v;
    }
    if let Some(v) = a.depth_tol {
        cfg.skeleton.depth_tol_m = v;
    }
    cfg.validate()?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let report = pipeline::run(&cfg, base, &a.out_dir)?;
    log::info!(
        "{} cameras aligned to '{}', {} skeleton nodes",
        report.cameras.len(),
        report.reference,
        report.skeleton_nodes
    );
    write_json(&a.out_dir.join("report.json"), &report)
}
