//! Time-ordered keyframe trajectories and their CSV representation.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::textio;

pub const TRAJECTORY_HEADER: [&str; 8] = ["timestamp_s", "tx", "ty", "tz", "qx", "qy", "qz", "qw"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keyframe {
    pub timestamp: f64,
    pub pose: Pose,
}

/// Keyframe poses expressed in the frame named by `frame_id`.
///
/// Timestamps are strictly increasing and the list is never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    frame_id: String,
    keyframes: Vec<Keyframe>,
}

impl Trajectory {
    pub fn new(frame_id: impl Into<String>, keyframes: Vec<Keyframe>) -> Result<Self> {
        if keyframes.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        check_increasing(keyframes.iter().map(|k| k.timestamp), None)?;
        Ok(Self {
            frame_id: frame_id.into(),
            keyframes,
        })
    }

    pub fn frame_id(&self) -> &str {
        &self.frame_id
    }

    pub fn keyframes(&self) -> &[Keyframe] {
        &self.keyframes
    }

    pub fn len(&self) -> usize {
        self.keyframes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keyframes.is_empty()
    }

    pub fn poses(&self) -> impl Iterator<Item = &Pose> {
        self.keyframes.iter().map(|k| &k.pose)
    }

    pub fn start_time(&self) -> f64 {
        self.keyframes[0].timestamp
    }

    pub fn end_time(&self) -> f64 {
        self.keyframes[self.keyframes.len() - 1].timestamp
    }

    /// Applies `f` to every keyframe; timestamps must stay strictly increasing.
    pub fn map_keyframes(
        &self,
        frame_id: impl Into<String>,
        f: impl FnMut(&Keyframe) -> Keyframe,
    ) -> Result<Self> {
        Self::new(frame_id, self.keyframes.iter().map(f).collect())
    }

    /// Index of the keyframe closest in time to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let idx = self.keyframes.partition_point(|k| k.timestamp < t);
        if idx == 0 {
            return 0;
        }
        if idx == self.keyframes.len() {
            return idx - 1;
        }
        let before = t - self.keyframes[idx - 1].timestamp;
        let after = self.keyframes[idx].timestamp - t;
        if after < before {
            idx
        } else {
            idx - 1
        }
    }

    /// Keyframe whose timestamp lies within `tolerance` of `t`, if any.
    pub fn keyframe_near(&self, t: f64, tolerance: f64) -> Option<&Keyframe> {
        let k = &self.keyframes[self.nearest_index(t)];
        ((k.timestamp - t).abs() <= tolerance).then_some(k)
    }

    pub fn parse_csv(frame_id: impl Into<String>, text: &str) -> Result<Self> {
        let keyframes = parse_pose_rows(text)?;
        if keyframes.is_empty() {
            return Err(Error::parse(0, "no keyframes"));
        }
        Self::new(frame_id, keyframes)
    }

    pub fn to_csv(&self) -> String {
        write_pose_rows(&self.keyframes)
    }

    /// Loads a trajectory, naming its frame after the file stem.
    pub fn load(path: &Path) -> Result<Self> {
        let text = textio::read_file(path)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse_csv(stem, &text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_file(path, &self.to_csv())
    }
}

/// Parses `timestamp_s,tx,ty,tz,qx,qy,qz,qw` rows with strictly increasing
/// timestamps. Shared by trajectory and observation files.
pub(crate) fn parse_pose_rows(text: &str) -> Result<Vec<Keyframe>> {
    let rows = textio::rows(text, &TRAJECTORY_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    let mut prev: Option<f64> = None;
    for row in rows {
        let mut v = [0.0; 8];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = row.f64(i, TRAJECTORY_HEADER[i])?;
        }
        if let Some(p) = prev {
            if v[0] <= p {
                return Err(Error::parse(
                    row.line,
                    format!("timestamp {} does not increase (previous {})", v[0], p),
                ));
            }
        }
        let qn = (v[4] * v[4] + v[5] * v[5] + v[6] * v[6] + v[7] * v[7]).sqrt();
        if qn < 1e-6 {
            return Err(Error::parse(row.line, "quaternion has zero norm"));
        }
        prev = Some(v[0]);
        out.push(Keyframe {
            timestamp: v[0],
            pose: Pose::from_components([v[1], v[2], v[3]], [v[4], v[5], v[6], v[7]]),
        });
    }
    Ok(out)
}

pub(crate) fn write_pose_rows(keyframes: &[Keyframe]) -> String {
    let mut out = TRAJECTORY_HEADER.join(",");
    out.push('\n');
    for k in keyframes {
        let t = k.pose.translation();
        let q = k.pose.quaternion_xyzw();
        textio::push_row(&mut out, &[k.timestamp, t.x, t.y, t.z, q[0], q[1], q[2], q[3]]);
    }
    out
}

fn check_increasing(ts: impl Iterator<Item = f64>, line: Option<usize>) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for (i, t) in ts.enumerate() {
        if !t.is_finite() || t <= prev {
            return Err(Error::parse(
                line.unwrap_or(i + 1),
                format!("timestamps must be finite and strictly increasing (at {t})"),
            ));
        }
        prev = t;
    }
    Ok(())
}
