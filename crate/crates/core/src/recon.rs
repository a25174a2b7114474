//! Keyframe selection around a central pose and pose-prior manifests for an
//! external structure-from-motion tool.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::textio;
use crate::trajectory::Trajectory;

pub const MANIFEST_HEADER: [&str; 10] = [
    "image_id",
    "camera_id",
    "timestamp_s",
    "tx",
    "ty",
    "tz",
    "qx",
    "qy",
    "qz",
    "qw",
];

pub const DEFAULT_IMAGE_PATTERN: &str = "{camera}/{timestamp}.png";

#[derive(Debug, Clone, PartialEq)]
pub struct AreaMember {
    pub camera_id: String,
    pub timestamp: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaSelection {
    pub center: Pose,
    pub radius: f64,
    /// Sorted by `(camera_id, timestamp)`.
    pub members: Vec<AreaMember>,
}

/// Every keyframe whose position lies within `radius` of the center
/// position. Orientation plays no part.
pub fn select_keyframes<'a>(
    cameras: impl IntoIterator<Item = (&'a str, &'a Trajectory)>,
    center: &Pose,
    radius: f64,
) -> Result<AreaSelection> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius {radius} must be positive")));
    }
    let c = center.translation();
    let mut members: Vec<AreaMember> = cameras
        .into_iter()
        .flat_map(|(id, traj)| {
            traj.keyframes()
                .iter()
                .filter(move |k| (k.pose.translation() - c).norm() <= radius)
                .map(move |k| AreaMember {
                    camera_id: id.to_owned(),
                    timestamp: k.timestamp,
                    pose: k.pose,
                })
        })
        .collect();
    members.sort_by(|a, b| {
        a.camera_id
            .cmp(&b.camera_id)
            .then(a.timestamp.total_cmp(&b.timestamp))
    });
    if members.is_empty() {
        log::warn!("no keyframe within {radius} m of the center pose");
    }
    Ok(AreaSelection {
        center: *center,
        radius,
        members,
    })
}

fn image_id(pattern: &str, m: &AreaMember) -> String {
    pattern
        .replace("{camera}", &m.camera_id)
        .replace("{timestamp}", &m.timestamp.to_string())
}

/// CSV manifest, one row per member. `pattern` builds the image id from
/// `{camera}` and `{timestamp}` placeholders.
pub fn export_manifest(sel: &AreaSelection, pattern: &str) -> Result<String> {
    if !pattern.contains("{camera}") || !pattern.contains("{timestamp}") || pattern.contains(',') {
        return Err(Error::Pattern(pattern.to_owned()));
    }
    let mut out = MANIFEST_HEADER.join(",");
    out.push('\n');
    for m in &sel.members {
        let t = m.pose.translation();
        let q = m.pose.quaternion_xyzw();
        let _ = write!(out, "{},{},", image_id(pattern, m), m.camera_id);
        textio::push_row(&mut out, &[m.timestamp, t.x, t.y, t.z, q[0], q[1], q[2], q[3]]);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub image_id: String,
    pub member: AreaMember,
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRow>> {
    textio::rows(text, &MANIFEST_HEADER)?
        .iter()
        .map(|row| {
            let mut v = [0.0; 8];
            for (i, slot) in v.iter_mut().enumerate() {
                *slot = row.f64(i + 2, MANIFEST_HEADER[i + 2])?;
            }
            Ok(ManifestRow {
                image_id: row.str(0).to_owned(),
                member: AreaMember {
                    camera_id: row.str(1).to_owned(),
                    timestamp: v[0],
                    pose: Pose::from_components([v[1], v[2], v[3]], [v[4], v[5], v[6], v[7]]),
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Keyframe;
    use nalgebra::Vector3;

    fn traj() -> Trajectory {
        Trajectory::new(
            "c",
            (0..10)
                .map(|i| Keyframe {
                    timestamp: i as f64 * 0.5,
                    pose: Pose::from_translation(Vector3::new(i as f64, 0.0, 0.0)),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn large_radius_takes_all() {
        let t = traj();
        let s = select_keyframes([("c", &t)], &Pose::identity(), 100.0).unwrap();
        assert_eq!(s.members.len(), 10);
    }

    #[test]
    fn tiny_radius_on_keyframe() {
        let t = traj();
        let center = t.keyframes()[3].pose;
        let s = select_keyframes([("c", &t)], &center, 1e-9).unwrap();
        assert_eq!(s.members.len(), 1);
        assert_eq!(s.members[0].timestamp, 1.5);
    }

    #[test]
    fn manifest_rows() {
        let t = traj();
        let empty = select_keyframes([("c", &t)], &Pose::from_translation(Vector3::new(0.0, 50.0, 0.0)), 1.0).unwrap();
        assert_eq!(export_manifest(&empty, DEFAULT_IMAGE_PATTERN).unwrap(), MANIFEST_HEADER.join(",") + "\n");
        let one = select_keyframes([("c", &t)], &t.keyframes()[2].pose, 0.1).unwrap();
        let text = export_manifest(&one, DEFAULT_IMAGE_PATTERN).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "c/1.png,c,1,2,0,0,0,0,0,1");
        assert!(matches!(export_manifest(&one, "{camera}.png"), Err(Error::Pattern(_))));
    }
}
