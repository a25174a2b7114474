//! One-dimensional retract of a cave passage: an averaged centerline, its
//! minimum spanning tree, and left/right/up/down boundary points picked from
//! the fused sparse cloud.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Vector2, Vector3};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom::{mean_pose, Pose};
use crate::mst::{minimum_spanning_tree, Edge};
use crate::textio;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonParams {
    pub center_index: usize,
    pub flag_radius: f64,
    pub depth_tol: f64,
    pub lateral_radius: f64,
}

impl Default for SkeletonParams {
    fn default() -> Self {
        Self {
            center_index: 0,
            flag_radius: 1.0,
            depth_tol: 0.2,
            lateral_radius: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenterlineNode {
    pub id: usize,
    pub pose: Pose,
    pub source_count: usize,
    /// `(trajectory index, keyframe index)` of every absorbed pose.
    pub sources: Vec<(usize, usize)>,
}

impl CenterlineNode {
    pub fn position(&self) -> Vector3<f64> {
        self.pose.translation()
    }
}

/// A selected boundary point and its distance from the node (horizontal for
/// walls, vertical for ceiling and floor).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub point: Vector3<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WallPair {
    pub left: Option<BoundaryPoint>,
    pub right: Option<BoundaryPoint>,
    pub left_candidates: usize,
    pub right_candidates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CeilingFloor {
    pub up: Option<BoundaryPoint>,
    pub down: Option<BoundaryPoint>,
    pub up_candidates: usize,
    pub down_candidates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadingSource {
    /// Towards the next node of the depth-first traversal.
    Traversal,
    /// Leaf node: continues the incoming edge.
    Incoming,
    /// Body x-axis of the node's average pose.
    PoseYaw,
    None,
}

impl HeadingSource {
    fn as_str(self) -> &'static str {
        match self {
            HeadingSource::Traversal => "traversal",
            HeadingSource::Incoming => "incoming",
            HeadingSource::PoseYaw => "pose-yaw",
            HeadingSource::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lrud {
    pub id: usize,
    pub heading: Option<Vector3<f64>>,
    pub heading_source: HeadingSource,
    pub walls: WallPair,
    pub vertical: CeilingFloor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaveSkeleton {
    pub nodes: Vec<CenterlineNode>,
    pub edges: Vec<Edge>,
    pub lrud: Vec<Lrud>,
    /// Input poses never within `flag_radius` of a center-trajectory seed.
    pub unabsorbed: usize,
}

/// Greedy flag-and-average over the center trajectory.
///
/// Center poses are visited in time order; each pose not yet flagged seeds a
/// node that absorbs every still-unflagged pose (of any trajectory) within
/// `flag_radius` of the seed, including the seed itself.
pub fn average_trajectory(
    trajs: &[Trajectory],
    center_index: usize,
    flag_radius: f64,
) -> Result<Vec<CenterlineNode>> {
    if trajs.is_empty() || trajs.iter().any(Trajectory::is_empty) {
        return Err(Error::EmptyTrajectory);
    }
    if center_index >= trajs.len() {
        return Err(Error::InvalidArgument(format!(
            "center index {center_index} out of range for {} trajectories",
            trajs.len()
        )));
    }
    if !(flag_radius > 0.0) {
        return Err(Error::InvalidArgument("flag radius must be positive".into()));
    }
    let mut flagged: Vec<Vec<bool>> = trajs.iter().map(|t| vec![false; t.len()]).collect();
    let mut nodes = Vec::new();
    for (ci, seed) in trajs[center_index].keyframes().iter().enumerate() {
        if flagged[center_index][ci] {
            continue;
        }
        let origin = seed.pose.translation();
        let mut sources = Vec::new();
        let mut poses = Vec::new();
        for (ti, traj) in trajs.iter().enumerate() {
            for (ki, k) in traj.keyframes().iter().enumerate() {
                if !flagged[ti][ki] && (k.pose.translation() - origin).norm() <= flag_radius {
                    flagged[ti][ki] = true;
                    sources.push((ti, ki));
                    poses.push(k.pose);
                }
            }
        }
        nodes.push(CenterlineNode {
            id: nodes.len(),
            pose: mean_pose(&poses)?,
            source_count: sources.len(),
            sources,
        });
    }
    Ok(nodes)
}

pub fn build_mst(nodes: &[CenterlineNode]) -> Vec<Edge> {
    let pts: Vec<Vector3<f64>> = nodes.iter().map(CenterlineNode::position).collect();
    minimum_spanning_tree(&pts)
}

fn horizontal_unit(v: &Vector3<f64>) -> Option<Vector2<f64>> {
    let h = Vector2::new(v.x, v.y);
    let n = h.norm();
    (n > 1e-9).then(|| h / n)
}

/// Signed lateral coordinate of `p` relative to `origin` for the given
/// horizontal forward axis. Negative is left.
pub fn lateral_offset(origin: &Vector3<f64>, forward: &Vector2<f64>, p: &Vector3<f64>) -> f64 {
    let d = p - origin;
    forward.y * d.x - forward.x * d.y
}

/// Nearest wall point on each side of the node at (roughly) the node's depth.
pub fn extract_lr(
    node: &CenterlineNode,
    heading: &Vector3<f64>,
    cloud: &PointCloud,
    depth_tol: f64,
) -> Result<WallPair> {
    let forward = horizontal_unit(heading).ok_or(Error::DegenerateHeading)?;
    let c = node.position();
    let mut out = WallPair::default();
    for p in &cloud.points {
        if (p.z - c.z).abs() > depth_tol {
            continue;
        }
        let lateral = lateral_offset(&c, &forward, p);
        let (slot, count) = if lateral < 0.0 {
            (&mut out.left, &mut out.left_candidates)
        } else if lateral > 0.0 {
            (&mut out.right, &mut out.right_candidates)
        } else {
            continue;
        };
        *count += 1;
        let d = (p.x - c.x).hypot(p.y - c.y);
        if slot.is_none_or(|b| d < b.distance) {
            *slot = Some(BoundaryPoint {
                point: *p,
                distance: d,
            });
        }
    }
    Ok(out)
}

/// Ceiling and floor points above and below the node.
///
/// Candidates lie within `lateral_radius` horizontally. The ceiling is the
/// shallowest candidate above the node, the floor the deepest one below it.
pub fn extract_ud(node: &CenterlineNode, cloud: &PointCloud, lateral_radius: f64) -> CeilingFloor {
    let c = node.position();
    let mut out = CeilingFloor::default();
    let mut up_h = f64::INFINITY;
    let mut down_h = f64::INFINITY;
    for p in &cloud.points {
        let h = (p.x - c.x).hypot(p.y - c.y);
        if h > lateral_radius {
            continue;
        }
        let dz = p.z - c.z;
        let bp = BoundaryPoint {
            point: *p,
            distance: dz.abs(),
        };
        if dz < 0.0 {
            out.up_candidates += 1;
            let better = match out.up {
                None => true,
                Some(b) => p.z < b.point.z || (p.z == b.point.z && h < up_h),
            };
            if better {
                out.up = Some(bp);
                up_h = h;
            }
        } else if dz > 0.0 {
            out.down_candidates += 1;
            let better = match out.down {
                None => true,
                Some(b) => p.z > b.point.z || (p.z == b.point.z && h < down_h),
            };
            if better {
                out.down = Some(bp);
                down_h = h;
            }
        }
    }
    out
}

/// Heading of every node from a depth-first traversal of the tree rooted at
/// node 0 (neighbours visited in id order).
fn traversal_headings(nodes: &[CenterlineNode], edges: &[Edge]) -> Vec<(Option<Vector3<f64>>, HeadingSource)> {
    let n = nodes.len();
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.a].push(e.b);
        adj[e.b].push(e.a);
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    let mut parent = vec![usize::MAX; n];
    let mut first_child = vec![None; n];
    let mut visited = vec![false; n];
    let mut stack = vec![0usize];
    while let Some(u) = stack.pop() {
        if visited[u] {
            continue;
        }
        visited[u] = true;
        let children: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
        if let Some(&c) = children.first() {
            first_child[u] = Some(c);
        }
        for &c in children.iter().rev() {
            parent[c] = u;
            stack.push(c);
        }
    }
    let yaw_heading = |node: &CenterlineNode| node.pose.rotation() * Vector3::x();
    (0..n)
        .map(|u| {
            let p = nodes[u].position();
            let (dir, src) = if let Some(c) = first_child[u] {
                (nodes[c].position() - p, HeadingSource::Traversal)
            } else if parent[u] != usize::MAX {
                (p - nodes[parent[u]].position(), HeadingSource::Incoming)
            } else {
                (yaw_heading(&nodes[u]), HeadingSource::PoseYaw)
            };
            if horizontal_unit(&dir).is_some() {
                return (Some(dir), src);
            }
            let yaw = yaw_heading(&nodes[u]);
            if horizontal_unit(&yaw).is_some() {
                (Some(yaw), HeadingSource::PoseYaw)
            } else {
                (None, HeadingSource::None)
            }
        })
        .collect()
}

pub fn build_skeleton(trajs: &[Trajectory], cloud: &PointCloud, params: &SkeletonParams) -> Result<CaveSkeleton> {
    let nodes = average_trajectory(trajs, params.center_index, params.flag_radius)?;
    let edges = build_mst(&nodes);
    let headings = traversal_headings(&nodes, &edges);
    let mut lrud = Vec::with_capacity(nodes.len());
    for (node, (heading, source)) in nodes.iter().zip(headings) {
        let walls = match heading {
            Some(h) => extract_lr(node, &h, cloud, params.depth_tol)?,
            None => WallPair::default(),
        };
        lrud.push(Lrud {
            id: node.id,
            heading,
            heading_source: source,
            walls,
            vertical: extract_ud(node, cloud, params.lateral_radius),
        });
    }
    let total: usize = trajs.iter().map(Trajectory::len).sum();
    let absorbed: usize = nodes.iter().map(|n| n.source_count).sum();
    if absorbed < total {
        log::warn!("{} poses were not within the flag radius of any node", total - absorbed);
    }
    Ok(CaveSkeleton {
        nodes,
        edges,
        lrud,
        unabsorbed: total - absorbed,
    })
}

fn push_opt(out: &mut String, p: Option<BoundaryPoint>) {
    match p {
        Some(b) => {
            let _ = write!(out, ",{},{},{},{}", b.point.x, b.point.y, b.point.z, b.distance);
        }
        None => out.push_str(",,,,"),
    }
}

impl CaveSkeleton {
    pub fn nodes_csv(&self) -> String {
        let mut out = String::from("id,tx,ty,tz,qx,qy,qz,qw,source_count\n");
        for n in &self.nodes {
            let t = n.position();
            let q = n.pose.quaternion_xyzw();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                n.id, t.x, t.y, t.z, q[0], q[1], q[2], q[3], n.source_count
            );
        }
        out
    }

    pub fn edges_csv(&self) -> String {
        let mut out = String::from("a,b,length_m\n");
        for e in &self.edges {
            let _ = writeln!(out, "{},{},{}", e.a, e.b, e.length);
        }
        out
    }

    pub fn lrud_csv(&self) -> String {
        let mut out = String::from("id");
        for side in ["left", "right", "up", "down"] {
            for f in ["x", "y", "z", "d"] {
                let _ = write!(out, ",{side}_{f}");
            }
        }
        out.push('\n');
        for r in &self.lrud {
            let _ = write!(out, "{}", r.id);
            push_opt(&mut out, r.walls.left);
            push_opt(&mut out, r.walls.right);
            push_opt(&mut out, r.vertical.up);
            push_opt(&mut out, r.vertical.down);
            out.push('\n');
        }
        out
    }

    pub fn diagnostics_csv(&self) -> String {
        let mut out = String::from(
            "id,heading_x,heading_y,heading_source,left_candidates,right_candidates,up_candidates,down_candidates\n",
        );
        for r in &self.lrud {
            let (hx, hy) = match r.heading.as_ref().and_then(horizontal_unit) {
                Some(h) => (h.x.to_string(), h.y.to_string()),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(
                out,
                "{},{hx},{hy},{},{},{},{},{}",
                r.id,
                r.heading_source.as_str(),
                r.walls.left_candidates,
                r.walls.right_candidates,
                r.vertical.up_candidates,
                r.vertical.down_candidates
            );
        }
        out
    }

    /// Writes `nodes.csv`, `edges.csv`, `lrud.csv` and `diagnostics.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        textio::write_file(&dir.join("nodes.csv"), &self.nodes_csv())?;
        textio::write_file(&dir.join("edges.csv"), &self.edges_csv())?;
        textio::write_file(&dir.join("lrud.csv"), &self.lrud_csv())?;
        textio::write_file(&dir.join("diagnostics.csv"), &self.diagnostics_csv())
    }
}
