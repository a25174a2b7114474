use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector, Vector3};

use super::{StickMap, SurveyNetwork, SurveySegment};
use crate::error::{Error, Result};
use crate::geom::circular_mean;

/// East/north/down displacement of a shot.
///
/// The horizontal run follows from the slope length and the depth change;
/// the heading is the circular mean of the two endpoint azimuths.
pub fn segment_displacement(seg: &SurveySegment) -> Result<Vector3<f64>> {
    let dz = seg.depth_to - seg.depth_from;
    if dz.abs() > seg.length * (1.0 + 1e-6) {
        return Err(Error::InconsistentSegment {
            from: seg.from.clone(),
            to: seg.to.clone(),
            dz,
            length: seg.length,
        });
    }
    let h = (seg.length * seg.length - dz * dz).max(0.0).sqrt();
    let az = circular_mean(&[seg.azimuth_in.to_radians(), seg.azimuth_out.to_radians()]).map_err(
        |_| {
            Error::InvalidArgument(format!(
                "segment {}->{}: azimuths {} and {} are opposite",
                seg.from, seg.to, seg.azimuth_in, seg.azimuth_out
            ))
        },
    )?;
    Ok(Vector3::new(h * az.sin(), h * az.cos(), dz))
}

/// Stations grouped into closure classes.
struct Stations {
    names: Vec<String>,
    /// Class id per station.
    class: Vec<usize>,
    class_count: usize,
    index: HashMap<String, usize>,
}

impl Stations {
    fn new(net: &SurveyNetwork) -> Result<Self> {
        let names = net.station_names();
        let index: HashMap<String, usize> =
            names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut parent: Vec<usize> = (0..names.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for (a, b) in &net.closures {
            let ia = *index.get(a).ok_or_else(|| Error::UnknownStation(a.clone()))?;
            let ib = *index.get(b).ok_or_else(|| Error::UnknownStation(b.clone()))?;
            let (ra, rb) = (find(&mut parent, ia), find(&mut parent, ib));
            // the smaller index becomes the root so class ids follow first appearance
            if ra != rb {
                let (lo, hi) = (ra.min(rb), ra.max(rb));
                parent[hi] = lo;
            }
        }
        let mut class_of_root = HashMap::new();
        let mut class = Vec::with_capacity(names.len());
        for i in 0..names.len() {
            let r = find(&mut parent, i);
            let next = class_of_root.len();
            class.push(*class_of_root.entry(r).or_insert(next));
        }
        Ok(Self {
            class_count: class_of_root.len(),
            names,
            class,
            index,
        })
    }

    fn class_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .map(|&i| self.class[i])
            .ok_or_else(|| Error::UnknownStation(name.to_owned()))
    }
}

fn displacements(net: &SurveyNetwork) -> Result<Vec<Vector3<f64>>> {
    net.segments.iter().map(segment_displacement).collect()
}

fn residuals(net: &SurveyNetwork, st: &Stations, coords: &[Vector3<f64>], disp: &[Vector3<f64>]) -> Vec<f64> {
    net.segments
        .iter()
        .zip(disp)
        .map(|(s, d)| {
            let a = coords[st.class[st.index[&s.from]]];
            let b = coords[st.class[st.index[&s.to]]];
            (b - a - d).norm()
        })
        .collect()
}

fn to_map(anchor: &str, st: &Stations, coords: &[Vector3<f64>], residuals: Vec<f64>) -> StickMap {
    StickMap {
        anchor: anchor.to_owned(),
        stations: st
            .names
            .iter()
            .zip(&st.class)
            .map(|(n, &c)| (n.clone(), coords[c]))
            .collect(),
        residuals,
        misclosures: Vec::new(),
    }
}

/// Breadth-first traverse from the anchor. The first visit fixes a station's
/// coordinate; later arrivals record a misclosure.
fn traverse(
    net: &SurveyNetwork,
    st: &Stations,
    anchor_class: usize,
    disp: &[Vector3<f64>],
) -> Result<(Vec<Vector3<f64>>, Vec<Option<f64>>)> {
    let mut adj: Vec<Vec<(usize, Vector3<f64>)>> = vec![Vec::new(); st.class_count];
    for (s, d) in net.segments.iter().zip(disp) {
        let a = st.class_of(&s.from)?;
        let b = st.class_of(&s.to)?;
        adj[a].push((b, *d));
        adj[b].push((a, -d));
    }
    let mut coords: Vec<Option<Vector3<f64>>> = vec![None; st.class_count];
    let mut misclosure: Vec<Option<f64>> = vec![None; st.class_count];
    coords[anchor_class] = Some(Vector3::zeros());
    let mut queue = VecDeque::from([anchor_class]);
    while let Some(u) = queue.pop_front() {
        let pu = coords[u].expect("queued stations have coordinates");
        for &(v, d) in &adj[u] {
            let reached = pu + d;
            match coords[v] {
                None => {
                    coords[v] = Some(reached);
                    queue.push_back(v);
                }
                Some(pv) => {
                    let m = (reached - pv).norm();
                    let slot = misclosure[v].get_or_insert(0.0);
                    *slot = slot.max(m);
                }
            }
        }
    }
    let missing: Vec<String> = st
        .names
        .iter()
        .zip(&st.class)
        .filter(|(_, c)| coords[**c].is_none())
        .map(|(n, _)| n.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::DisconnectedStation(missing));
    }
    Ok((coords.into_iter().map(Option::unwrap).collect(), misclosure))
}

/// Chains shot displacements outward from the anchor (breadth first, in
/// shot-list order). Closure pairs are treated as one station.
pub fn dead_reckon(net: &SurveyNetwork, anchor: &str) -> Result<StickMap> {
    let st = Stations::new(net)?;
    let anchor_class = st.class_of(anchor)?;
    let disp = displacements(net)?;
    let (coords, misclosure) = traverse(net, &st, anchor_class, &disp)?;
    let res = residuals(net, &st, &coords, &disp);
    let mut map = to_map(anchor, &st, &coords, res);
    map.misclosures = st
        .names
        .iter()
        .zip(&st.class)
        .filter_map(|(n, &c)| misclosure[c].map(|m| (n.clone(), m)))
        .collect();
    Ok(map)
}

/// `Σ ‖horizontal residual‖² / length` for the given station coordinates.
pub fn weighted_ssr(net: &SurveyNetwork, map: &StickMap) -> Result<f64> {
    let mut total = 0.0;
    for s in &net.segments {
        let d = segment_displacement(s)?;
        let a = map.position(&s.from).ok_or_else(|| Error::UnknownStation(s.from.clone()))?;
        let b = map.position(&s.to).ok_or_else(|| Error::UnknownStation(s.to.clone()))?;
        let r = b - a - d;
        total += (r.x * r.x + r.y * r.y) / s.length;
    }
    Ok(total)
}

/// Weighted least-squares loop closure.
///
/// Depths are pinned to the mean of each station's recorded depths (relative
/// to the anchor); only east/north positions are estimated. Each shot
/// contributes its horizontal misfit with weight `1 / length`, closure pairs
/// share one unknown, and the anchor is held at the origin.
pub fn adjust_loops(net: &SurveyNetwork, anchor: &str) -> Result<StickMap> {
    let st = Stations::new(net)?;
    let anchor_class = st.class_of(anchor)?;
    let disp = displacements(net)?;
    // connectivity check; also yields the starting coordinates for the report
    traverse(net, &st, anchor_class, &disp)?;

    let mut depth_sum = vec![0.0; st.class_count];
    let mut depth_n = vec![0usize; st.class_count];
    for s in &net.segments {
        for (name, d) in [(&s.from, s.depth_from), (&s.to, s.depth_to)] {
            let c = st.class_of(name)?;
            depth_sum[c] += d;
            depth_n[c] += 1;
        }
    }
    let depth: Vec<f64> = depth_sum
        .iter()
        .zip(&depth_n)
        .map(|(s, n)| s / *n as f64)
        .collect();

    // unknown index per class; the anchor class has none
    let mut unknown = vec![None; st.class_count];
    let mut k = 0;
    for (c, slot) in unknown.iter_mut().enumerate() {
        if c != anchor_class {
            *slot = Some(k);
            k += 1;
        }
    }

    let mut coords: Vec<Vector3<f64>> = depth
        .iter()
        .map(|d| Vector3::new(0.0, 0.0, d - depth[anchor_class]))
        .collect();
    if k > 0 {
        let mut normal = DMatrix::<f64>::zeros(k, k);
        let mut rhs_x = DVector::<f64>::zeros(k);
        let mut rhs_y = DVector::<f64>::zeros(k);
        for (s, d) in net.segments.iter().zip(&disp) {
            let a = st.class_of(&s.from)?;
            let b = st.class_of(&s.to)?;
            if a == b {
                continue;
            }
            let w = 1.0 / s.length;
            // residual = p_b − p_a − d
            for (u, sign) in [(unknown[a], -1.0), (unknown[b], 1.0)] {
                let Some(i) = u else { continue };
                normal[(i, i)] += w;
                rhs_x[i] += sign * w * d.x;
                rhs_y[i] += sign * w * d.y;
            }
            if let (Some(i), Some(j)) = (unknown[a], unknown[b]) {
                normal[(i, j)] -= w;
                normal[(j, i)] -= w;
            }
        }
        let chol = normal.cholesky().ok_or(Error::SingularSystem)?;
        let x = chol.solve(&rhs_x);
        let y = chol.solve(&rhs_y);
        for (c, u) in unknown.iter().enumerate() {
            if let Some(i) = u {
                coords[c].x = x[*i];
                coords[c].y = y[*i];
            }
        }
    }
    let res = residuals(net, &st, &coords, &disp);
    Ok(to_map(anchor, &st, &coords, res))
}
