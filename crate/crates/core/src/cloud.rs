//! Sparse point clouds and their ASCII PLY encoding.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::textio;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    /// Per-point RGB, parallel to `points` when present.
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        Self {
            points,
            colors: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Concatenates clouds; colors survive only if every input has them.
    pub fn merge(clouds: &[PointCloud]) -> PointCloud {
        let points = clouds.iter().flat_map(|c| c.points.iter().copied()).collect();
        let colors = clouds
            .iter()
            .map(|c| c.colors.as_ref())
            .collect::<Option<Vec<_>>>()
            .map(|cs| cs.into_iter().flatten().copied().collect());
        PointCloud { points, colors }
    }

    pub fn map_points(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(f).collect(),
            colors: self.colors.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        parse_ply(&textio::read_file(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_file(path, &write_ply(self))
    }
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
    has_list: bool,
}

/// Reads an ASCII PLY file. The `vertex` element must carry `x`, `y`, `z`;
/// `red/green/blue` (or `r/g/b`) are picked up when present. Other
/// elements are skipped.
pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        Some((n, _)) => return Err(Error::parse(n, "missing 'ply' magic")),
        None => return Err(Error::parse(1, "empty file")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut format_seen = false;
    let mut header_done = false;
    for (n, line) in lines.by_ref() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(Error::parse(n, "only 'format ascii 1.0' is supported"));
                }
                format_seen = true;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| Error::parse(n, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::parse(n, "element count is not an integer"))?;
                elements.push(Element {
                    name: name.to_owned(),
                    count,
                    properties: Vec::new(),
                    has_list: false,
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(n, "property before any element"))?;
                let kind = tok.next().ok_or_else(|| Error::parse(n, "property without type"))?;
                if kind == "list" {
                    el.has_list = true;
                    let name = tok.nth(2).unwrap_or("list");
                    el.properties.push(name.to_owned());
                } else {
                    let name = tok.next().ok_or_else(|| Error::parse(n, "property without name"))?;
                    el.properties.push(name.to_owned());
                }
            }
            Some("end_header") => {
                header_done = true;
                break;
            }
            Some(other) => return Err(Error::parse(n, format!("unexpected header keyword '{other}'"))),
        }
    }
    if !header_done {
        return Err(Error::parse(text.lines().count(), "truncated header (no end_header)"));
    }
    if !format_seen {
        return Err(Error::parse(2, "missing format line"));
    }

    let mut cloud = PointCloud::default();
    let mut last_line = text.lines().count();
    for el in &elements {
        if el.name != "vertex" {
            for _ in 0..el.count {
                if lines.next().is_none() {
                    return Err(Error::parse(
                        last_line + 1,
                        format!("truncated: element '{}' expects {} rows", el.name, el.count),
                    ));
                }
            }
            continue;
        }
        if el.has_list {
            return Err(Error::parse(0, "list properties on vertices are not supported"));
        }
        let idx = |names: &[&str]| el.properties.iter().position(|p| names.contains(&p.as_str()));
        let (ix, iy, iz) = match (idx(&["x"]), idx(&["y"]), idx(&["z"])) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err(Error::parse(0, "vertex element lacks x/y/z")),
        };
        let rgb = match (idx(&["red", "r"]), idx(&["green", "g"]), idx(&["blue", "b"])) {
            (Some(r), Some(g), Some(b)) => Some((r, g, b)),
            _ => None,
        };
        let mut colors = Vec::new();
        cloud.points.reserve(el.count);
        for k in 0..el.count {
            let Some((n, line)) = lines.next() else {
                return Err(Error::parse(
                    last_line + 1,
                    format!("truncated: expected {} vertices, found {k}", el.count),
                ));
            };
            last_line = n;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != el.properties.len() {
                return Err(Error::parse(
                    n,
                    format!("expected {} values, found {}", el.properties.len(), fields.len()),
                ));
            }
            let num = |i: usize| -> Result<f64> {
                let v: f64 = fields[i]
                    .parse()
                    .map_err(|_| Error::parse(n, format!("'{}' is not a number", fields[i])))?;
                if !v.is_finite() {
                    return Err(Error::parse(n, "non-finite coordinate"));
                }
                Ok(v)
            };
            cloud.points.push(Vector3::new(num(ix)?, num(iy)?, num(iz)?));
            if let Some((r, g, b)) = rgb {
                let byte = |i: usize| -> Result<u8> {
                    fields[i]
                        .parse()
                        .map_err(|_| Error::parse(n, format!("'{}' is not a color byte", fields[i])))
                };
                colors.push([byte(r)?, byte(g)?, byte(b)?]);
            }
        }
        if rgb.is_some() {
            cloud.colors = Some(colors);
        }
    }
    if !elements.iter().any(|e| e.name == "vertex") {
        return Err(Error::parse(0, "no vertex element"));
    }
    Ok(cloud)
}

pub fn write_ply(cloud: &PointCloud) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", cloud.points.len());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.colors.is_some() {
        out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    out.push_str("end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(c) = cloud.colors.as_ref().map(|c| c[i]) {
            let _ = write!(out, " {} {} {}", c[0], c[1], c[2]);
        }
        out.push('\n');
    }
    out
}
