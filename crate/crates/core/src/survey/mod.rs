//! Caveline survey: shot parsing, dead reckoning, least-squares loop
//! closure and plan-view stick maps.
//!
//! Coordinates are x = east, y = north, z = down, with the anchor station at
//! the origin.

mod adjust;
mod svg;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

pub use adjust::{adjust_loops, dead_reckon, segment_displacement, weighted_ssr};
pub use svg::stickmap_svg;

use crate::error::{Error, Result};
use crate::textio;

pub const SHOTS_HEADER: [&str; 7] = [
    "from",
    "to",
    "length_m",
    "azimuth_in_deg",
    "azimuth_out_deg",
    "depth_from_m",
    "depth_to_m",
];
pub const CLOSURES_HEADER: [&str; 2] = ["station_a", "station_b"];

/// One caveline shot. Azimuths are degrees clockwise from north, already
/// corrected for declination.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveySegment {
    pub from: String,
    pub to: String,
    pub length: f64,
    pub azimuth_in: f64,
    pub azimuth_out: f64,
    pub depth_from: f64,
    pub depth_to: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyNetwork {
    pub segments: Vec<SurveySegment>,
    /// Station pairs asserted to be the same physical point.
    pub closures: Vec<(String, String)>,
    pub declination: f64,
}

/// Wraps into `[0, 360)`; `rem_euclid` alone can return 360 for tiny
/// negative inputs.
pub fn normalize_azimuth(deg: f64) -> f64 {
    let a = deg.rem_euclid(360.0);
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

/// Parses a shots table. `declination` (degrees, east positive) is added to
/// both azimuths of every shot.
pub fn parse_survey(text: &str, declination: f64) -> Result<SurveyNetwork> {
    let rows = textio::rows(text, &SHOTS_HEADER)?;
    let mut segments = Vec::with_capacity(rows.len());
    for row in &rows {
        let from = row.str(0);
        let to = row.str(1);
        if from.is_empty() || to.is_empty() {
            return Err(Error::parse(row.line, "station names must not be empty"));
        }
        let length = row.f64(2, "length_m")?;
        let az_in = row.f64(3, "azimuth_in_deg")?;
        let az_out = row.f64(4, "azimuth_out_deg")?;
        let depth_from = row.f64(5, "depth_from_m")?;
        let depth_to = row.f64(6, "depth_to_m")?;
        if length <= 0.0 {
            return Err(Error::range(row.line, format!("length {length} must be positive")));
        }
        for az in [az_in, az_out] {
            if !(0.0..360.0).contains(&az) {
                return Err(Error::range(row.line, format!("azimuth {az} outside [0, 360)")));
            }
        }
        for d in [depth_from, depth_to] {
            if d < 0.0 {
                return Err(Error::range(row.line, format!("depth {d} is negative")));
            }
        }
        segments.push(SurveySegment {
            from: from.to_owned(),
            to: to.to_owned(),
            length,
            azimuth_in: normalize_azimuth(az_in + declination),
            azimuth_out: normalize_azimuth(az_out + declination),
            depth_from,
            depth_to,
        });
    }
    if segments.is_empty() {
        return Err(Error::parse(0, "no segments"));
    }
    Ok(SurveyNetwork {
        segments,
        closures: Vec::new(),
        declination,
    })
}

pub fn parse_closures(text: &str) -> Result<Vec<(String, String)>> {
    textio::rows(text, &CLOSURES_HEADER)?
        .iter()
        .map(|row| {
            let (a, b) = (row.str(0), row.str(1));
            if a.is_empty() || b.is_empty() {
                return Err(Error::parse(row.line, "station names must not be empty"));
            }
            Ok((a.to_owned(), b.to_owned()))
        })
        .collect()
}

impl SurveyNetwork {
    pub fn load(shots: &Path, closures: Option<&Path>, declination: f64) -> Result<Self> {
        let net = parse_survey(&textio::read_file(shots)?, declination)?;
        match closures {
            Some(p) => net.with_closures(parse_closures(&textio::read_file(p)?)?),
            None => Ok(net),
        }
    }

    pub fn with_closures(mut self, closures: Vec<(String, String)>) -> Result<Self> {
        let names = self.station_names();
        for (a, b) in &closures {
            for s in [a, b] {
                if !names.contains(s) {
                    return Err(Error::UnknownStation(s.clone()));
                }
            }
        }
        self.closures = closures;
        Ok(self)
    }

    /// Station names in order of first appearance.
    pub fn station_names(&self) -> Vec<String> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for s in &self.segments {
            for name in [&s.from, &s.to] {
                if seen.insert(name.clone(), ()).is_none() {
                    out.push(name.clone());
                }
            }
        }
        out
    }

    /// Mean of all depths recorded at a station.
    pub fn measured_depths(&self) -> HashMap<String, f64> {
        let mut acc: HashMap<String, (f64, usize)> = HashMap::new();
        for s in &self.segments {
            for (name, d) in [(&s.from, s.depth_from), (&s.to, s.depth_to)] {
                let e = acc.entry(name.clone()).or_insert((0.0, 0));
                e.0 += d;
                e.1 += 1;
            }
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }

    pub fn shots_csv(&self) -> String {
        let mut out = SHOTS_HEADER.join(",");
        out.push('\n');
        for s in &self.segments {
            // Stored azimuths already include declination.
            let undo = |a: f64| normalize_azimuth(a - self.declination);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.from,
                s.to,
                s.length,
                undo(s.azimuth_in),
                undo(s.azimuth_out),
                s.depth_from,
                s.depth_to
            );
        }
        out
    }

    pub fn closures_csv(&self) -> String {
        let mut out = CLOSURES_HEADER.join(",");
        out.push('\n');
        for (a, b) in &self.closures {
            let _ = writeln!(out, "{a},{b}");
        }
        out
    }
}

/// Station coordinates relative to the anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct StickMap {
    pub anchor: String,
    /// In order of first appearance in the shot list.
    pub stations: Vec<(String, Vector3<f64>)>,
    /// `‖(p_to − p_from) − displacement‖` per segment, in shot order.
    pub residuals: Vec<f64>,
    /// Largest discrepancy seen when a station was reached again by
    /// another path during dead reckoning. Empty after adjustment.
    pub misclosures: Vec<(String, f64)>,
}

impl StickMap {
    pub fn position(&self, station: &str) -> Option<Vector3<f64>> {
        self.stations.iter().find(|(n, _)| n == station).map(|(_, p)| *p)
    }

    pub fn misclosure(&self, station: &str) -> Option<f64> {
        self.misclosures.iter().find(|(n, _)| n == station).map(|(_, m)| *m)
    }

    pub fn stations_csv(&self) -> String {
        let mut out = String::from("station,x_m,y_m,z_m\n");
        for (name, p) in &self.stations {
            let _ = writeln!(out, "{name},{},{},{}", p.x, p.y, p.z);
        }
        out
    }

    pub fn residuals_csv(&self, net: &SurveyNetwork) -> String {
        let mut out = String::from("from,to,residual_m\n");
        for (s, r) in net.segments.iter().zip(&self.residuals) {
            let _ = writeln!(out, "{},{},{r}", s.from, s.to);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "from,to,length_m,azimuth_in_deg,azimuth_out_deg,depth_from_m,depth_to_m\n";

    #[test]
    fn empty_list_is_parse_error() {
        match parse_survey(HEADER, 0.0) {
            Err(Error::Parse { message, .. }) => assert_eq!(message, "no segments"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn one_row() {
        let net = parse_survey(&format!("{HEADER}A0,A1,10,90,90,5,5\n"), 0.0).unwrap();
        assert_eq!(net.segments.len(), 1);
        assert_eq!(net.segments[0].azimuth_in, 90.0);
    }

    #[test]
    fn bad_azimuth_is_range_error_with_line() {
        let text = format!("{HEADER}A0,A1,10,90,90,5,5\nA1,A2,10,400,90,5,5\n");
        assert!(matches!(parse_survey(&text, 0.0), Err(Error::Range { line: 3, .. })));
        let text = format!("{HEADER}A0,A1,-1,90,90,5,5\n");
        assert!(matches!(parse_survey(&text, 0.0), Err(Error::Range { line: 2, .. })));
    }

    #[test]
    fn declination_wraps() {
        let net = parse_survey(&format!("{HEADER}A0,A1,10,2,358,5,5\n"), -5.2).unwrap();
        assert!((net.segments[0].azimuth_in - 356.8).abs() < 1e-9);
        assert!((net.segments[0].azimuth_out - 352.8).abs() < 1e-9);
    }

    #[test]
    fn closures_must_reference_known_stations() {
        let net = parse_survey(&format!("{HEADER}A0,A1,10,90,90,5,5\n"), 0.0).unwrap();
        let c = parse_closures("station_a,station_b\nA0,B9\n").unwrap();
        assert!(matches!(net.with_closures(c), Err(Error::UnknownStation(s)) if s == "B9"));
    }
}
