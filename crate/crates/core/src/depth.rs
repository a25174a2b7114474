//! Depth fusion: synchronizes a SLAM trajectory's vertical axis with the
//! absolute water depth logged by a dive computer.
//!
//! The pipeline resamples both signals onto a common uniform grid, finds the
//! clock offset by normalized cross-correlation, fits `depth = a·z + b` by
//! ordinary least squares and rewrites the trajectory accordingly.

use std::path::Path;

use nalgebra::Vector3;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::textio;
use crate::trajectory::{Keyframe, Trajectory};

pub const DEFAULT_RATE_HZ: f64 = 100.0;
pub const DEFAULT_MAX_SHIFT_S: f64 = 1200.0;
/// Shortest overlap, in seconds, over which a correlation or regression is trusted.
pub const MIN_OVERLAP_S: f64 = 30.0;
/// Nominal dive-computer logging interval.
pub const NOMINAL_LOG_SPACING_S: f64 = 10.0;

const FLAT_VARIANCE: f64 = 1e-12;
/// Half-width of the lag window searched around the coarse peak.
pub const REFINE_WINDOW_S: f64 = 60.0;

pub const DEPTH_LOG_HEADER: [&str; 2] = ["timestamp_s", "depth_m"];

/// Timestamped absolute depth (meters, positive down).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthLog {
    samples: Vec<(f64, f64)>,
}

impl DepthLog {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(Error::parse(i + 2, "depth log timestamps must increase"));
            }
        }
        if let Some((i, _)) = samples.iter().enumerate().find(|(_, s)| s.1 < 0.0) {
            return Err(Error::range(i + 1, "depth must be non-negative"));
        }
        let log = Self { samples };
        log.warn_on_spacing();
        Ok(log)
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn median_spacing(&self) -> Option<f64> {
        let mut gaps: Vec<f64> = self.samples.windows(2).map(|w| w[1].0 - w[0].0).collect();
        if gaps.is_empty() {
            return None;
        }
        gaps.sort_by(f64::total_cmp);
        Some(gaps[gaps.len() / 2])
    }

    fn warn_on_spacing(&self) {
        if let Some(m) = self.median_spacing() {
            if (m - NOMINAL_LOG_SPACING_S).abs() > 0.5 * NOMINAL_LOG_SPACING_S {
                log::warn!(
                    "depth log median spacing {m:.3} s is far from the nominal {NOMINAL_LOG_SPACING_S} s"
                );
            }
        }
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let rows = textio::rows(text, &DEPTH_LOG_HEADER)?;
        let mut samples = Vec::with_capacity(rows.len());
        let mut prev = f64::NEG_INFINITY;
        for row in &rows {
            let t = row.f64(0, "timestamp_s")?;
            let d = row.f64(1, "depth_m")?;
            if t <= prev {
                return Err(Error::parse(row.line, format!("timestamp {t} does not increase")));
            }
            if d < 0.0 {
                return Err(Error::range(row.line, format!("negative depth {d}")));
            }
            prev = t;
            samples.push((t, d));
        }
        if samples.is_empty() {
            return Err(Error::parse(0, "depth log has no samples"));
        }
        Self::new(samples)
    }

    pub fn to_csv(&self) -> String {
        let mut out = DEPTH_LOG_HEADER.join(",");
        out.push('\n');
        for (t, d) in &self.samples {
            textio::push_row(&mut out, &[*t, *d]);
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_csv(&textio::read_file(path)?)
    }
}

/// Samples on a uniform time grid: `t_i = start_time + i / rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSeries {
    pub start_time: f64,
    pub rate: f64,
    pub values: Vec<f64>,
}

impl UniformSeries {
    pub fn time_at(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.rate
    }

    pub fn end_time(&self) -> f64 {
        self.time_at(self.values.len() - 1)
    }

    pub fn duration(&self) -> f64 {
        (self.values.len() - 1) as f64 / self.rate
    }

    /// Same samples, relabelled `shift` seconds later.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            start_time: self.start_time + shift,
            ..self.clone()
        }
    }

    /// Linear interpolation inside the sampled span.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let pos = (t - self.start_time) * self.rate;
        let last = (self.values.len() - 1) as f64;
        if !(-1e-9..=last + 1e-9).contains(&pos) {
            return None;
        }
        let pos = pos.clamp(0.0, last);
        let i = (pos.floor() as usize).min(self.values.len().saturating_sub(2));
        if self.values.len() == 1 {
            return Some(self.values[0]);
        }
        let frac = pos - i as f64;
        Some(self.values[i] + frac * (self.values[i + 1] - self.values[i]))
    }
}

/// Recovered relation between SLAM time/height and dive-computer time/depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthCorrection {
    /// Added to SLAM timestamps to land on the dive-computer clock.
    pub time_shift: f64,
    pub scale: f64,
    pub offset: f64,
    pub residual_rms: f64,
}

impl DepthCorrection {
    pub fn identity() -> Self {
        Self {
            time_shift: 0.0,
            scale: 1.0,
            offset: 0.0,
            residual_rms: 0.0,
        }
    }

    pub fn depth_of(&self, z: f64) -> f64 {
        self.scale * z + self.offset
    }
}

/// Linear interpolation of `samples` onto a uniform grid at `rate` Hz over
/// the closed span of the input. No extrapolation.
pub fn resample(samples: &[(f64, f64)], rate: f64) -> Result<UniformSeries> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    assert!(rate > 0.0, "resample rate must be positive");
    let start = samples[0].0;
    let span = samples[samples.len() - 1].0 - start;
    let count = (span * rate + 1e-9).floor() as usize + 1;
    let mut values = Vec::with_capacity(count);
    let mut seg = 0;
    for i in 0..count {
        let t = start + i as f64 / rate;
        while seg + 2 < samples.len() && samples[seg + 1].0 < t {
            seg += 1;
        }
        let (t0, v0) = samples[seg];
        let (t1, v1) = samples[seg + 1];
        let frac = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        values.push(v0 + frac * (v1 - v0));
    }
    Ok(UniformSeries {
        start_time: start,
        rate,
        values,
    })
}

fn check_rates(a: &UniformSeries, b: &UniformSeries) -> Result<()> {
    if (a.rate - b.rate).abs() > 1e-9 * a.rate.max(b.rate) {
        return Err(Error::RateMismatch(a.rate, b.rate));
    }
    Ok(())
}

fn demeaned(values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let out: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let var = out.iter().map(|v| v * v).sum::<f64>() / n;
    if var < FLAT_VARIANCE {
        return Err(Error::FlatSignal(var));
    }
    Ok(out)
}

fn prefix_sums(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut s = Vec::with_capacity(x.len() + 1);
    let mut s2 = Vec::with_capacity(x.len() + 1);
    let (mut a, mut b) = (0.0, 0.0);
    s.push(0.0);
    s2.push(0.0);
    for v in x {
        a += v;
        b += v * v;
        s.push(a);
        s2.push(b);
    }
    (s, s2)
}

/// `out[k + n - 1] = Σ_i x_i · y_{i+k}` for lags `k ∈ [−(n−1), m−1]`.
fn cross_correlate(x: &[f64], y: &[f64]) -> Vec<f64> {
    let (n, m) = (x.len(), y.len());
    let len = (n + m - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut xs: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    xs.resize(len, Complex::new(0.0, 0.0));
    let mut ys: Vec<Complex<f64>> = y.iter().map(|&v| Complex::new(v, 0.0)).collect();
    ys.resize(len, Complex::new(0.0, 0.0));
    fwd.process(&mut xs);
    fwd.process(&mut ys);
    for (a, b) in xs.iter_mut().zip(&ys) {
        *a = a.conj() * b;
    }
    inv.process(&mut xs);
    let scale = 1.0 / len as f64;
    (-(n as isize - 1)..m as isize)
        .map(|k| xs[k.rem_euclid(len as isize) as usize].re * scale)
        .collect()
}

/// Clock offset (seconds on the dive-computer clock) that best aligns
/// `slam_z` with `dive_depth`.
///
/// Candidate shifts are the integer-sample lags within `±max_shift` whose
/// overlap spans at least [`MIN_OVERLAP_S`]. Each lag is scored by the
/// magnitude of the Pearson correlation over its overlap (a z-up SLAM frame
/// is anti-correlated with depth). The coarse peak maximizes
/// `atanh(|ρ|)·√count`; within [`REFINE_WINDOW_S`] of it the peak of `|ρ|`
/// is refined by a parabola through its neighbours. Exact ties go to the
/// smallest |shift|.
pub fn estimate_time_shift(
    slam_z: &UniformSeries,
    dive_depth: &UniformSeries,
    max_shift: f64,
) -> Result<f64> {
    check_rates(slam_z, dive_depth)?;
    let rate = slam_z.rate;
    let x = demeaned(&slam_z.values)?;
    let y = demeaned(&dive_depth.values)?;
    let (n, m) = (x.len() as isize, y.len() as isize);
    let base = dive_depth.start_time - slam_z.start_time;
    let min_count = (MIN_OVERLAP_S * rate - 1e-9).ceil().max(2.0) as isize;

    let k_lo = (((-max_shift - base) * rate) - 1e-9).ceil() as isize;
    let k_hi = (((max_shift - base) * rate) + 1e-9).floor() as isize;
    let k_lo = k_lo.max(-(n - 1));
    let k_hi = k_hi.min(m - 1);
    if k_lo > k_hi {
        return Err(Error::InsufficientOverlap {
            required_s: MIN_OVERLAP_S,
        });
    }

    let corr = cross_correlate(&x, &y);
    let (sx, sxx) = prefix_sums(&x);
    let (sy, syy) = prefix_sums(&y);
    let overlap = |k: isize| (0.max(-k), n.min(m - k));

    let local = |k: isize| -> Option<f64> {
        let (i0, i1) = overlap(k);
        let count = i1 - i0;
        if count < min_count {
            return None;
        }
        let (i0u, i1u) = (i0 as usize, i1 as usize);
        let (j0u, j1u) = ((i0 + k) as usize, (i1 + k) as usize);
        let c = count as f64;
        let ax = sx[i1u] - sx[i0u];
        let axx = sxx[i1u] - sxx[i0u];
        let ay = sy[j1u] - sy[j0u];
        let ayy = syy[j1u] - syy[j0u];
        let vx = axx - ax * ax / c;
        let vy = ayy - ay * ay / c;
        if vx <= FLAT_VARIANCE * c || vy <= FLAT_VARIANCE * c {
            return Some(0.0);
        }
        Some(((corr[(k + n - 1) as usize] - ax * ay / c) / (vx * vy).sqrt()).abs())
    };
    // Correlation weighted by its evidence: atanh(|ρ|)·√count grows with the
    // overlap, so a short window that happens to line up cannot win.
    let evidence = |k: isize| -> Option<f64> {
        let (i0, i1) = overlap(k);
        local(k).map(|r| r.min(1.0 - 1e-15).atanh() * ((i1 - i0) as f64).sqrt())
    };
    let shift_of = |k: f64| base + k / rate;
    let argmax = |lo: isize, hi: isize, score: &dyn Fn(isize) -> Option<f64>| -> Option<(isize, f64)> {
        let mut best: Option<(isize, f64)> = None;
        for k in lo..=hi {
            let Some(s) = score(k) else { continue };
            best = match best {
                Some((bk, bs))
                    if !(s > bs || (s == bs && shift_of(k as f64).abs() < shift_of(bk as f64).abs())) =>
                {
                    Some((bk, bs))
                }
                _ => Some((k, s)),
            };
        }
        best
    };
    let insufficient = || Error::InsufficientOverlap {
        required_s: MIN_OVERLAP_S,
    };

    let (coarse, _) = argmax(k_lo, k_hi, &evidence).ok_or_else(insufficient)?;
    let reach = (REFINE_WINDOW_S * rate).ceil() as isize;
    let (lo, hi) = ((coarse - reach).max(k_lo), (coarse + reach).min(k_hi));
    let (k, s0) = argmax(lo, hi, &local).ok_or_else(insufficient)?;

    let mut offset = 0.0;
    if k > lo && k < hi {
        if let (Some(sm), Some(sp)) = (local(k - 1), local(k + 1)) {
            let denom = sm - 2.0 * s0 + sp;
            if denom < 0.0 {
                offset = (0.5 * (sm - sp) / denom).clamp(-0.5, 0.5);
            }
        }
    }
    Ok(shift_of(k as f64 + offset))
}

/// Ordinary least-squares fit of `depth = a·z + b` over the overlap of two
/// time-aligned series. Returns `(a, b, residual_rms)`.
pub fn estimate_depth_regression(
    slam_z_shifted: &UniformSeries,
    dive_depth: &UniformSeries,
) -> Result<(f64, f64, f64)> {
    let t0 = slam_z_shifted.start_time.max(dive_depth.start_time);
    let t1 = slam_z_shifted.end_time().min(dive_depth.end_time());
    if t1 - t0 < MIN_OVERLAP_S - 1e-9 {
        return Err(Error::InsufficientOverlap {
            required_s: MIN_OVERLAP_S,
        });
    }
    let pairs: Vec<(f64, f64)> = slam_z_shifted
        .values
        .iter()
        .enumerate()
        .filter_map(|(i, &z)| {
            let t = slam_z_shifted.time_at(i);
            dive_depth.value_at(t).map(|d| (z, d))
        })
        .collect();
    ols(&pairs)
}

/// Same fit, but evaluated only at the dive computer's own sample times.
///
/// Interpolating a 0.1 Hz log cuts the corners of the depth profile, which
/// shrinks the fitted scale; the SLAM series is dense enough that sampling
/// it at the log times does not.
pub fn estimate_depth_regression_at_samples(
    slam_z_shifted: &UniformSeries,
    dive_samples: &[(f64, f64)],
) -> Result<(f64, f64, f64)> {
    let pairs: Vec<(f64, f64)> = dive_samples
        .iter()
        .filter_map(|&(t, d)| slam_z_shifted.value_at(t).map(|z| (z, d)))
        .collect();
    let span = match (pairs.first(), pairs.last()) {
        (Some(_), Some(_)) => {
            let ts: Vec<f64> = dive_samples
                .iter()
                .map(|s| s.0)
                .filter(|&t| slam_z_shifted.value_at(t).is_some())
                .collect();
            ts[ts.len() - 1] - ts[0]
        }
        _ => 0.0,
    };
    if span < MIN_OVERLAP_S - 1e-9 {
        return Err(Error::InsufficientOverlap {
            required_s: MIN_OVERLAP_S,
        });
    }
    ols(&pairs)
}

fn ols(pairs: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientOverlap {
            required_s: MIN_OVERLAP_S,
        });
    }
    let n = pairs.len() as f64;
    let mz = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let md = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut szz, mut szd) = (0.0, 0.0);
    for (z, d) in pairs {
        szz += (z - mz) * (z - mz);
        szd += (z - mz) * (d - md);
    }
    if szz / n < FLAT_VARIANCE {
        return Err(Error::DegenerateRegression(szz / n));
    }
    let a = szd / szz;
    let b = md - a * mz;
    let sse: f64 = pairs.iter().map(|(z, d)| (d - (a * z + b)).powi(2)).sum();
    Ok((a, b, (sse / n).sqrt()))
}

/// Shifts timestamps and replaces every z by `a·z + b`; x, y and rotations
/// are left untouched.
pub fn apply_correction(traj: &Trajectory, corr: &DepthCorrection) -> Trajectory {
    let frame = format!("{}:depth-corrected", traj.frame_id());
    let keyframes = traj
        .keyframes()
        .iter()
        .map(|k| {
            let t = k.pose.translation();
            Keyframe {
                timestamp: k.timestamp + corr.time_shift,
                pose: k
                    .pose
                    .with_translation(Vector3::new(t.x, t.y, corr.depth_of(t.z))),
            }
        })
        .collect();
    Trajectory::new(frame, keyframes).expect("uniform time shift keeps timestamps ordered")
}

/// Vertical coordinate of a trajectory as a time series.
pub fn height_series(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.keyframes()
        .iter()
        .map(|k| (k.timestamp, k.pose.translation().z))
        .collect()
}

/// Full fusion: resample, estimate the clock shift, regress depth, rewrite.
///
/// The shift comes from the two resampled series; the regression uses the
/// raw log samples (see [`estimate_depth_regression_at_samples`]).
pub fn fuse(
    traj: &Trajectory,
    log: &DepthLog,
    rate: f64,
    max_shift: f64,
) -> Result<(Trajectory, DepthCorrection)> {
    let slam = resample(&height_series(traj), rate)?;
    let dive = resample(log.samples(), rate)?;
    let time_shift = estimate_time_shift(&slam, &dive, max_shift)?;
    let (scale, offset, residual_rms) =
        estimate_depth_regression_at_samples(&slam.shifted(time_shift), log.samples())?;
    let corr = DepthCorrection {
        time_shift,
        scale,
        offset,
        residual_rms,
    };
    if (scale.abs() - 1.0).abs() > 0.1 {
        log::warn!("{}: depth scale {scale:.4} suggests SLAM scale drift", traj.frame_id());
    }
    Ok((apply_correction(traj, &corr), corr))
}
