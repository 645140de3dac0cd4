//! Mobility-state detection from handover counts.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{invalid, Error, Result};
use crate::estimation::{estimate_speed, model_mu, model_sigma2, EstimatorConfig};
use crate::fitting::GaussianPmfParams;
use crate::format::fmt_f64;
use crate::geometry::SpeedProfile;
use crate::registry::Registry;

/// Speed thresholds (km/h) separating the three mobility states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityConfig {
    pub v_l: f64,
    pub v_u: f64,
}

impl MobilityConfig {
    pub fn new(v_l: f64, v_u: f64) -> Result<Self> {
        if !(v_l > 0.0 && v_l < v_u && v_u.is_finite()) {
            return Err(invalid(format!(
                "speed thresholds need 0 < v_l < v_u, got ({v_l}, {v_u})"
            )));
        }
        Ok(Self { v_l, v_u })
    }
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self { v_l: 40.0, v_u: 80.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MobilityState {
    Low,
    Medium,
    High,
}

impl MobilityState {
    pub fn as_str(&self) -> &'static str {
        match self {
            MobilityState::Low => "LOW",
            MobilityState::Medium => "MEDIUM",
            MobilityState::High => "HIGH",
        }
    }
}

impl fmt::Display for MobilityState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MobilityState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LOW" => Ok(MobilityState::Low),
            "MEDIUM" => Ok(MobilityState::Medium),
            "HIGH" => Ok(MobilityState::High),
            other => Err(Error::Parse(format!("unknown mobility state '{other}'"))),
        }
    }
}

/// Handover-count thresholds: `h <= h_l` is LOW, `h <= h_u` MEDIUM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HocThresholds {
    pub h_l: u32,
    pub h_u: u32,
}

fn floor_count(x: f64) -> u32 {
    x.floor().clamp(0.0, f64::from(u32::MAX)) as u32
}

pub fn hoc_thresholds(mob: &MobilityConfig, est: &EstimatorConfig) -> Result<HocThresholds> {
    Ok(HocThresholds {
        h_l: floor_count(model_mu(mob.v_l, est)?),
        h_u: floor_count(model_mu(mob.v_u, est)?),
    })
}

/// Boundaries are inclusive on the lower state.
pub fn detect_state(v_hat: f64, mob: &MobilityConfig) -> MobilityState {
    classify(v_hat, mob.v_l, mob.v_u)
}

fn classify(v: f64, v_l: f64, v_u: f64) -> MobilityState {
    if v <= v_l {
        MobilityState::Low
    } else if v <= v_u {
        MobilityState::Medium
    } else {
        MobilityState::High
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateProbabilities {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
}

impl StateProbabilities {
    pub fn of(&self, state: MobilityState) -> f64 {
        match state {
            MobilityState::Low => self.low,
            MobilityState::Medium => self.medium,
            MobilityState::High => self.high,
        }
    }

    pub fn total(&self) -> f64 {
        self.low + self.medium + self.high
    }
}

fn count_pmf(v: f64, est: &EstimatorConfig) -> Result<GaussianPmfParams> {
    if !(v > 0.0) {
        return Err(Error::Domain(format!(
            "state probabilities need a positive speed, got {v}"
        )));
    }
    GaussianPmfParams::new(model_mu(v, est)?, model_sigma2(v, est)?)
}

fn partition(pmf: &GaussianPmfParams, th: HocThresholds) -> StateProbabilities {
    let upper = pmf.series_upper() as u32;
    let mut p = StateProbabilities {
        low: 0.0,
        medium: 0.0,
        high: 0.0,
    };
    for h in 0..=upper.max(th.h_u) {
        let f = pmf.eval(f64::from(h));
        if h <= th.h_l {
            p.low += f;
        } else if h <= th.h_u {
            p.medium += f;
        } else {
            p.high += f;
        }
    }
    p
}

/// Mass of the count PMF at speed `v` falling in each threshold band.
pub fn state_probabilities(
    v: f64,
    est: &EstimatorConfig,
    mob: &MobilityConfig,
) -> Result<StateProbabilities> {
    let th = hoc_thresholds(mob, est)?;
    Ok(partition(&count_pmf(v, est)?, th))
}

/// Probability that the detected state equals the true state of `v`.
pub fn detection_probability(v: f64, est: &EstimatorConfig, mob: &MobilityConfig) -> Result<f64> {
    Ok(state_probabilities(v, est, mob)?.of(detect_state(v, mob)))
}

pub fn false_alarm_probability(v: f64, est: &EstimatorConfig, mob: &MobilityConfig) -> Result<f64> {
    Ok(1.0 - detection_probability(v, est, mob)?)
}

/// Mean detection probability over `v_grid` when the count thresholds are
/// chosen directly and the speed thresholds follow from inverting them.
pub fn average_detection_probability(
    h_l: u32,
    h_u: u32,
    est: &EstimatorConfig,
    v_grid: &[f64],
) -> Result<f64> {
    if h_u <= h_l {
        return Err(invalid(format!("need h_u > h_l, got ({h_l}, {h_u})")));
    }
    if v_grid.is_empty() {
        return Err(invalid("speed grid is empty"));
    }
    let v_l = estimate_speed(h_l, est);
    let v_u = estimate_speed(h_u, est);
    let th = HocThresholds { h_l, h_u };
    let mut acc = 0.0;
    for &v in v_grid {
        let p = partition(&count_pmf(v, est)?, th);
        acc += p.of(classify(v, v_l, v_u));
    }
    Ok(acc / v_grid.len() as f64)
}

/// How counting windows are laid over a flight.
pub trait WindowScheme: Send + Sync {
    fn name(&self) -> &'static str;

    /// `[start, end)` windows of length `window` inside `[0, total]`.
    fn windows(&self, total: f64, window: f64) -> Vec<(f64, f64)>;
}

/// Back-to-back windows `[kT, (k+1)T)`.
pub struct Discrete;

impl WindowScheme for Discrete {
    fn name(&self) -> &'static str {
        "discrete"
    }

    fn windows(&self, total: f64, window: f64) -> Vec<(f64, f64)> {
        let n = (total / window + 1e-9).floor() as usize;
        (0..n)
            .map(|k| (k as f64 * window, (k + 1) as f64 * window))
            .collect()
    }
}

/// Windows ending at `T, T + stride, T + 2 stride, ...`.
pub struct Sliding {
    pub stride: f64,
}

impl WindowScheme for Sliding {
    fn name(&self) -> &'static str {
        "sliding"
    }

    fn windows(&self, total: f64, window: f64) -> Vec<(f64, f64)> {
        let n = ((total - window) / self.stride + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|k| {
                let end = window + k as f64 * self.stride;
                (end - window, end)
            })
            .collect()
    }
}

pub const DEFAULT_STRIDE_S: f64 = 1.0;

type SchemeCtor = fn(f64) -> Box<dyn WindowScheme>;

pub fn window_schemes() -> &'static Registry<SchemeCtor> {
    static REGISTRY: OnceLock<Registry<SchemeCtor>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        Registry::<SchemeCtor>::new("window scheme")
            .with("discrete", |_| Box::new(Discrete))
            .with("sliding", |stride| Box::new(Sliding { stride }))
    })
}

/// Looks up a scheme by name; `stride` is used by the sliding scheme only.
pub fn window_scheme(name: &str, stride: f64) -> Result<Box<dyn WindowScheme>> {
    let ctor = window_schemes().get(name)?;
    if name == "sliding" && !(stride > 0.0 && stride.is_finite()) {
        return Err(invalid(format!("sliding stride must be positive, got {stride}")));
    }
    Ok(ctor(stride))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowEstimate {
    /// End of the window (s).
    pub t_s: f64,
    pub v_hat: f64,
    pub state: MobilityState,
}

/// One speed estimate and state per window, stamped at the window end.
pub fn windowed_estimation(
    ho_event_times: &[f64],
    total_time: f64,
    window: f64,
    scheme: &dyn WindowScheme,
    est: &EstimatorConfig,
    mob: &MobilityConfig,
) -> Result<Vec<WindowEstimate>> {
    if !(window > 0.0 && window <= total_time) {
        return Err(invalid(format!(
            "window {window} s must be positive and no longer than the flight ({total_time} s)"
        )));
    }
    let mut times = ho_event_times.to_vec();
    times.sort_by(f64::total_cmp);
    Ok(scheme
        .windows(total_time, window)
        .into_iter()
        .map(|(start, end)| {
            let lo = times.partition_point(|&t| t < start);
            let hi = times.partition_point(|&t| t < end);
            let v_hat = estimate_speed((hi - lo) as u32, est);
            WindowEstimate {
                t_s: end,
                v_hat,
                state: detect_state(v_hat, mob),
            }
        })
        .collect())
}

/// Time of the first estimate reporting `state` at or after `after_s`.
pub fn first_detection(series: &[WindowEstimate], state: MobilityState, after_s: f64) -> Option<f64> {
    series
        .iter()
        .find(|e| e.t_s >= after_s && e.state == state)
        .map(|e| e.t_s)
}

/// Reads a `t_s,v_kmh` speed trace. Each row's speed holds until the next
/// row; the last row's time marks the end of the flight.
pub fn read_speed_trace<R: Read>(reader: R) -> Result<SpeedProfile> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers != ["t_s", "v_kmh"] {
        return Err(Error::Parse(format!(
            "speed trace header must be t_s,v_kmh, got {headers:?}"
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize, what: &str| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("row {}: bad {what}", line + 2)))
        };
        rows.push((parse(0, "t_s")?, parse(1, "v_kmh")?));
    }
    if rows.len() < 2 {
        return Err(Error::Parse(
            "speed trace needs at least two rows (start and end)".into(),
        ));
    }
    let total = rows.last().map(|r| r.0).unwrap_or(0.0);
    SpeedProfile::new(rows, total)
}

pub fn write_window_estimates<W: Write>(series: &[WindowEstimate], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t_s", "v_hat_kmh", "state"])?;
    for e in series {
        w.write_record([fmt_f64(e.t_s), fmt_f64(e.v_hat), e.state.as_str().to_string()])?;
    }
    w.flush()?;
    Ok(())
}
