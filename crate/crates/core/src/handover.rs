//! Strongest-cell association and the A3 handover state machine.
//!
//! At every measurement instant the UAV compares the serving cell's RSRP
//! against all others. The A3 condition holds when some neighbour beats the
//! serving cell by more than the hysteresis margin. Each instant at which
//! the condition holds adds one measurement gap to the time-to-trigger
//! timer; once the timer reaches `t_ttt` the UAV hands over to the strongest
//! qualifying neighbour at that instant. An instant where the condition
//! fails clears the timer.

use std::io::{Read, Write};

use rand::Rng;

use crate::antenna::AntennaConfig;
use crate::channel::{PropagationModel, ShadowingGenerator, ShadowingMode};
use crate::error::{invalid, Error, Result};
use crate::geometry::{link_geometry_unchecked, NetworkRealization, Point2, Trajectory};

/// What the time-to-trigger timer is bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimerBinding {
    /// The timer survives a change of best challenger as long as some
    /// neighbour keeps satisfying the entry condition.
    #[default]
    Aggregate,
    /// A change of best challenger restarts the timer for the new cell.
    PerCandidate,
}

impl std::str::FromStr for TimerBinding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aggregate" => Ok(Self::Aggregate),
            "per-candidate" => Ok(Self::PerCandidate),
            other => Err(Error::UnknownStrategy {
                kind: "timer binding",
                name: other.into(),
                expected: "aggregate, per-candidate".into(),
            }),
        }
    }
}

impl TimerBinding {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Aggregate => "aggregate",
            Self::PerCandidate => "per-candidate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandoverConfig {
    /// Hysteresis margin (dB).
    pub m_hyst: f64,
    /// Time-to-trigger (ms).
    pub t_ttt: f64,
    /// Measurement gap (ms).
    pub t_mg: f64,
    pub binding: TimerBinding,
}

impl Default for HandoverConfig {
    fn default() -> Self {
        Self {
            m_hyst: 2.0,
            t_ttt: 0.0,
            t_mg: 40.0,
            binding: TimerBinding::Aggregate,
        }
    }
}

impl HandoverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.m_hyst >= 0.0 && self.m_hyst.is_finite()) {
            return Err(invalid(format!(
                "hysteresis margin must be non-negative, got {}",
                self.m_hyst
            )));
        }
        if !(self.t_mg > 0.0) {
            return Err(invalid(format!(
                "measurement gap must be positive, got {}",
                self.t_mg
            )));
        }
        if !(self.t_ttt >= 0.0) {
            return Err(invalid(format!(
                "time-to-trigger must be non-negative, got {}",
                self.t_ttt
            )));
        }
        let ratio = self.t_ttt / self.t_mg;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(invalid(format!(
                "time-to-trigger {} ms is not a multiple of the measurement gap {} ms",
                self.t_ttt, self.t_mg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsmEventKind {
    A3Enter,
    TttReset,
    Handover,
}

impl FsmEventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::A3Enter => "A3_ENTER",
            Self::TttReset => "TTT_RESET",
            Self::Handover => "HANDOVER",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FsmEvent {
    pub kind: FsmEventKind,
    pub from: usize,
    /// Candidate for `A3Enter`/`TttReset`, new serving cell for `Handover`.
    pub to: usize,
}

/// Index of the strongest cell; ties go to the lowest index.
pub fn initial_association(rsrps: &[f64]) -> Result<usize> {
    if rsrps.is_empty() {
        return Err(Error::EmptyCellSet);
    }
    let mut best = 0;
    for (i, &p) in rsrps.iter().enumerate().skip(1) {
        if p > rsrps[best] {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandoverFsm {
    serving: usize,
    ttt_candidate: Option<usize>,
    ttt_elapsed: f64,
    hoc: u32,
}

impl HandoverFsm {
    pub fn new(initial_rsrps: &[f64]) -> Result<Self> {
        Ok(Self::with_serving(initial_association(initial_rsrps)?))
    }

    pub fn with_serving(serving: usize) -> Self {
        Self {
            serving,
            ttt_candidate: None,
            ttt_elapsed: 0.0,
            hoc: 0,
        }
    }

    pub fn serving_cell(&self) -> usize {
        self.serving
    }

    pub fn ttt_candidate(&self) -> Option<usize> {
        self.ttt_candidate
    }

    /// Accumulated time-to-trigger (ms).
    pub fn ttt_elapsed(&self) -> f64 {
        self.ttt_elapsed
    }

    pub fn hoc(&self) -> u32 {
        self.hoc
    }

    /// Strongest neighbour satisfying the entry condition, lowest index on ties.
    fn best_challenger(&self, rsrps: &[f64], m_hyst: f64) -> Option<usize> {
        let threshold = rsrps[self.serving] + m_hyst;
        let mut best: Option<usize> = None;
        for (j, &p) in rsrps.iter().enumerate() {
            if j == self.serving || !(p > threshold) {
                continue;
            }
            if best.is_none_or(|b| p > rsrps[b]) {
                best = Some(j);
            }
        }
        best
    }

    /// Processes one measurement instant. Returns the events it produced, in order.
    pub fn step(&mut self, rsrps: &[f64], cfg: &HandoverConfig) -> Result<Vec<FsmEvent>> {
        if rsrps.len() <= self.serving {
            return Err(Error::Parse(format!(
                "measurement vector of length {} lacks serving cell {}",
                rsrps.len(),
                self.serving
            )));
        }
        let mut events = Vec::new();
        let Some(best) = self.best_challenger(rsrps, cfg.m_hyst) else {
            if let Some(candidate) = self.ttt_candidate.take() {
                events.push(FsmEvent {
                    kind: FsmEventKind::TttReset,
                    from: self.serving,
                    to: candidate,
                });
            }
            self.ttt_elapsed = 0.0;
            return Ok(events);
        };

        match self.ttt_candidate {
            None => {
                events.push(FsmEvent {
                    kind: FsmEventKind::A3Enter,
                    from: self.serving,
                    to: best,
                });
                self.ttt_elapsed = 0.0;
            }
            Some(previous) if previous != best && cfg.binding == TimerBinding::PerCandidate => {
                events.push(FsmEvent {
                    kind: FsmEventKind::TttReset,
                    from: self.serving,
                    to: previous,
                });
                events.push(FsmEvent {
                    kind: FsmEventKind::A3Enter,
                    from: self.serving,
                    to: best,
                });
                self.ttt_elapsed = 0.0;
            }
            Some(_) => {}
        }
        self.ttt_candidate = Some(best);
        self.ttt_elapsed += cfg.t_mg;

        // Tolerate rounding in the accumulated sum.
        if self.ttt_elapsed + 1e-9 >= cfg.t_ttt {
            events.push(FsmEvent {
                kind: FsmEventKind::Handover,
                from: self.serving,
                to: best,
            });
            self.serving = best;
            self.hoc += 1;
            self.ttt_candidate = None;
            self.ttt_elapsed = 0.0;
        }
        Ok(events)
    }
}

/// Result of flying one track through one network.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlightOutcome {
    pub hoc: u32,
    /// Sample index of every handover.
    pub handover_samples: Vec<usize>,
}

/// Flies the UAV over `positions` (sampled every `cfg.t_mg`) and runs the FSM.
///
/// `shadowing_rng` is consulted only when the model adds shadowing; a model
/// that does so without an RNG is a configuration error.
pub fn fly_positions<R: Rng + ?Sized>(
    positions: &[Point2],
    h_uav: f64,
    net: &NetworkRealization,
    ant: &AntennaConfig,
    model: &dyn PropagationModel,
    cfg: &HandoverConfig,
    shadowing_rng: Option<&mut R>,
) -> Result<FlightOutcome> {
    cfg.validate()?;
    ant.validate()?;
    model.check_height(h_uav)?;
    if positions.is_empty() {
        return Err(invalid("flight has no measurement instants"));
    }
    if net.is_empty() {
        return Err(Error::EmptyCellSet);
    }

    let shadow = match (model.shadowing_sigma_db(h_uav), model.shadowing()) {
        (Some(sigma), Some(shadow_cfg)) => {
            let rng = shadowing_rng.ok_or_else(|| {
                invalid("shadowing is enabled but no random source was supplied")
            })?;
            let step_m = track_step_m(positions)?;
            if shadow_cfg.mode == ShadowingMode::Correlated && step_m.is_none() {
                return Err(invalid(
                    "correlated shadowing needs a constant-speed track",
                ));
            }
            let generator =
                ShadowingGenerator::new(shadow_cfg, positions.len(), step_m.unwrap_or(0.0))?;
            Some(
                (0..net.len())
                    .map(|_| generator.sample(sigma, rng))
                    .collect::<Vec<_>>(),
            )
        }
        _ => None,
    };

    let mut rsrps = vec![0.0; net.len()];
    let measure = |i: usize, rsrps: &mut [f64]| -> Result<()> {
        let uav = positions[i];
        for (g, gbs) in net.gbs_positions.iter().enumerate() {
            let link = link_geometry_unchecked(gbs.distance(&uav), net.h_gbs, h_uav);
            let mut p = model.rx_power_dbm(&link, h_uav, net, ant)?;
            if let Some(s) = &shadow {
                p += s[g][i];
            }
            rsrps[g] = p;
        }
        Ok(())
    };

    measure(0, &mut rsrps)?;
    let mut fsm = HandoverFsm::new(&rsrps)?;
    let mut outcome = FlightOutcome::default();
    for i in 1..positions.len() {
        measure(i, &mut rsrps)?;
        let events = fsm.step(&rsrps, cfg)?;
        if events.iter().any(|e| e.kind == FsmEventKind::Handover) {
            outcome.handover_samples.push(i);
        }
    }
    outcome.hoc = fsm.hoc();
    Ok(outcome)
}

/// Spacing between consecutive positions in metres if it is constant.
fn track_step_m(positions: &[Point2]) -> Result<Option<f64>> {
    let Some(first) = positions.windows(2).next() else {
        return Ok(Some(0.0));
    };
    let step = first[0].distance(&first[1]) * 1000.0;
    let constant = positions
        .windows(2)
        .all(|w| (w[0].distance(&w[1]) * 1000.0 - step).abs() <= 1e-6 * step.max(1.0));
    Ok(constant.then_some(step))
}

/// Handover count over a constant-speed trajectory.
pub fn count_handovers<R: Rng + ?Sized>(
    trajectory: &Trajectory,
    net: &NetworkRealization,
    ant: &AntennaConfig,
    model: &dyn PropagationModel,
    cfg: &HandoverConfig,
    shadowing_rng: Option<&mut R>,
) -> Result<u32> {
    trajectory.validate()?;
    if (trajectory.sample_period_ms - cfg.t_mg).abs() > 1e-9 {
        return Err(invalid(format!(
            "trajectory sampling period {} ms differs from measurement gap {} ms",
            trajectory.sample_period_ms, cfg.t_mg
        )));
    }
    let positions = trajectory.positions();
    Ok(fly_positions(&positions, trajectory.h_uav, net, ant, model, cfg, shadowing_rng)?.hoc)
}

/// Per-instant RSRP table loaded from the replay format.
#[derive(Debug, Clone, PartialEq)]
pub struct RsrpTrace {
    pub times_ms: Vec<i64>,
    /// `rows[t][cell]`; cells not reported at an instant hold `-inf`.
    pub rows: Vec<Vec<f64>>,
}

impl RsrpTrace {
    /// Reads `time_ms,cell_id,rsrp_dbm` rows; rows sharing a time form one instant.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["time_ms", "cell_id", "rsrp_dbm"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse(format!(
                "expected header {:?}, got {:?}",
                expected,
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut entries: Vec<(i64, usize, f64)> = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let field = |i: usize| record.get(i).unwrap_or("");
            let bad = |what: &str| Error::Parse(format!("row {}: bad {what}", line + 2));
            let t: i64 = field(0).parse().map_err(|_| bad("time_ms"))?;
            let cell: usize = field(1).parse().map_err(|_| bad("cell_id"))?;
            let p: f64 = field(2).parse().map_err(|_| bad("rsrp_dbm"))?;
            entries.push((t, cell, p));
        }
        if entries.is_empty() {
            return Err(Error::Parse("trace has no rows".into()));
        }
        let n_cells = entries.iter().map(|e| e.1).max().unwrap_or(0) + 1;
        let mut times_ms: Vec<i64> = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (t, cell, p) in entries {
            if times_ms.last() != Some(&t) {
                if times_ms.last().is_some_and(|&last| t < last) {
                    return Err(Error::Parse(format!("time {t} goes backwards")));
                }
                times_ms.push(t);
                rows.push(vec![f64::NEG_INFINITY; n_cells]);
            }
            let row = rows.last_mut().expect("row pushed above");
            if row[cell] != f64::NEG_INFINITY {
                return Err(Error::Parse(format!("cell {cell} repeated at time {t}")));
            }
            row[cell] = p;
        }
        Ok(Self { times_ms, rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoggedEvent {
    pub time_ms: i64,
    pub event: FsmEvent,
}

/// Replays a recorded trace through the FSM. The first instant only sets
/// the initial association; consecutive instants must be `t_mg` apart.
pub fn replay_trace(trace: &RsrpTrace, cfg: &HandoverConfig) -> Result<Vec<LoggedEvent>> {
    cfg.validate()?;
    for w in trace.times_ms.windows(2) {
        if ((w[1] - w[0]) as f64 - cfg.t_mg).abs() > 1e-9 {
            return Err(invalid(format!(
                "instants {} and {} are not one measurement gap ({} ms) apart",
                w[0], w[1], cfg.t_mg
            )));
        }
    }
    let first = trace.rows.first().ok_or(Error::EmptyCellSet)?;
    let mut fsm = HandoverFsm::new(first)?;
    let mut log = Vec::new();
    for (t, row) in trace.times_ms.iter().zip(&trace.rows).skip(1) {
        if !row[fsm.serving_cell()].is_finite() {
            return Err(Error::Parse(format!(
                "serving cell {} not reported at time {t}",
                fsm.serving_cell()
            )));
        }
        log.extend(
            fsm.step(row, cfg)?
                .into_iter()
                .map(|event| LoggedEvent { time_ms: *t, event }),
        );
    }
    Ok(log)
}

pub fn write_event_log<W: Write>(log: &[LoggedEvent], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time_ms", "event", "from_cell", "to_cell"])?;
    for e in log {
        w.write_record([
            e.time_ms.to_string(),
            e.event.kind.as_str().to_string(),
            e.event.from.to_string(),
            e.event.to.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
