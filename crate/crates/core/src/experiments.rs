//! Batch experiments: single scenarios, mixing-parameter sweeps, the forced
//! settling study and the model comparison.

use crate::engine::{self, EventKind, Mode, OutdoorProfile, Scenario, NEUTRALITY_ALPHA};
use crate::error::{Error, Result};
use crate::io::ResultRecord;
use crate::metrics::{self, EventMetrics};
use crate::thermal::BuildingParams;
use crate::trace::Trace;

/// Short settling horizon used alongside the full one, s.
pub const SHORT_SETTLE: f64 = 7200.0;
/// Outdoor temperature change used by the baseline-error cases, K.
pub const OUTDOOR_CHANGE: f64 = 1.7;
/// Extra context around the event in normalized comparison traces, s.
pub const COMPARE_LEAD: f64 = 1800.0;
pub const COMPARE_TAIL: f64 = 3600.0;

/// How batches of independent runs are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Parallel,
    Sequential,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Maps `f` over `items`, preserving order. Falls back to a sequential loop
/// when the crate is built without the `parallel` feature.
pub fn map_points<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

pub fn record(scenario: &Scenario, settle: f64, m: &EventMetrics) -> ResultRecord {
    ResultRecord {
        scenario_id: scenario.id.clone(),
        mode: scenario.mode.as_str().into(),
        kind: scenario.event.kind.as_str().into(),
        r: scenario.params.r,
        c: scenario.params.c,
        window_hr: settle / 3600.0,
        e_in: m.e_in,
        e_out: m.e_out,
        rte: m.rte,
        neutral: m.neutral,
        residual: m.neutrality_residual,
        rmse_k: m.rmse_temp,
    }
}

/// Metrics of `event` against `baseline` with settling `settle` seconds after
/// the event start.
pub fn event_metrics(
    scenario: &Scenario,
    baseline: &Trace,
    event: &Trace,
    settle: f64,
) -> Result<EventMetrics> {
    let window = scenario.window()?.with_settling(settle)?;
    metrics::evaluate(event, baseline, &window, NEUTRALITY_ALPHA)
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub baseline: Trace,
    pub event: Trace,
    pub records: Vec<ResultRecord>,
}

/// Baseline plus event for one scenario, with one record per settling horizon.
pub fn simulate(scenario: &Scenario, settle_horizons: &[f64]) -> Result<SimulationOutput> {
    let (baseline, event) = engine::run_event(scenario)?;
    let records = settle_horizons
        .iter()
        .map(|&h| {
            let m = event_metrics(scenario, &baseline, &event, h)?;
            Ok(record(scenario, h, &m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationOutput {
        baseline,
        event,
        records,
    })
}

/// Fails if any closed-loop record misses the neutrality tolerance.
pub fn require_neutral(records: &[ResultRecord]) -> Result<()> {
    let bad: Vec<String> = records
        .iter()
        .filter(|r| r.mode != Mode::OpenLoop.as_str() && !r.neutral)
        .map(|r| {
            format!(
                "{} ({} h): residual {:.1} J vs E_in + E_out = {:.1} J",
                r.scenario_id,
                r.window_hr,
                r.residual,
                r.e_in + r.e_out
            )
        })
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Check(format!(
            "events not energy neutral at {} %: {}",
            100.0 * NEUTRALITY_ALPHA,
            bad.join("; ")
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub r: f64,
    pub c: f64,
    pub kind: EventKind,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    /// Sorted by (r, c, kind, window).
    pub records: Vec<ResultRecord>,
    pub failures: Vec<PointFailure>,
}

/// `[start, start + step, …]` up to `end` inclusive, rounded to kill float
/// drift in the grid labels.
pub fn grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || end < start {
        return Err(Error::config(format!("bad grid {start}:{end}:{step}")));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// Closed-loop ±10 % events over every `(r, c)` pair and kind, each scored at
/// the short and the full settling horizon. Failing points are collected and
/// the sweep carries on.
pub fn sweep_mixing(
    template: &Scenario,
    r_grid: &[f64],
    c_grid: &[f64],
    kinds: &[EventKind],
    exec: Execution,
) -> Result<SweepOutcome> {
    if r_grid.is_empty() || c_grid.is_empty() || kinds.is_empty() {
        return Err(Error::config("sweep grids must be non-empty"));
    }
    let mut points = Vec::new();
    for &kind in kinds {
        for &r in r_grid {
            for &c in c_grid {
                points.push((r, c, kind));
            }
        }
    }
    let horizons = [SHORT_SETTLE, template.settle_duration];
    let results = map_points(&points, exec, |&(r, c, kind)| {
        let mut s = template.clone();
        s.params = s.params.with_mixing(r, c);
        s.mode = Mode::ClosedLoop;
        s.event = engine::EventSchedule {
            half_duration: template.event.half_duration,
            power: template.event.power,
            forced_settle_duration: template.event.forced_settle_duration,
            ..engine::EventSchedule::new(kind)
        };
        s.id = format!("sweep-{kind}-r{r}-c{c}");
        simulate(&s, &horizons).map(|out| out.records)
    });

    let mut outcome = SweepOutcome::default();
    for (&(r, c, kind), result) in points.iter().zip(results) {
        match result {
            Ok(records) => outcome.records.extend(records),
            Err(e) => {
                log::warn!("sweep point r = {r}, c = {c}, {kind} failed: {e}");
                outcome.failures.push(PointFailure {
                    r,
                    c,
                    kind,
                    message: e.to_string(),
                })
            }
        }
    }
    outcome.records.sort_by(|a, b| {
        a.r.total_cmp(&b.r)
            .then(a.c.total_cmp(&b.c))
            .then(a.kind.cmp(&b.kind))
            .then(a.window_hr.total_cmp(&b.window_hr))
    });
    Ok(outcome)
}

/// Columns of the forced settling table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StudyCase {
    Unforced,
    Forced,
    /// Outdoor change happens and is predicted.
    Case1,
    /// Outdoor change happens but is not predicted.
    Case2,
    /// Outdoor change is predicted but does not happen.
    Case3,
}

impl StudyCase {
    pub const ALL: [StudyCase; 5] = [
        StudyCase::Unforced,
        StudyCase::Forced,
        StudyCase::Case1,
        StudyCase::Case2,
        StudyCase::Case3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StudyCase::Unforced => "Unforced",
            StudyCase::Forced => "Forced",
            StudyCase::Case1 => "Case1",
            StudyCase::Case2 => "Case2",
            StudyCase::Case3 => "Case3",
        }
    }

    /// Whether the actual and the predicted outdoor profiles change.
    fn outdoor_changes(self) -> (bool, bool) {
        match self {
            StudyCase::Unforced | StudyCase::Forced => (false, false),
            StudyCase::Case1 => (true, true),
            StudyCase::Case2 => (true, false),
            StudyCase::Case3 => (false, true),
        }
    }
}

/// Knobs of the forced settling study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub params: BuildingParams,
    pub dt: f64,
    pub outdoor_change: f64,
    /// Length of the outdoor change from the event start; `None` keeps it.
    pub outdoor_change_duration: Option<f64>,
    pub bumpless_handback: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            params: BuildingParams::auditorium().with_mixing(0.5, 0.3),
            dt: 1.0,
            outdoor_change: OUTDOOR_CHANGE,
            outdoor_change_duration: Some(2.0 * engine::DEFAULT_HALF_DURATION),
            bumpless_handback: true,
        }
    }
}

impl StudyConfig {
    pub fn scenario(&self, case: StudyCase, kind: EventKind) -> Scenario {
        let mode = if case == StudyCase::Unforced {
            Mode::ClosedLoop
        } else {
            Mode::ClosedLoopForcedSettling
        };
        let mut s = Scenario::new(self.params, kind, mode);
        s.id = format!("{}-{kind}", case.as_str());
        s.dt = self.dt;
        s.bumpless_handback = self.bumpless_handback;
        let base = self.params.outdoor_temp;
        let changed = OutdoorProfile::with_change(
            base,
            s.t_start(),
            self.outdoor_change_duration,
            self.outdoor_change,
        );
        let (actual, predicted) = case.outdoor_changes();
        if actual {
            s.oa_actual = changed.clone();
        }
        if predicted {
            s.oa_predicted = changed;
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct StudyRun {
    pub case: StudyCase,
    pub kind: EventKind,
    pub scenario: Scenario,
    pub metrics: EventMetrics,
    pub baseline: Trace,
    pub event: Trace,
}

/// Unforced, forced and the three outdoor-change cases for both event kinds,
/// scored over the full settling horizon. Ordered by kind, then case.
pub fn forced_settling_study(cfg: &StudyConfig, exec: Execution) -> Result<Vec<StudyRun>> {
    let mut points = Vec::new();
    for kind in [EventKind::UpDown, EventKind::DownUp] {
        for case in StudyCase::ALL {
            points.push((case, kind));
        }
    }
    map_points(&points, exec, |&(case, kind)| {
        let scenario = cfg.scenario(case, kind);
        let (baseline, event) = engine::run_event(&scenario)?;
        let metrics = event_metrics(&scenario, &baseline, &event, scenario.settle_duration)?;
        Ok(StudyRun {
            case,
            kind,
            scenario,
            metrics,
            baseline,
            event,
        })
    })
    .into_iter()
    .collect()
}

/// Normalized fan power of one run for cross-building comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSeries {
    pub label: String,
    pub kind: Option<EventKind>,
    /// Seconds from the event start.
    pub time: Vec<f64>,
    pub power: Vec<f64>,
}

fn normalized(trace: &Trace, t0: f64, t1: f64, origin: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = metrics::normalize(trace, t0, t1)?;
    let i0 = n.index_of(t0)?;
    let i1 = n.index_of(t1)?;
    Ok((
        n.time[i0..=i1].iter().map(|t| t - origin).collect(),
        n.fan_power[i0..=i1].to_vec(),
    ))
}

/// Open-loop ±1 °F events on the fully mixed model and on the mixing-zone
/// model at `mixing = (r, c)`, each normalized to unit mean fan power over
/// the event plus context.
pub fn compare_models(
    mixing: (f64, f64),
    dt: f64,
    exec: Execution,
) -> Result<Vec<NormalizedSeries>> {
    let models = [
        ("original", BuildingParams::auditorium()),
        (
            "mixing",
            BuildingParams::auditorium().with_mixing(mixing.0, mixing.1),
        ),
    ];
    let mut points = Vec::new();
    for (name, params) in models {
        for kind in [EventKind::UpDown, EventKind::DownUp] {
            points.push((name, params, kind));
        }
    }
    map_points(&points, exec, |&(name, params, kind)| {
        let mut s = Scenario::new(params, kind, Mode::OpenLoop);
        s.dt = dt;
        s.id = format!("{name}-{kind}");
        let trace = engine::run_open_loop(&s)?;
        let (time, power) = normalized(
            &trace,
            s.t_start() - COMPARE_LEAD,
            s.t_end() + COMPARE_TAIL,
            s.t_start(),
        )?;
        Ok(NormalizedSeries {
            label: s.id,
            kind: Some(kind),
            time,
            power,
        })
    })
    .into_iter()
    .collect()
}

/// Measured fan power normalized over `[t0, t1]`, time relative to `origin`.
pub fn normalize_measured(
    label: &str,
    trace: &Trace,
    t0: f64,
    t1: f64,
    origin: f64,
) -> Result<NormalizedSeries> {
    let (time, power) = normalized(trace, t0, t1, origin)?;
    Ok(NormalizedSeries {
        label: label.into(),
        kind: None,
        time,
        power,
    })
}

/// Least-squares slope of fan power over `[t0, t1]`, W/s.
pub fn mean_slope(trace: &Trace, t0: f64, t1: f64) -> Result<f64> {
    let i0 = trace.index_of(t0)?;
    let i1 = trace.index_of(t1)?;
    if i1 <= i0 {
        return Err(Error::InsufficientData("slope window is empty".into()));
    }
    let n = (i1 - i0 + 1) as f64;
    let xs = &trace.time[i0..=i1];
    let ys = &trace.fan_power[i0..=i1];
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    Ok(sxy / sxx)
}
