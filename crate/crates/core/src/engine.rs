//! Fixed-step time marching of the plant and its controllers.
//!
//! Every run starts at the analytic equilibrium for the nominal setpoint with
//! the temperature integrator carrying the equilibrium flow, and warms up
//! before the event. One control step samples the room and fan power, updates
//! the PI loops, advances the damper and fan lags exactly, then advances the
//! plant with classical RK4 holding airflow and outdoor temperature.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::{ControlState, ControllerGains, ResetMode};
use crate::error::{Error, Result};
use crate::metrics::{self, EventWindow};
use crate::thermal::{self, BuildingParams, PlantInput, ThermalState};
use crate::trace::{Sample, Trace, TraceMeta};
use crate::units::fahrenheit_delta_to_kelvin;

/// Settling horizon measured from the event start, s.
pub const DEFAULT_SETTLE: f64 = 35_000.0;
pub const DEFAULT_WARMUP: f64 = 7200.0;
pub const DEFAULT_HALF_DURATION: f64 = 1800.0;
pub const DEFAULT_FORCED_SETTLE: f64 = 3600.0;
/// Closed-loop event size as a fraction of baseline fan power at the event start.
pub const DEFAULT_POWER_FRACTION: f64 = 0.1;
/// Neutrality tolerance as a fraction of `E_in + E_out`.
pub const NEUTRALITY_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    /// Power first raised, then lowered.
    #[serde(rename = "UP_DOWN", alias = "up_down", alias = "up-down")]
    UpDown,
    /// Power first lowered, then raised.
    #[serde(rename = "DOWN_UP", alias = "down_up", alias = "down-up")]
    DownUp,
}

impl EventKind {
    /// +1 when the first half raises fan power.
    pub fn power_sign(self) -> f64 {
        match self {
            EventKind::UpDown => 1.0,
            EventKind::DownUp => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::UpDown => "UP_DOWN",
            EventKind::DownUp => "DOWN_UP",
        }
    }
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "UP_DOWN" => Ok(EventKind::UpDown),
            "DOWN_UP" => Ok(EventKind::DownUp),
            _ => Err(Error::config(format!(
                "unknown event kind {s:?} (expected UP_DOWN or DOWN_UP)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OpenLoop,
    ClosedLoop,
    ClosedLoopForcedSettling,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::OpenLoop => "open_loop",
            Mode::ClosedLoop => "closed_loop",
            Mode::ClosedLoopForcedSettling => "closed_loop_forced_settling",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Piecewise-constant outdoor temperature: `(start time s, °C)` segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutdoorProfile {
    pub segments: Vec<(f64, f64)>,
}

impl OutdoorProfile {
    pub fn constant(temp: f64) -> Self {
        Self {
            segments: vec![(0.0, temp)],
        }
    }

    /// `base` everywhere except `base + delta` on `[onset, onset + duration)`;
    /// a `None` duration makes the change permanent.
    pub fn with_change(base: f64, onset: f64, duration: Option<f64>, delta: f64) -> Self {
        let mut segments = vec![(0.0, base)];
        if onset <= 0.0 {
            segments[0].1 = base + delta;
        } else {
            segments.push((onset, base + delta));
        }
        if let Some(d) = duration {
            segments.push((onset.max(0.0) + d, base));
        }
        Self { segments }
    }

    pub fn validate(&self) -> Result<()> {
        let Some(&(first, _)) = self.segments.first() else {
            return Err(Error::config("outdoor profile has no segments"));
        };
        if first != 0.0 {
            return Err(Error::config("outdoor profile must start at t = 0"));
        }
        for w in self.segments.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::config(
                    "outdoor profile times must strictly increase",
                ));
            }
        }
        if self
            .segments
            .iter()
            .any(|&(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err(Error::config("outdoor profile values must be finite"));
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> f64 {
        let i = self.segments.partition_point(|&(start, _)| start <= t);
        self.segments[i.saturating_sub(1)].1
    }

    pub fn max(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Closed-loop power reference for the two event halves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerReference {
    /// Fraction of baseline fan power at the event start; signs follow the kind.
    Fraction(f64),
    /// Explicit deltas for the first and second half, W.
    Watts([f64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSchedule {
    pub kind: EventKind,
    pub half_duration: f64,
    /// Open-loop setpoint deltas for the two halves, K.
    pub setpoint_deltas: [f64; 2],
    pub power: PowerReference,
    pub forced_settle_duration: f64,
}

impl EventSchedule {
    /// One-hour event with ±1 °F setpoint moves and ±10 % power moves.
    pub fn new(kind: EventKind) -> Self {
        let step = fahrenheit_delta_to_kelvin(1.0);
        // raising the setpoint lowers cooling airflow and fan power
        let first = -kind.power_sign() * step;
        Self {
            kind,
            half_duration: DEFAULT_HALF_DURATION,
            setpoint_deltas: [first, -first],
            power: PowerReference::Fraction(DEFAULT_POWER_FRACTION),
            forced_settle_duration: DEFAULT_FORCED_SETTLE,
        }
    }

    pub fn with_setpoint_deltas(mut self, first: f64, second: f64) -> Self {
        self.setpoint_deltas = [first, second];
        self
    }

    pub fn with_power(mut self, power: PowerReference) -> Self {
        self.power = power;
        self
    }

    pub fn duration(&self) -> f64 {
        2.0 * self.half_duration
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_duration > 0.0) {
            return Err(Error::config("event half_duration must be positive"));
        }
        if !(self.forced_settle_duration >= 0.0) {
            return Err(Error::config("forced_settle_duration must be >= 0"));
        }
        // sign of the first half's power change for each setpoint delta
        let s = self.kind.power_sign();
        let [d1, d2] = self.setpoint_deltas;
        if d1 * s > 0.0 || d2 * s < 0.0 {
            return Err(Error::config(format!(
                "{} setpoint deltas must be [{}, {}], got [{d1}, {d2}]",
                self.kind,
                if s > 0.0 { "<= 0" } else { ">= 0" },
                if s > 0.0 { ">= 0" } else { "<= 0" },
            )));
        }
        match self.power {
            PowerReference::Fraction(f) if !(f.is_finite() && f >= 0.0) => {
                return Err(Error::config("power fraction must be >= 0"));
            }
            PowerReference::Watts([p1, p2]) if p1 * s < 0.0 || p2 * s > 0.0 => {
                return Err(Error::config(format!(
                    "{} power deltas have the wrong signs: [{p1}, {p2}]",
                    self.kind
                )));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub params: BuildingParams,
    pub gains: ControllerGains,
    /// Control and sampling step, s.
    pub dt: f64,
    /// Pre-event simulation at the nominal setpoint; the event starts here.
    pub warmup: f64,
    /// `t_settle − t_start`, s.
    pub settle_duration: f64,
    pub oa_actual: OutdoorProfile,
    pub oa_predicted: OutdoorProfile,
    pub event: EventSchedule,
    pub mode: Mode,
    /// Re-seed the temperature integrator when the power loop lets go.
    pub bumpless_handback: bool,
}

impl Scenario {
    pub fn new(params: BuildingParams, kind: EventKind, mode: Mode) -> Self {
        Self {
            id: format!("{}-{}", mode.as_str(), kind.as_str()),
            params,
            gains: ControllerGains::auditorium(),
            dt: 1.0,
            warmup: DEFAULT_WARMUP,
            settle_duration: DEFAULT_SETTLE,
            oa_actual: OutdoorProfile::constant(params.outdoor_temp),
            oa_predicted: OutdoorProfile::constant(params.outdoor_temp),
            event: EventSchedule::new(kind),
            mode,
            bumpless_handback: true,
        }
    }

    pub fn t_start(&self) -> f64 {
        self.warmup
    }

    pub fn t_end(&self) -> f64 {
        self.warmup + self.event.duration()
    }

    pub fn t_settle(&self) -> f64 {
        self.warmup + self.settle_duration
    }

    pub fn window(&self) -> Result<EventWindow> {
        EventWindow::new(self.t_start(), self.t_end(), self.t_settle())
    }

    /// Checks what a baseline run needs.
    pub fn validate_horizon(&self) -> Result<()> {
        self.params.validate()?;
        self.gains.validate()?;
        self.oa_actual.validate()?;
        self.oa_predicted.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.warmup >= 0.0 && self.settle_duration >= 0.0) {
            return Err(Error::config("warmup and settle_duration must be >= 0"));
        }
        for (name, t) in [("warmup", self.warmup), ("t_settle", self.t_settle())] {
            steps(t, self.dt).map_err(|_| {
                Error::config(format!(
                    "{name} = {t} s is not a multiple of dt = {} s",
                    self.dt
                ))
            })?;
        }
        Ok(())
    }

    /// Full validation for event runs.
    pub fn validate(&self) -> Result<()> {
        self.validate_horizon()?;
        self.event.validate()?;
        self.window()?;
        for t in [
            self.t_start() + self.event.half_duration,
            self.t_end(),
            self.t_end() + self.event.forced_settle_duration,
        ] {
            steps(t, self.dt).map_err(|_| {
                Error::config(format!(
                    "event boundary {t} s is not a multiple of dt = {} s",
                    self.dt
                ))
            })?;
        }
        Ok(())
    }

    /// Short hex digest of the scenario's canonical serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn steps(t: f64, dt: f64) -> Result<usize> {
    let x = t / dt;
    let n = x.round();
    if (x - n).abs() > 1e-9 * x.abs().max(1.0) || n < 0.0 {
        return Err(Error::config(format!("{t} is not a multiple of {dt}")));
    }
    Ok(n as usize)
}

/// Fixed configuration of a stepped simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub params: BuildingParams,
    pub gains: ControllerGains,
    pub dt: f64,
    /// RK4 substeps per control step.
    pub substeps: usize,
    pub flow_max: f64,
    /// Sanity range for every plant temperature, °C.
    pub temp_bounds: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerCommand {
    /// Desired deviation from baseline fan power, W.
    pub reference: f64,
    /// Baseline fan power at this instant, W.
    pub baseline_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInputs {
    /// Open-loop setpoint, °C.
    pub setpoint: f64,
    pub outdoor_temp: f64,
    pub internal_gain: f64,
    /// Present while the power loop is engaged.
    pub power: Option<PowerCommand>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutputs {
    pub setpoint_effective: f64,
    pub flow_desired: f64,
}

/// One control step. Commands are computed from the states at the start of
/// the step; the returned states are those at the end.
pub fn step(
    cfg: &StepConfig,
    plant: &ThermalState,
    control: &ControlState,
    inputs: &StepInputs,
    time: f64,
) -> Result<(ThermalState, ControlState, StepOutputs)> {
    if !(cfg.dt > 0.0) {
        return Err(Error::config(format!(
            "dt must be positive, got {}",
            cfg.dt
        )));
    }
    let g = &cfg.gains;
    let mut ctl = *control;
    let setpoint_effective = match inputs.power {
        Some(cmd) => {
            let diff = control.fan_power - cmd.baseline_power;
            inputs.setpoint + ctl.power_pi_step(cmd.reference, diff, g, cfg.dt)
        }
        None => inputs.setpoint,
    };
    let flow_desired =
        ctl.temperature_pi_step(plant.room, setpoint_effective, g, cfg.flow_max, cfg.dt);
    ctl.airflow_lag_step(flow_desired, g.tau_supply, cfg.dt);
    ctl.fan_power_step(g.fan_coefficient, g.tau_fan, cfg.dt);

    let input = PlantInput {
        supply_flow: ctl.supply_flow,
        outdoor_temp: inputs.outdoor_temp,
        internal_gain: inputs.internal_gain,
    };
    let next = thermal::rk4_advance(plant, &input, &cfg.params, cfg.dt, cfg.substeps);
    let (lo, hi) = cfg.temp_bounds;
    let in_bounds = |v: f64| (lo..=hi).contains(&v);
    if !next.is_finite()
        || !(in_bounds(next.mixing) && in_bounds(next.room) && in_bounds(next.wall))
    {
        return Err(Error::Numerical {
            time: time + cfg.dt,
            message: format!(
                "plant left [{lo:.2}, {hi:.2}] °C: before {plant:?}, after {next:?}, control {ctl:?}"
            ),
        });
    }
    if !(ctl.fan_power.is_finite() && ctl.supply_flow.is_finite()) {
        return Err(Error::Numerical {
            time: time + cfg.dt,
            message: format!("controller state not finite: {ctl:?}"),
        });
    }
    Ok((
        next,
        ctl,
        StepOutputs {
            setpoint_effective,
            flow_desired,
        },
    ))
}

enum Drive<'a> {
    Baseline,
    OpenLoop,
    ClosedLoop { baseline: &'a Trace, forced: bool },
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    Idle,
    FirstHalf,
    SecondHalf,
    ForcedSettle,
}

fn simulate(scenario: &Scenario, drive: Drive<'_>) -> Result<Trace> {
    let dt = scenario.dt;
    let params = &scenario.params;
    let gains = &scenario.gains;
    let (outdoor, label) = match drive {
        Drive::Baseline => (&scenario.oa_predicted, "baseline"),
        Drive::OpenLoop => (&scenario.oa_actual, "open_loop"),
        Drive::ClosedLoop { forced: false, .. } => (&scenario.oa_actual, "closed_loop"),
        Drive::ClosedLoop { forced: true, .. } => {
            (&scenario.oa_actual, "closed_loop_forced_settling")
        }
    };

    let n_settle = steps(scenario.t_settle(), dt)?;
    let event_steps = if matches!(drive, Drive::Baseline) {
        None
    } else {
        let start = steps(scenario.t_start(), dt)?;
        let half = start + steps(scenario.event.half_duration, dt)?;
        let end = start + steps(scenario.event.duration(), dt)?;
        let forced = end + steps(scenario.event.forced_settle_duration, dt)?;
        Some((start, half, end, forced))
    };

    let eq = thermal::equilibrium_at(
        params,
        gains.setpoint_nominal,
        outdoor.at(0.0),
        params.internal_gain,
    )?;
    let flow_max = gains.flow_limit_factor * eq.supply_flow;
    let cfg = StepConfig {
        params: *params,
        gains: *gains,
        dt,
        substeps: thermal::stable_substeps(params, flow_max, dt),
        flow_max,
        temp_bounds: (
            params.supply_temp - 5.0,
            outdoor.max().max(params.outdoor_temp) + 5.0,
        ),
    };

    // closed-loop references
    let mut power_deltas = [0.0, 0.0];
    if let Drive::ClosedLoop { baseline, .. } = drive {
        if baseline.len() != n_settle + 1 || (baseline.dt - dt).abs() > 1e-12 * dt {
            return Err(Error::Misaligned(format!(
                "baseline has {} samples at dt = {} s, scenario needs {} at dt = {} s",
                baseline.len(),
                baseline.dt,
                n_settle + 1,
                dt
            )));
        }
        let (start, ..) = event_steps.expect("event run");
        power_deltas = match scenario.event.power {
            PowerReference::Fraction(f) => {
                let p = f * scenario.event.kind.power_sign() * baseline.fan_power[start];
                [p, -p]
            }
            PowerReference::Watts(w) => w,
        };
    }

    let meta = TraceMeta {
        scenario_hash: scenario.hash(),
        label: label.into(),
    };
    let mut trace = Trace::with_capacity(dt, n_settle + 1, meta);
    let mut plant = eq.state;
    let mut control = ControlState::at_steady_flow(eq.supply_flow, gains);
    let mut prev_engaged = false;
    let mut last_flow_desired = eq.supply_flow;

    for k in 0..=n_settle {
        let time = k as f64 * dt;
        let phase = match event_steps {
            Some((start, half, _, _)) if (start..half).contains(&k) => Phase::FirstHalf,
            Some((_, half, end, _)) if (half..end).contains(&k) => Phase::SecondHalf,
            Some((_, _, end, forced)) if (end..forced).contains(&k) => Phase::ForcedSettle,
            _ => Phase::Idle,
        };

        let mut setpoint = gains.setpoint_nominal;
        let mut power = None;
        match drive {
            Drive::Baseline => {}
            Drive::OpenLoop => match phase {
                Phase::FirstHalf => setpoint += scenario.event.setpoint_deltas[0],
                Phase::SecondHalf => setpoint += scenario.event.setpoint_deltas[1],
                _ => {}
            },
            Drive::ClosedLoop { baseline, forced } => {
                let reference = match phase {
                    Phase::FirstHalf => Some(power_deltas[0]),
                    Phase::SecondHalf => Some(power_deltas[1]),
                    Phase::ForcedSettle if forced => Some(0.0),
                    _ => None,
                };
                power = reference.map(|reference| PowerCommand {
                    reference,
                    baseline_power: baseline.fan_power[k],
                });
            }
        }

        let engaged = power.is_some();
        if engaged != prev_engaged {
            control.reset(ResetMode::Power);
            if !engaged && scenario.bumpless_handback {
                control.bumpless_handback(plant.room, setpoint, last_flow_desired, gains);
            }
            prev_engaged = engaged;
        }

        let inputs = StepInputs {
            setpoint,
            outdoor_temp: outdoor.at(time),
            internal_gain: params.internal_gain,
            power,
        };
        let (next_plant, next_control, out) = step(&cfg, &plant, &control, &inputs, time)?;
        trace.push(Sample {
            time,
            mixing_temp: plant.mixing,
            room_temp: plant.room,
            wall_temp: plant.wall,
            setpoint: out.setpoint_effective,
            flow_desired: out.flow_desired,
            flow_actual: control.supply_flow,
            fan_power: control.fan_power,
            outdoor_temp: inputs.outdoor_temp,
            power_reference: power.map(|p| p.reference),
        });
        last_flow_desired = out.flow_desired;
        plant = next_plant;
        control = next_control;
    }
    debug_assert!(trace.columns_consistent());
    Ok(trace)
}

/// No-event run at the nominal setpoint under the predicted outdoor profile.
pub fn run_baseline(scenario: &Scenario) -> Result<Trace> {
    scenario.validate_horizon()?;
    simulate(scenario, Drive::Baseline)
}

/// Scheduled setpoint moves under the actual outdoor profile.
pub fn run_open_loop(scenario: &Scenario) -> Result<Trace> {
    if scenario.mode != Mode::OpenLoop {
        return Err(Error::config(format!(
            "run_open_loop needs mode open_loop, scenario is {}",
            scenario.mode
        )));
    }
    scenario.validate()?;
    simulate(scenario, Drive::OpenLoop)
}

/// Power-tracking run against `baseline`, with an optional forced-settling
/// period at zero reference after the event.
pub fn run_closed_loop(scenario: &Scenario, baseline: &Trace) -> Result<Trace> {
    let forced = match scenario.mode {
        Mode::ClosedLoop => false,
        Mode::ClosedLoopForcedSettling => true,
        Mode::OpenLoop => {
            return Err(Error::config("run_closed_loop needs a closed-loop mode"));
        }
    };
    scenario.validate()?;
    simulate(scenario, Drive::ClosedLoop { baseline, forced })
}

/// Baseline plus the event run selected by `scenario.mode`.
pub fn run_event(scenario: &Scenario) -> Result<(Trace, Trace)> {
    let baseline = run_baseline(scenario)?;
    let event = match scenario.mode {
        Mode::OpenLoop => run_open_loop(scenario)?,
        _ => run_closed_loop(scenario, &baseline)?,
    };
    Ok((baseline, event))
}

const TUNING_ITERATIONS: usize = 40;

/// Adjusts the second-half setpoint delta of an open-loop event until it is
/// energy neutral at `tolerance_frac`, keeping the first half fixed.
pub fn tune_open_loop_event(scenario: &Scenario, tolerance_frac: f64) -> Result<EventSchedule> {
    if scenario.mode != Mode::OpenLoop {
        return Err(Error::config("tuning applies to open-loop events only"));
    }
    scenario.validate()?;
    let baseline = run_baseline(scenario)?;
    let window = scenario.window()?;
    let direction = scenario.event.kind.power_sign();
    let first = scenario.event.setpoint_deltas[0];

    // signed net energy over the event and the neutrality verdict for a
    // second-half magnitude `x`
    let evaluate = |x: f64| -> Result<(f64, bool, EventSchedule)> {
        let mut s = scenario.clone();
        s.event.setpoint_deltas = [first, direction * x];
        let trace = simulate(&s, Drive::OpenLoop)?;
        let n = metrics::neutrality(&trace, &baseline, &window, tolerance_frac)?;
        let i0 = trace.index_of(window.start)?;
        let i1 = trace.index_of(window.end)?;
        let net: f64 = (i0..i1)
            .map(|i| {
                0.5 * trace.dt
                    * (trace.fan_power[i] - baseline.fan_power[i] + trace.fan_power[i + 1]
                        - baseline.fan_power[i + 1])
            })
            .sum();
        Ok((net, n.neutral, s.event))
    };

    let current = scenario.event.setpoint_deltas[1].abs();
    let (net0, neutral0, event0) = evaluate(current)?;
    if neutral0 {
        return Ok(event0);
    }

    // net energy is monotone in the second-half magnitude, so bracket a sign
    // change and bisect
    let mut lo = 0.0;
    let mut hi = current.max(first.abs()).max(1e-3);
    let (mut f_lo, ..) = evaluate(lo)?;
    let (mut f_hi, ..) = evaluate(hi)?;
    let mut expansions = 0;
    while f_lo.signum() == f_hi.signum() {
        if expansions == 6 {
            return Err(Error::Tuning(format!(
                "no sign change of net event energy for second-half delta in [0, {hi}] K \
                 (net at 0: {f_lo:.1} J, at {hi}: {f_hi:.1} J, initial {net0:.1} J)"
            )));
        }
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        f_hi = evaluate(hi)?.0;
        expansions += 1;
    }

    let mut best = event0;
    for _ in 0..TUNING_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let (f_mid, neutral, event) = evaluate(mid)?;
        best = event;
        if neutral {
            return Ok(event);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Tuning(format!(
        "not neutral after {TUNING_ITERATIONS} bisection steps; last second-half delta {} K",
        best.setpoint_deltas[1]
    )))
}
