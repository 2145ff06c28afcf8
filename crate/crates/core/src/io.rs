//! Scenario config files, measured building data, and result tables.

use std::fs::File;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::Deserialize;

use crate::control::ControllerGains;
use crate::engine::{EventKind, EventSchedule, Mode, OutdoorProfile, PowerReference, Scenario};
use crate::error::{Error, Result};
use crate::thermal::BuildingParams;
use crate::trace::{Sample, Trace, TraceMeta};
use crate::units::{fahrenheit_delta_to_kelvin, fahrenheit_to_celsius, kilowatts_to_watts};

// ---------------------------------------------------------------------------
// scenario files

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    id: Option<String>,
    mode: Mode,
    #[serde(default = "one")]
    dt: f64,
    #[serde(default = "default_warmup")]
    warmup: f64,
    #[serde(default = "default_settle")]
    settle_duration: f64,
    #[serde(default = "yes")]
    bumpless_handback: bool,
    #[serde(default)]
    building: BuildingParams,
    #[serde(default)]
    controller: ControllerGains,
    event: EventSection,
    #[serde(default)]
    outdoor: OutdoorSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventSection {
    kind: EventKind,
    half_duration: Option<f64>,
    /// Setpoint moves in K.
    setpoint_deltas: Option<[f64; 2]>,
    /// Setpoint moves in °F.
    setpoint_deltas_f: Option<[f64; 2]>,
    power_fraction: Option<f64>,
    power_deltas_w: Option<[f64; 2]>,
    forced_settle_duration: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutdoorSection {
    /// Explicit `[time s, °C]` segments; override the change keys below.
    actual: Option<Vec<(f64, f64)>>,
    predicted: Option<Vec<(f64, f64)>>,
    /// Temperature change applied to the actual outdoor profile, K.
    #[serde(default)]
    actual_change: f64,
    /// Temperature change applied to the predicted outdoor profile, K.
    #[serde(default)]
    predicted_change: f64,
    /// Onset of the change, s; defaults to the event start.
    change_start: Option<f64>,
    /// Length of the change, s; defaults to the event length.
    change_duration: Option<f64>,
    /// Keep the change for the rest of the run.
    #[serde(default)]
    change_permanent: bool,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_warmup() -> f64 {
    crate::engine::DEFAULT_WARMUP
}
fn default_settle() -> f64 {
    crate::engine::DEFAULT_SETTLE
}

/// Parses a scenario from TOML text. `origin` names the source in errors.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::ConfigFile {
        path: origin.into(),
        message: e.to_string(),
    })?;
    let wrap = |e: Error| match e {
        Error::Config(message) => Error::ConfigFile {
            path: origin.into(),
            message,
        },
        other => other,
    };
    build_scenario(file, origin).map_err(wrap)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, &path.display().to_string())
}

fn build_scenario(file: ScenarioFile, origin: &str) -> Result<Scenario> {
    let ev = &file.event;
    let mut event = EventSchedule::new(ev.kind);
    if let Some(h) = ev.half_duration {
        event.half_duration = h;
    }
    match (ev.setpoint_deltas, ev.setpoint_deltas_f) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "event: give setpoint_deltas (K) or setpoint_deltas_f (°F), not both",
            ))
        }
        (Some(k), None) => event.setpoint_deltas = k,
        (None, Some(f)) => {
            event.setpoint_deltas = f.map(fahrenheit_delta_to_kelvin);
        }
        (None, None) => {}
    }
    match (ev.power_fraction, ev.power_deltas_w) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "event: give power_fraction or power_deltas_w, not both",
            ))
        }
        (Some(f), None) => event.power = PowerReference::Fraction(f),
        (None, Some(w)) => event.power = PowerReference::Watts(w),
        (None, None) => {}
    }
    if let Some(d) = ev.forced_settle_duration {
        event.forced_settle_duration = d;
    }

    let mut scenario = Scenario::new(file.building, ev.kind, file.mode);
    scenario.id = file.id.unwrap_or_else(|| {
        Path::new(origin)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| scenario.id.clone())
    });
    scenario.gains = file.controller;
    scenario.dt = file.dt;
    scenario.warmup = file.warmup;
    scenario.settle_duration = file.settle_duration;
    scenario.bumpless_handback = file.bumpless_handback;
    scenario.event = event;

    let od = &file.outdoor;
    let base = file.building.outdoor_temp;
    let onset = od.change_start.unwrap_or(scenario.t_start());
    let duration = if od.change_permanent {
        None
    } else {
        Some(od.change_duration.unwrap_or(event.duration()))
    };
    let profile = |explicit: &Option<Vec<(f64, f64)>>, delta: f64| match explicit {
        Some(segments) => OutdoorProfile {
            segments: segments.clone(),
        },
        None if delta == 0.0 => OutdoorProfile::constant(base),
        None => OutdoorProfile::with_change(base, onset, duration, delta),
    };
    scenario.oa_actual = profile(&od.actual, od.actual_change);
    scenario.oa_predicted = profile(&od.predicted, od.predicted_change);

    scenario.validate()?;
    Ok(scenario)
}

// ---------------------------------------------------------------------------
// measured data

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerUnit {
    Watts,
    Kilowatts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TempUnit {
    Celsius,
    Fahrenheit,
}

/// Which CSV columns hold which signal, and in what units.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    pub time: String,
    pub power: (String, PowerUnit),
    pub zone_temp: Option<(String, TempUnit)>,
    pub setpoint: Option<(String, TempUnit)>,
}

impl std::str::FromStr for ColumnMap {
    type Err = Error;

    /// `time=Timestamp,power=Fan kW:kW,zone_temp=Zone:F,setpoint=SP:F`.
    fn from_str(spec: &str) -> Result<Self> {
        let mut time = None;
        let mut power = None;
        let mut zone_temp = None;
        let mut setpoint = None;
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                Error::config(format!("column map entry {item:?} is not key=column"))
            })?;
            let (column, unit) = match value.rsplit_once(':') {
                Some((c, u)) => (c.trim().to_string(), Some(u.trim())),
                None => (value.trim().to_string(), None),
            };
            let temp_unit = |u: Option<&str>| match u.map(str::to_ascii_uppercase).as_deref() {
                None | Some("C") => Ok(TempUnit::Celsius),
                Some("F") => Ok(TempUnit::Fahrenheit),
                Some(other) => Err(Error::config(format!("unknown temperature unit {other:?}"))),
            };
            match key.trim() {
                "time" => time = Some(column),
                "power" => {
                    let u = match unit.map(str::to_ascii_lowercase).as_deref() {
                        None | Some("w") => PowerUnit::Watts,
                        Some("kw") => PowerUnit::Kilowatts,
                        Some(other) => {
                            return Err(Error::config(format!("unknown power unit {other:?}")))
                        }
                    };
                    power = Some((column, u));
                }
                "zone_temp" => zone_temp = Some((column, temp_unit(unit)?)),
                "setpoint" => setpoint = Some((column, temp_unit(unit)?)),
                other => return Err(Error::config(format!("unknown column role {other:?}"))),
            }
        }
        Ok(ColumnMap {
            time: time.ok_or_else(|| Error::config("column map needs time=..."))?,
            power: power.ok_or_else(|| Error::config("column map needs power=..."))?,
            zone_temp,
            setpoint,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowReject {
    /// 1-based line number in the file, header included.
    pub line: u64,
    pub reason: String,
}

/// Validated measured time series, SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredSeries {
    /// Seconds; Unix time for ISO-8601 inputs.
    pub time: Vec<f64>,
    pub power: Vec<f64>,
    pub zone_temp: Option<Vec<f64>>,
    pub setpoint: Option<Vec<f64>>,
    pub source: String,
    pub rejected: Vec<RowReject>,
    /// Intervals longer than three median sample spacings.
    pub gaps: Vec<(f64, f64)>,
}

impl MeasuredSeries {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }
}

pub const DEFAULT_REJECT_THRESHOLD: f64 = 0.01;

/// Numeric seconds, RFC 3339, or naive `YYYY-MM-DD[T ]HH:MM:SS` read as UTC.
pub fn parse_timestamp(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp_millis() as f64 / 1000.0);
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc().timestamp_millis() as f64 / 1000.0);
        }
    }
    None
}

pub fn load_measured_csv(path: &Path, map: &ColumnMap) -> Result<MeasuredSeries> {
    load_measured_csv_with(path, map, DEFAULT_REJECT_THRESHOLD)
}

/// Loads and validates a measured CSV. Unparseable rows and negative powers
/// count toward `reject_threshold` (a fraction of data rows); duplicated
/// timestamps are dropped with a warning; time running backwards is an error.
pub fn load_measured_csv_with(
    path: &Path,
    map: &ColumnMap,
    reject_threshold: f64,
) -> Result<MeasuredSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Data(format!(
                "{}: column {name:?} not found (have {:?})",
                path.display(),
                headers.iter().collect::<Vec<_>>()
            ))
        })
    };
    let time_col = find(&map.time)?;
    let power_col = find(&map.power.0)?;
    let zone_col = map
        .zone_temp
        .as_ref()
        .map(|(c, u)| find(c).map(|i| (i, *u)))
        .transpose()?;
    let sp_col = map
        .setpoint
        .as_ref()
        .map(|(c, u)| find(c).map(|i| (i, *u)))
        .transpose()?;

    let to_celsius = |v: f64, u: TempUnit| match u {
        TempUnit::Celsius => v,
        TempUnit::Fahrenheit => fahrenheit_to_celsius(v),
    };
    let num =
        |record: &csv::StringRecord, i: usize, what: &str| -> std::result::Result<f64, String> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("bad {what} value {raw:?}"))
        };

    let mut out = MeasuredSeries {
        time: Vec::new(),
        power: Vec::new(),
        zone_temp: zone_col.map(|_| Vec::new()),
        setpoint: sp_col.map(|_| Vec::new()),
        source: path.display().to_string(),
        rejected: Vec::new(),
        gaps: Vec::new(),
    };
    let mut rows = 0usize;
    let mut bad = 0usize;
    for (k, record) in reader.records().enumerate() {
        let line = k as u64 + 2;
        rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                bad += 1;
                out.rejected.push(RowReject {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let parsed = (|| -> std::result::Result<_, String> {
            let raw_t = record.get(time_col).unwrap_or("");
            let t = parse_timestamp(raw_t).ok_or_else(|| format!("bad timestamp {raw_t:?}"))?;
            let mut p = num(&record, power_col, "power")?;
            if map.power.1 == PowerUnit::Kilowatts {
                p = kilowatts_to_watts(p);
            }
            if p < 0.0 {
                return Err(format!("negative power {p} W"));
            }
            let z = zone_col
                .map(|(i, u)| num(&record, i, "zone temperature").map(|v| to_celsius(v, u)))
                .transpose()?;
            let s = sp_col
                .map(|(i, u)| num(&record, i, "setpoint").map(|v| to_celsius(v, u)))
                .transpose()?;
            Ok((t, p, z, s))
        })();
        let (t, p, z, s) = match parsed {
            Ok(v) => v,
            Err(reason) => {
                bad += 1;
                out.rejected.push(RowReject { line, reason });
                continue;
            }
        };
        if let Some(&last) = out.time.last() {
            if t == last {
                log::warn!(
                    "{}:{line}: duplicated timestamp {t}, row dropped",
                    out.source
                );
                out.rejected.push(RowReject {
                    line,
                    reason: format!("duplicated timestamp {t}"),
                });
                continue;
            }
            if t < last {
                return Err(Error::Data(format!(
                    "{}:{line}: timestamp {t} precedes {last}",
                    out.source
                )));
            }
        }
        out.time.push(t);
        out.power.push(p);
        if let (Some(v), Some(z)) = (out.zone_temp.as_mut(), z) {
            v.push(z);
        }
        if let (Some(v), Some(s)) = (out.setpoint.as_mut(), s) {
            v.push(s);
        }
    }
    if rows > 0 && bad as f64 > reject_threshold * rows as f64 {
        let first = &out
            .rejected
            .iter()
            .find(|r| !r.reason.starts_with("duplicated"));
        return Err(Error::Data(format!(
            "{}: {bad} of {rows} rows unparseable (threshold {:.1} %); first: {:?}",
            out.source,
            100.0 * reject_threshold,
            first
        )));
    }
    for r in &out.rejected {
        log::debug!("{}:{}: rejected: {}", out.source, r.line, r.reason);
    }
    out.gaps = find_gaps(&out.time);
    for &(a, b) in &out.gaps {
        log::warn!("{}: gap of {} s after t = {a}", out.source, b - a);
    }
    Ok(out)
}

fn find_gaps(time: &[f64]) -> Vec<(f64, f64)> {
    if time.len() < 3 {
        return Vec::new();
    }
    let mut spacing: Vec<f64> = time.windows(2).map(|w| w[1] - w[0]).collect();
    spacing.sort_by(f64::total_cmp);
    let median = spacing[spacing.len() / 2];
    time.windows(2)
        .filter(|w| w[1] - w[0] > 3.0 * median)
        .map(|w| (w[0], w[1]))
        .collect()
}

fn interpolate(time: &[f64], values: &[f64], t: f64) -> f64 {
    let i = time.partition_point(|&x| x <= t);
    if i == 0 {
        return values[0];
    }
    if i == time.len() {
        return values[time.len() - 1];
    }
    let (t0, t1) = (time[i - 1], time[i]);
    let w = (t - t0) / (t1 - t0);
    values[i - 1] + w * (values[i] - values[i - 1])
}

/// Linear interpolation onto the grid `start, start + dt, …` up to `end`.
/// Temperatures missing from the series come out as NaN.
pub fn resample(series: &MeasuredSeries, dt: f64, start: f64, end: f64) -> Result<Trace> {
    if !(dt > 0.0) {
        return Err(Error::config(format!("dt must be positive, got {dt}")));
    }
    let (Some(&first), Some(&last)) = (series.time.first(), series.time.last()) else {
        return Err(Error::InsufficientData("empty measured series".into()));
    };
    if start < first || end > last || end < start {
        return Err(Error::InsufficientData(format!(
            "grid [{start}, {end}] is outside the data span [{first}, {last}]"
        )));
    }
    let n = ((end - start) / dt + 1e-9).floor() as usize + 1;
    let meta = TraceMeta {
        scenario_hash: String::new(),
        label: series.source.clone(),
    };
    let mut trace = Trace::with_capacity(dt, n, meta);
    for k in 0..n {
        let t = start + k as f64 * dt;
        let zone = series
            .zone_temp
            .as_ref()
            .map_or(f64::NAN, |z| interpolate(&series.time, z, t));
        let sp = series
            .setpoint
            .as_ref()
            .map_or(f64::NAN, |s| interpolate(&series.time, s, t));
        trace.push(Sample {
            time: t,
            mixing_temp: zone,
            room_temp: zone,
            wall_temp: f64::NAN,
            setpoint: sp,
            flow_desired: f64::NAN,
            flow_actual: f64::NAN,
            fan_power: interpolate(&series.time, &series.power, t),
            outdoor_temp: f64::NAN,
            power_reference: None,
        });
    }
    Ok(trace)
}

// ---------------------------------------------------------------------------
// results

pub const RESULTS_HEADER: [&str; 12] = [
    "scenario_id",
    "mode",
    "kind",
    "r",
    "c",
    "window_hr",
    "E_in_J",
    "E_out_J",
    "RTE",
    "neutral",
    "residual_J",
    "rmse_K",
];

/// One row of a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub scenario_id: String,
    pub mode: String,
    pub kind: String,
    pub r: f64,
    pub c: f64,
    pub window_hr: f64,
    pub e_in: f64,
    pub e_out: f64,
    pub rte: Option<f64>,
    pub neutral: bool,
    pub residual: f64,
    pub rmse_k: f64,
}

/// 17 significant digits, enough to round-trip any f64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

pub fn write_results(records: &[ResultRecord], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(RESULTS_HEADER)
        .map_err(|e| Error::csv(path, e))?;
    for r in records {
        w.write_record([
            r.scenario_id.clone(),
            r.mode.clone(),
            r.kind.clone(),
            format_float(r.r),
            format_float(r.c),
            format_float(r.window_hr),
            format_float(r.e_in),
            format_float(r.e_out),
            r.rte.map(format_float).unwrap_or_default(),
            r.neutral.to_string(),
            format_float(r.residual),
            format_float(r.rmse_k),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?;
    if headers.iter().ne(RESULTS_HEADER) {
        return Err(Error::Data(format!(
            "{}: unexpected results header {headers:?}",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = k + 2;
        let f = |i: usize| -> Result<f64> {
            record[i].parse().map_err(|_| {
                Error::Data(format!(
                    "{}:{line}: bad {} value {:?}",
                    path.display(),
                    RESULTS_HEADER[i],
                    &record[i]
                ))
            })
        };
        out.push(ResultRecord {
            scenario_id: record[0].to_string(),
            mode: record[1].to_string(),
            kind: record[2].to_string(),
            r: f(3)?,
            c: f(4)?,
            window_hr: f(5)?,
            e_in: f(6)?,
            e_out: f(7)?,
            rte: if record[8].is_empty() {
                None
            } else {
                Some(f(8)?)
            },
            neutral: record[9].parse().map_err(|_| {
                Error::Data(format!(
                    "{}:{line}: bad neutral flag {:?}",
                    path.display(),
                    &record[9]
                ))
            })?,
            residual: f(10)?,
            rmse_k: f(11)?,
        });
    }
    Ok(out)
}

pub const TRACE_HEADER: [&str; 10] = [
    "time_s",
    "mixing_temp_C",
    "room_temp_C",
    "wall_temp_C",
    "setpoint_C",
    "flow_desired_kg_s",
    "flow_actual_kg_s",
    "fan_power_W",
    "outdoor_temp_C",
    "power_reference_W",
];

/// Writes every `stride`-th sample of `trace`, always including the last.
pub fn write_trace(trace: &Trace, path: &Path, stride: usize) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(TRACE_HEADER)
        .map_err(|e| Error::csv(path, e))?;
    let stride = stride.max(1);
    let n = trace.len();
    let last = n.checked_sub(1).filter(|l| l % stride != 0);
    for i in (0..n).step_by(stride).chain(last) {
        let s = trace.sample(i);
        w.write_record([
            format_float(s.time),
            format_float(s.mixing_temp),
            format_float(s.room_temp),
            format_float(s.wall_temp),
            format_float(s.setpoint),
            format_float(s.flow_desired),
            format_float(s.flow_actual),
            format_float(s.fan_power),
            format_float(s.outdoor_temp),
            s.power_reference.map(format_float).unwrap_or_default(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes named equal-length columns.
pub fn write_columns(path: &Path, columns: &[(&str, &[f64])]) -> Result<()> {
    let n = columns.first().map_or(0, |c| c.1.len());
    if columns.iter().any(|c| c.1.len() != n) {
        return Err(Error::Data(format!(
            "{}: columns have different lengths",
            path.display()
        )));
    }
    let mut w = create(path)?;
    w.write_record(columns.iter().map(|c| c.0))
        .map_err(|e| Error::csv(path, e))?;
    for i in 0..n {
        w.write_record(columns.iter().map(|c| format_float(c.1[i])))
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes string rows under `header`.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
