//! Command implementations behind the `airmix` binary. Each writes CSV
//! files under an output directory and returns an error whose exit code is
//! given by [`exit_code`].

use std::path::Path;

use log::{info, warn};

use airmix::experiments::{self, Execution, StudyCase, StudyConfig, SHORT_SETTLE};
use airmix::io::{self, ColumnMap};
use airmix::metrics::{self, EventWindow, BASELINE_AVERAGING};
use airmix::units::kelvin_delta_to_fahrenheit;
use airmix::{engine, Error, EventKind, Scenario};

/// 0 success, 1 configuration or input error, 2 numerical failure,
/// 3 failed self-check.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Check(_) => 3,
        e if e.is_numerical() => 2,
        _ => 1,
    }
}

pub fn parse_time(s: &str) -> airmix::Result<f64> {
    io::parse_timestamp(s).ok_or_else(|| Error::Config(format!("cannot parse time {s:?}")))
}

pub fn stride(every: f64, dt: f64) -> airmix::Result<usize> {
    let k = (every / dt).round();
    if !(k >= 1.0) || (k * dt - every).abs() > 1e-9 * every.max(1.0) {
        return Err(Error::Config(format!(
            "trace interval {every} s is not a positive multiple of dt = {dt} s"
        )));
    }
    Ok(k as usize)
}

pub fn parse_grid(text: &str) -> airmix::Result<Vec<f64>> {
    let bad = || Error::Config(format!("bad grid {text:?}; use start:end:step or a,b,c"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        return experiments::grid(v[0], v[1], v[2]);
    }
    let v: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err(bad());
    }
    Ok(v)
}

pub fn simulate(
    config: &Path,
    out: &Path,
    dt: Option<f64>,
    short_window: bool,
    trace_every: f64,
    tune: bool,
) -> airmix::Result<()> {
    let mut scenario = io::load_scenario(config)?;
    if let Some(dt) = dt {
        scenario.dt = dt;
        scenario.validate()?;
    }
    if tune {
        scenario.event = engine::tune_open_loop_event(&scenario, engine::NEUTRALITY_ALPHA)?;
        let [d1, d2] = scenario.event.setpoint_deltas;
        info!("tuned setpoint moves: {d1:+.4} K, {d2:+.4} K");
    }
    let settle = if short_window {
        SHORT_SETTLE
    } else {
        scenario.settle_duration
    };
    let every = stride(trace_every, scenario.dt)?;
    let sim = experiments::simulate(&scenario, &[settle])?;
    io::write_trace(&sim.baseline, &out.join("baseline.csv"), every)?;
    io::write_trace(&sim.event, &out.join("event.csv"), every)?;
    io::write_results(&sim.records, &out.join("results.csv"))?;
    for r in &sim.records {
        info!(
            "{}: E_in {:.0} J, E_out {:.0} J, RTE {}, neutral {}",
            r.scenario_id,
            r.e_in,
            r.e_out,
            r.rte.map_or("undefined".into(), |v| format!("{v:.4}")),
            r.neutral
        );
    }
    if tune && sim.records.iter().any(|r| !r.neutral) {
        return Err(Error::Check("tuned event is not energy neutral".into()));
    }
    experiments::require_neutral(&sim.records)
}

pub fn sweep_mixing(
    r_grid: &str,
    c_grid: &str,
    kinds: &[EventKind],
    out: &Path,
    dt: f64,
) -> airmix::Result<()> {
    let r_grid = parse_grid(r_grid)?;
    let c_grid = parse_grid(c_grid)?;
    let mut template = Scenario::new(
        airmix::BuildingParams::auditorium(),
        EventKind::DownUp,
        airmix::Mode::ClosedLoop,
    );
    template.dt = dt;
    let outcome =
        experiments::sweep_mixing(&template, &r_grid, &c_grid, kinds, Execution::default())?;
    io::write_results(&outcome.records, &out.join("sweep.csv"))?;
    if !outcome.failures.is_empty() {
        let rows: Vec<Vec<String>> = outcome
            .failures
            .iter()
            .map(|f| {
                vec![
                    io::format_float(f.r),
                    io::format_float(f.c),
                    f.kind.to_string(),
                    f.message.clone(),
                ]
            })
            .collect();
        io::write_table(
            &out.join("failures.csv"),
            &["r", "c", "kind", "error"],
            &rows,
        )?;
        warn!("{} sweep points failed; see failures.csv", rows.len());
    }
    info!(
        "{} rows written to {}",
        outcome.records.len(),
        out.join("sweep.csv").display()
    );
    if outcome.records.is_empty() {
        return Err(Error::Numerical {
            time: 0.0,
            message: "every sweep point failed".into(),
        });
    }
    experiments::require_neutral(&outcome.records)
}

pub fn forced_settling(cfg: &StudyConfig, out: &Path, trace_every: f64) -> airmix::Result<()> {
    let every = stride(trace_every, cfg.dt)?;
    let runs = experiments::forced_settling_study(cfg, Execution::default())?;

    let records: Vec<_> = runs
        .iter()
        .map(|r| experiments::record(&r.scenario, r.scenario.settle_duration, &r.metrics))
        .collect();
    io::write_results(&records, &out.join("results.csv"))?;

    let mut header = vec!["event".to_string()];
    for case in StudyCase::ALL {
        header.push(format!("{}_RTE", case.as_str()));
        header.push(format!("{}_RMSE_F", case.as_str()));
    }
    let mut rows = Vec::new();
    for kind in [EventKind::UpDown, EventKind::DownUp] {
        let mut row = vec![kind.to_string()];
        for case in StudyCase::ALL {
            let run = runs
                .iter()
                .find(|r| r.kind == kind && r.case == case)
                .expect("study covers every case");
            row.push(run.metrics.rte.map(io::format_float).unwrap_or_default());
            row.push(io::format_float(kelvin_delta_to_fahrenheit(
                run.metrics.rmse_temp,
            )));
        }
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_table(&out.join("table.csv"), &header, &rows)?;

    for r in &runs {
        let name = format!("{}-{}", r.case.as_str(), r.kind);
        io::write_trace(
            &r.event,
            &out.join("traces").join(format!("{name}.csv")),
            every,
        )?;
        io::write_trace(
            &r.baseline,
            &out.join("traces").join(format!("{name}-baseline.csv")),
            every,
        )?;
    }
    for row in &rows {
        info!("{}", row.join(" "));
    }
    experiments::require_neutral(&records)
}

pub fn compare_models(
    out: &Path,
    dt: f64,
    mixing: (f64, f64),
    overlay: Option<(&Path, &ColumnMap, f64)>,
    measured_dt: f64,
) -> airmix::Result<()> {
    let mut series = experiments::compare_models(mixing, dt, Execution::default())?;
    if let Some((path, map, start)) = overlay {
        let data = io::load_measured_csv(path, map)?;
        let half = engine::DEFAULT_HALF_DURATION;
        let t0 = start - experiments::COMPARE_LEAD;
        let t1 = start + 2.0 * half + experiments::COMPARE_TAIL;
        let trace = io::resample(&data, measured_dt, t0, t1)?;
        let label = path
            .file_stem()
            .map_or("measured".into(), |s| s.to_string_lossy().into_owned());
        series.push(experiments::normalize_measured(
            &label,
            &trace,
            t0,
            trace.end_time(),
            start,
        )?);
    }
    let rows: Vec<Vec<String>> = series
        .iter()
        .flat_map(|s| {
            s.time.iter().zip(&s.power).map(move |(t, p)| {
                vec![
                    s.label.clone(),
                    s.kind.map_or(String::new(), |k| k.to_string()),
                    io::format_float(*t),
                    io::format_float(*p),
                ]
            })
        })
        .collect();
    io::write_table(
        &out.join("normalized.csv"),
        &[
            "series",
            "kind",
            "time_from_start_s",
            "fan_power_normalized",
        ],
        &rows,
    )?;
    info!(
        "{} series written to {}",
        series.len(),
        out.join("normalized.csv").display()
    );
    Ok(())
}

pub fn analyze_measured(
    path: &Path,
    map: &ColumnMap,
    start: f64,
    end: f64,
    settle: f64,
    dt: f64,
    out: &Path,
) -> airmix::Result<()> {
    let data = io::load_measured_csv(path, map)?;
    let window = EventWindow::new(start, end, start + settle)?;
    let t0 = start - 2.0 * BASELINE_AVERAGING;
    let t1 = window.settle + 2.0 * BASELINE_AVERAGING;
    let first = data.time.first().copied().unwrap_or(f64::NAN);
    let last = data.time.last().copied().unwrap_or(f64::NAN);
    // align the grid so the event boundaries are samples
    let k0 = ((start - t0.max(first)) / dt).floor();
    let k1 = ((t1.min(last) - start) / dt).floor();
    let trace = io::resample(&data, dt, start - k0 * dt, start + k1 * dt)?;
    let mut baseline = metrics::linear_baseline(&trace, &window, BASELINE_AVERAGING)?;
    // comfort reference: mean zone temperature over the pre-event averaging span
    let i0 = trace.index_of(start - BASELINE_AVERAGING)?;
    let i1 = trace.index_of(start)?;
    let pre_zone = trace.room_temp[i0..=i1].iter().sum::<f64>() / (i1 - i0 + 1) as f64;
    baseline.room_temp.fill(pre_zone);
    baseline.mixing_temp.fill(pre_zone);
    let m = metrics::evaluate(&trace, &baseline, &window, engine::NEUTRALITY_ALPHA)?;
    let label = path
        .file_stem()
        .map_or("measured".into(), |s| s.to_string_lossy().into_owned());
    let record = io::ResultRecord {
        scenario_id: label,
        mode: "measured".into(),
        kind: String::new(),
        r: f64::NAN,
        c: f64::NAN,
        window_hr: settle / 3600.0,
        e_in: m.e_in,
        e_out: m.e_out,
        rte: m.rte,
        neutral: m.neutral,
        residual: m.neutrality_residual,
        rmse_k: m.rmse_temp,
    };
    io::write_results(&[record], &out.join("results.csv"))?;
    io::write_trace(&baseline, &out.join("baseline.csv"), 1)?;
    info!(
        "E_in {:.0} J, E_out {:.0} J, RTE {}, neutral {}",
        m.e_in,
        m.e_out,
        m.rte.map_or("undefined".into(), |v| format!("{v:.4}")),
        m.neutral
    );
    Ok(())
}
