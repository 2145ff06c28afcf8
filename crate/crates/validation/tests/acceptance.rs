//! Acceptance suite. Prints one PASS/FAIL line per criterion, followed by the
//! model invariants that need full-length runs, and exits nonzero if any
//! line failed.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use airmix::engine::{self, PowerReference, StepConfig, StepInputs};
use airmix::experiments::{self, Execution, StudyCase, StudyConfig, StudyRun};
use airmix::io::ResultRecord;
use airmix::metrics::{self, EventWindow};
use airmix::thermal::{self, PlantInput};
use airmix::trace::{Sample, TraceMeta};
use airmix::units::kelvin_delta_to_fahrenheit;
use airmix::{
    BuildingParams, ControlState, ControllerGains, EventKind, Mode, Scenario, ThermalState, Trace,
};
use airmix_validation::{off_unity, rel_diff, Outcome, Report};

const KINDS: [EventKind; 2] = [EventKind::UpDown, EventKind::DownUp];

type Check = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Appends a runtime budget to a check: the line fails if it ran long.
fn timed(report: &mut Report, label: &str, budget: Duration, check: impl FnOnce() -> Check) {
    let t0 = Instant::now();
    let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
    let elapsed = t0.elapsed();
    let in_time = elapsed <= budget;
    let detail = if in_time {
        detail
    } else {
        format!("{detail}; over the {:.0} s budget", budget.as_secs_f64())
    };
    report.push(Outcome {
        label: label.into(),
        pass: pass && in_time,
        detail,
        elapsed,
    });
}

// ---------------------------------------------------------------------------
// Independent oracles

/// Mixing-zone derivatives written out from the heat balances.
fn oracle_derivatives(p: &BuildingParams, s: &ThermalState, flow: f64) -> [f64; 3] {
    let res = p.wall_resistance;
    let ca = p.c * p.room_capacitance;
    let cr = (1.0 - p.c) * p.room_capacitance;
    let ra = p.r * res;
    let supply = flow * p.air_specific_heat * (p.supply_temp - s.mixing);
    let mix = ((s.room - s.mixing) / ra + p.internal_gain + supply) / ca;
    let room = ((s.mixing - s.room) / ra + (s.wall - s.room) / res) / cr;
    let wall = ((s.room - s.wall) / res + (p.outdoor_temp - s.wall) / res) / p.wall_capacitance;
    [mix, room, wall]
}

/// Exact integral of `|d|` for a piecewise-linear signal on a uniform grid.
fn abs_area(d: &[f64], h: f64) -> f64 {
    d.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            if a * b >= 0.0 {
                0.5 * h * (a.abs() + b.abs())
            } else {
                0.5 * h * (a * a + b * b) / (a.abs() + b.abs())
            }
        })
        .sum()
}

fn power_diff(event: &Trace, baseline: &Trace) -> Vec<f64> {
    event
        .fan_power
        .iter()
        .zip(&baseline.fan_power)
        .map(|(e, b)| e - b)
        .collect()
}

/// Net energy over the event and `alpha` times the total shifted energy over
/// the settling window, from first principles.
fn neutrality_oracle(s: &Scenario, baseline: &Trace, event: &Trace) -> Result<(f64, f64), String> {
    let i0 = event.index_of(s.t_start()).map_err(err)?;
    let ie = event.index_of(s.t_end()).map_err(err)?;
    let is = event.index_of(s.t_settle()).map_err(err)?;
    let d = power_diff(event, baseline);
    let net: f64 = d[i0..=ie]
        .windows(2)
        .map(|w| 0.5 * event.dt * (w[0] + w[1]))
        .sum();
    Ok((
        net.abs(),
        engine::NEUTRALITY_ALPHA * abs_area(&d[i0..=is], event.dt),
    ))
}

fn synthetic(power: &[f64], room: &[f64]) -> Trace {
    let mut t = Trace::with_capacity(1.0, power.len(), TraceMeta::default());
    for (i, (&p, &r)) in power.iter().zip(room).enumerate() {
        t.push(Sample {
            time: i as f64,
            mixing_temp: r,
            room_temp: r,
            wall_temp: 25.0,
            setpoint: 21.7,
            flow_desired: 0.0,
            flow_actual: 0.0,
            fan_power: p,
            outdoor_temp: 29.4,
            power_reference: None,
        });
    }
    t
}

// ---------------------------------------------------------------------------
// Criteria

fn equilibrium_grid() -> Check {
    let base = BuildingParams::auditorium();
    let mut worst: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let mut points = 0;
    for i in 1..=10 {
        for j in 1..=10 {
            let (r, c) = (0.1 * i as f64, 0.05 * j as f64);
            let p = base.with_mixing(r, c);
            let eq = thermal::equilibrium(&p, 21.7).map_err(err)?;
            let input = PlantInput {
                supply_flow: eq.supply_flow,
                outdoor_temp: p.outdoor_temp,
                internal_gain: p.internal_gain,
            };
            let d = thermal::derivatives_mixing(&eq.state, &input, &p).map_err(err)?;
            worst = worst.max(d.max_abs());
            let o = oracle_derivatives(&p, &eq.state, eq.supply_flow);
            worst_oracle = worst_oracle.max(o.iter().fold(0.0, |m: f64, x| m.max(x.abs())));
            points += 1;
        }
    }
    Ok((
        worst < 1e-9 && worst_oracle < 1e-9,
        format!("{points} (r, c) points, max |dx/dt| {worst:.2e} K/s (hand-written balance {worst_oracle:.2e})"),
    ))
}

fn model_reduction() -> Check {
    let run = |params: BuildingParams| {
        let mut s = Scenario::new(params, EventKind::DownUp, Mode::OpenLoop);
        s.settle_duration = 36_000.0;
        engine::run_event(&s).map(|(_, e)| e)
    };
    let base = BuildingParams::auditorium();
    let original = run(base).map_err(err)?;
    let reduced = run(base.with_mixing(1e-3, 1e-3)).map_err(err)?;
    original.check_aligned(&reduced).map_err(err)?;
    let max_dt = original
        .room_temp
        .iter()
        .zip(&reduced.room_temp)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let max_dp = original
        .fan_power
        .iter()
        .zip(&reduced.fan_power)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((
        max_dt < 0.01 && max_dp < 2.0,
        format!("max |dT_room| {max_dt:.4} C (< 0.01), max |dP_fan| {max_dp:.3} W (< 2)"),
    ))
}

fn rte_of(run: &StudyRun) -> Result<f64, String> {
    run.metrics
        .rte
        .ok_or_else(|| format!("{} {} charged no energy", run.case.as_str(), run.kind))
}

fn find(runs: &[StudyRun], case: StudyCase, kind: EventKind) -> Result<&StudyRun, String> {
    runs.iter()
        .find(|r| r.case == case && r.kind == kind)
        .ok_or_else(|| format!("missing {} {kind}", case.as_str()))
}

fn dt_convergence(coarse: &[StudyRun]) -> Check {
    let cfg = StudyConfig {
        dt: 0.5,
        ..StudyConfig::default()
    };
    let fine = experiments::forced_settling_study(&cfg, Execution::default()).map_err(err)?;
    let mut worst = (0.0, String::new());
    for f in &fine {
        let c = find(coarse, f.case, f.kind)?;
        let d = (rte_of(c)? - rte_of(f)?).abs();
        if d >= worst.0 {
            worst = (d, format!("{} {}", f.case.as_str(), f.kind));
        }
    }
    Ok((
        worst.0 < 1e-3,
        format!(
            "{} runs, largest RTE change {:.2e} ({}) (< 1e-3)",
            fine.len(),
            worst.0,
            worst.1
        ),
    ))
}

fn table_reproduction(runs: &[StudyRun]) -> Check {
    let rte = |case, kind| find(runs, case, kind).and_then(rte_of);
    let rmse = |case, kind| {
        find(runs, case, kind).map(|r| kelvin_delta_to_fahrenheit(r.metrics.rmse_temp))
    };
    let targets = [
        (StudyCase::Unforced, EventKind::UpDown, 1.1444, 0.10),
        (StudyCase::Unforced, EventKind::DownUp, 0.7526, 0.10),
        (StudyCase::Forced, EventKind::UpDown, 0.9072, 0.10),
        (StudyCase::Forced, EventKind::DownUp, 0.9884, 0.05),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (case, kind, target, tol) in targets {
        let v = rte(case, kind)?;
        let ok = (v - target).abs() <= tol;
        pass &= ok;
        parts.push(format!(
            "{} {kind} {v:.4} ({target}±{tol}{})",
            case.as_str(),
            if ok { "" } else { " MISS" }
        ));
    }
    let uu = rte(StudyCase::Unforced, EventKind::UpDown)?;
    let ud = rte(StudyCase::Unforced, EventKind::DownUp)?;
    let mut ordinal = uu > 1.0 && ud < 1.0;
    for kind in KINDS {
        ordinal &=
            off_unity(rte(StudyCase::Forced, kind)?) < off_unity(rte(StudyCase::Unforced, kind)?);
        let (f, u) = (
            rmse(StudyCase::Forced, kind)?,
            rmse(StudyCase::Unforced, kind)?,
        );
        ordinal &= f < u;
        parts.push(format!("RMSE {kind} forced {f:.4} F < unforced {u:.4} F"));
    }
    parts.push(format!(
        "ordinals {}",
        if ordinal { "hold" } else { "VIOLATED" }
    ));
    Ok((pass && ordinal, parts.join("; ")))
}

/// Full- and short-window records of the c = 0.1 sweep, keyed by kind.
struct Sweep {
    full: BTreeMap<String, Vec<(f64, f64)>>,
    short: BTreeMap<String, Vec<(f64, f64)>>,
    records: Vec<ResultRecord>,
}

fn run_sweep() -> Result<Sweep, String> {
    let template = Scenario::new(
        BuildingParams::auditorium(),
        EventKind::DownUp,
        Mode::ClosedLoop,
    );
    let r_grid = experiments::grid(0.1, 1.0, 0.1).map_err(err)?;
    let out = experiments::sweep_mixing(&template, &r_grid, &[0.1], &KINDS, Execution::default())
        .map_err(err)?;
    if let Some(f) = out.failures.first() {
        return Err(format!(
            "sweep point r = {}, {} failed: {}",
            f.r, f.kind, f.message
        ));
    }
    let full_hr = template.settle_duration / 3600.0;
    let mut sweep = Sweep {
        full: BTreeMap::new(),
        short: BTreeMap::new(),
        records: out.records.clone(),
    };
    for rec in &out.records {
        let rte = rec
            .rte
            .ok_or_else(|| format!("{} charged no energy", rec.scenario_id))?;
        let target = if (rec.window_hr - full_hr).abs() < 1e-9 {
            &mut sweep.full
        } else {
            &mut sweep.short
        };
        target
            .entry(rec.kind.clone())
            .or_default()
            .push((rec.r, rte));
    }
    Ok(sweep)
}

fn sweep_shape(sweep: &Sweep) -> Check {
    let mut pass_a = true;
    let mut pass_b = true;
    let mut parts = Vec::new();
    for (kind, full) in &sweep.full {
        let dist: Vec<f64> = full.iter().map(|&(_, v)| off_unity(v)).collect();
        // an improving step in r followed, later, by a worsening one
        let better = (0..dist.len() - 1).find(|&i| dist[i + 1] < dist[i]);
        let worse = better.and_then(|i| (i + 1..dist.len() - 1).find(|&j| dist[j + 1] > dist[j]));
        let shape = worse.is_some();
        pass_a &= shape;
        let profile: Vec<String> = full
            .iter()
            .zip(&dist)
            .map(|((r, _), d)| format!("{r:.1}:{d:.3}"))
            .collect();
        parts.push(format!(
            "(a) {kind} |RTE-1| by r [{}]{}",
            profile.join(" "),
            match (better, worse) {
                (Some(i), Some(j)) => format!(
                    ", improves at r = {:.1}, worsens from r = {:.1}",
                    full[i + 1].0,
                    full[j + 1].0
                ),
                _ => " MISS".into(),
            }
        ));
        let short = sweep.short.get(kind).ok_or("no short-window records")?;
        let bad: Vec<String> = full
            .iter()
            .zip(short)
            .filter(|((_, f), (_, s))| off_unity(*s) < off_unity(*f))
            .map(|((r, f), (_, s))| format!("r = {r:.1}: 2 h {s:.4} vs full {f:.4}"))
            .collect();
        pass_b &= bad.is_empty();
        parts.push(if bad.is_empty() {
            format!("(b) {kind}: short window never looks better")
        } else {
            format!(
                "(b) {kind}: short window looks better at {}",
                bad.join(", ")
            )
        });
    }
    Ok((pass_a && pass_b, parts.join("; ")))
}

fn two_part_response() -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, params, follows) in [
        (
            "mixing",
            BuildingParams::auditorium().with_mixing(0.3, 0.1),
            true,
        ),
        ("original", BuildingParams::auditorium(), false),
    ] {
        for kind in KINDS {
            let s = Scenario::new(params, kind, Mode::OpenLoop);
            let (b, e) = engine::run_event(&s).map_err(err)?;
            let i0 = e.index_of(s.t_start()).map_err(err)?;
            let d = power_diff(&e, &b);
            // the proportional jump lands within the first minute
            let jump = d[i0 + 1..=i0 + 60].iter().sum::<f64>() / 60.0;
            let slope = experiments::mean_slope(&e, s.t_start() + 300.0, s.t_start() + 1500.0)
                .map_err(err)?;
            let same = jump.signum() == slope.signum() && slope != 0.0;
            let ok = same == follows;
            pass &= ok;
            parts.push(format!(
                "{label} {kind}: step {jump:+.1} W, slope {slope:+.4} W/s{}",
                if ok { "" } else { " MISS" }
            ));
        }
    }
    Ok((pass, parts.join("; ")))
}

fn neutrality(sweep: &Sweep, study: &[StudyRun]) -> Check {
    let mut bad = Vec::new();
    let closed: Vec<&ResultRecord> = sweep
        .records
        .iter()
        .filter(|r| r.mode != "open_loop")
        .collect();
    for r in &closed {
        if !(r.residual < engine::NEUTRALITY_ALPHA * (r.e_in + r.e_out)) {
            bad.push(format!("{} ({} h)", r.scenario_id, r.window_hr));
        }
    }
    for run in study {
        let (residual, limit) = neutrality_oracle(&run.scenario, &run.baseline, &run.event)?;
        if !(residual < limit) || !run.metrics.neutral {
            bad.push(run.scenario.id.clone());
        }
    }
    let mut tuned = Vec::new();
    for kind in KINDS {
        let mut s = Scenario::new(
            BuildingParams::auditorium().with_mixing(0.3, 0.1),
            kind,
            Mode::OpenLoop,
        );
        s.event = engine::tune_open_loop_event(&s, engine::NEUTRALITY_ALPHA).map_err(err)?;
        let (b, e) = engine::run_event(&s).map_err(err)?;
        let (residual, limit) = neutrality_oracle(&s, &b, &e)?;
        tuned.push(format!(
            "{kind} tuned {:.1}% of shifted energy",
            100.0 * engine::NEUTRALITY_ALPHA * residual / limit
        ));
        if !(residual < limit) {
            bad.push(format!("tuned {kind}"));
        }
    }
    let detail = format!(
        "{} sweep records, {} study runs, 2 tuned events; {}{}",
        closed.len(),
        study.len(),
        tuned.join(", "),
        if bad.is_empty() {
            String::new()
        } else {
            format!("; not neutral: {}", bad.join(", "))
        }
    );
    Ok((bad.is_empty(), detail))
}

fn metric_oracles() -> Check {
    let base = 1500.0;
    let (a, b, dev) = (150.0, 120.0, 0.3);
    let window = EventWindow::new(0.0, 50.0, 100.0).map_err(err)?;
    let flat = synthetic(&[base; 101], &[21.7; 101]);
    let mut worst: f64 = 0.0;
    let mut check = |got: f64, want: f64| worst = worst.max(rel_diff(got, want));

    // piecewise constant: +a through sample 40, -b from 41, room +dev then -dev
    let step_p: Vec<f64> = (0..=100)
        .map(|i| if i <= 40 { base + a } else { base - b })
        .collect();
    let step_t: Vec<f64> = (0..=100)
        .map(|i| if i <= 40 { 21.7 + dev } else { 21.7 - dev })
        .collect();
    let ev = synthetic(&step_p, &step_t);
    let (e_in, e_out) = metrics::energy_in_out(&ev, &flat, &window).map_err(err)?;
    let cross = 1.0 / (2.0 * (a + b));
    let (want_in, want_out) = (40.0 * a + a * a * cross, 59.0 * b + b * b * cross);
    check(e_in, want_in);
    check(e_out, want_out);
    check(
        metrics::rte(e_in, e_out).ok_or("no rte")?,
        want_out / want_in,
    );
    let rmse = metrics::temp_rmse(&ev, &flat, &window).map_err(err)?;
    check(rmse, dev * ((99.0 + 1.0 / 3.0) / 100.0f64).sqrt());

    // piecewise linear: triangle up over [0, 40], triangle down over [40, 100],
    // room deviation ramping from zero to dev
    let tri = |t: f64| {
        if t <= 20.0 {
            a * t / 20.0
        } else if t <= 40.0 {
            a * (40.0 - t) / 20.0
        } else if t <= 70.0 {
            -b * (t - 40.0) / 30.0
        } else {
            -b * (100.0 - t) / 30.0
        }
    };
    let lin_p: Vec<f64> = (0..=100).map(|i| base + tri(i as f64)).collect();
    let lin_t: Vec<f64> = (0..=100).map(|i| 21.7 + dev * i as f64 / 100.0).collect();
    let ev = synthetic(&lin_p, &lin_t);
    let (e_in, e_out) = metrics::energy_in_out(&ev, &flat, &window).map_err(err)?;
    check(e_in, 20.0 * a);
    check(e_out, 30.0 * b);
    check(metrics::rte(e_in, e_out).ok_or("no rte")?, 1.5 * b / a);
    check(
        metrics::temp_rmse(&ev, &flat, &window).map_err(err)?,
        dev / 3.0f64.sqrt(),
    );
    let oracle_ok = worst < 1e-12;

    // scaling fan power by a power of two is exact in floating point, so the
    // efficiency must come back bit for bit
    let rte_of = |ev: &Trace, bl: &Trace| -> Result<u64, String> {
        let (i, o) = metrics::energy_in_out(ev, bl, &window).map_err(err)?;
        Ok(metrics::rte(i, o).ok_or("no rte")?.to_bits())
    };
    let reference = rte_of(&ev, &flat)?;
    let mut exact = true;
    for k in [0.25, 2.0, 1024.0, 2f64.powi(-20)] {
        let scale = |t: &Trace| {
            let mut s = t.clone();
            s.fan_power.iter_mut().for_each(|p| *p *= k);
            s
        };
        exact &= rte_of(&scale(&ev), &scale(&flat))? == reference;
    }
    Ok((
        oracle_ok && exact,
        format!(
            "worst relative error {worst:.1e} (< 1e-12); RTE under power-of-two scaling {}",
            if exact { "bit-identical" } else { "CHANGED" }
        ),
    ))
}

fn case_ordering(runs: &[StudyRun]) -> Check {
    let rte = |case, kind| find(runs, case, kind).and_then(rte_of);
    let rmse = |case, kind| {
        find(runs, case, kind).map(|r| kelvin_delta_to_fahrenheit(r.metrics.rmse_temp))
    };
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in KINDS {
        let (c1, f) = (rte(StudyCase::Case1, kind)?, rte(StudyCase::Forced, kind)?);
        let ok = (c1 - f).abs() <= 0.02;
        pass &= ok;
        parts.push(format!(
            "{kind} Case1 {c1:.4} vs Forced {f:.4}{}",
            if ok { "" } else { " MISS" }
        ));
    }
    let (c2, c3) = (
        rte(StudyCase::Case2, EventKind::DownUp)?,
        rte(StudyCase::Case3, EventKind::DownUp)?,
    );
    let ok = off_unity(c3) > off_unity(c2);
    pass &= ok;
    parts.push(format!(
        "DOWN_UP Case3 {c3:.4} further from 1 than Case2 {c2:.4}{}",
        if ok { "" } else { " MISS" }
    ));
    for kind in KINDS {
        let f = rmse(StudyCase::Forced, kind)?;
        for case in [StudyCase::Case1, StudyCase::Case2, StudyCase::Case3] {
            let v = rmse(case, kind)?;
            let ok = (v - f).abs() <= 0.005;
            pass &= ok;
            if !ok {
                parts.push(format!(
                    "{kind} {} RMSE {v:.4} F vs Forced {f:.4} F MISS",
                    case.as_str()
                ));
            }
        }
    }
    Ok((pass, parts.join("; ")))
}

fn read_tree(dir: &Path) -> std::io::Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap_or(&path)
                    .display()
                    .to_string();
                out.insert(rel, std::fs::read(&path)?);
            }
        }
    }
    Ok(out)
}

fn determinism() -> Check {
    let cfg = StudyConfig::default();
    let first = tempfile::tempdir().map_err(err)?;
    let second = tempfile::tempdir().map_err(err)?;
    airmix_cli::forced_settling(&cfg, first.path(), 60.0).map_err(err)?;
    airmix_cli::forced_settling(&cfg, second.path(), 60.0).map_err(err)?;
    let a = read_tree(first.path()).map_err(err)?;
    let b = read_tree(second.path()).map_err(err)?;
    let csv = a.keys().filter(|k| k.ends_with(".csv")).count();
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    Ok((
        csv > 0 && a.len() == b.len() && differing.is_empty(),
        if differing.is_empty() {
            format!("{csv} CSV files byte-identical across two runs")
        } else {
            format!("files differ: {differing:?}")
        },
    ))
}

// ---------------------------------------------------------------------------
// Invariants checked on the same runs

fn settling(runs: &[StudyRun]) -> Check {
    let mut parts = Vec::new();
    let mut pass = true;
    for run in runs {
        let i = run.event.index_of(run.scenario.t_settle()).map_err(err)?;
        let gap = run.event.fan_power[i] - run.baseline.fan_power[i];
        if gap.abs() >= 1.0 {
            pass = false;
            parts.push(format!("{} {} {gap:+.2} W", run.case.as_str(), run.kind));
        }
    }
    Ok((
        pass,
        if pass {
            format!(
                "{} runs within 1 W of baseline at the settling horizon",
                runs.len()
            )
        } else {
            format!("over 1 W at the settling horizon: {}", parts.join(", "))
        },
    ))
}

fn tracking(runs: &[StudyRun]) -> Check {
    let mut parts = Vec::new();
    let mut pass = true;
    for run in runs
        .iter()
        .filter(|r| matches!(r.case, StudyCase::Unforced | StudyCase::Forced))
    {
        let s = &run.scenario;
        let d = power_diff(&run.event, &run.baseline);
        for half in 0..2 {
            let t0 = s.t_start() + half as f64 * s.event.half_duration;
            let i0 = run.event.index_of(t0 + 300.0).map_err(err)?;
            let i1 = run
                .event
                .index_of(t0 + s.event.half_duration)
                .map_err(err)?;
            let reference = run.event.power_reference[i0].ok_or("power loop not engaged")?;
            let mean = (i0..i1).map(|i| (d[i] - reference).abs()).sum::<f64>() / (i1 - i0) as f64;
            let limit = 0.05 * reference.abs();
            let ok = mean < limit;
            pass &= ok;
            if !ok {
                parts.push(format!(
                    "{} {} half {}: {mean:.2} W vs {limit:.2} W",
                    run.case.as_str(),
                    run.kind,
                    half + 1
                ));
            }
        }
    }
    Ok((
        pass,
        if pass {
            "mean tracking error under 5 % of the reference in every half".into()
        } else {
            format!("mean tracking error over 5 %: {}", parts.join(", "))
        },
    ))
}

/// Closed loop released 1 °F off equilibrium: the room must be back within
/// 0.01 K after ten hours, and airflow must never go negative.
fn convergence() -> Check {
    let mut parts = Vec::new();
    let mut pass = true;
    for (r, c) in [(0.0, 0.0), (0.1, 0.05), (0.3, 0.1), (0.5, 0.3), (1.0, 0.5)] {
        let p = BuildingParams::auditorium().with_mixing(r, c);
        let g = ControllerGains::auditorium();
        let eq = thermal::equilibrium(&p, 21.7).map_err(err)?;
        let flow_max = 4.0 * eq.supply_flow;
        let cfg = StepConfig {
            params: p,
            gains: g,
            dt: 1.0,
            substeps: thermal::stable_substeps(&p, flow_max, 1.0),
            flow_max,
            temp_bounds: (10.0, 40.0),
        };
        let inputs = StepInputs {
            setpoint: 21.7,
            outdoor_temp: p.outdoor_temp,
            internal_gain: p.internal_gain,
            power: None,
        };
        let kick = 5.0 / 9.0;
        let s0 = eq.state;
        let mut plant = ThermalState::new(s0.mixing + kick, s0.room + kick, s0.wall);
        let mut control = ControlState::at_steady_flow(eq.supply_flow, &g);
        let mut min_flow = f64::INFINITY;
        for k in 0..36_000 {
            let (next, ctl, _) =
                engine::step(&cfg, &plant, &control, &inputs, k as f64).map_err(err)?;
            min_flow = min_flow.min(ctl.supply_flow);
            plant = next;
            control = ctl;
        }
        let off = plant.room - 21.7;
        let ok = off.abs() < 0.01 && min_flow >= 0.0;
        pass &= ok;
        parts.push(format!(
            "({r}, {c}) {off:+.4} K{}",
            if ok { "" } else { " MISS" }
        ));
    }
    Ok((
        pass,
        format!(
            "room error after 10 h from a 1 F offset: {}",
            parts.join(", ")
        ),
    ))
}

fn reference_magnitude() -> Check {
    // a fixed-watt reference must be honoured verbatim
    let mut s = Scenario::new(
        BuildingParams::auditorium().with_mixing(0.5, 0.3),
        EventKind::UpDown,
        Mode::ClosedLoop,
    );
    s.event = s.event.with_power(PowerReference::Watts([100.0, -100.0]));
    let (_, e) = engine::run_event(&s).map_err(err)?;
    let i = e.index_of(s.t_start()).map_err(err)?;
    let got = e.power_reference[i];
    Ok((
        got == Some(100.0),
        format!("first-half reference {got:?} W"),
    ))
}

fn main() -> ExitCode {
    let mut report = Report::new();
    let secs = Duration::from_secs;

    timed(
        &mut report,
        "1 equilibrium oracle",
        secs(1),
        equilibrium_grid,
    );
    timed(&mut report, "2 model reduction", secs(5), model_reduction);

    let t0 = Instant::now();
    let study = experiments::forced_settling_study(&StudyConfig::default(), Execution::default());
    let study_time = t0.elapsed();
    let study = match study {
        Ok(s) => s,
        Err(e) => {
            for label in [
                "3 dt convergence",
                "4 table reproduction",
                "9 case ordering",
            ] {
                report.push(Outcome {
                    label: label.into(),
                    pass: false,
                    detail: format!("study failed: {e}"),
                    elapsed: study_time,
                });
            }
            Vec::new()
        }
    };
    if !study.is_empty() {
        timed(
            &mut report,
            "3 dt convergence",
            secs(60).saturating_sub(study_time),
            || dt_convergence(&study),
        );
        timed(
            &mut report,
            "4 table reproduction",
            secs(120).saturating_sub(study_time),
            || table_reproduction(&study),
        );
    }

    let t0 = Instant::now();
    let sweep = run_sweep();
    let sweep_time = t0.elapsed();
    match &sweep {
        Ok(sw) => timed(
            &mut report,
            "5 sweep shape",
            secs(300).saturating_sub(sweep_time),
            || sweep_shape(sw),
        ),
        Err(e) => {
            report.push(Outcome {
                label: "5 sweep shape".into(),
                pass: false,
                detail: e.clone(),
                elapsed: sweep_time,
            });
        }
    }

    timed(
        &mut report,
        "6 two-part response",
        secs(10),
        two_part_response,
    );
    timed(
        &mut report,
        "7 energy neutrality",
        secs(300),
        || match &sweep {
            Ok(sw) => neutrality(sw, &study),
            Err(e) => Err(e.clone()),
        },
    );
    timed(&mut report, "8 metric oracles", secs(1), metric_oracles);
    if !study.is_empty() {
        timed(&mut report, "9 case ordering", secs(1), || {
            case_ordering(&study)
        });
    }
    timed(&mut report, "10 determinism", secs(120), determinism);

    report.run("invariant: settling", || settling(&study));
    report.run("invariant: closed-loop tracking", || tracking(&study));
    report.run("invariant: closed-loop convergence", convergence);
    report.run("invariant: fixed power reference", reference_magnitude);

    println!("{}", report.summary());
    if report.failures() == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
