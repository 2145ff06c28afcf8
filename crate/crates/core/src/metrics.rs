//! Virtual-battery metrics over an (event, baseline) pair of traces.
//!
//! All integrals treat a trace as the piecewise-linear interpolant of its
//! samples and integrate that interpolant exactly: the trapezoidal rule for
//! signed power, zero-crossing splits for the charge/discharge parts, and the
//! exact square of a linear segment for the temperature RMSE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::Trace;

/// Default length of the pre/post averaging windows of [`linear_baseline`], s.
pub const BASELINE_AVERAGING: f64 = 1800.0;

/// Event timing, seconds from the simulation origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventWindow {
    pub start: f64,
    pub end: f64,
    pub settle: f64,
}

impl EventWindow {
    pub fn new(start: f64, end: f64, settle: f64) -> Result<Self> {
        if !(start < end && end <= settle) {
            return Err(Error::config(format!(
                "event window needs start < end <= settle, got {start} / {end} / {settle}"
            )));
        }
        Ok(Self { start, end, settle })
    }

    /// Same event with a different settling horizon measured from `start`.
    pub fn with_settling(&self, duration: f64) -> Result<Self> {
        Self::new(self.start, self.end, self.start + duration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neutrality {
    /// `|∫ P_diff dt|` over `[start, end]`, J.
    pub residual: f64,
    pub neutral: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventMetrics {
    pub e_in: f64,
    pub e_out: f64,
    /// `None` when nothing was charged (`E_in = 0`).
    pub rte: Option<f64>,
    pub neutrality_residual: f64,
    pub neutral: bool,
    pub rmse_temp: f64,
}

/// Exact integral of the positive part of the linear segment from `a` to `b`
/// over a step `h`.
fn positive_part(a: f64, b: f64, h: f64) -> f64 {
    if a >= 0.0 && b >= 0.0 {
        0.5 * h * (a + b)
    } else if a <= 0.0 && b <= 0.0 {
        0.0
    } else {
        let p = a.max(b);
        0.5 * h * p * p / (a.abs() + b.abs())
    }
}

/// Index range of `[t0, t1]` on a trace pair, after checking alignment.
fn window_range(event: &Trace, baseline: &Trace, t0: f64, t1: f64) -> Result<(usize, usize)> {
    event.check_aligned(baseline)?;
    let i0 = event.index_of(t0)?;
    let i1 = event.index_of(t1)?;
    baseline.index_of(t1)?;
    Ok((i0, i1))
}

fn power_diff(event: &Trace, baseline: &Trace, i: usize) -> f64 {
    event.fan_power[i] - baseline.fan_power[i]
}

/// Charging and discharging energy over `[start, settle]`, J.
pub fn energy_in_out(event: &Trace, baseline: &Trace, window: &EventWindow) -> Result<(f64, f64)> {
    let (i0, i1) = window_range(event, baseline, window.start, window.settle)?;
    let h = event.dt;
    let mut e_in = 0.0;
    let mut e_out = 0.0;
    for i in i0..i1 {
        let a = power_diff(event, baseline, i);
        let b = power_diff(event, baseline, i + 1);
        e_in += positive_part(a, b, h);
        e_out += positive_part(-a, -b, h);
    }
    Ok((e_in, e_out))
}

/// Round-trip efficiency `E_out / E_in`; values above one are legitimate.
pub fn rte(e_in: f64, e_out: f64) -> Option<f64> {
    (e_in > 0.0).then(|| e_out / e_in)
}

/// Net energy over `[start, end]` against `alpha_frac * (E_in + E_out)`,
/// with the energies taken over the full settling window. Events that shift
/// no energy at all count as neutral.
pub fn neutrality(
    event: &Trace,
    baseline: &Trace,
    window: &EventWindow,
    alpha_frac: f64,
) -> Result<Neutrality> {
    let (e_in, e_out) = energy_in_out(event, baseline, window)?;
    let (i0, i1) = window_range(event, baseline, window.start, window.end)?;
    let h = event.dt;
    let net: f64 = (i0..i1)
        .map(|i| 0.5 * h * (power_diff(event, baseline, i) + power_diff(event, baseline, i + 1)))
        .sum();
    let residual = net.abs();
    let total = e_in + e_out;
    let neutral = if total == 0.0 {
        true
    } else {
        residual < alpha_frac * total
    };
    Ok(Neutrality { residual, neutral })
}

/// Root of the time-averaged squared room temperature deviation over
/// `[start, settle]`, K.
pub fn temp_rmse(event: &Trace, baseline: &Trace, window: &EventWindow) -> Result<f64> {
    let (i0, i1) = window_range(event, baseline, window.start, window.settle)?;
    let h = event.dt;
    let dev = |i: usize| event.room_temp[i] - baseline.room_temp[i];
    let mut acc = 0.0;
    for i in i0..i1 {
        let (a, b) = (dev(i), dev(i + 1));
        acc += h * (a * a + a * b + b * b) / 3.0;
    }
    let span = event.time[i1] - event.time[i0];
    if span <= 0.0 {
        return Ok(0.0);
    }
    Ok((acc / span).sqrt())
}

/// All metrics of one event at neutrality tolerance `alpha_frac`.
pub fn evaluate(
    event: &Trace,
    baseline: &Trace,
    window: &EventWindow,
    alpha_frac: f64,
) -> Result<EventMetrics> {
    let (e_in, e_out) = energy_in_out(event, baseline, window)?;
    let n = neutrality(event, baseline, window, alpha_frac)?;
    Ok(EventMetrics {
        e_in,
        e_out,
        rte: rte(e_in, e_out),
        neutrality_residual: n.residual,
        neutral: n.neutral,
        rmse_temp: temp_rmse(event, baseline, window)?,
    })
}

fn mean_power(trace: &Trace, i0: usize, i1: usize) -> f64 {
    if i1 == i0 {
        return trace.fan_power[i0];
    }
    let h = trace.dt;
    let area: f64 = (i0..i1)
        .map(|i| 0.5 * h * (trace.fan_power[i] + trace.fan_power[i + 1]))
        .sum();
    area / (trace.time[i1] - trace.time[i0])
}

/// Scales fan power so that its mean over `[t0, t1]` is one.
pub fn normalize(trace: &Trace, t0: f64, t1: f64) -> Result<Trace> {
    let i0 = trace.index_of(t0)?;
    let i1 = trace.index_of(t1)?;
    let mean = mean_power(trace, i0.min(i1), i0.max(i1));
    if !(mean > 0.0) {
        return Err(Error::Data(format!(
            "cannot normalize: mean fan power over [{t0}, {t1}] s is {mean}"
        )));
    }
    let mut out = trace.clone();
    for p in &mut out.fan_power {
        *p /= mean;
    }
    Ok(out)
}

/// Straight-line baseline for measured events: from the mean power over the
/// `averaging` seconds before `start` to the mean over the `averaging`
/// seconds after `settle`, flat outside `[start, settle]`.
pub fn linear_baseline(measured: &Trace, window: &EventWindow, averaging: f64) -> Result<Trace> {
    let first = measured.start_time();
    let last = measured.end_time();
    if window.start - averaging < first - 1e-9 || window.settle + averaging > last + 1e-9 {
        return Err(Error::InsufficientData(format!(
            "linear baseline needs data over [{}, {}] s, trace covers [{first}, {last}] s",
            window.start - averaging,
            window.settle + averaging
        )));
    }
    let pre = mean_power(
        measured,
        measured.index_of(window.start - averaging)?,
        measured.index_of(window.start)?,
    );
    let post = mean_power(
        measured,
        measured.index_of(window.settle)?,
        measured.index_of(window.settle + averaging)?,
    );
    let span = window.settle - window.start;
    let mut out = measured.clone();
    out.meta.label = "linear_baseline".into();
    for (p, &t) in out.fan_power.iter_mut().zip(&measured.time) {
        *p = if t <= window.start {
            pre
        } else if t >= window.settle {
            post
        } else {
            pre + (post - pre) * (t - window.start) / span
        };
    }
    Ok(out)
}
