use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Provenance attached to every trace.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceMeta {
    /// Hex digest of the scenario that produced the trace (empty for measured data).
    pub scenario_hash: String,
    /// Run label, e.g. `baseline`, `open_loop`, `closed_loop`.
    pub label: String,
}

/// One row of a [`Trace`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub mixing_temp: f64,
    pub room_temp: f64,
    pub wall_temp: f64,
    pub setpoint: f64,
    pub flow_desired: f64,
    pub flow_actual: f64,
    pub fan_power: f64,
    pub outdoor_temp: f64,
    pub power_reference: Option<f64>,
}

/// Uniformly sampled signals of one run, stored column-wise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub dt: f64,
    pub time: Vec<f64>,
    pub mixing_temp: Vec<f64>,
    pub room_temp: Vec<f64>,
    pub wall_temp: Vec<f64>,
    pub setpoint: Vec<f64>,
    pub flow_desired: Vec<f64>,
    pub flow_actual: Vec<f64>,
    pub fan_power: Vec<f64>,
    pub outdoor_temp: Vec<f64>,
    pub power_reference: Vec<Option<f64>>,
    pub meta: TraceMeta,
}

impl Trace {
    pub fn with_capacity(dt: f64, n: usize, meta: TraceMeta) -> Self {
        Self {
            dt,
            time: Vec::with_capacity(n),
            mixing_temp: Vec::with_capacity(n),
            room_temp: Vec::with_capacity(n),
            wall_temp: Vec::with_capacity(n),
            setpoint: Vec::with_capacity(n),
            flow_desired: Vec::with_capacity(n),
            flow_actual: Vec::with_capacity(n),
            fan_power: Vec::with_capacity(n),
            outdoor_temp: Vec::with_capacity(n),
            power_reference: Vec::with_capacity(n),
            meta,
        }
    }

    pub fn push(&mut self, s: Sample) {
        self.time.push(s.time);
        self.mixing_temp.push(s.mixing_temp);
        self.room_temp.push(s.room_temp);
        self.wall_temp.push(s.wall_temp);
        self.setpoint.push(s.setpoint);
        self.flow_desired.push(s.flow_desired);
        self.flow_actual.push(s.flow_actual);
        self.fan_power.push(s.fan_power);
        self.outdoor_temp.push(s.outdoor_temp);
        self.power_reference.push(s.power_reference);
    }

    pub fn sample(&self, i: usize) -> Sample {
        Sample {
            time: self.time[i],
            mixing_temp: self.mixing_temp[i],
            room_temp: self.room_temp[i],
            wall_temp: self.wall_temp[i],
            setpoint: self.setpoint[i],
            flow_desired: self.flow_desired[i],
            flow_actual: self.flow_actual[i],
            fan_power: self.fan_power[i],
            outdoor_temp: self.outdoor_temp[i],
            power_reference: self.power_reference[i],
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.time.first().copied().unwrap_or(0.0)
    }

    pub fn end_time(&self) -> f64 {
        self.time.last().copied().unwrap_or(0.0)
    }

    /// Index of the sample at time `t`, which must sit on the sampling grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        if self.is_empty() || !(self.dt > 0.0) {
            return Err(Error::Misaligned("empty trace".into()));
        }
        let x = (t - self.start_time()) / self.dt;
        let i = x.round();
        if (x - i).abs() > 1e-6 || i < 0.0 || i as usize >= self.len() {
            return Err(Error::Misaligned(format!(
                "t = {t} s is not a sample of a trace spanning [{}, {}] s at dt = {} s",
                self.start_time(),
                self.end_time(),
                self.dt
            )));
        }
        Ok(i as usize)
    }

    /// Checks that `other` shares this trace's grid over the common length.
    pub fn check_aligned(&self, other: &Trace) -> Result<()> {
        if (self.dt - other.dt).abs() > 1e-12 * self.dt.abs().max(1.0) {
            return Err(Error::Misaligned(format!(
                "sampling intervals differ: {} s vs {} s",
                self.dt, other.dt
            )));
        }
        if (self.start_time() - other.start_time()).abs() > 1e-6 * self.dt {
            return Err(Error::Misaligned(format!(
                "start times differ: {} s vs {} s",
                self.start_time(),
                other.start_time()
            )));
        }
        Ok(())
    }

    /// Debug-time check of the column-length invariant.
    pub fn columns_consistent(&self) -> bool {
        let n = self.len();
        [
            self.mixing_temp.len(),
            self.room_temp.len(),
            self.wall_temp.len(),
            self.setpoint.len(),
            self.flow_desired.len(),
            self.flow_actual.len(),
            self.fan_power.len(),
            self.outdoor_temp.len(),
            self.power_reference.len(),
        ]
        .iter()
        .all(|&m| m == n)
    }
}
