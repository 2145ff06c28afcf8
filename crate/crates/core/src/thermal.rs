//! Lumped RC building plant: the two-node room/wall model and the three-node
//! mixing-air variant, where supply air first enters a mixing zone that
//! exchanges heat with the room through a resistance `r * R`.
//!
//! Temperatures are °C, heat flows W, capacitances J/K, resistances K/W.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the single-zone building.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildingParams {
    /// Capacitance of all room air, J/K.
    pub room_capacitance: f64,
    /// Capacitance of the walls (all non-air mass), J/K.
    pub wall_capacitance: f64,
    /// Room-to-wall and wall-to-outdoor resistance, K/W.
    pub wall_resistance: f64,
    /// Internal heat gain, W.
    pub internal_gain: f64,
    /// Nominal outdoor air temperature, °C.
    pub outdoor_temp: f64,
    /// Supply air temperature, °C.
    pub supply_temp: f64,
    /// Specific heat of air, J/(kg K).
    pub air_specific_heat: f64,
    /// Mixing-zone resistance relative to the wall resistance.
    pub r: f64,
    /// Fraction of the room air capacitance held by the mixing zone.
    pub c: f64,
}

impl Default for BuildingParams {
    fn default() -> Self {
        Self::auditorium()
    }
}

impl BuildingParams {
    /// Calibrated auditorium building, fully mixed (`r = c = 0`).
    pub fn auditorium() -> Self {
        Self {
            room_capacitance: 3.4e7,
            wall_capacitance: 5.1e7,
            wall_resistance: 0.0013,
            internal_gain: 25_000.0,
            outdoor_temp: 29.4,
            supply_temp: 15.6,
            air_specific_heat: 1000.0,
            r: 0.0,
            c: 0.0,
        }
    }

    pub fn with_mixing(mut self, r: f64, c: f64) -> Self {
        self.r = r;
        self.c = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("room_capacitance", self.room_capacitance),
            ("wall_capacitance", self.wall_capacitance),
            ("wall_resistance", self.wall_resistance),
            ("air_specific_heat", self.air_specific_heat),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("internal_gain", self.internal_gain),
            ("outdoor_temp", self.outdoor_temp),
            ("supply_temp", self.supply_temp),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite")));
            }
        }
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(Error::config(format!("r must be >= 0, got {}", self.r)));
        }
        if !(self.c.is_finite() && (0.0..1.0).contains(&self.c)) {
            return Err(Error::config(format!(
                "c must lie in [0, 1), got {}",
                self.c
            )));
        }
        if self.c == 0.0 && self.r > 0.0 {
            return Err(Error::config(format!(
                "mixing zone with r = {} needs a capacitance fraction c > 0",
                self.r
            )));
        }
        if self.supply_temp >= self.outdoor_temp {
            return Err(Error::config(
                "supply air must be colder than outdoor air (cooling mode)",
            ));
        }
        Ok(())
    }

    /// Capacitance of the mixing zone, `c * C_r`.
    pub fn mixing_capacitance(&self) -> f64 {
        self.c * self.room_capacitance
    }

    /// Room capacitance left outside the mixing zone, `(1 - c) * C_r`.
    pub fn remaining_room_capacitance(&self) -> f64 {
        self.room_capacitance - self.mixing_capacitance()
    }

    pub fn mixing_resistance(&self) -> f64 {
        self.r * self.wall_resistance
    }

    /// With `r = 0` the mixing zone is perfectly coupled to the room, so the
    /// two air nodes merge and the plant is the fully mixed model.
    pub fn model(&self) -> PlantModel {
        if self.r == 0.0 {
            PlantModel::FullyMixed
        } else {
            PlantModel::MixingZone
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantModel {
    FullyMixed,
    MixingZone,
}

/// Plant temperatures, °C. In the fully mixed model `mixing` tracks `room`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThermalState {
    pub mixing: f64,
    pub room: f64,
    pub wall: f64,
}

impl ThermalState {
    pub fn new(mixing: f64, room: f64, wall: f64) -> Self {
        Self { mixing, room, wall }
    }

    pub fn is_finite(&self) -> bool {
        self.mixing.is_finite() && self.room.is_finite() && self.wall.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.mixing.abs().max(self.room.abs()).max(self.wall.abs())
    }

    fn axpy(&self, h: f64, d: &ThermalState) -> ThermalState {
        ThermalState {
            mixing: self.mixing + h * d.mixing,
            room: self.room + h * d.room,
            wall: self.wall + h * d.wall,
        }
    }
}

/// Inputs held constant over one plant step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantInput {
    /// Supply air mass flow, kg/s.
    pub supply_flow: f64,
    pub outdoor_temp: f64,
    pub internal_gain: f64,
}

/// Heat delivered to a zone by supply air, W. Negative when cooling.
pub fn supply_heat_gain(flow: f64, zone_temp: f64, supply_temp: f64, specific_heat: f64) -> f64 {
    flow * specific_heat * (supply_temp - zone_temp)
}

fn wall_derivative(state: &ThermalState, input: &PlantInput, params: &BuildingParams) -> f64 {
    let r = params.wall_resistance;
    ((state.room - state.wall) / r + (input.outdoor_temp - state.wall) / r)
        / params.wall_capacitance
}

/// Fully mixed two-node dynamics. `state.mixing` is ignored and its
/// derivative aliases the room derivative.
pub fn derivatives_original(
    state: &ThermalState,
    input: &PlantInput,
    params: &BuildingParams,
) -> ThermalState {
    let q_sa = supply_heat_gain(
        input.supply_flow,
        state.room,
        params.supply_temp,
        params.air_specific_heat,
    );
    let room = ((state.wall - state.room) / params.wall_resistance + input.internal_gain + q_sa)
        / params.room_capacitance;
    ThermalState {
        mixing: room,
        room,
        wall: wall_derivative(state, input, params),
    }
}

/// Three-node mixing-air dynamics. Supply air and internal gain enter the
/// mixing zone; the room node only sees the mixing zone and the walls.
pub fn derivatives_mixing(
    state: &ThermalState,
    input: &PlantInput,
    params: &BuildingParams,
) -> Result<ThermalState> {
    if params.c <= 0.0 || params.r <= 0.0 {
        return Err(Error::config(format!(
            "mixing dynamics need r > 0 and c > 0 (got r = {}, c = {})",
            params.r, params.c
        )));
    }
    Ok(mixing_unchecked(state, input, params))
}

fn mixing_unchecked(
    state: &ThermalState,
    input: &PlantInput,
    params: &BuildingParams,
) -> ThermalState {
    let ra = params.mixing_resistance();
    let exchange = (state.room - state.mixing) / ra;
    let q_sa = supply_heat_gain(
        input.supply_flow,
        state.mixing,
        params.supply_temp,
        params.air_specific_heat,
    );
    ThermalState {
        mixing: (exchange + input.internal_gain + q_sa) / params.mixing_capacitance(),
        room: (-exchange + (state.wall - state.room) / params.wall_resistance)
            / params.remaining_room_capacitance(),
        wall: wall_derivative(state, input, params),
    }
}

/// Dispatches to the model selected by `params.model()`.
pub fn derivatives(
    state: &ThermalState,
    input: &PlantInput,
    params: &BuildingParams,
) -> Result<ThermalState> {
    match params.model() {
        PlantModel::FullyMixed => Ok(derivatives_original(state, input, params)),
        PlantModel::MixingZone => derivatives_mixing(state, input, params),
    }
}

/// Advances the plant by `dt` with `substeps` classical RK4 steps, inputs held.
pub fn rk4_advance(
    state: &ThermalState,
    input: &PlantInput,
    params: &BuildingParams,
    dt: f64,
    substeps: usize,
) -> ThermalState {
    let f: fn(&ThermalState, &PlantInput, &BuildingParams) -> ThermalState = match params.model() {
        PlantModel::FullyMixed => derivatives_original,
        PlantModel::MixingZone => mixing_unchecked,
    };
    let n = substeps.max(1);
    let h = dt / n as f64;
    let mut s = *state;
    for _ in 0..n {
        let k1 = f(&s, input, params);
        let k2 = f(&s.axpy(0.5 * h, &k1), input, params);
        let k3 = f(&s.axpy(0.5 * h, &k2), input, params);
        let k4 = f(&s.axpy(h, &k3), input, params);
        s = ThermalState {
            mixing: s.mixing
                + h / 6.0 * (k1.mixing + 2.0 * k2.mixing + 2.0 * k3.mixing + k4.mixing),
            room: s.room + h / 6.0 * (k1.room + 2.0 * k2.room + 2.0 * k3.room + k4.room),
            wall: s.wall + h / 6.0 * (k1.wall + 2.0 * k2.wall + 2.0 * k3.wall + k4.wall),
        };
    }
    if params.model() == PlantModel::FullyMixed {
        s.mixing = s.room;
    }
    s
}

/// Number of RK4 substeps per control step that keeps the fastest plant mode
/// well inside the explicit stability region for flows up to `max_flow`.
pub fn stable_substeps(params: &BuildingParams, max_flow: f64, dt: f64) -> usize {
    let cond_air = max_flow.max(0.0) * params.air_specific_heat;
    let room_rate = match params.model() {
        PlantModel::FullyMixed => {
            (2.0 / params.wall_resistance + cond_air) / params.room_capacitance
        }
        PlantModel::MixingZone => {
            let ga = 1.0 / params.mixing_resistance();
            let mixing = (ga + cond_air) / params.mixing_capacitance();
            let room = (ga + 1.0 / params.wall_resistance) / params.remaining_room_capacitance();
            mixing + room
        }
    };
    let wall_rate = 2.0 / (params.wall_resistance * params.wall_capacitance);
    let fastest = room_rate.max(wall_rate);
    // RK4 is stable for |lambda h| < 2.78 on the real axis; stay below 1.
    let n = (dt * fastest).ceil();
    if n.is_finite() && n >= 1.0 {
        n as usize
    } else {
        1
    }
}

/// Steady state holding the room at a target temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub state: ThermalState,
    pub supply_flow: f64,
}

/// Steady state at the nominal outdoor temperature.
pub fn equilibrium(params: &BuildingParams, room_target: f64) -> Result<Equilibrium> {
    equilibrium_at(
        params,
        room_target,
        params.outdoor_temp,
        params.internal_gain,
    )
}

pub fn equilibrium_at(
    params: &BuildingParams,
    room_target: f64,
    outdoor_temp: f64,
    internal_gain: f64,
) -> Result<Equilibrium> {
    let wall = 0.5 * (room_target + outdoor_temp);
    let wall_flux = (wall - room_target) / params.wall_resistance;
    let mixing = match params.model() {
        PlantModel::FullyMixed => room_target,
        PlantModel::MixingZone => room_target - params.r * (wall - room_target),
    };
    let lift = params.air_specific_heat * (mixing - params.supply_temp);
    let load = wall_flux + internal_gain;
    if lift <= 0.0 {
        if load == 0.0 && mixing == params.supply_temp {
            return Ok(Equilibrium {
                state: ThermalState::new(mixing, room_target, wall),
                supply_flow: 0.0,
            });
        }
        return Err(Error::Infeasible(format!(
            "zone at {mixing:.3} °C cannot be cooled by supply air at {:.3} °C",
            params.supply_temp
        )));
    }
    let flow = load / lift;
    if flow < 0.0 {
        return Err(Error::Infeasible(format!(
            "net heat load {load:.1} W is negative; cooling cannot hold {room_target} °C"
        )));
    }
    Ok(Equilibrium {
        state: ThermalState::new(mixing, room_target, wall),
        supply_flow: flow,
    })
}
