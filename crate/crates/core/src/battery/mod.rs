//! Temperature-enhanced second-order physics-based equivalent circuit model of
//! a Li-ion pack, with SEI side-reaction aging and a lumped thermal node.
//!
//! The state is the electric charge stored in each electrode plus the pack
//! temperature. Given a pack power the cell current follows in closed form
//! from the equivalent voltage and resistance, and one forward Euler step
//! advances charges and temperature.
//!
//! Sign conventions: positive pack power and positive current charge the
//! battery; the side-reaction current is never positive.

pub mod chemistry;
mod params;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chemistry::{chemistry_registry, Chemistry, LcoGraphite};
pub use params::{BatteryParams, ElectrodeParams};

/// Stoichiometries outside this box are rejected by the resistance and
/// side-reaction evaluations.
pub const THETA_MIN: f64 = 1e-4;
pub const THETA_MAX: f64 = 1.0 - 1e-4;

/// Step on theta for the central difference of the open-circuit potential.
pub const OCP_SLOPE_STEP: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BatteryError {
    #[error("invalid battery parameters: {0}")]
    InvalidParams(String),
    #[error("{what} = {value} outside its admissible range [{min}, {max}]")]
    Domain {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error(
        "pack power {p_b} kW is infeasible: discharge capability is {limit} kW at this state"
    )]
    InfeasiblePower { p_b: f64, limit: f64 },
    #[error("side-reaction current is singular (1 - 2*gamma*alpha = {denominator}) at q1_neg = {q1_neg} Ah, T = {t_bat} K")]
    SideReactionSingular {
        denominator: f64,
        q1_neg: f64,
        t_bat: f64,
    },
    #[error("end of life: capacity loss {q_loss} Ah reached pristine capacity {capacity} Ah")]
    EndOfLife { q_loss: f64, capacity: f64 },
    #[error("non-positive time step {0} h")]
    InvalidTimeStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Electrode {
    Positive,
    Negative,
}

/// Dynamic state: electrode charges [Ah] and pack temperature [K].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub q1_pos: f64,
    pub q1_neg: f64,
    pub t_bat: f64,
}

impl BatteryState {
    /// State of a cell with the given capacity loss at `soc`.
    ///
    /// Inverts `SoC = (Q0 - q1_neg)/(Q0 - Q_loss)` and
    /// `Q_loss = q1_pos + q1_neg - Q0`.
    pub fn from_soc(soc: f64, q_loss: f64, t_bat: f64, capacity: f64) -> Self {
        let usable = capacity - q_loss;
        let q1_neg = capacity - soc * usable;
        let q1_pos = soc * usable + q_loss;
        Self {
            q1_pos,
            q1_neg,
            t_bat,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.q1_pos, self.q1_neg, self.t_bat]
    }

    pub fn is_finite(&self) -> bool {
        self.q1_pos.is_finite() && self.q1_neg.is_finite() && self.t_bat.is_finite()
    }
}

/// Algebraic outputs of one step, evaluated at the pre-step state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryOutput {
    pub soc: f64,
    pub soh: f64,
    /// Cell terminal voltage [V].
    pub v_bat: f64,
    /// Cell current [A].
    pub i_bat: f64,
    /// Side-reaction current [A], <= 0.
    pub i_sr: f64,
    /// Pack power [kW].
    pub p_b: f64,
    /// Electric power of the thermal unit [kW].
    pub p_c: f64,
    pub q_loss: f64,
    /// Total heat generation, irreversible plus reversible [kW].
    pub q_gen: f64,
}

/// Heat terms of one step [kW].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatGeneration {
    pub irreversible: f64,
    pub reversible: f64,
}

/// Equivalent open-circuit voltage and series resistance of the cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equivalent {
    pub voltage: f64,
    pub resistance: f64,
}

/// Parameters bound to their chemistry curves. Cheap to clone.
#[derive(Clone)]
pub struct BatteryModel {
    params: Arc<BatteryParams>,
    chemistry: Arc<dyn Chemistry>,
    sei_base: f64,
    sei_slope: f64,
}

impl std::fmt::Debug for BatteryModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BatteryModel")
            .field("chemistry", &self.chemistry.name())
            .field("capacity", &self.params.capacity)
            .field("cells", &self.params.cells)
            .finish()
    }
}

impl BatteryModel {
    pub fn new(params: BatteryParams) -> crate::Result<Self> {
        params.validate()?;
        let chemistry = chemistry::resolve(&params.chemistry)?;
        Ok(Self::with_chemistry(params, chemistry))
    }

    /// Binds explicit curves, bypassing the registry (the name in `params`
    /// is kept for serialization only).
    pub fn with_chemistry(params: BatteryParams, chemistry: Arc<dyn Chemistry>) -> Self {
        let n = &params.negative;
        let volume_area = n.specific_area * params.area * n.thickness;
        let sei_base = params.sei_initial_resistivity / volume_area;
        let sei_slope = params.sei_molar_mass / (params.sei_density * params.sei_conductivity)
            * 3600.0
            / (params.faraday * volume_area * volume_area);
        Self {
            params: Arc::new(params),
            chemistry,
            sei_base,
            sei_slope,
        }
    }

    pub fn default_table1() -> Self {
        Self::new(BatteryParams::default_table1()).expect("built-in parameters are valid")
    }

    pub fn params(&self) -> &BatteryParams {
        &self.params
    }

    pub fn chemistry(&self) -> &dyn Chemistry {
        self.chemistry.as_ref()
    }

    pub fn capacity(&self) -> f64 {
        self.params.capacity
    }

    /// Fresh cell at the given state of charge and temperature.
    pub fn fresh_state(&self, soc: f64, t_bat: f64) -> BatteryState {
        BatteryState::from_soc(soc, 0.0, t_bat, self.params.capacity)
    }

    /// Charge capacity of the solid phase of an electrode [As per unit theta].
    fn electrode_charge_capacity(&self, electrode: Electrode) -> f64 {
        let p = &self.params;
        let e = p.electrode(electrode);
        p.area * e.thickness * p.faraday * e.volume_fraction * e.max_concentration
    }

    pub fn charge_to_stoichiometry(&self, electrode: Electrode, q1: f64) -> Result<f64, BatteryError> {
        let q0 = self.params.capacity;
        if !(0.0..=q0).contains(&q1) {
            return Err(BatteryError::Domain {
                what: match electrode {
                    Electrode::Positive => "q1_pos",
                    Electrode::Negative => "q1_neg",
                },
                value: q1,
                min: 0.0,
                max: q0,
            });
        }
        let e = self.params.electrode(electrode);
        let start = match electrode {
            Electrode::Positive => e.theta_empty,
            Electrode::Negative => e.theta_full,
        };
        Ok(start - 3600.0 * q1 / self.electrode_charge_capacity(electrode))
    }

    /// Open-circuit potential including the entropic temperature correction.
    pub fn open_circuit_potential(
        &self,
        electrode: Electrode,
        theta: f64,
        t_bat: f64,
    ) -> Result<f64, BatteryError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(BatteryError::Domain {
                what: "theta",
                value: theta,
                min: 0.0,
                max: 1.0,
            });
        }
        Ok(self.ocp_unchecked(electrode, theta, t_bat))
    }

    fn ocp_unchecked(&self, electrode: Electrode, theta: f64, t_bat: f64) -> f64 {
        self.chemistry.reference_potential(electrode, theta)
            + self.chemistry.entropic_coefficient(electrode, theta)
                * (t_bat - self.params.reference_temperature)
    }

    fn ocp_slope(&self, electrode: Electrode, theta: f64, t_bat: f64) -> f64 {
        let h = OCP_SLOPE_STEP;
        let lo = theta - h;
        let hi = theta + h;
        if lo > 0.0 && hi < 1.0 {
            (self.ocp_unchecked(electrode, hi, t_bat) - self.ocp_unchecked(electrode, lo, t_bat))
                / (2.0 * h)
        } else if hi < 1.0 {
            (self.ocp_unchecked(electrode, hi, t_bat) - self.ocp_unchecked(electrode, theta, t_bat)) / h
        } else {
            (self.ocp_unchecked(electrode, theta, t_bat) - self.ocp_unchecked(electrode, lo, t_bat)) / h
        }
    }

    fn check_theta(theta: f64) -> Result<(), BatteryError> {
        if (THETA_MIN..=THETA_MAX).contains(&theta) {
            Ok(())
        } else {
            Err(BatteryError::Domain {
                what: "theta",
                value: theta,
                min: THETA_MIN,
                max: THETA_MAX,
            })
        }
    }

    fn arrhenius(&self, activation_energy: f64, t_bat: f64) -> f64 {
        let p = &self.params;
        (-activation_energy / p.gas_constant * (1.0 / t_bat - 1.0 / p.reference_temperature)).exp()
    }

    /// Main-reaction exchange current density [A/m^2].
    pub fn exchange_current_density(
        &self,
        electrode: Electrode,
        theta: f64,
        t_bat: f64,
    ) -> Result<f64, BatteryError> {
        Self::check_theta(theta)?;
        Ok(self.exchange_current_unchecked(electrode, theta, t_bat))
    }

    fn exchange_current_unchecked(&self, electrode: Electrode, theta: f64, t_bat: f64) -> f64 {
        let p = &self.params;
        let e = p.electrode(electrode);
        let k = e.rate_constant * self.arrhenius(p.rate_activation_energy, t_bat);
        p.faraday * k * e.max_concentration * (p.electrolyte_concentration * theta * (1.0 - theta)).sqrt()
    }

    /// Charge-transfer plus solid-diffusion resistance of one electrode [Ohm].
    pub fn sigma_resistance(
        &self,
        electrode: Electrode,
        theta: f64,
        t_bat: f64,
    ) -> Result<f64, BatteryError> {
        Self::check_theta(theta)?;
        let p = &self.params;
        let e = p.electrode(electrode);
        let i0 = self.exchange_current_unchecked(electrode, theta, t_bat);
        let charge_transfer =
            p.gas_constant * t_bat / p.faraday / (p.area * e.thickness * e.specific_area * i0);
        let diffusivity = e.solid_diffusivity * self.arrhenius(p.diffusion_activation_energy, t_bat);
        let diffusion = -self.ocp_slope(electrode, theta, t_bat) / self.electrode_charge_capacity(electrode)
            * e.particle_radius
            * e.particle_radius
            / (15.0 * diffusivity);
        Ok(charge_transfer + diffusion)
    }

    /// Effective electrolyte conductivity [S/m]: the Bruggeman-corrected
    /// conductivities of the three regions combined in series with the same
    /// thickness weights as the resistance formula.
    pub fn effective_conductivity(&self, t_bat: f64) -> f64 {
        let p = &self.params;
        let bulk = self
            .chemistry
            .electrolyte_conductivity(p.electrolyte_concentration, t_bat);
        let region = |porosity: f64| porosity.powf(p.bruggeman) * bulk;
        let lp = p.positive.thickness;
        let ln = p.negative.thickness;
        let ls = p.separator_thickness;
        (lp + 2.0 * ls + ln)
            / (lp / region(p.positive.electrolyte_porosity)
                + 2.0 * ls / region(p.separator_porosity)
                + ln / region(p.negative.electrolyte_porosity))
    }

    pub fn electrolyte_resistance(&self, t_bat: f64) -> f64 {
        self.electrolyte_resistance_with(t_bat, self.effective_conductivity(t_bat))
    }

    /// Electrolyte resistance for an explicit effective conductivity.
    pub fn electrolyte_resistance_with(&self, _t_bat: f64, conductivity: f64) -> f64 {
        let p = &self.params;
        (p.positive.thickness + 2.0 * p.separator_thickness + p.negative.thickness)
            / (2.0 * p.area * conductivity)
    }

    /// Side-reaction exchange current density [A/m^2], piecewise linear in
    /// temperature through the fit points, floored at zero.
    pub fn side_reaction_exchange_current(&self, t_bat: f64) -> f64 {
        let pts = &self.params.side_reaction_exchange_fit;
        let seg = pts
            .windows(2)
            .position(|w| t_bat <= w[1][0])
            .unwrap_or(pts.len() - 2);
        let [t0, i0] = pts[seg];
        let [t1, i1] = pts[seg + 1];
        let value = i0 + (i1 - i0) * (t_bat - t0) / (t1 - t0);
        value.max(0.0) * self.params.side_reaction_scale
    }

    /// Kinetically limited SEI side-reaction current of the cell [A].
    pub fn side_reaction_current(
        &self,
        q1_neg: f64,
        t_bat: f64,
        i_bat: f64,
    ) -> Result<f64, BatteryError> {
        let p = &self.params;
        let n = &p.negative;
        let theta = self.charge_to_stoichiometry(Electrode::Negative, q1_neg)?;
        Self::check_theta(theta)?;
        let v1 = self.ocp_unchecked(Electrode::Negative, theta, t_bat);
        let i0 = self.exchange_current_unchecked(Electrode::Negative, theta, t_bat);
        let volume = p.area * n.thickness;
        let alpha = -self.side_reaction_exchange_current(t_bat)
            * n.specific_area
            * (p.faraday * (p.side_reaction_potential - v1) / (2.0 * p.gas_constant * t_bat)).exp();
        let beta = i_bat / (2.0 * volume * n.specific_area * i0);
        let gamma = 1.0 / (2.0 * n.specific_area * i0);
        let denominator = 1.0 - 2.0 * gamma * alpha;
        if !(denominator > 0.0) {
            return Err(BatteryError::SideReactionSingular {
                denominator,
                q1_neg,
                t_bat,
            });
        }
        let density = (alpha * beta + alpha * (beta * beta + denominator).sqrt()) / denominator;
        Ok(volume * density)
    }

    /// SEI film resistance [Ohm], linear in capacity loss.
    pub fn sei_resistance(&self, q_loss: f64) -> Result<f64, BatteryError> {
        if !(q_loss >= 0.0) {
            return Err(BatteryError::Domain {
                what: "q_loss",
                value: q_loss,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        Ok(self.sei_base + self.sei_slope * q_loss)
    }

    /// `(R_f0, K_f)` of the SEI resistance law.
    pub fn sei_coefficients(&self) -> (f64, f64) {
        (self.sei_base, self.sei_slope)
    }

    /// Equivalent open-circuit voltage and series resistance at `state`.
    pub fn equivalent(&self, state: &BatteryState) -> Result<Equivalent, BatteryError> {
        let theta_p = self.charge_to_stoichiometry(Electrode::Positive, state.q1_pos)?;
        let theta_n = self.charge_to_stoichiometry(Electrode::Negative, state.q1_neg)?;
        let t = state.t_bat;
        let voltage = self.open_circuit_potential(Electrode::Positive, theta_p, t)?
            - self.open_circuit_potential(Electrode::Negative, theta_n, t)?;
        let q_loss = (state.q1_pos + state.q1_neg - self.params.capacity).max(0.0);
        let resistance = (self.sigma_resistance(Electrode::Positive, theta_p, t)?
            + self.sigma_resistance(Electrode::Negative, theta_n, t)?
            + self.sei_resistance(q_loss)?
            + self.electrolyte_resistance(t)
            + self.params.collector_resistance)
            * self.params.resistance_scale;
        Ok(Equivalent {
            voltage,
            resistance,
        })
    }

    /// Most negative (discharge) pack power the cell can deliver at `eq` [kW].
    pub fn discharge_limit(&self, eq: &Equivalent) -> f64 {
        -self.params.cells * eq.voltage * eq.voltage / (4.0 * eq.resistance) * 1e-3
    }

    /// Cell current for a pack power, neglecting the side reaction in the
    /// terminal-voltage balance.
    pub fn solve_battery_current(&self, p_b: f64, state: &BatteryState) -> Result<f64, BatteryError> {
        let eq = self.equivalent(state)?;
        Self::current_from_equivalent(p_b, &eq, self.params.cells)
    }

    /// Positive root of `R I^2 + V I - p = 0` with `p = p_b*1e3/N_cell`.
    pub fn current_from_equivalent(p_b: f64, eq: &Equivalent, cells: f64) -> Result<f64, BatteryError> {
        let p_cell = p_b * 1e3 / cells;
        let disc = eq.voltage * eq.voltage + 4.0 * eq.resistance * p_cell;
        if !(disc >= 0.0) {
            return Err(BatteryError::InfeasiblePower {
                p_b,
                limit: -cells * eq.voltage * eq.voltage / (4.0 * eq.resistance) * 1e-3,
            });
        }
        // rationalized form, free of cancellation at small power
        let root = disc.sqrt();
        if eq.voltage > 0.0 {
            Ok(2.0 * p_cell / (eq.voltage + root))
        } else {
            Ok((-eq.voltage + root) / (2.0 * eq.resistance))
        }
    }

    /// Terminal voltage with the side reaction neglected [V].
    pub fn terminal_voltage(eq: &Equivalent, i_bat: f64) -> f64 {
        eq.voltage + eq.resistance * i_bat
    }

    pub fn heat_generation(&self, i_bat: f64, t_bat: f64, state: &BatteryState) -> Result<HeatGeneration, BatteryError> {
        let eq = self.equivalent(state)?;
        self.heat_from_equivalent(i_bat, t_bat, state, &eq)
    }

    fn heat_from_equivalent(
        &self,
        i_bat: f64,
        t_bat: f64,
        state: &BatteryState,
        eq: &Equivalent,
    ) -> Result<HeatGeneration, BatteryError> {
        let n = self.params.cells;
        let theta_p = self.charge_to_stoichiometry(Electrode::Positive, state.q1_pos)?;
        let theta_n = self.charge_to_stoichiometry(Electrode::Negative, state.q1_neg)?;
        let entropic = self.chemistry.entropic_coefficient(Electrode::Positive, theta_p)
            - self.chemistry.entropic_coefficient(Electrode::Negative, theta_n);
        Ok(HeatGeneration {
            irreversible: n * i_bat * i_bat * eq.resistance * 1e-3,
            reversible: n * i_bat * t_bat * entropic * 1e-3,
        })
    }

    pub fn q_loss(&self, state: &BatteryState) -> f64 {
        state.q1_pos + state.q1_neg - self.params.capacity
    }

    pub fn soh(&self, state: &BatteryState) -> Result<f64, BatteryError> {
        let q_loss = self.checked_loss(state)?;
        Ok(1.0 - q_loss / self.params.capacity)
    }

    /// State of charge from the negative-electrode charge.
    pub fn soc(&self, state: &BatteryState) -> Result<f64, BatteryError> {
        let q_loss = self.checked_loss(state)?;
        Ok((self.params.capacity - state.q1_neg) / (self.params.capacity - q_loss))
    }

    /// State of charge from the positive-electrode charge; equal to
    /// [`Self::soc`] up to rounding.
    pub fn soc_from_positive(&self, state: &BatteryState) -> Result<f64, BatteryError> {
        let q_loss = self.checked_loss(state)?;
        Ok((state.q1_pos - q_loss) / (self.params.capacity - q_loss))
    }

    fn checked_loss(&self, state: &BatteryState) -> Result<f64, BatteryError> {
        let q_loss = self.q_loss(state);
        if q_loss >= self.params.capacity {
            return Err(BatteryError::EndOfLife {
                q_loss,
                capacity: self.params.capacity,
            });
        }
        Ok(q_loss)
    }

    /// Electric power drawn by the heating/cooling unit for thermal power `q_c`.
    pub fn thermal_power(&self, q_c: f64) -> f64 {
        q_c.abs() / self.params.thermal_cop
    }

    /// One forward Euler step of `dt` hours under pack power `p_b` [kW],
    /// thermal power `q_c` [kW] and ambient temperature `t_amb` [K].
    pub fn step(
        &self,
        state: &BatteryState,
        p_b: f64,
        q_c: f64,
        t_amb: f64,
        dt: f64,
    ) -> Result<(BatteryState, BatteryOutput), BatteryError> {
        self.step_with_thermal_power(state, p_b, q_c, self.thermal_power(q_c), t_amb, dt)
    }

    /// [`Self::step`] with the thermal unit's electric power supplied by the
    /// caller (e.g. a smoothed version inside an optimizer).
    pub fn step_with_thermal_power(
        &self,
        state: &BatteryState,
        p_b: f64,
        q_c: f64,
        p_c: f64,
        t_amb: f64,
        dt: f64,
    ) -> Result<(BatteryState, BatteryOutput), BatteryError> {
        if !(dt > 0.0) {
            return Err(BatteryError::InvalidTimeStep(dt));
        }
        let p = &self.params;
        let eq = self.equivalent(state)?;
        let i_bat = Self::current_from_equivalent(p_b, &eq, p.cells)?;
        let i_sr = self.side_reaction_current(state.q1_neg, state.t_bat, i_bat)?;
        let heat = self.heat_from_equivalent(i_bat, state.t_bat, state, &eq)?;
        let q_gen = heat.irreversible + heat.reversible;
        let q_loss = self.checked_loss(state)?;
        let usable = p.capacity - q_loss;
        let output = BatteryOutput {
            soc: (p.capacity - state.q1_neg) / usable,
            soh: 1.0 - q_loss / p.capacity,
            v_bat: Self::terminal_voltage(&eq, i_bat),
            i_bat,
            i_sr,
            p_b,
            p_c,
            q_loss,
            q_gen,
        };
        let next = BatteryState {
            q1_pos: state.q1_pos + dt * i_bat,
            q1_neg: state.q1_neg + dt * (-i_bat - i_sr),
            t_bat: state.t_bat
                + dt * ((t_amb - state.t_bat) / p.thermal_resistance + q_gen + q_c)
                    / p.thermal_capacitance,
        };
        Ok((next, output))
    }
}
