use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BatteryError;

/// Geometry, transport and kinetic constants of one porous electrode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodeParams {
    /// Particle radius [m].
    #[serde(rename = "R_p")]
    pub particle_radius: f64,
    /// Solid-phase diffusivity at the reference temperature [m^2/s].
    #[serde(rename = "D_s")]
    pub solid_diffusivity: f64,
    /// Specific interfacial area [1/m].
    #[serde(rename = "a_s")]
    pub specific_area: f64,
    /// Thickness [m].
    #[serde(rename = "L")]
    pub thickness: f64,
    /// Active material volume fraction [-].
    #[serde(rename = "eps_s")]
    pub volume_fraction: f64,
    /// Maximum solid concentration [mol/m^3].
    #[serde(rename = "c_s_max")]
    pub max_concentration: f64,
    /// Stoichiometry at 0 % state of charge [-].
    #[serde(rename = "theta_0")]
    pub theta_empty: f64,
    /// Stoichiometry at 100 % state of charge [-].
    #[serde(rename = "theta_100")]
    pub theta_full: f64,
    /// Reaction rate constant at the reference temperature.
    #[serde(rename = "k_eff")]
    pub rate_constant: f64,
    /// Electrolyte porosity, used for the effective conductivity [-].
    #[serde(rename = "eps_e")]
    pub electrolyte_porosity: f64,
}

/// Every constant of the cell, pack and thermal model.
///
/// Field names in config files follow the usual symbols (`Q0`, `L_sep`,
/// `k_eff`, ...) in SI units, except charge in Ah and thermal quantities in
/// kWh/K and K/kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryParams {
    /// Name of the material-curve set in the chemistry registry.
    pub chemistry: String,
    #[serde(rename = "pos")]
    pub positive: ElectrodeParams,
    #[serde(rename = "neg")]
    pub negative: ElectrodeParams,
    #[serde(rename = "L_sep")]
    pub separator_thickness: f64,
    #[serde(rename = "eps_e_sep")]
    pub separator_porosity: f64,
    /// Bruggeman exponent for the effective conductivity.
    #[serde(rename = "brugg")]
    pub bruggeman: f64,
    #[serde(rename = "F")]
    pub faraday: f64,
    #[serde(rename = "R_g")]
    pub gas_constant: f64,
    #[serde(rename = "T_ref")]
    pub reference_temperature: f64,
    /// Initial electrolyte concentration [mol/m^3].
    #[serde(rename = "c_e0")]
    pub electrolyte_concentration: f64,
    /// Activation energy of the reaction rate constants [J/mol].
    #[serde(rename = "E_a_k")]
    pub rate_activation_energy: f64,
    /// Activation energy of the solid diffusivities [J/mol].
    #[serde(rename = "E_a_D")]
    pub diffusion_activation_energy: f64,
    /// Side-reaction exchange current density samples, `[temperature K, A/m^2]`,
    /// sorted by temperature.
    #[serde(rename = "i0_sr_fit")]
    pub side_reaction_exchange_fit: Vec<[f64; 2]>,
    #[serde(rename = "U_sr_ref")]
    pub side_reaction_potential: f64,
    /// SEI resistivity of a fresh cell [Ohm m^2].
    #[serde(rename = "r_f0")]
    pub sei_initial_resistivity: f64,
    #[serde(rename = "M_f")]
    pub sei_molar_mass: f64,
    #[serde(rename = "rho_f")]
    pub sei_density: f64,
    #[serde(rename = "kappa_f")]
    pub sei_conductivity: f64,
    /// Pristine cell capacity [Ah].
    #[serde(rename = "Q0")]
    pub capacity: f64,
    /// Electrode plate area [m^2].
    #[serde(rename = "A")]
    pub area: f64,
    #[serde(rename = "R_col")]
    pub collector_resistance: f64,
    #[serde(rename = "N_cell")]
    pub cells: f64,
    /// Lumped thermal capacitance [kWh/K].
    #[serde(rename = "C_T")]
    pub thermal_capacitance: f64,
    /// Lumped thermal resistance to ambient [K/kW].
    #[serde(rename = "R_T")]
    pub thermal_resistance: f64,
    /// Coefficient of performance of the heating/cooling unit.
    #[serde(rename = "eta_c")]
    pub thermal_cop: f64,
    /// Multiplier on the equivalent series resistance (plant/model mismatch).
    pub resistance_scale: f64,
    /// Multiplier on the side-reaction exchange current (plant/model mismatch).
    pub side_reaction_scale: f64,
}

impl BatteryParams {
    /// The LiCoO2/graphite cell of the reference study: 1.747 Ah cells, 4000
    /// per pack, with the lumped thermal constants of the home battery.
    pub fn default_table1() -> Self {
        Self {
            chemistry: super::chemistry::LcoGraphite::NAME.to_string(),
            positive: ElectrodeParams {
                particle_radius: 2e-6,
                solid_diffusivity: 1e-14,
                specific_area: 8.85e6,
                thickness: 80e-6,
                volume_fraction: 0.59,
                max_concentration: 51554.0,
                theta_empty: 0.9337,
                theta_full: 0.4855,
                rate_constant: 2.33e-11,
                electrolyte_porosity: 0.385,
            },
            negative: ElectrodeParams {
                particle_radius: 2e-6,
                solid_diffusivity: 3.9e-14,
                specific_area: 7.236e6,
                thickness: 88e-6,
                volume_fraction: 0.4824,
                max_concentration: 30555.0,
                theta_empty: 0.02,
                theta_full: 0.8608,
                rate_constant: 5.03e-11,
                electrolyte_porosity: 0.485,
            },
            separator_thickness: 25e-6,
            separator_porosity: 0.724,
            bruggeman: 4.0,
            faraday: 96487.0,
            gas_constant: 8.314,
            reference_temperature: 298.15,
            electrolyte_concentration: 1000.0,
            rate_activation_energy: 5000.0,
            diffusion_activation_energy: 5000.0,
            side_reaction_exchange_fit: vec![
                [273.15, 0.39e-7],
                [298.15, 2.28e-7],
                [323.15, 6.3e-7],
            ],
            side_reaction_potential: 0.21,
            sei_initial_resistivity: 0.01,
            sei_molar_mass: 0.162,
            sei_density: 1690.0,
            sei_conductivity: 5e-6,
            capacity: 1.747,
            area: 0.0598,
            collector_resistance: 0.0,
            cells: 4000.0,
            thermal_capacitance: 0.0278,
            thermal_resistance: 200.0,
            thermal_cop: 7.0,
            resistance_scale: 1.0,
            side_reaction_scale: 1.0,
        }
    }

    pub fn electrode(&self, electrode: super::Electrode) -> &ElectrodeParams {
        match electrode {
            super::Electrode::Positive => &self.positive,
            super::Electrode::Negative => &self.negative,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, BatteryError> {
        let params: Self =
            toml::from_str(text).map_err(|e| BatteryError::InvalidParams(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, BatteryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BatteryError::InvalidParams(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("battery params serialize")
    }

    pub fn validate(&self) -> Result<(), BatteryError> {
        let bad = |what: &str| Err(BatteryError::InvalidParams(what.to_string()));
        for (tag, e) in [("pos", &self.positive), ("neg", &self.negative)] {
            let values = [
                e.particle_radius,
                e.solid_diffusivity,
                e.specific_area,
                e.thickness,
                e.volume_fraction,
                e.max_concentration,
                e.theta_empty,
                e.theta_full,
                e.rate_constant,
                e.electrolyte_porosity,
            ];
            if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad(&format!("{tag}: electrode constants must be positive and finite"));
            }
            if e.theta_empty >= 1.0 || e.theta_full >= 1.0 {
                return bad(&format!("{tag}: stoichiometry endpoints must lie in (0, 1)"));
            }
        }
        if self.positive.theta_empty <= self.positive.theta_full {
            return bad("pos: theta_0 must exceed theta_100");
        }
        if self.negative.theta_full <= self.negative.theta_empty {
            return bad("neg: theta_100 must exceed theta_0");
        }
        let positive = [
            self.faraday,
            self.gas_constant,
            self.reference_temperature,
            self.electrolyte_concentration,
            self.sei_initial_resistivity,
            self.sei_molar_mass,
            self.sei_density,
            self.sei_conductivity,
            self.capacity,
            self.area,
            self.cells,
            self.thermal_capacitance,
            self.thermal_resistance,
            self.thermal_cop,
            self.separator_porosity,
            self.bruggeman,
            self.resistance_scale,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("physical constants must be positive and finite");
        }
        let nonneg = [
            self.separator_thickness,
            self.collector_resistance,
            self.rate_activation_energy,
            self.diffusion_activation_energy,
            self.side_reaction_scale,
        ];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("L_sep, R_col, activation energies and scales must be non-negative");
        }
        if self.side_reaction_exchange_fit.len() < 2 {
            return bad("i0_sr_fit needs at least two points");
        }
        if self
            .side_reaction_exchange_fit
            .windows(2)
            .any(|w| w[1][0] <= w[0][0])
        {
            return bad("i0_sr_fit temperatures must be strictly increasing");
        }
        if !self.side_reaction_potential.is_finite() {
            return bad("U_sr_ref must be finite");
        }
        super::chemistry::chemistry_registry()
            .contains(&self.chemistry)
            .then_some(())
            .ok_or_else(|| BatteryError::InvalidParams(format!("unknown chemistry `{}`", self.chemistry)))
    }
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self::default_table1()
    }
}
