//! Concentration- and temperature-dependent material functions.
//!
//! The cell model only needs four empirical curves per parameter set: the
//! reference open-circuit potential and the entropic coefficient of each
//! electrode, and the bulk electrolyte conductivity. They are swappable so a
//! different cell chemistry can be plugged in by name.

use std::sync::Arc;

use crate::registry::Registry;

use super::Electrode;

/// Empirical material curves for one cell chemistry.
pub trait Chemistry: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    /// Reference open-circuit potential [V] at normalized concentration `theta`.
    fn reference_potential(&self, electrode: Electrode, theta: f64) -> f64;

    /// Entropic coefficient dU/dT [V/K] at normalized concentration `theta`.
    fn entropic_coefficient(&self, electrode: Electrode, theta: f64) -> f64;

    /// Bulk electrolyte conductivity [S/m] at concentration `c_e` [mol/m^3]
    /// and temperature `t` [K].
    fn electrolyte_conductivity(&self, c_e: f64, t: f64) -> f64;
}

/// LiCoO2 / LiC6 curves shipped with the LIONSIMBA parameter set, with the
/// Valoen-Reimers electrolyte conductivity.
#[derive(Debug, Clone, Copy, Default)]
pub struct LcoGraphite;

impl LcoGraphite {
    pub const NAME: &'static str = "lco-graphite";
}

impl Chemistry for LcoGraphite {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn reference_potential(&self, electrode: Electrode, theta: f64) -> f64 {
        match electrode {
            Electrode::Positive => {
                let t2 = theta * theta;
                let t4 = t2 * t2;
                let t6 = t4 * t2;
                let t8 = t4 * t4;
                let t10 = t8 * t2;
                let num = -4.656 + 88.669 * t2 - 401.119 * t4 + 342.909 * t6 - 462.471 * t8
                    + 433.434 * t10;
                let den = -1.0 + 18.933 * t2 - 79.532 * t4 + 37.311 * t6 - 73.083 * t8
                    + 95.96 * t10;
                num / den
            }
            Electrode::Negative => {
                0.7222 + 0.1387 * theta + 0.029 * theta.sqrt() - 0.0172 / theta
                    + 0.0019 / theta.powf(1.5)
                    + 0.2808 * (0.9 - 15.0 * theta).exp()
                    - 0.7984 * (0.4465 * theta - 0.4108).exp()
            }
        }
    }

    fn entropic_coefficient(&self, electrode: Electrode, theta: f64) -> f64 {
        let t = theta;
        match electrode {
            Electrode::Positive => {
                let num = -0.001
                    * (0.199521039 - 0.928373822 * t + 1.364550689000003 * t.powi(2)
                        - 0.6115448939999998 * t.powi(3));
                let den = 1.0 - 5.661479886999997 * t + 11.47636191 * t.powi(2)
                    - 9.82431213599998 * t.powi(3)
                    + 3.048755063 * t.powi(4);
                num / den
            }
            Electrode::Negative => {
                let num = 0.001
                    * (0.005269056 + 3.299265709 * t - 91.79325798 * t.powi(2)
                        + 1004.911008 * t.powi(3)
                        - 5812.278127 * t.powi(4)
                        + 19329.7549 * t.powi(5)
                        - 37147.8947 * t.powi(6)
                        + 38379.18127 * t.powi(7)
                        - 16515.05308 * t.powi(8));
                let den = 1.0 - 48.09287227 * t + 1017.234804 * t.powi(2)
                    - 10481.80419 * t.powi(3)
                    + 59431.3 * t.powi(4)
                    - 195881.6488 * t.powi(5)
                    + 374577.3152 * t.powi(6)
                    - 385821.1607 * t.powi(7)
                    + 165705.8597 * t.powi(8);
                num / den
            }
        }
    }

    fn electrolyte_conductivity(&self, c_e: f64, t: f64) -> f64 {
        let c = c_e;
        let inner = (-10.5 + 0.668e-3 * c + 0.494e-6 * c * c)
            + (0.074 - 1.78e-5 * c - 8.86e-10 * c * c) * t
            + (-6.96e-5 + 2.8e-8 * c) * t * t;
        1e-4 * c * inner * inner
    }
}

pub fn chemistry_registry() -> Registry<dyn Chemistry> {
    Registry::new("chemistry").with(
        LcoGraphite::NAME,
        "LiCoO2 cathode / graphite anode, LIONSIMBA curves",
        |_| -> Box<dyn Chemistry> { Box::new(LcoGraphite) },
    )
}

pub(crate) fn resolve(name: &str) -> crate::Result<Arc<dyn Chemistry>> {
    chemistry_registry().build(name, &()).map(Arc::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Golden values from an independent evaluation of the published curves.
    #[test]
    fn golden_reference_potentials() {
        let c = LcoGraphite;
        assert!((c.reference_potential(Electrode::Positive, 0.5) - 4.234963004675769).abs() < 1e-12);
        assert!((c.reference_potential(Electrode::Negative, 0.5) - 0.12154834559617989).abs() < 1e-12);
        assert!((c.entropic_coefficient(Electrode::Positive, 0.5) + 3.3408894972773696e-05).abs() < 1e-15);
        assert!((c.entropic_coefficient(Electrode::Negative, 0.5) + 1.1033551613793307e-04).abs() < 1e-15);
    }

    #[test]
    fn conductivity_near_one_siemens_per_metre_at_room_temperature() {
        let k = LcoGraphite.electrolyte_conductivity(1000.0, 298.15);
        assert!((k - 1.1943263637750614).abs() < 1e-12);
    }

    #[test]
    fn registry_resolves_default() {
        assert_eq!(resolve("lco-graphite").unwrap().name(), "lco-graphite");
        assert!(resolve("nmc").is_err());
    }
}
