//! Equations of state mapping density to pressure at a given temperature.
//!
//! All quantities are SI. The empirical CNGA compressibility fit is written in
//! psi and degrees Rankine; those conversions live only in
//! [`cnga_coefficients`], which folds them into a pair `(b1, b2)` such that
//!
//! ```text
//! Z(p) = 1 / (b1 + b2 p)        p in Pa
//! p (b1 + b2 p) = R T rho
//! ```
//!
//! Every model reduces, at a fixed position, to a [`LocalEos`]: either the
//! ideal law `p = c^2 rho` or the quadratic CNGA law above. The pipe solver
//! samples a model once per cell and works with the local form only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Universal gas constant, J/(k-mol K).
pub const UNIVERSAL_GAS_CONSTANT: f64 = 8314.46;
/// Molar mass of air, kg/k-mol.
pub const MOLAR_MASS_AIR: f64 = 28.9626;
/// Pa per psi.
pub const PA_PER_PSI: f64 = 6894.75729;
/// Atmospheric pressure in psi used by the gauge-pressure form of the fit.
pub const ATMOSPHERE_PSI: f64 = 14.7;
/// Kelvin to Rankine.
pub const RANKINE_PER_KELVIN: f64 = 1.8;

/// Isothermal CNGA pair at 60 F for the 80/20 methane-ethane mix.
pub const REFERENCE_B1: f64 = 1.00300865;
pub const REFERENCE_B2: f64 = 2.96848838e-8;
/// Nominal R T for the same gas at 288.706 K, J/kg.
pub const REFERENCE_RT: f64 = 1.368207e5;
pub const REFERENCE_TEMPERATURE: f64 = 288.706;
pub const REFERENCE_GRAVITY: f64 = 0.650784;

/// Coefficients of the CNGA compressibility fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasConstants {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// Gas gravity relative to air.
    pub gravity: f64,
}

impl Default for GasConstants {
    fn default() -> Self {
        GasConstants {
            a1: 344400.0,
            a2: 1.785,
            a3: 3.825,
            gravity: REFERENCE_GRAVITY,
        }
    }
}

impl GasConstants {
    pub fn with_gravity(gravity: f64) -> Self {
        GasConstants {
            gravity,
            ..Default::default()
        }
    }

    /// `a1 10^(a2 G) / 1.8^a3`, the temperature-free part of the fit in SI.
    pub fn c1(&self) -> f64 {
        self.a1 * 10f64.powf(self.a2 * self.gravity) / RANKINE_PER_KELVIN.powf(self.a3)
    }

    pub fn c2(&self) -> f64 {
        ATMOSPHERE_PSI
    }

    pub fn c3(&self) -> f64 {
        PA_PER_PSI
    }
}

/// Returns `(b1, b2)` of the linearized CNGA fit at temperature `t_kelvin`.
pub fn cnga_coefficients(t_kelvin: f64, constants: &GasConstants) -> Result<(f64, f64)> {
    if !(t_kelvin > 0.0) || !t_kelvin.is_finite() {
        return Err(Error::domain(format!("temperature must be positive, got {t_kelvin} K")));
    }
    if !(constants.gravity > 0.0) {
        return Err(Error::domain(format!(
            "gas gravity must be positive, got {}",
            constants.gravity
        )));
    }
    let scale = constants.c1() / t_kelvin.powf(constants.a3);
    Ok((1.0 + scale * constants.c2(), scale / constants.c3()))
}

/// Specific gas constant `R_u / (M_air G)` in J/(kg K).
pub fn gas_constant_from_gravity(gravity: f64) -> Result<f64> {
    if !(gravity > 0.0) {
        return Err(Error::domain(format!("gas gravity must be positive, got {gravity}")));
    }
    Ok(UNIVERSAL_GAS_CONSTANT / (MOLAR_MASS_AIR * gravity))
}

/// Static temperature field `T(x) = T_ambient + T_jump exp(-r x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureProfile {
    pub ambient: f64,
    pub jump: f64,
    /// Decay rate, 1/m.
    pub decay_rate: f64,
}

impl TemperatureProfile {
    pub fn temperature_at(&self, x: f64) -> f64 {
        self.ambient + self.jump * (-self.decay_rate * x).exp()
    }
}

pub fn temperature_at(x: f64, profile: &TemperatureProfile) -> f64 {
    profile.temperature_at(x)
}

/// Equation of state at a fixed position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalEos {
    /// `p = c2 rho`, with `c2` the squared wave speed.
    Ideal { c2: f64 },
    /// `p (b1 + b2 p) = rt rho`.
    Quadratic { b1: f64, b2: f64, rt: f64 },
}

impl LocalEos {
    #[inline]
    pub fn pressure(&self, rho: f64) -> f64 {
        match *self {
            LocalEos::Ideal { c2 } => c2 * rho,
            LocalEos::Quadratic { b1, b2, rt } => {
                // positive root of b2 p^2 + b1 p - rt rho = 0, rationalized
                2.0 * rt * rho / (b1 + (b1 * b1 + 4.0 * b2 * rt * rho).sqrt())
            }
        }
    }

    #[inline]
    pub fn density(&self, p: f64) -> f64 {
        match *self {
            LocalEos::Ideal { c2 } => p / c2,
            LocalEos::Quadratic { b1, b2, rt } => p * (b1 + b2 * p) / rt,
        }
    }

    /// `dP/drho`, the squared local wave speed.
    #[inline]
    pub fn wave_speed_sq(&self, rho: f64) -> f64 {
        match *self {
            LocalEos::Ideal { c2 } => c2,
            // b1 + 2 b2 P(rho) == sqrt(b1^2 + 4 b2 rt rho)
            LocalEos::Quadratic { b1, b2, rt } => rt / (b1 * b1 + 4.0 * b2 * rt * rho).sqrt(),
        }
    }

    #[inline]
    pub fn compressibility(&self, p: f64) -> f64 {
        match *self {
            LocalEos::Ideal { .. } => 1.0,
            LocalEos::Quadratic { b1, b2, .. } => 1.0 / (b1 + b2 * p),
        }
    }

    /// `(lin, quad)` with `rho = lin p + quad p^2`.
    #[inline]
    pub fn density_coefficients(&self) -> (f64, f64) {
        match *self {
            LocalEos::Ideal { c2 } => (1.0 / c2, 0.0),
            LocalEos::Quadratic { b1, b2, rt } => (b1 / rt, b2 / rt),
        }
    }
}

/// Density-pressure relation of the gas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EosModel {
    /// Ideal gas with constant wave speed (m/s).
    Ideal { wave_speed: f64 },
    /// Isothermal CNGA with explicit coefficients.
    Cnga { b1: f64, b2: f64, rt: f64 },
    /// Isothermal CNGA derived from temperature and gas gravity.
    CngaDetailed {
        temperature: f64,
        gas_gravity: f64,
        /// Overrides `R_u / (M_air G)` when set, J/(kg K).
        gas_constant: Option<f64>,
    },
    /// CNGA with a static, position-dependent temperature.
    NonIsothermal {
        profile: TemperatureProfile,
        gas_gravity: f64,
        gas_constant: Option<f64>,
    },
}

impl Default for EosModel {
    fn default() -> Self {
        EosModel::reference_cnga()
    }
}

impl EosModel {
    /// The isothermal CNGA model with the published reference constants.
    pub fn reference_cnga() -> Self {
        EosModel::Cnga {
            b1: REFERENCE_B1,
            b2: REFERENCE_B2,
            rt: REFERENCE_RT,
        }
    }

    pub fn ideal(wave_speed: f64) -> Self {
        EosModel::Ideal { wave_speed }
    }

    /// True when the local law does not depend on position.
    pub fn is_isothermal(&self) -> bool {
        !matches!(self, EosModel::NonIsothermal { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::domain(format!("{what} must be positive, got {v}")));
        match *self {
            EosModel::Ideal { wave_speed } if !(wave_speed > 0.0) => bad("wave_speed", wave_speed),
            EosModel::Cnga { b1, b2, rt } => {
                if !(b1 >= 1.0) {
                    return Err(Error::domain(format!("b1 must be at least 1, got {b1}")));
                }
                if !(b2 > 0.0) {
                    return bad("b2", b2);
                }
                if !(rt > 0.0) {
                    return bad("RT", rt);
                }
                Ok(())
            }
            EosModel::CngaDetailed {
                temperature,
                gas_gravity,
                gas_constant,
            } => {
                if !(temperature > 0.0) {
                    return bad("T_kelvin", temperature);
                }
                if !(gas_gravity > 0.0) {
                    return bad("gas_gravity", gas_gravity);
                }
                match gas_constant {
                    Some(r) if !(r > 0.0) => bad("gas_constant", r),
                    _ => Ok(()),
                }
            }
            EosModel::NonIsothermal {
                profile,
                gas_gravity,
                gas_constant,
            } => {
                if !(profile.ambient > 0.0) {
                    return bad("T_ambient", profile.ambient);
                }
                if profile.jump < 0.0 {
                    return Err(Error::domain("T_jump must be non-negative"));
                }
                if profile.decay_rate < 0.0 {
                    return Err(Error::domain("decay_rate must be non-negative"));
                }
                if !(gas_gravity > 0.0) {
                    return bad("gas_gravity", gas_gravity);
                }
                match gas_constant {
                    Some(r) if !(r > 0.0) => bad("gas_constant", r),
                    _ => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    /// Local law at position `x` (metres from the pipe inlet).
    pub fn local_at(&self, x: f64) -> Result<LocalEos> {
        self.validate()?;
        match *self {
            EosModel::Ideal { wave_speed } => Ok(LocalEos::Ideal {
                c2: wave_speed * wave_speed,
            }),
            EosModel::Cnga { b1, b2, rt } => Ok(LocalEos::Quadratic { b1, b2, rt }),
            EosModel::CngaDetailed {
                temperature,
                gas_gravity,
                gas_constant,
            } => quadratic_at(temperature, gas_gravity, gas_constant),
            EosModel::NonIsothermal {
                profile,
                gas_gravity,
                gas_constant,
            } => {
                if x < 0.0 {
                    return Err(Error::domain(format!("position must be non-negative, got {x}")));
                }
                quadratic_at(profile.temperature_at(x), gas_gravity, gas_constant)
            }
        }
    }

    pub fn compressibility(&self, p: f64, x: f64) -> Result<f64> {
        check_non_negative("pressure", p)?;
        Ok(self.local_at(x)?.compressibility(p))
    }

    pub fn density_from_pressure(&self, p: f64, x: f64) -> Result<f64> {
        check_non_negative("pressure", p)?;
        Ok(self.local_at(x)?.density(p))
    }

    pub fn pressure_from_density(&self, rho: f64, x: f64) -> Result<f64> {
        check_non_negative("density", rho)?;
        Ok(self.local_at(x)?.pressure(rho))
    }

    pub fn wave_speed_sq(&self, rho: f64, x: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(Error::domain(format!("density must be positive, got {rho}")));
        }
        Ok(self.local_at(x)?.wave_speed_sq(rho))
    }
}

fn quadratic_at(temperature: f64, gravity: f64, gas_constant: Option<f64>) -> Result<LocalEos> {
    let (b1, b2) = cnga_coefficients(temperature, &GasConstants::with_gravity(gravity))?;
    let r = match gas_constant {
        Some(r) => r,
        None => gas_constant_from_gravity(gravity)?,
    };
    Ok(LocalEos::Quadratic {
        b1,
        b2,
        rt: r * temperature,
    })
}

fn check_non_negative(what: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must be non-negative, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference() -> EosModel {
        EosModel::reference_cnga()
    }

    #[test]
    fn coefficients_match_reference_pair() {
        let (b1, b2) = cnga_coefficients(REFERENCE_TEMPERATURE, &GasConstants::default()).unwrap();
        assert_relative_eq!(b1, REFERENCE_B1, max_relative = 1e-2);
        assert_relative_eq!(b2, REFERENCE_B2, max_relative = 1e-2);
    }

    #[test]
    fn coefficients_agree_with_raw_rankine_form() {
        // 1/Z = 1 + a1 (14.7 + p/6894.75729) 10^(a2 G) / (1.8 T)^a3
        let g = GasConstants::default();
        let t = REFERENCE_TEMPERATURE;
        let inv_z = |p: f64| 1.0 + g.a1 * (14.7 + p / 6894.75729) * 10f64.powf(g.a2 * g.gravity) / (1.8 * t).powf(g.a3);
        let raw_b1 = inv_z(0.0);
        let raw_b2 = g.a1 * 10f64.powf(g.a2 * g.gravity) / (6894.75729 * (1.8 * t).powf(g.a3));
        let (b1, b2) = cnga_coefficients(t, &g).unwrap();
        assert_relative_eq!(b1, raw_b1, max_relative = 1e-12);
        assert_relative_eq!(b2, raw_b2, max_relative = 1e-12);
        assert_relative_eq!(1.0 / (b1 + b2 * 5e6), 1.0 / inv_z(5e6), max_relative = 1e-12);
    }

    #[test]
    fn c1_matches_published_constant() {
        assert_relative_eq!(GasConstants::default().c1(), 527588.415238, max_relative = 1e-9);
        assert_eq!(GasConstants::default().c3(), 6894.75729);
    }

    #[test]
    fn hot_gas_tends_to_ideal() {
        let (b1, b2) = cnga_coefficients(1e6, &GasConstants::default()).unwrap();
        assert!((b1 - 1.0).abs() < 1e-12);
        assert!(b2 < 1e-20);
    }

    #[test]
    fn non_positive_temperature_is_rejected() {
        assert!(cnga_coefficients(0.0, &GasConstants::default()).is_err());
        assert!(cnga_coefficients(-3.0, &GasConstants::default()).is_err());
    }

    #[test]
    fn compressibility_values() {
        assert_eq!(EosModel::ideal(338.25).compressibility(6.5e6, 0.0).unwrap(), 1.0);
        let z0 = reference().compressibility(0.0, 0.0).unwrap();
        assert_eq!(z0, 1.0 / REFERENCE_B1);
        assert!(reference().compressibility(-1.0, 0.0).is_err());
        let z = reference().compressibility(6.5e6, 0.0).unwrap();
        assert!((z - 0.83615).abs() < 2e-5, "z = {z}");
    }

    #[test]
    fn reference_density_at_operating_pressure() {
        let rho = reference().density_from_pressure(6.5e6, 0.0).unwrap();
        assert!((rho - 56.817).abs() < 0.01, "rho = {rho}");
        assert_eq!(reference().density_from_pressure(0.0, 0.0).unwrap(), 0.0);
        let ideal = EosModel::ideal(338.25).density_from_pressure(6.5e6, 0.0).unwrap();
        assert_relative_eq!(ideal, 6.5e6 / (338.25 * 338.25), max_relative = 1e-15);
        assert!((ideal - 56.81).abs() < 0.01);
        assert!(reference().density_from_pressure(-5.0, 0.0).is_err());
    }

    #[test]
    fn reference_pressure_from_density() {
        let p = reference().pressure_from_density(56.817, 0.0).unwrap();
        assert!((p - 6.5e6).abs() < 1e3, "p = {p}");
        assert_eq!(reference().pressure_from_density(0.0, 0.0).unwrap(), 0.0);
        assert!(reference().pressure_from_density(-1e-3, 0.0).is_err());
    }

    #[test]
    fn wave_speed_values() {
        let c2 = EosModel::ideal(338.25).wave_speed_sq(10.0, 0.0).unwrap();
        assert_relative_eq!(c2, 114413.0625, max_relative = 1e-15);
        let low = reference().wave_speed_sq(1e-12, 0.0).unwrap();
        assert_relative_eq!(low, REFERENCE_RT / REFERENCE_B1, max_relative = 1e-9);
        assert!(reference().wave_speed_sq(0.0, 0.0).is_err());
    }

    #[test]
    fn wave_speed_matches_finite_difference_at_operating_point() {
        let m = reference();
        let rho = 56.817;
        let h = 1e-4;
        let fd = (m.pressure_from_density(rho + h, 0.0).unwrap() - m.pressure_from_density(rho - h, 0.0).unwrap())
            / (2.0 * h);
        assert_relative_eq!(m.wave_speed_sq(rho, 0.0).unwrap(), fd, max_relative = 1e-6);
    }

    #[test]
    fn gas_constant_values() {
        assert!((gas_constant_from_gravity(1.0).unwrap() - 287.06).abs() < 0.02);
        assert!((gas_constant_from_gravity(REFERENCE_GRAVITY).unwrap() - 441.1).abs() < 0.05);
        assert!(gas_constant_from_gravity(1e12).unwrap() < 1e-8);
        assert!(gas_constant_from_gravity(0.0).is_err());
    }

    #[test]
    fn temperature_profile_values() {
        let prof = TemperatureProfile {
            ambient: 288.706,
            jump: 40.0,
            decay_rate: 1e-3,
        };
        assert_relative_eq!(prof.temperature_at(0.0), 328.706, max_relative = 1e-15);
        assert_relative_eq!(prof.temperature_at(1e9), 288.706, max_relative = 1e-15);
        assert!((prof.temperature_at(1000.0) - 303.421).abs() < 1e-3);
    }

    #[test]
    fn non_isothermal_uses_local_temperature() {
        let m = EosModel::NonIsothermal {
            profile: TemperatureProfile {
                ambient: 288.706,
                jump: 40.0,
                decay_rate: 1e-3,
            },
            gas_gravity: REFERENCE_GRAVITY,
            gas_constant: None,
        };
        let hot = m.density_from_pressure(6.5e6, 0.0).unwrap();
        let cold = m.density_from_pressure(6.5e6, 50_000.0).unwrap();
        assert!(hot < cold);
        assert!(m.density_from_pressure(6.5e6, -1.0).is_err());
    }

    #[test]
    fn pressure_is_strictly_increasing() {
        for m in [reference(), EosModel::ideal(338.25)] {
            let mut prev = -1.0;
            for k in 0..1000 {
                let p = m.pressure_from_density(k as f64 * 0.2, 0.0).unwrap();
                assert!(p > prev);
                prev = p;
            }
        }
    }

    #[test]
    fn cnga_approaches_ideal_when_b2_vanishes() {
        let rt = REFERENCE_RT;
        let ideal = LocalEos::Ideal { c2: rt };
        for b2 in [1e-9, 1e-11, 1e-13] {
            let q = LocalEos::Quadratic { b1: 1.0, b2, rt };
            for p in [1e5, 1e6, 1e7] {
                let gap = (q.density(p) - ideal.density(p)).abs() / ideal.density(p);
                assert!(gap <= 10.0 * b2 * p);
            }
        }
    }

    proptest! {
        #[test]
        fn density_pressure_round_trip(p in 1e4f64..2e7, which in 0usize..3) {
            let m = match which {
                0 => reference(),
                1 => EosModel::ideal(377.9683),
                _ => EosModel::CngaDetailed { temperature: 300.0, gas_gravity: 0.6, gas_constant: None },
            };
            let rho = m.density_from_pressure(p, 0.0).unwrap();
            let back = m.pressure_from_density(rho, 0.0).unwrap();
            prop_assert!((back - p).abs() / p <= 1e-10);
        }

        #[test]
        fn wave_speed_is_the_derivative(rho in 1.0f64..150.0) {
            let m = reference();
            let h = 1e-4 * rho;
            let fd = (m.pressure_from_density(rho + h, 0.0).unwrap()
                - m.pressure_from_density(rho - h, 0.0).unwrap()) / (2.0 * h);
            let exact = m.wave_speed_sq(rho, 0.0).unwrap();
            prop_assert!((exact - fd).abs() / exact <= 1e-6);
        }
    }
}
