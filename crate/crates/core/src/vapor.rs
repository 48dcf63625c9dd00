//! Saturated rubidium vapor pressure and number density.
//!
//! The pressure follows the two-coefficient liquid-branch correlation
//! `log10(p / Pa) = A - B / T`; both coefficients and the validity interval
//! come from the constants table.

use serde::Serialize;

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::BOLTZMANN;

pub const ZERO_CELSIUS: f64 = 273.15;

pub fn celsius_to_kelvin(c: f64) -> f64 {
    c + ZERO_CELSIUS
}

pub fn kelvin_to_celsius(k: f64) -> f64 {
    k - ZERO_CELSIUS
}

/// n = p / (k_B T).
pub fn ideal_gas_density(pressure: f64, temperature: f64) -> f64 {
    pressure / (BOLTZMANN * temperature)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VaporModel {
    /// log10(Pa)
    pub a: f64,
    /// K
    pub b: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl VaporModel {
    pub fn from_constants(c: &Constants) -> Result<Self> {
        let model = VaporModel {
            a: c.get("vapor.alcock.a")?,
            b: c.get("vapor.alcock.b")?,
            t_min: c.get("vapor.valid_min")?,
            t_max: c.get("vapor.valid_max")?,
        };
        if !(model.b > 0.0 && model.t_min > 0.0 && model.t_max > model.t_min) {
            return Err(Error::Config(
                "vapor model needs B > 0 and 0 < valid_min < valid_max".into(),
            ));
        }
        Ok(model)
    }

    pub fn bundled() -> Self {
        Self::from_constants(&Constants::bundled()).expect("bundled constants are consistent")
    }

    fn check(&self, t: f64) -> Result<()> {
        if t.is_finite() && t >= self.t_min && t <= self.t_max {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                temperature: t,
                min: self.t_min,
                max: self.t_max,
            })
        }
    }

    /// Saturated vapor pressure in Pa at temperature `t` (K).
    pub fn vapor_pressure(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(10f64.powf(self.a - self.b / t))
    }

    /// dp/dT in Pa/K.
    pub fn vapor_pressure_slope(&self, t: f64) -> Result<f64> {
        let p = self.vapor_pressure(t)?;
        Ok(p * std::f64::consts::LN_10 * self.b / (t * t))
    }

    /// Atomic number density in m^-3.
    pub fn number_density(&self, t: f64) -> Result<f64> {
        Ok(ideal_gas_density(self.vapor_pressure(t)?, t))
    }

    pub fn validity(&self) -> (f64, f64) {
        (self.t_min, self.t_max)
    }
}

/// Thermodynamic and geometric state of one measurement.
///
/// The reservoir (plus calibration offset) sets the vapor density; the hotter
/// cell body sets the Doppler width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellConditions {
    /// K, as read by the reservoir sensor.
    pub reservoir_t: f64,
    /// K
    pub cell_t: f64,
    /// m
    pub path_length: f64,
    /// Homogeneous width on top of the natural linewidth, MHz FWHM.
    pub lorentz_extra: f64,
    /// K, added to `reservoir_t` before evaluating the vapor pressure.
    pub temperature_offset: f64,
    /// m^-3; replaces the vapor-pressure density when set.
    pub density_override: Option<f64>,
}

impl CellConditions {
    pub fn new(reservoir_t: f64, cell_t: f64, path_length: f64) -> Result<Self> {
        let c = CellConditions {
            reservoir_t,
            cell_t,
            path_length,
            lorentz_extra: 0.0,
            temperature_offset: 0.0,
            density_override: None,
        };
        c.validate()?;
        Ok(c)
    }

    /// Conditions given in degrees Celsius; `path_length` in m.
    pub fn from_celsius(reservoir_c: f64, cell_c: f64, path_length: f64) -> Result<Self> {
        Self::new(celsius_to_kelvin(reservoir_c), celsius_to_kelvin(cell_c), path_length)
    }

    pub fn with_lorentz_extra(mut self, mhz: f64) -> Result<Self> {
        self.lorentz_extra = mhz;
        self.validate()?;
        Ok(self)
    }

    pub fn with_offset(mut self, kelvin: f64) -> Self {
        self.temperature_offset = kelvin;
        self
    }

    pub fn with_path_length(mut self, meters: f64) -> Result<Self> {
        self.path_length = meters;
        self.validate()?;
        Ok(self)
    }

    pub fn with_density(mut self, density: f64) -> Result<Self> {
        if !(density >= 0.0 && density.is_finite()) {
            return Err(Error::invalid("density_override", format!("{density} is not a density")));
        }
        self.density_override = Some(density);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reservoir_t > 0.0 && self.cell_t.is_finite()) {
            return Err(Error::invalid("reservoir_t", "temperatures must be positive"));
        }
        if self.cell_t < self.reservoir_t {
            return Err(Error::invalid(
                "cell_t",
                format!(
                    "cell ({} K) must not be colder than the reservoir ({} K)",
                    self.cell_t, self.reservoir_t
                ),
            ));
        }
        if !(self.path_length > 0.0 && self.path_length.is_finite()) {
            return Err(Error::invalid("path_length", "must be positive"));
        }
        if !(self.lorentz_extra >= 0.0 && self.lorentz_extra.is_finite()) {
            return Err(Error::invalid("lorentz_extra", "must be non-negative"));
        }
        if !self.temperature_offset.is_finite() {
            return Err(Error::invalid("temperature_offset", "must be finite"));
        }
        Ok(())
    }

    /// Temperature that controls the vapor pressure.
    pub fn effective_reservoir_t(&self) -> f64 {
        self.reservoir_t + self.temperature_offset
    }

    pub fn density(&self, vapor: &VaporModel) -> Result<f64> {
        match self.density_override {
            Some(n) => Ok(n),
            None => vapor.number_density(self.effective_reservoir_t()),
        }
    }
}
