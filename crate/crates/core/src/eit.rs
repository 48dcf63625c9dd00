//! Doppler-averaged ladder EIT (5S1/2 -> 5P3/2 -> 5D5/2) for a locked probe
//! and a scanned coupling laser.
//!
//! Every rate and detuning is a cyclic frequency in MHz. A velocity `v` along
//! the probe shifts the probe by `v / lambda_p` and the two-photon resonance
//! by `v / lambda_p -/+ v / lambda_c` (counter/co-propagating).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::atomic::{AtomicData, Isotope};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::scan::{BeamProfile, ChannelGeometry};
use crate::spectrum::{SpectrumTrace, TraceKind};
use crate::BOLTZMANN;

/// Default coupling Rabi frequency, MHz. Not measured; a few-mW 776 nm beam
/// focused to a few micrometres gives Rabi frequencies of this order.
pub const DEFAULT_OMEGA_C: f64 = 20.0;

/// Temperature of the EIT measurement, K.
pub const DEFAULT_TEMPERATURE: f64 = 460.0;

/// The velocity integral is cut at this many thermal speeds.
const VELOCITY_CUTOFF: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Geometry {
    /// Probe and coupling beams overlap head-on: two-photon Doppler shift
    /// `(k_p - k_c) v`.
    #[default]
    CounterPropagating,
    /// Beams travel together: `(k_p + k_c) v`.
    CoPropagating,
}

impl std::str::FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "counter" | "counter-propagating" => Ok(Geometry::CounterPropagating),
            "co" | "co-propagating" => Ok(Geometry::CoPropagating),
            _ => Err(Error::invalid("geometry", format!("`{s}` is not counter or co"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EitParams {
    /// Coupling Rabi frequency, MHz.
    pub omega_c: f64,
    /// Decay rate of the probe coherence (half the 5P3/2 linewidth), MHz.
    pub gamma_e: f64,
    /// Decay rate of the two-photon coherence from the 5D5/2 lifetime, MHz.
    pub gamma_r: f64,
    /// Extra two-photon dephasing from atoms leaving the interaction region, MHz.
    pub gamma_transit: f64,
    /// m
    pub lambda_p: f64,
    /// m
    pub lambda_c: f64,
    /// MHz; zero when the probe is locked to resonance.
    pub probe_detuning: f64,
    /// K
    pub temperature: f64,
    /// kg
    pub mass: f64,
    pub geometry: Geometry,
    /// FWHM of a Gaussian smoothing applied to the scan, MHz (0 = none).
    pub smoothing_fwhm: f64,
}

impl EitParams {
    /// Probe on Rb87 F=2 -> F'=3 at 460 K, beam-limited transit dephasing for
    /// `beam` inside `channel`, coupling Rabi frequency [`DEFAULT_OMEGA_C`].
    pub fn for_cell(atoms: &AtomicData, beam: &BeamProfile, channel: &ChannelGeometry) -> Result<Self> {
        let rb87 = atoms.isotope(Isotope::Rb87);
        let p = EitParams {
            omega_c: DEFAULT_OMEGA_C,
            gamma_e: 0.5 * rb87.natural_linewidth_5p,
            gamma_r: 0.5 * atoms.ladder.upper_linewidth,
            gamma_transit: transit_rate(beam, channel, DEFAULT_TEMPERATURE, rb87.mass)?,
            lambda_p: atoms.d2_wavelength,
            lambda_c: atoms.ladder.coupling_wavelength,
            probe_detuning: 0.0,
            temperature: DEFAULT_TEMPERATURE,
            mass: rb87.mass,
            geometry: Geometry::default(),
            smoothing_fwhm: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("omega_c", self.omega_c),
            ("gamma_e", self.gamma_e),
            ("gamma_r", self.gamma_r),
            ("gamma_transit", self.gamma_transit),
            ("smoothing_fwhm", self.smoothing_fwhm),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("{v} must be >= 0")));
            }
        }
        if self.gamma_e == 0.0 {
            return Err(Error::invalid("gamma_e", "the probe transition needs a width"));
        }
        if !(self.lambda_p > 0.0 && self.lambda_c > 0.0) {
            return Err(Error::invalid("lambda", "wavelengths must be positive"));
        }
        if self.lambda_p == self.lambda_c {
            return Err(Error::invalid("lambda_c", "must differ from the probe wavelength"));
        }
        if !(self.temperature > 0.0 && self.mass > 0.0) {
            return Err(Error::invalid("temperature", "temperature and mass must be positive"));
        }
        if !self.probe_detuning.is_finite() {
            return Err(Error::invalid("probe_detuning", "must be finite"));
        }
        Ok(())
    }

    /// Probe Doppler shift per unit velocity, MHz / (m/s).
    fn k_p(&self) -> f64 {
        1e-6 / self.lambda_p
    }

    /// Two-photon Doppler shift per unit velocity, MHz / (m/s).
    fn k_two_photon(&self) -> f64 {
        let k_c = 1e-6 / self.lambda_c;
        match self.geometry {
            Geometry::CounterPropagating => self.k_p() - k_c,
            Geometry::CoPropagating => self.k_p() + k_c,
        }
    }

    /// Most probable speed `sqrt(2 k_B T / m)`, m/s.
    fn thermal_speed(&self) -> f64 {
        (2.0 * BOLTZMANN * self.temperature / self.mass).sqrt()
    }
}

/// `sqrt(8 k_B T / (pi m))`, m/s.
pub fn mean_speed(temperature: f64, mass: f64) -> f64 {
    (8.0 * BOLTZMANN * temperature / (PI * mass)).sqrt()
}

/// Transit dephasing rate `v_mean / (2 pi d_eff)` in MHz, where `d_eff` is the
/// smaller of the 1/e^2 beam diameter and the smallest channel dimension.
pub fn transit_rate(beam: &BeamProfile, channel: &ChannelGeometry, temperature: f64, mass: f64) -> Result<f64> {
    if !(temperature > 0.0 && mass > 0.0) {
        return Err(Error::invalid("temperature", "temperature and mass must be positive"));
    }
    let d_eff = beam
        .diameter()
        .min(channel.bottom_width())
        .min(channel.depth());
    Ok(mean_speed(temperature, mass) / (2.0 * PI * d_eff * 1e-6) * 1e-6)
}

/// Weak-probe coherence of the ladder for atoms moving at `v` (m/s) along the
/// probe. The imaginary part is proportional to probe absorption.
pub fn ladder_susceptibility(delta_p: f64, delta_c: f64, p: &EitParams, v: f64) -> Complex64 {
    let i = Complex64::i();
    let two_photon = Complex64::new(p.gamma_r + p.gamma_transit, -(delta_p + delta_c - p.k_two_photon() * v));
    let dressing = 0.25 * p.omega_c * p.omega_c / two_photon;
    let denom = Complex64::new(p.gamma_e, -(delta_p - p.k_p() * v)) + dressing;
    i / denom
}

/// Maxwell-Boltzmann average of `Im chi` at coupling detuning `delta_c`.
pub fn doppler_averaged_absorption(delta_c: f64, p: &EitParams, tol: Tolerance) -> Result<f64> {
    let u = p.thermal_speed();
    let norm = 1.0 / (u * PI.sqrt());
    let f = |v: f64| norm * (-(v / u).powi(2)).exp() * ladder_susceptibility(p.probe_detuning, delta_c, p, v).im;
    // resonant velocity classes of the probe and of the two-photon transition
    let mut cuts = vec![p.probe_detuning / p.k_p(), 0.0];
    let k2 = p.k_two_photon();
    if k2 != 0.0 {
        cuts.push((p.probe_detuning + delta_c) / k2);
    }
    let lim = VELOCITY_CUTOFF * u;
    Ok(integrate(f, -lim, lim, &cuts, tol)?.value)
}

/// Fractional reduction of probe absorption as the coupling laser is scanned
/// over `grid` (MHz): `1 - <Im chi>(delta_c) / <Im chi>(Omega_c = 0)`.
pub fn coupling_scan(grid: &[f64], p: &EitParams) -> Result<SpectrumTrace> {
    coupling_scan_with_tolerance(grid, p, Tolerance::relative(1e-8))
}

pub fn coupling_scan_with_tolerance(grid: &[f64], p: &EitParams, tol: Tolerance) -> Result<SpectrumTrace> {
    p.validate()?;
    let bare = EitParams { omega_c: 0.0, ..*p };
    let reference = doppler_averaged_absorption(0.0, &bare, tol)?;
    if !(reference > 0.0) {
        return Err(Error::Numeric("two-level absorption vanished".into()));
    }
    let values = grid
        .iter()
        .map(|&dc| Ok(1.0 - doppler_averaged_absorption(dc, p, tol)? / reference))
        .collect::<Result<Vec<f64>>>()?;
    let mut trace = SpectrumTrace::new(grid.to_vec(), values, TraceKind::TransmissionChange)?;
    if p.smoothing_fwhm > 0.0 {
        trace = gaussian_smooth(&trace, p.smoothing_fwhm);
    }
    trace.set_meta("omega_c_MHz", p.omega_c);
    trace.set_meta("gamma_transit_MHz", p.gamma_transit);
    trace.set_meta("temperature_K", p.temperature);
    Ok(trace)
}

/// Convolution with a unit-area Gaussian of the given FWHM, renormalized at
/// each point so edges and non-uniform grids are handled.
pub fn gaussian_smooth(trace: &SpectrumTrace, fwhm: f64) -> SpectrumTrace {
    let sigma = fwhm / crate::lineshape::FWHM_PER_SIGMA;
    let x = trace.detunings();
    let y = trace.values();
    let n = x.len();
    // trapezoid weights
    let w: Vec<f64> = (0..n)
        .map(|j| {
            let left = if j > 0 { x[j] - x[j - 1] } else { 0.0 };
            let right = if j + 1 < n { x[j + 1] - x[j] } else { 0.0 };
            0.5 * (left + right).max(f64::MIN_POSITIVE)
        })
        .collect();
    let smoothed = (0..n)
        .map(|i| {
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..n {
                let k = w[j] * (-0.5 * ((x[i] - x[j]) / sigma).powi(2)).exp();
                num += k * y[j];
                den += k;
            }
            num / den
        })
        .collect();
    let mut out = SpectrumTrace::new(x.to_vec(), smoothed, trace.kind()).expect("same grid, finite values");
    for (k, v) in trace.metadata() {
        out.set_meta(k.clone(), v);
    }
    out.set_meta("smoothing_fwhm_MHz", fwhm);
    out
}

/// FWHM of the transparency peak in a coupling scan.
pub fn transparency_fwhm(trace: &SpectrumTrace) -> Result<f64> {
    crate::scan::fwhm(trace.detunings(), trace.values())
        .ok_or_else(|| Error::Numeric("no transparency peak resolved on the scan grid".into()))
}
