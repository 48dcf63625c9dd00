//! Absolute D2 absorption spectra, transmission, optical density, and the
//! fluorescence proxy for the two-step excitation.
//!
//! The absorption coefficient is a sum over the twelve hyperfine lines of
//! both isotopes,
//!
//! ```text
//! alpha(D) = n * sum_lines  A_line * V(D - D_line; sigma_iso(T_cell), (Gamma_nat + Gamma_extra) / 2)
//! ```
//!
//! where `V` is the unit-area Voigt profile and `A_line` (m^2 MHz) is the
//! frequency-integrated cross section per rubidium atom. Ground sublevels are
//! equally populated and the probe is unpolarized, so the isotope-summed
//! integrated cross section is `lambda^2 Gamma (2J'+1) / (4 (2J+1))`, i.e. two
//! thirds of the two-level resonant value `3 lambda^2 / 2 pi` spread over a
//! natural Lorentzian.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::atomic::{AtomicData, ElectronicState, HyperfineTransition, Isotope, TransitionLabel};
use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::lineshape::{doppler_width, voigt, voigt_gradient, VoigtParams, FWHM_PER_SIGMA};
use crate::vapor::{CellConditions, VaporModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceKind {
    /// m^-1
    AbsorptionCoefficient,
    Transmission,
    OpticalDensity,
    /// Arbitrary units.
    Fluorescence,
    /// Fractional reduction of probe absorption (EIT coupling scans).
    TransmissionChange,
}

impl TraceKind {
    pub fn name(self) -> &'static str {
        match self {
            TraceKind::AbsorptionCoefficient => "absorption_coefficient",
            TraceKind::Transmission => "transmission",
            TraceKind::OpticalDensity => "optical_density",
            TraceKind::Fluorescence => "fluorescence",
            TraceKind::TransmissionChange => "transmission_change",
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TraceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            TraceKind::AbsorptionCoefficient,
            TraceKind::Transmission,
            TraceKind::OpticalDensity,
            TraceKind::Fluorescence,
            TraceKind::TransmissionChange,
        ]
        .into_iter()
        .find(|k| k.name() == s.trim())
        .ok_or_else(|| Error::Data(format!("unknown trace kind `{s}`")))
    }
}

/// Values sampled on a strictly increasing detuning grid (MHz), with
/// free-form `key=value` metadata carried through CSV round trips.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    detunings: Vec<f64>,
    values: Vec<f64>,
    kind: TraceKind,
    metadata: Vec<(String, String)>,
}

impl SpectrumTrace {
    pub fn new(detunings: Vec<f64>, values: Vec<f64>, kind: TraceKind) -> Result<Self> {
        if detunings.len() != values.len() {
            return Err(Error::Data(format!(
                "{} detunings but {} values",
                detunings.len(),
                values.len()
            )));
        }
        check_grid(&detunings)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("value at index {i} is not finite")));
        }
        Ok(SpectrumTrace {
            detunings,
            values,
            kind,
            metadata: Vec::new(),
        })
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> TraceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.detunings.iter().copied().zip(self.values.iter().copied())
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Sets or replaces one metadata entry.
    pub fn set_meta(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        let key = key.into();
        let value = value.to_string();
        match self.metadata.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.metadata.push((key, value)),
        }
    }

    pub fn with_conditions(mut self, cond: &CellConditions) -> Self {
        for (k, v) in conditions_metadata(cond) {
            self.set_meta(k, v);
        }
        self
    }

    /// Checks the physical range of the kind: transmission in [0, 1], OD and
    /// absorption non-negative. Measured data may legitimately violate this.
    pub fn check_physical(&self) -> Result<()> {
        let ok = |pred: &dyn Fn(f64) -> bool| self.values.iter().all(|&v| pred(v));
        let fine = match self.kind {
            TraceKind::Transmission => ok(&|v| (0.0..=1.0).contains(&v)),
            TraceKind::OpticalDensity | TraceKind::AbsorptionCoefficient => ok(&|v| v >= 0.0),
            _ => true,
        };
        if fine {
            Ok(())
        } else {
            Err(Error::Data(format!("{} values outside their physical range", self.kind)))
        }
    }

    /// Piecewise-linear interpolation; `None` outside the grid.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let d = &self.detunings;
        if d.is_empty() || x < d[0] || x > d[d.len() - 1] {
            return None;
        }
        let i = d.partition_point(|&g| g <= x);
        if i == 0 {
            return Some(self.values[0]);
        }
        if i == d.len() {
            return Some(self.values[d.len() - 1]);
        }
        let (x0, x1) = (d[i - 1], d[i]);
        let t = (x - x0) / (x1 - x0);
        Some(self.values[i - 1] * (1.0 - t) + self.values[i] * t)
    }

    /// Returns a copy with every detuning shifted by `delta` MHz.
    pub fn shifted(&self, delta: f64) -> Self {
        let mut out = self.clone();
        out.detunings.iter_mut().for_each(|d| *d += delta);
        out
    }

    /// Adds zero-mean Gaussian noise of standard deviation `sigma` (same units
    /// as the values), reproducibly from `seed`.
    pub fn with_gaussian_noise(&self, sigma: f64, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, sigma)
            .map_err(|_| Error::invalid("noise", format!("{sigma} is not a standard deviation")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        out.set_meta("noise_sigma", sigma);
        out.set_meta("noise_seed", seed);
        Ok(out)
    }

    /// Writes the trace as two-column CSV preceded by a `# key=value ...` line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "# kind={}", self.kind)?;
        for (k, v) in &self.metadata {
            write!(w, " {k}={v}")?;
        }
        writeln!(w)?;
        writeln!(w, "detuning_MHz,{}", self.kind)?;
        for (d, v) in self.iter() {
            writeln!(w, "{d},{v}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut metadata = Vec::new();
        let mut kind: Option<TraceKind> = None;
        let mut header_seen = false;
        let mut detunings = Vec::new();
        let mut values = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for token in comment.split_whitespace() {
                    if let Some((k, v)) = token.split_once('=') {
                        if k == "kind" {
                            kind = Some(v.parse()?);
                        } else {
                            metadata.push((k.to_owned(), v.to_owned()));
                        }
                    }
                }
                continue;
            }
            if !header_seen {
                header_seen = true;
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols.len() == 2 && cols[1].parse::<f64>().is_err() {
                    if kind.is_none() {
                        kind = Some(cols[1].parse()?);
                    }
                    continue;
                }
            }
            let bad = || Error::Data(format!("line {}: expected `detuning,value`, got `{line}`", idx + 1));
            let (d, v) = line.split_once(',').ok_or_else(bad)?;
            detunings.push(d.trim().parse::<f64>().map_err(|_| bad())?);
            values.push(v.trim().parse::<f64>().map_err(|_| bad())?);
        }
        let kind = kind.ok_or_else(|| Error::Data("trace kind not given in header".into()))?;
        let mut trace = SpectrumTrace::new(detunings, values, kind)?;
        trace.metadata = metadata;
        Ok(trace)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if let Some(i) = grid.iter().position(|d| !d.is_finite()) {
        return Err(Error::Data(format!("detuning at index {i} is not finite")));
    }
    if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Data(format!(
            "detuning grid not strictly increasing at index {}",
            i + 1
        )));
    }
    Ok(())
}

/// `start, start + step, ...` up to and including `stop` (within rounding).
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
        return Err(Error::invalid("grid", format!("cannot step {start}..{stop} by {step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// -4000 to +7000 MHz in 2 MHz steps: covers all twelve D2 lines.
pub fn default_grid() -> Vec<f64> {
    uniform_grid(-4000.0, 7000.0, 2.0).expect("constant grid is valid")
}

/// Cell conditions as CSV metadata (`reservoir_K=...` etc).
pub fn conditions_metadata(cond: &CellConditions) -> Vec<(String, String)> {
    let mut out = vec![
        ("reservoir_K".to_owned(), cond.reservoir_t.to_string()),
        ("cell_K".to_owned(), cond.cell_t.to_string()),
        ("path_length_m".to_owned(), cond.path_length.to_string()),
        ("lorentz_extra_MHz".to_owned(), cond.lorentz_extra.to_string()),
        ("temperature_offset_K".to_owned(), cond.temperature_offset.to_string()),
    ];
    if let Some(n) = cond.density_override {
        out.push(("density_m3".to_owned(), n.to_string()));
    }
    out
}

/// Rebuilds cell conditions from trace metadata written by [`conditions_metadata`].
pub fn conditions_from_metadata(trace: &SpectrumTrace) -> Result<CellConditions> {
    let num = |key: &str| -> Result<Option<f64>> {
        trace
            .meta(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Data(format!("metadata `{key}={v}` is not a number")))
            })
            .transpose()
    };
    let need = |key: &str| -> Result<f64> {
        num(key)?.ok_or_else(|| Error::Data(format!("trace metadata lacks `{key}`")))
    };
    let mut cond = CellConditions::new(need("reservoir_K")?, need("cell_K")?, need("path_length_m")?)?
        .with_lorentz_extra(num("lorentz_extra_MHz")?.unwrap_or(0.0))?
        .with_offset(num("temperature_offset_K")?.unwrap_or(0.0));
    if let Some(n) = num("density_m3")? {
        cond = cond.with_density(n)?;
    }
    Ok(cond)
}

/// Beer-Lambert transmission `exp(-alpha L)` through `path_length` metres.
pub fn transmission(alpha: &SpectrumTrace, path_length: f64) -> Result<SpectrumTrace> {
    beer_lambert(alpha, path_length, TraceKind::Transmission, |od| (-od).exp())
}

/// Optical density `alpha L`.
pub fn optical_density(alpha: &SpectrumTrace, path_length: f64) -> Result<SpectrumTrace> {
    beer_lambert(alpha, path_length, TraceKind::OpticalDensity, |od| od)
}

fn beer_lambert(
    alpha: &SpectrumTrace,
    path_length: f64,
    kind: TraceKind,
    f: impl Fn(f64) -> f64,
) -> Result<SpectrumTrace> {
    if alpha.kind != TraceKind::AbsorptionCoefficient {
        return Err(Error::WrongKind {
            expected: TraceKind::AbsorptionCoefficient.name(),
            found: alpha.kind.name(),
        });
    }
    if !(path_length > 0.0 && path_length.is_finite()) {
        return Err(Error::invalid("path_length", "must be positive"));
    }
    let mut out = alpha.clone();
    out.kind = kind;
    out.values.iter_mut().for_each(|a| *a = f(*a * path_length));
    out.set_meta("path_length_m", path_length);
    Ok(out)
}

/// One hyperfine line with its absolute integrated cross section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineTerm {
    pub transition: HyperfineTransition,
    /// Frequency-integrated cross section per rubidium atom (any isotope), m^2 MHz.
    pub integrated_cross_section: f64,
    /// kg
    pub mass: f64,
}

/// Per-isotope Voigt widths for given conditions.
#[derive(Debug, Clone, Copy)]
pub struct LineWidths {
    /// Gaussian sigma for Rb85 and Rb87, MHz.
    pub sigma: [f64; 2],
    /// Extra Lorentzian HWHM, MHz; each line adds half its natural width.
    pub gamma: f64,
}

fn isotope_index(i: Isotope) -> usize {
    match i {
        Isotope::Rb85 => 0,
        Isotope::Rb87 => 1,
    }
}

/// Absolute D2 absorption model of natural-abundance rubidium vapor.
#[derive(Debug, Clone)]
pub struct SpectrumModel {
    atoms: AtomicData,
    vapor: VaporModel,
    lines: Vec<LineTerm>,
}

impl SpectrumModel {
    pub fn new(atoms: AtomicData, vapor: VaporModel) -> Result<Self> {
        let table = atoms.transition_table(TransitionLabel::REFERENCE)?;
        let lambda = atoms.d2_wavelength;
        let jg = ElectronicState::Ground.j();
        let je = ElectronicState::D2Excited.j();
        let lines = table
            .into_iter()
            .map(|t| {
                let spec = atoms.isotope(t.isotope);
                let per_sublevel = lambda * lambda * t.gamma_nat * f64::from(je.multiplicity()) / 4.0;
                let weight = spec.natural_abundance * spec.sublevel_population() * t.rel_strength;
                debug_assert!(jg.multiplicity() == 2);
                LineTerm {
                    transition: t,
                    integrated_cross_section: weight * per_sublevel,
                    mass: spec.mass,
                }
            })
            .collect();
        Ok(SpectrumModel { atoms, vapor, lines })
    }

    pub fn from_constants(c: &Constants) -> Result<Self> {
        Self::new(AtomicData::from_constants(c)?, VaporModel::from_constants(c)?)
    }

    pub fn bundled() -> Self {
        Self::from_constants(&Constants::bundled()).expect("bundled constants are consistent")
    }

    pub fn atoms(&self) -> &AtomicData {
        &self.atoms
    }

    pub fn vapor(&self) -> &VaporModel {
        &self.vapor
    }

    pub fn lines(&self) -> &[LineTerm] {
        &self.lines
    }

    pub fn line(&self, label: TransitionLabel) -> Result<&LineTerm> {
        self.lines
            .iter()
            .find(|l| l.transition.label() == label)
            .ok_or_else(|| Error::Config(format!("unknown D2 transition {label}")))
    }

    pub fn widths(&self, cell_t: f64, lorentz_extra: f64) -> LineWidths {
        let lambda = self.atoms.d2_wavelength;
        let sigma = [
            doppler_width(cell_t, self.atoms.rb85.mass, lambda) / FWHM_PER_SIGMA,
            doppler_width(cell_t, self.atoms.rb87.mass, lambda) / FWHM_PER_SIGMA,
        ];
        LineWidths {
            sigma,
            gamma: 0.5 * lorentz_extra,
        }
    }

    fn profile(&self, term: &LineTerm, widths: &LineWidths) -> VoigtParams {
        VoigtParams::new(
            widths.sigma[isotope_index(term.transition.isotope)],
            widths.gamma + 0.5 * term.transition.gamma_nat,
        )
        .expect("natural linewidth is positive")
    }

    /// Absorption cross section per atom (m^2) at `detuning`, summed over `lines`.
    fn cross_section_over<'a>(
        &self,
        lines: impl Iterator<Item = &'a LineTerm>,
        detuning: f64,
        widths: &LineWidths,
    ) -> f64 {
        lines
            .map(|l| {
                l.integrated_cross_section
                    * voigt(detuning - l.transition.detuning_ref, &self.profile(l, widths))
            })
            .sum()
    }

    /// Per-atom cross section (m^2) at `detuning` MHz.
    pub fn cross_section(&self, detuning: f64, widths: &LineWidths) -> f64 {
        self.cross_section_over(self.lines.iter(), detuning, widths)
    }

    /// Per-atom cross section together with its derivatives with respect to
    /// the detuning and to the extra Lorentzian FWHM.
    pub fn cross_section_gradient(&self, detuning: f64, widths: &LineWidths) -> (f64, f64, f64) {
        self.lines.iter().fold((0.0, 0.0, 0.0), |acc, l| {
            let g = voigt_gradient(detuning - l.transition.detuning_ref, &self.profile(l, widths));
            let a = l.integrated_cross_section;
            // gamma (HWHM) = (Gamma_nat + extra) / 2
            (acc.0 + a * g.value, acc.1 + a * g.d_detuning, acc.2 + 0.5 * a * g.d_gamma)
        })
    }

    fn check_grid_and_conditions(&self, grid: &[f64], cond: &CellConditions) -> Result<f64> {
        check_grid(grid)?;
        cond.validate()?;
        cond.density(&self.vapor)
    }

    /// alpha(detuning) in m^-1 on `grid`.
    pub fn absorption_coefficient(&self, grid: &[f64], cond: &CellConditions) -> Result<SpectrumTrace> {
        let n = self.check_grid_and_conditions(grid, cond)?;
        let widths = self.widths(cond.cell_t, cond.lorentz_extra);
        let values = grid.iter().map(|&d| n * self.cross_section(d, &widths)).collect();
        Ok(SpectrumTrace::new(grid.to_vec(), values, TraceKind::AbsorptionCoefficient)?
            .with_conditions(cond))
    }

    /// Absorption coefficient of a single hyperfine line.
    pub fn line_absorption(
        &self,
        grid: &[f64],
        cond: &CellConditions,
        label: TransitionLabel,
    ) -> Result<SpectrumTrace> {
        let n = self.check_grid_and_conditions(grid, cond)?;
        let line = self.line(label)?;
        let widths = self.widths(cond.cell_t, cond.lorentz_extra);
        let values = grid
            .iter()
            .map(|&d| n * self.cross_section_over(std::iter::once(line), d, &widths))
            .collect();
        let mut trace = SpectrumTrace::new(grid.to_vec(), values, TraceKind::AbsorptionCoefficient)?
            .with_conditions(cond);
        trace.set_meta("line", label);
        Ok(trace)
    }

    /// Transmission `exp(-alpha L)` on `grid` for the conditions' own path length.
    pub fn transmission(&self, grid: &[f64], cond: &CellConditions) -> Result<SpectrumTrace> {
        transmission(&self.absorption_coefficient(grid, cond)?, cond.path_length)
    }

    /// alpha (m^-1) at the centre of `line`, including every other line's wings.
    pub fn peak_absorption(&self, cond: &CellConditions, line: TransitionLabel) -> Result<f64> {
        cond.validate()?;
        let center = self.line(line)?.transition.detuning_ref;
        let n = cond.density(&self.vapor)?;
        let widths = self.widths(cond.cell_t, cond.lorentz_extra);
        Ok(n * self.cross_section(center, &widths))
    }

    /// Optical density at the centre of `line` over the conditions' path length.
    pub fn optical_density_at(&self, cond: &CellConditions, line: TransitionLabel) -> Result<f64> {
        Ok(self.peak_absorption(cond, line)? * cond.path_length)
    }

    /// Optical density at `line` for each reservoir reading (K). Points whose
    /// temperature leaves the vapor model's range carry their own error.
    pub fn od_curve(&self, reservoir_temps: &[f64], template: &OdCurveTemplate) -> Vec<OdPoint> {
        reservoir_temps
            .iter()
            .map(|&t| {
                let od = template
                    .conditions(t)
                    .and_then(|c| self.optical_density_at(&c, template.line));
                OdPoint { reservoir_t: t, od }
            })
            .collect()
    }

    /// Relative 420 nm fluorescence rate `n * V_eff * P_exc * branching`.
    pub fn fluorescence_rate(&self, cond: &CellConditions, excitation: &Excitation) -> Result<f64> {
        cond.validate()?;
        excitation.validate()?;
        let n = cond.density(&self.vapor)?;
        Ok(n * excitation.effective_volume * excitation.efficiency * self.atoms.ladder.branching_6p)
    }
}

/// Fixed parts of an OD-versus-temperature series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdCurveTemplate {
    /// Cell minus reservoir temperature, K.
    pub cell_delta: f64,
    /// Calibration offset added to each reservoir reading, K.
    pub temperature_offset: f64,
    /// m
    pub path_length: f64,
    /// MHz FWHM
    pub lorentz_extra: f64,
    pub line: TransitionLabel,
}

impl OdCurveTemplate {
    /// Cell 10 K above the reservoir, OD at Rb85 F=3 -> F'=4.
    pub fn new(path_length: f64) -> Self {
        OdCurveTemplate {
            cell_delta: 10.0,
            temperature_offset: 0.0,
            path_length,
            lorentz_extra: 0.0,
            line: TransitionLabel::OD_REFERENCE,
        }
    }

    pub fn with_offset(mut self, kelvin: f64) -> Self {
        self.temperature_offset = kelvin;
        self
    }

    pub fn conditions(&self, reservoir_t: f64) -> Result<CellConditions> {
        Ok(CellConditions::new(reservoir_t, reservoir_t + self.cell_delta, self.path_length)?
            .with_lorentz_extra(self.lorentz_extra)?
            .with_offset(self.temperature_offset))
    }
}

#[derive(Debug)]
pub struct OdPoint {
    /// Reservoir reading, K.
    pub reservoir_t: f64,
    pub od: Result<f64>,
}

/// Two-step (780 nm + 776 nm) excitation treated as a fixed efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excitation {
    /// Excited volume, m^3.
    pub effective_volume: f64,
    /// Probability that an atom in the volume is promoted to 5D5/2.
    pub efficiency: f64,
}

impl Excitation {
    fn validate(&self) -> Result<()> {
        if !(self.effective_volume >= 0.0 && self.efficiency >= 0.0) {
            return Err(Error::invalid("excitation", "volume and efficiency must be >= 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vapor::celsius_to_kelvin;

    fn nominal_cond() -> CellConditions {
        CellConditions::from_celsius(160.0, 180.0, 10e-6).unwrap()
    }

    #[test]
    fn zero_density_gives_zero_absorption() {
        let m = SpectrumModel::bundled();
        let c = nominal_cond().with_density(0.0).unwrap();
        let a = m.absorption_coefficient(&default_grid(), &c).unwrap();
        assert!(a.values().iter().all(|&v| v == 0.0));
        assert_eq!(m.optical_density_at(&c, TransitionLabel::OD_REFERENCE).unwrap(), 0.0);
        let t = transmission(&a, 1e-5).unwrap();
        assert!(t.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn absorption_is_linear_in_density() {
        let m = SpectrumModel::bundled();
        let grid = uniform_grid(-1000.0, 2000.0, 50.0).unwrap();
        let a1 = m.absorption_coefficient(&grid, &nominal_cond().with_density(1e18).unwrap()).unwrap();
        let a2 = m.absorption_coefficient(&grid, &nominal_cond().with_density(2e18).unwrap()).unwrap();
        for (x, y) in a1.values().iter().zip(a2.values()) {
            assert!((2.0 * x - y).abs() <= 1e-15 * y.abs());
        }
    }

    #[test]
    fn beer_lambert_arithmetic() {
        let alpha = SpectrumTrace::new(vec![0.0, 1.0], vec![2f64.ln() / 1e-5, 1e4], TraceKind::AbsorptionCoefficient).unwrap();
        let t = transmission(&alpha, 1e-5).unwrap();
        assert!((t.values()[0] - 0.5).abs() < 1e-15);
        let t2 = transmission(&alpha, 2e-5).unwrap();
        for (a, b) in t.values().iter().zip(t2.values()) {
            assert!((a * a - b).abs() < 1e-15);
        }
        assert!(matches!(transmission(&t, 1e-5), Err(Error::WrongKind { .. })));
    }

    #[test]
    fn od_scales_with_path_length() {
        let m = SpectrumModel::bundled();
        let c = nominal_cond();
        let od1 = m.optical_density_at(&c, TransitionLabel::OD_REFERENCE).unwrap();
        let od3 = m
            .optical_density_at(&c.with_path_length(30e-6).unwrap(), TransitionLabel::OD_REFERENCE)
            .unwrap();
        assert!((od3 / od1 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_line_is_an_error() {
        let m = SpectrumModel::bundled();
        let bogus = TransitionLabel::new(Isotope::Rb85, 3, 1);
        assert!(m.optical_density_at(&nominal_cond(), bogus).is_err());
    }

    #[test]
    fn od_curve_single_point_matches_direct() {
        let m = SpectrumModel::bundled();
        let tpl = OdCurveTemplate::new(10e-6).with_offset(-7.0);
        let t = celsius_to_kelvin(150.0);
        let curve = m.od_curve(&[t], &tpl);
        let direct = m.optical_density_at(&tpl.conditions(t).unwrap(), tpl.line).unwrap();
        assert_eq!(*curve[0].od.as_ref().unwrap(), direct);
    }

    #[test]
    fn od_curve_reports_range_errors_per_point() {
        let m = SpectrumModel::bundled();
        let tpl = OdCurveTemplate::new(10e-6);
        let curve = m.od_curve(&[250.0, 400.0, 700.0], &tpl);
        assert!(matches!(curve[0].od, Err(Error::OutOfRange { .. })));
        assert!(curve[1].od.is_ok());
        assert!(curve[2].od.is_err());
    }

    #[test]
    fn fluorescence_rate_linearity() {
        let m = SpectrumModel::bundled();
        let exc = Excitation { effective_volume: 1e-16, efficiency: 0.1 };
        let c = CellConditions::from_celsius(130.0, 190.0, 10e-6).unwrap();
        let r = m.fluorescence_rate(&c, &exc).unwrap();
        let r2 = m
            .fluorescence_rate(&c, &Excitation { effective_volume: 2e-16, ..exc })
            .unwrap();
        assert!((r2 / r - 2.0).abs() < 1e-14);
        let zero = m.fluorescence_rate(&c.with_density(0.0).unwrap(), &exc).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn csv_round_trip_preserves_values_and_conditions() {
        let m = SpectrumModel::bundled();
        let c = nominal_cond().with_offset(-7.0);
        let t = m.transmission(&uniform_grid(-100.0, 100.0, 10.0).unwrap(), &c).unwrap();
        let text = t.to_csv_string();
        assert!(text.starts_with("# kind=transmission reservoir_K=433.15"));
        let back = SpectrumTrace::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.values(), t.values());
        assert_eq!(back.detunings(), t.detunings());
        assert_eq!(conditions_from_metadata(&back).unwrap(), c);
    }

    #[test]
    fn read_csv_rejects_bad_rows_and_grids() {
        let bad = "detuning_MHz,transmission\n0,1\n0,1\n";
        assert!(SpectrumTrace::read_csv(bad.as_bytes()).is_err());
        let bad = "detuning_MHz,transmission\n0,abc\n";
        assert!(matches!(SpectrumTrace::read_csv(bad.as_bytes()), Err(Error::Data(_))));
        let no_kind = "0,1\n1,1\n";
        assert!(SpectrumTrace::read_csv(no_kind.as_bytes()).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let t = SpectrumTrace::new(vec![0.0, 1.0, 2.0], vec![1.0; 3], TraceKind::Transmission).unwrap();
        let a = t.with_gaussian_noise(0.01, 7).unwrap();
        let b = t.with_gaussian_noise(0.01, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), t.values());
    }

    #[test]
    fn interpolation_is_exact_on_nodes() {
        let t = SpectrumTrace::new(vec![0.0, 2.0, 4.0], vec![1.0, 3.0, 2.0], TraceKind::Fluorescence).unwrap();
        assert_eq!(t.interpolate(2.0), Some(3.0));
        assert_eq!(t.interpolate(1.0), Some(2.0));
        assert_eq!(t.interpolate(5.0), None);
    }

    #[test]
    fn default_grid_spans_all_lines() {
        let g = default_grid();
        assert_eq!(g.len(), 5501);
        let m = SpectrumModel::bundled();
        for l in m.lines() {
            assert!(l.transition.detuning_ref > g[0] + 1000.0);
            assert!(l.transition.detuning_ref < g[g.len() - 1] - 300.0);
        }
    }
}
