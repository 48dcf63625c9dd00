//! Rubidium isotope data, hyperfine level energies, and D2 line strengths.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::wigner::{six_j, Spin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Isotope {
    Rb85,
    Rb87,
}

impl Isotope {
    pub const ALL: [Isotope; 2] = [Isotope::Rb85, Isotope::Rb87];

    fn key_prefix(self) -> &'static str {
        match self {
            Isotope::Rb85 => "rb85",
            Isotope::Rb87 => "rb87",
        }
    }
}

impl fmt::Display for Isotope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Isotope::Rb85 => "Rb85",
            Isotope::Rb87 => "Rb87",
        })
    }
}

impl FromStr for Isotope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rb85" | "85rb" | "85" => Ok(Isotope::Rb85),
            "rb87" | "87rb" | "87" => Ok(Isotope::Rb87),
            other => Err(Error::Config(format!("unknown isotope `{other}`"))),
        }
    }
}

/// Fine-structure levels touched by the D2 probe and the 776 nm ladder step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElectronicState {
    /// 5S1/2
    Ground,
    /// 5P3/2
    D2Excited,
    /// 5D5/2, reached by the 776 nm step.
    Ladder,
}

impl ElectronicState {
    pub fn j(self) -> Spin {
        match self {
            ElectronicState::Ground => Spin::from_twice(1),
            ElectronicState::D2Excited => Spin::from_twice(3),
            ElectronicState::Ladder => Spin::from_twice(5),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ElectronicState::Ground => "5S1/2",
            ElectronicState::D2Excited => "5P3/2",
            ElectronicState::Ladder => "5D5/2",
        }
    }
}

impl fmt::Display for ElectronicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ElectronicState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "5S1/2" | "5s1/2" | "5S1_2" => Ok(ElectronicState::Ground),
            "5P3/2" | "5p3/2" | "5P3_2" => Ok(ElectronicState::D2Excited),
            "5D5/2" | "5d5/2" | "5D5_2" => Ok(ElectronicState::Ladder),
            other => Err(Error::Config(format!("unknown electronic state `{other}`"))),
        }
    }
}

/// Static constants for one rubidium isotope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsotopeSpec {
    pub isotope: Isotope,
    /// kg
    pub mass: f64,
    pub natural_abundance: f64,
    #[serde(serialize_with = "serialize_spin")]
    pub nuclear_spin: Spin,
    /// Magnetic-dipole constant of 5S1/2, MHz.
    pub ground_a: f64,
    /// Magnetic-dipole constant of 5P3/2, MHz.
    pub excited_a: f64,
    /// Electric-quadrupole constant of 5P3/2, MHz.
    pub excited_b: f64,
    /// D2 centroid shift relative to the Rb87 centroid, MHz.
    pub isotope_shift_d2: f64,
    /// 5P3/2 natural linewidth, MHz FWHM.
    pub natural_linewidth_5p: f64,
}

fn serialize_spin<S: serde::Serializer>(s: &Spin, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_f64(s.value())
}

/// One hyperfine manifold: total angular momentum F and its shift from the
/// fine-structure centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperfineLevel {
    pub f: Spin,
    /// MHz
    pub shift: f64,
}

impl IsotopeSpec {
    fn from_constants(c: &Constants, isotope: Isotope) -> Result<Self> {
        let p = isotope.key_prefix();
        let get = |suffix: &str| c.get(&format!("{p}.{suffix}"));
        let spin_value = get("nuclear_spin")?;
        let nuclear_spin = Spin::from_f64(spin_value).ok_or_else(|| {
            Error::Config(format!("{isotope}: nuclear spin {spin_value} is not a multiple of 1/2"))
        })?;
        let spec = IsotopeSpec {
            isotope,
            mass: get("mass")?,
            natural_abundance: get("abundance")?,
            nuclear_spin,
            ground_a: get("5s1_2.hyperfine_a")?,
            excited_a: get("5p3_2.hyperfine_a")?,
            excited_b: get("5p3_2.hyperfine_b")?,
            isotope_shift_d2: get("isotope_shift_d2")?,
            natural_linewidth_5p: get("linewidth_5p3_2")?,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let expected_spin = match self.isotope {
            Isotope::Rb85 => Spin::from_twice(5),
            Isotope::Rb87 => Spin::from_twice(3),
        };
        if self.nuclear_spin != expected_spin {
            return Err(Error::Config(format!(
                "{}: nuclear spin must be {expected_spin}, got {}",
                self.isotope, self.nuclear_spin
            )));
        }
        if !(self.mass > 0.0) || !(self.natural_linewidth_5p > 0.0) {
            return Err(Error::Config(format!(
                "{}: mass and natural linewidth must be positive",
                self.isotope
            )));
        }
        if !(0.0..=1.0).contains(&self.natural_abundance) {
            return Err(Error::Config(format!(
                "{}: abundance {} outside [0, 1]",
                self.isotope, self.natural_abundance
            )));
        }
        Ok(())
    }

    fn hyperfine_constants(&self, state: ElectronicState) -> Result<(f64, f64)> {
        match state {
            ElectronicState::Ground => Ok((self.ground_a, 0.0)),
            ElectronicState::D2Excited => Ok((self.excited_a, self.excited_b)),
            ElectronicState::Ladder => Err(Error::Config(format!(
                "{}: no hyperfine constants bundled for {state}",
                self.isotope
            ))),
        }
    }

    /// Hyperfine manifolds of `state`, ordered by increasing F, with shifts
    /// from the magnetic-dipole and electric-quadrupole terms.
    pub fn hyperfine_levels(&self, state: ElectronicState) -> Result<Vec<HyperfineLevel>> {
        let (a, b) = self.hyperfine_constants(state)?;
        let i = self.nuclear_spin.value();
        let j = state.j().value();
        let levels = Spin::couple(state.j(), self.nuclear_spin)
            .map(|f| {
                let fv = f.value();
                let k = fv * (fv + 1.0) - i * (i + 1.0) - j * (j + 1.0);
                let mut shift = 0.5 * a * k;
                if b != 0.0 && j >= 1.0 && i >= 1.0 {
                    shift += b * (1.5 * k * (k + 1.0) - 2.0 * i * (i + 1.0) * j * (j + 1.0))
                        / (4.0 * i * (2.0 * i - 1.0) * j * (2.0 * j - 1.0));
                }
                HyperfineLevel { f, shift }
            })
            .collect();
        Ok(levels)
    }

    /// Fraction of this isotope's atoms in one ground Zeeman sublevel.
    pub fn sublevel_population(&self) -> f64 {
        let j = ElectronicState::Ground.j();
        1.0 / f64::from(self.nuclear_spin.multiplicity() * j.multiplicity())
    }
}

/// Zeeman-summed strength of the Fg -> Fe component of a J -> J' line, in
/// units of |<J'||d||J>|^2 / (2J' + 1):
/// `(2Fg + 1)(2Fe + 1) {J J' 1; Fe Fg I}^2`.
pub fn line_strength(i: Spin, jg: Spin, je: Spin, fg: Spin, fe: Spin) -> f64 {
    let w = six_j(jg, je, Spin::integer(1), fe, fg, i);
    f64::from(fg.multiplicity() * fe.multiplicity()) * w * w
}

/// Identifies one D2 hyperfine line, e.g. `Rb85:3->4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransitionLabel {
    pub isotope: Isotope,
    pub fg: u32,
    pub fe: u32,
}

impl TransitionLabel {
    /// Zero of every detuning axis: Rb87 5S1/2 F=2 -> 5P3/2 F=3.
    pub const REFERENCE: TransitionLabel = TransitionLabel::new(Isotope::Rb87, 2, 3);
    /// Line at which optical densities are reported: Rb85 F=3 -> F'=4.
    pub const OD_REFERENCE: TransitionLabel = TransitionLabel::new(Isotope::Rb85, 3, 4);

    pub const fn new(isotope: Isotope, fg: u32, fe: u32) -> Self {
        TransitionLabel { isotope, fg, fe }
    }
}

impl fmt::Display for TransitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}->{}", self.isotope, self.fg, self.fe)
    }
}

impl FromStr for TransitionLabel {
    type Err = Error;

    /// Accepts `Rb85:3->4`, `85Rb:3->4`, or `Rb85 F=3->F'=4`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse transition label `{s}`"));
        let (iso, rest) = s
            .split_once(':')
            .or_else(|| s.trim().split_once(' '))
            .ok_or_else(bad)?;
        let isotope: Isotope = iso.parse()?;
        let (g, e) = rest.split_once("->").ok_or_else(bad)?;
        let clean = |x: &str| {
            x.trim()
                .trim_start_matches("F'=")
                .trim_start_matches("F=")
                .parse::<u32>()
                .map_err(|_| bad())
        };
        Ok(TransitionLabel::new(isotope, clean(g)?, clean(e)?))
    }
}

/// One dipole-allowed Fg -> Fe component of the D2 line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperfineTransition {
    pub isotope: Isotope,
    pub fg: u32,
    pub fe: u32,
    /// Detuning from the reference line, MHz.
    pub detuning_ref: f64,
    /// See [`line_strength`].
    pub rel_strength: f64,
    /// Natural linewidth, MHz FWHM.
    pub gamma_nat: f64,
}

impl HyperfineTransition {
    pub fn label(&self) -> TransitionLabel {
        TransitionLabel::new(self.isotope, self.fg, self.fe)
    }
}

/// Wavelengths and widths of the 5P3/2 -> 5D5/2 step and its 420 nm cascade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderLevels {
    /// 5P3/2 -> 5D5/2 wavelength, m.
    pub coupling_wavelength: f64,
    /// 5D5/2 natural linewidth, MHz FWHM.
    pub upper_linewidth: f64,
    /// 6P3/2 -> 5S1/2 fluorescence wavelength, m.
    pub fluorescence_wavelength: f64,
    /// Share of 5D5/2 decays that pass through 6P3/2.
    pub branching_6p: f64,
}

/// Everything the spectroscopy models need to know about rubidium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicData {
    pub rb85: IsotopeSpec,
    pub rb87: IsotopeSpec,
    /// D2 vacuum wavelength, m.
    pub d2_wavelength: f64,
    pub ladder: LadderLevels,
}

impl AtomicData {
    pub fn from_constants(c: &Constants) -> Result<Self> {
        let rb85 = IsotopeSpec::from_constants(c, Isotope::Rb85)?;
        let rb87 = IsotopeSpec::from_constants(c, Isotope::Rb87)?;
        let total = rb85.natural_abundance + rb87.natural_abundance;
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "isotope abundances sum to {total}, expected 1"
            )));
        }
        let data = AtomicData {
            rb85,
            rb87,
            d2_wavelength: c.get("d2.wavelength")?,
            ladder: LadderLevels {
                coupling_wavelength: c.get("ladder.5d5_2.wavelength")?,
                upper_linewidth: c.get("ladder.5d5_2.linewidth")?,
                fluorescence_wavelength: c.get("ladder.6p3_2.wavelength")?,
                branching_6p: c.get("ladder.5d5_2.branching_6p")?,
            },
        };
        if !(data.d2_wavelength > 0.0 && data.ladder.coupling_wavelength > 0.0) {
            return Err(Error::Config("wavelengths must be positive".into()));
        }
        Ok(data)
    }

    pub fn bundled() -> Self {
        Self::from_constants(&Constants::bundled()).expect("bundled constants are consistent")
    }

    pub fn isotope(&self, isotope: Isotope) -> &IsotopeSpec {
        match isotope {
            Isotope::Rb85 => &self.rb85,
            Isotope::Rb87 => &self.rb87,
        }
    }

    /// Frequency of a line relative to the Rb87 D2 centroid, MHz.
    fn absolute_offset(&self, spec: &IsotopeSpec, fg: Spin, fe: Spin) -> Result<f64> {
        let find = |levels: &[HyperfineLevel], f: Spin| {
            levels.iter().find(|l| l.f == f).map(|l| l.shift).ok_or_else(|| {
                Error::Config(format!("{}: F={f} does not exist", spec.isotope))
            })
        };
        let ground = spec.hyperfine_levels(ElectronicState::Ground)?;
        let excited = spec.hyperfine_levels(ElectronicState::D2Excited)?;
        Ok(spec.isotope_shift_d2 + find(&excited, fe)? - find(&ground, fg)?)
    }

    /// All dipole-allowed D2 hyperfine lines of both isotopes (12 in total),
    /// with detunings measured from `reference`. Sorted by detuning.
    pub fn transition_table(&self, reference: TransitionLabel) -> Result<Vec<HyperfineTransition>> {
        let ref_spec = self.isotope(reference.isotope);
        let zero = self.absolute_offset(
            ref_spec,
            Spin::integer(reference.fg),
            Spin::integer(reference.fe),
        )?;
        if (reference.fe as i64 - reference.fg as i64).abs() > 1 {
            return Err(Error::Config(format!("{reference} is not dipole allowed")));
        }
        let jg = ElectronicState::Ground.j();
        let je = ElectronicState::D2Excited.j();
        let mut table = Vec::with_capacity(12);
        for isotope in Isotope::ALL {
            let spec = self.isotope(isotope);
            for fg in Spin::couple(jg, spec.nuclear_spin) {
                for fe in Spin::couple(je, spec.nuclear_spin) {
                    if fe.twice().abs_diff(fg.twice()) > 2 {
                        continue;
                    }
                    table.push(HyperfineTransition {
                        isotope,
                        fg: fg.twice() / 2,
                        fe: fe.twice() / 2,
                        detuning_ref: self.absolute_offset(spec, fg, fe)? - zero,
                        rel_strength: line_strength(spec.nuclear_spin, jg, je, fg, fe),
                        gamma_nat: spec.natural_linewidth_5p,
                    });
                }
            }
        }
        table.sort_by(|a, b| a.detuning_ref.total_cmp(&b.detuning_ref));
        Ok(table)
    }

    /// Looks up one line of the table.
    pub fn transition(
        &self,
        label: TransitionLabel,
        reference: TransitionLabel,
    ) -> Result<HyperfineTransition> {
        self.transition_table(reference)?
            .into_iter()
            .find(|t| t.label() == label)
            .ok_or_else(|| Error::Config(format!("unknown D2 transition {label}")))
    }
}
