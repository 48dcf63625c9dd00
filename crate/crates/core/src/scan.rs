//! Lateral scans of a focused Gaussian beam across a trapezoidal channel.
//!
//! Lengths in this module are in micrometres. The beam runs vertically
//! through the channel, so at lateral position `x` it crosses a vapor column
//! of height [`ChannelGeometry::path_length`]. A stage position `x0` sees the
//! transverse intensity `I(x - x0)` convolved with the local response.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::atomic::TransitionLabel;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::spectrum::{conditions_metadata, SpectrumModel};
use crate::vapor::CellConditions;

const UM: f64 = 1e-6;

/// Integration tolerance for the beam convolution.
const SCAN_TOL: Tolerance = Tolerance {
    abs: 1e-13,
    rel: 1e-9,
    max_intervals: 2000,
};

/// Beyond this many waist radii the Gaussian weight is below 1e-43.
const BEAM_CUTOFF: f64 = 10.0;

/// Cross-section of a wet-etched trench, micrometres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGeometry {
    top_width: f64,
    bottom_width: f64,
    depth: f64,
}

impl ChannelGeometry {
    pub fn new(top_width: f64, bottom_width: f64, depth: f64) -> Result<Self> {
        if !(bottom_width > 0.0 && bottom_width.is_finite()) {
            return Err(Error::invalid("bottom_width", "must be positive"));
        }
        if !(top_width >= bottom_width && top_width.is_finite()) {
            return Err(Error::invalid(
                "top_width",
                format!("{top_width} um is narrower than the bottom ({bottom_width} um)"),
            ));
        }
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(Error::invalid("depth", "must be positive"));
        }
        Ok(ChannelGeometry {
            top_width,
            bottom_width,
            depth,
        })
    }

    pub fn top_width(&self) -> f64 {
        self.top_width
    }

    pub fn bottom_width(&self) -> f64 {
        self.bottom_width
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    /// Height of the vapor column at lateral offset `x` from the centre:
    /// the full depth over the flat bottom, a linear ramp along the sidewalls.
    pub fn path_length(&self, x: f64) -> f64 {
        let x = x.abs();
        let (b, t) = (0.5 * self.bottom_width, 0.5 * self.top_width);
        if x <= b {
            self.depth
        } else if x >= t {
            0.0
        } else {
            self.depth * (t - x) / (t - b)
        }
    }

    /// Kinks of the path-length profile.
    fn kinks(&self) -> [f64; 4] {
        let (b, t) = (0.5 * self.bottom_width, 0.5 * self.top_width);
        [-t, -b, b, t]
    }
}

impl FromStr for ChannelGeometry {
    type Err = Error;

    /// `top,bottom,depth` in micrometres.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::invalid("geometry", format!("`{s}` is not top,bottom,depth")))?;
        match parts[..] {
            [t, b, d] => ChannelGeometry::new(t, b, d),
            _ => Err(Error::invalid("geometry", format!("`{s}` is not top,bottom,depth"))),
        }
    }
}

/// How a quoted beam width maps onto the 1/e^2 intensity radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WidthConvention {
    /// The number is the 1/e^2 radius itself.
    Radius,
    /// The number is the 1/e^2 diameter.
    #[default]
    E2Diameter,
    /// The number is the intensity FWHM.
    Fwhm,
}

impl FromStr for WidthConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "radius" => Ok(WidthConvention::Radius),
            "diameter" | "e2-diameter" => Ok(WidthConvention::E2Diameter),
            "fwhm" => Ok(WidthConvention::Fwhm),
            _ => Err(Error::invalid("convention", format!("`{s}` is not radius, diameter or fwhm"))),
        }
    }
}

impl fmt::Display for WidthConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WidthConvention::Radius => "radius",
            WidthConvention::E2Diameter => "e2-diameter",
            WidthConvention::Fwhm => "fwhm",
        })
    }
}

/// Gaussian probe spot, fixed over the channel depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamProfile {
    waist_radius: f64,
    inflation: f64,
}

impl BeamProfile {
    /// `waist_radius` is the 1/e^2 intensity radius in micrometres.
    pub fn new(waist_radius: f64) -> Result<Self> {
        if !(waist_radius > 0.0 && waist_radius.is_finite()) {
            return Err(Error::invalid("waist_radius", "must be positive"));
        }
        Ok(BeamProfile {
            waist_radius,
            inflation: 1.0,
        })
    }

    pub fn from_width(width: f64, convention: WidthConvention) -> Result<Self> {
        let radius = match convention {
            WidthConvention::Radius => width,
            WidthConvention::E2Diameter => 0.5 * width,
            // I = exp(-2 x^2 / w^2) falls to 1/2 at x = w sqrt(ln2 / 2)
            WidthConvention::Fwhm => width / (2.0 * std::f64::consts::LN_2).sqrt(),
        };
        Self::new(radius)
    }

    /// Multiplies the waist to mimic divergence over the channel depth.
    pub fn with_inflation(mut self, factor: f64) -> Result<Self> {
        if !(factor >= 1.0 && factor.is_finite()) {
            return Err(Error::invalid("inflation", "must be >= 1"));
        }
        self.inflation = factor;
        Ok(self)
    }

    pub fn waist_radius(&self) -> f64 {
        self.waist_radius
    }

    /// Radius actually used in the convolution.
    pub fn effective_radius(&self) -> f64 {
        self.waist_radius * self.inflation
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.effective_radius()
    }

    /// Transverse intensity with unit integral over `x` (um^-1).
    pub fn intensity(&self, x: f64) -> f64 {
        let w = self.effective_radius();
        (2.0 / PI).sqrt() / w * (-2.0 * x * x / (w * w)).exp()
    }
}

/// `-half_span, ..., +half_span` in steps of `step` micrometres.
pub fn scan_positions(half_span: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && half_span >= 0.0) {
        return Err(Error::invalid("step", "scan step and span must be positive"));
    }
    let n = (half_span / step + 1e-9).floor() as i64;
    Ok((-n..=n).map(|i| i as f64 * step).collect())
}

/// `int I(x - x0) response(L(x)) dx` for each stage position.
fn convolve(
    positions: &[f64],
    g: &ChannelGeometry,
    beam: &BeamProfile,
    response: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let reach = BEAM_CUTOFF * beam.effective_radius();
    let half_top = 0.5 * g.top_width;
    positions
        .iter()
        .map(|&x0| {
            let lo = (x0 - reach).max(-half_top);
            let hi = (x0 + reach).min(half_top);
            if lo >= hi {
                return Ok(0.0);
            }
            let mut cuts = g.kinks().to_vec();
            cuts.push(x0);
            let f = |x: f64| beam.intensity(x - x0) * response(g.path_length(x));
            Ok(integrate(f, lo, hi, &cuts, SCAN_TOL)?.value)
        })
        .collect()
}

/// Fraction of the probe absorbed at each stage position (um), evaluated at
/// the centre of `line`.
pub fn scan_absorption(
    model: &SpectrumModel,
    positions: &[f64],
    g: &ChannelGeometry,
    beam: &BeamProfile,
    cond: &CellConditions,
    line: TransitionLabel,
) -> Result<Vec<f64>> {
    let alpha = model.peak_absorption(cond, line)?;
    absorption_profile(alpha, positions, g, beam)
}

/// Scan with an explicit peak absorption coefficient `alpha` (m^-1).
pub fn absorption_profile(
    alpha: f64,
    positions: &[f64],
    g: &ChannelGeometry,
    beam: &BeamProfile,
) -> Result<Vec<f64>> {
    if !(alpha >= 0.0) {
        return Err(Error::invalid("alpha", "must be non-negative"));
    }
    convolve(positions, g, beam, |l| {
        if alpha.is_infinite() {
            if l > 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            -(-alpha * l * UM).exp_m1()
        }
    })
}

/// Relative 420 nm fluorescence at each stage position. Atoms are excited in
/// proportion to the absorbed first-step light `1 - exp(-alpha L)` at the
/// centre of `line`; the result is scaled by the excitation efficiency and the
/// decay branching through 6P3/2.
pub fn scan_fluorescence(
    model: &SpectrumModel,
    positions: &[f64],
    g: &ChannelGeometry,
    beam: &BeamProfile,
    cond: &CellConditions,
    line: TransitionLabel,
    efficiency: f64,
) -> Result<Vec<f64>> {
    let alpha = model.peak_absorption(cond, line)?;
    let scale = efficiency * model.atoms().ladder.branching_6p;
    Ok(absorption_profile(alpha, positions, g, beam)?
        .into_iter()
        .map(|s| s * scale)
        .collect())
}

/// A scan ready for export.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanProfile {
    pub positions: Vec<f64>,
    pub absorption: Vec<f64>,
    pub fluorescence: Vec<f64>,
    pub metadata: Vec<(String, String)>,
}

impl ScanProfile {
    pub fn new(
        positions: Vec<f64>,
        absorption: Vec<f64>,
        fluorescence: Vec<f64>,
        g: &ChannelGeometry,
        beam: &BeamProfile,
    ) -> Self {
        let metadata = vec![
            ("top_um".to_owned(), g.top_width.to_string()),
            ("bottom_um".to_owned(), g.bottom_width.to_string()),
            ("depth_um".to_owned(), g.depth.to_string()),
            ("waist_radius_um".to_owned(), beam.effective_radius().to_string()),
        ];
        ScanProfile {
            positions,
            absorption,
            fluorescence,
            metadata,
        }
    }

    /// Records the conditions under `prefix` (e.g. `abs_`, `fl_`).
    pub fn add_conditions(&mut self, prefix: &str, cond: &CellConditions) {
        for (k, v) in conditions_metadata(cond) {
            self.metadata.push((format!("{prefix}{k}"), v));
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "# kind=scan")?;
        for (k, v) in &self.metadata {
            write!(w, " {k}={v}")?;
        }
        writeln!(w)?;
        writeln!(w, "position_um,absorption_signal,fluorescence_signal")?;
        for ((x, a), f) in self.positions.iter().zip(&self.absorption).zip(&self.fluorescence) {
            writeln!(w, "{x},{a},{f}")?;
        }
        Ok(())
    }
}

/// Full width at half maximum of a sampled single-peaked profile, by linear
/// interpolation of the half-height crossings either side of the maximum.
pub fn fwhm(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (imax, &ymax) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if ymax <= 0.0 {
        return None;
    }
    let half = 0.5 * ymax;
    let crossing = |i: usize, j: usize| xs[i] + (half - ys[i]) * (xs[j] - xs[i]) / (ys[j] - ys[i]);
    let left = (1..=imax).rev().find(|&i| ys[i - 1] < half).map(|i| crossing(i - 1, i))?;
    let right = (imax..ys.len() - 1).find(|&i| ys[i + 1] < half).map(|i| crossing(i, i + 1))?;
    Some(right - left)
}
