//! Least-squares fitting of transmission spectra and of the reservoir
//! temperature offset.
//!
//! The spectrum model is
//!
//! ```text
//! T(D) = A * exp(-s * n0 * L * sigma(D - D_off; T_cell, Gamma_extra)) + B
//! ```
//!
//! with `n0` the vapor-model density for the recorded conditions and `s` a
//! free density scale. The optimizer works on `ln s` so the scale stays
//! positive; `Gamma_extra` is kept inside [0, 500] MHz by projection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::atomic::TransitionLabel;
use crate::error::{Error, Result};
use crate::spectrum::{conditions_from_metadata, LineWidths, OdCurveTemplate, SpectrumModel, SpectrumTrace, TraceKind};
use crate::vapor::CellConditions;

pub const PARAM_NAMES: [&str; 5] = ["density_scale", "lorentz_extra", "frequency_offset", "amplitude", "baseline"];

/// Upper bound on the fitted extra Lorentzian FWHM, MHz.
pub const LORENTZ_EXTRA_MAX: f64 = 500.0;

/// Reservoir readings above this (K) are excluded from the offset calibration.
pub const OFFSET_FIT_CEILING: f64 = 463.15;

const MIN_POINTS: usize = 50;

/// Consecutive stalled steps that end the search.
const STALL_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    /// Multiplier on the vapor-model density.
    pub density_scale: f64,
    /// MHz FWHM
    pub lorentz_extra: f64,
    /// MHz
    pub frequency_offset: f64,
    pub amplitude: f64,
    pub baseline: f64,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams {
            density_scale: 1.0,
            lorentz_extra: 0.0,
            frequency_offset: 0.0,
            amplitude: 1.0,
            baseline: 0.0,
        }
    }
}

impl FitParams {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.density_scale,
            self.lorentz_extra,
            self.frequency_offset,
            self.amplitude,
            self.baseline,
        ]
    }

    /// Optimizer coordinates: `ln s` in place of `s`.
    pub fn to_internal(&self) -> [f64; 5] {
        let mut t = self.as_array();
        t[0] = t[0].ln();
        t
    }

    pub fn from_internal(t: &[f64]) -> Self {
        FitParams {
            density_scale: t[0].exp(),
            lorentz_extra: t[1],
            frequency_offset: t[2],
            amplitude: t[3],
            baseline: t[4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// An accepted step changing the residual norm by less than this,
    /// relatively, counts as stalled; several in a row end the search.
    /// Convergence itself is decided by the gradient test.
    pub ftol: f64,
    /// Stop when the projected gradient of half the squared residual is below this.
    pub gtol: f64,
    pub initial_damping: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            ftol: 1e-10,
            gtol: 1e-8,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: FitParams,
    /// One standard deviation per parameter from the local quadratic model.
    pub uncertainties: FitParams,
    pub residual_norm: f64,
    /// Infinity norm of the projected gradient at the returned parameters.
    pub gradient_norm: f64,
    /// Optical density at Rb85 F=3 -> F'=4 implied by the fitted parameters.
    pub od_ref: f64,
    pub converged: bool,
    pub n_iterations: usize,
    /// The initial guess came from the centroid fallback.
    pub low_confidence: bool,
    /// Sum of squared residuals after each accepted step.
    #[serde(skip)]
    pub cost_history: Vec<f64>,
}

impl FitResult {
    /// Flat JSON document: one key per value, uncertainties as `<name>_sigma`.
    pub fn to_json(&self) -> String {
        let mut map = serde_json::Map::new();
        let p = self.params.as_array();
        let u = self.uncertainties.as_array();
        for (i, name) in PARAM_NAMES.iter().enumerate() {
            map.insert((*name).to_owned(), p[i].into());
            map.insert(format!("{name}_sigma"), u[i].into());
        }
        map.insert("od_ref".into(), self.od_ref.into());
        map.insert("residual_norm".into(), self.residual_norm.into());
        map.insert("gradient_norm".into(), self.gradient_norm.into());
        map.insert("converged".into(), self.converged.into());
        map.insert("n_iterations".into(), self.n_iterations.into());
        map.insert("low_confidence".into(), self.low_confidence.into());
        serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("plain values serialize")
    }
}

/// Starting point for the optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialGuess {
    pub params: FitParams,
    /// Fewer than two dips were found and a centroid estimate was used.
    pub low_confidence: bool,
}

/// Transmission model on a fixed grid with its Jacobian in optimizer coordinates.
pub struct TransmissionModel<'a> {
    model: &'a SpectrumModel,
    grid: &'a [f64],
    cell_t: f64,
    /// n0 * L, m^-2
    column: f64,
}

impl<'a> TransmissionModel<'a> {
    pub fn new(model: &'a SpectrumModel, grid: &'a [f64], cond: &CellConditions) -> Result<Self> {
        cond.validate()?;
        Ok(TransmissionModel {
            model,
            grid,
            cell_t: cond.cell_t,
            column: cond.density(model.vapor())? * cond.path_length,
        })
    }

    fn widths(&self, lorentz_extra: f64) -> LineWidths {
        self.model.widths(self.cell_t, lorentz_extra)
    }

    pub fn evaluate(&self, p: &FitParams) -> Vec<f64> {
        let w = self.widths(p.lorentz_extra);
        let k = p.density_scale * self.column;
        self.grid
            .iter()
            .map(|&d| {
                let sigma = self.model.cross_section(d - p.frequency_offset, &w);
                p.amplitude * (-k * sigma).exp() + p.baseline
            })
            .collect()
    }

    /// Model values and the Jacobian with respect to
    /// `(ln s, Gamma_extra, D_off, A, B)`.
    pub fn evaluate_with_jacobian(&self, p: &FitParams) -> (DVector<f64>, DMatrix<f64>) {
        let w = self.widths(p.lorentz_extra);
        let k = p.density_scale * self.column;
        let n = self.grid.len();
        let mut values = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, 5);
        for (i, &d) in self.grid.iter().enumerate() {
            let (sigma, d_sigma_dd, d_sigma_dextra) = self.model.cross_section_gradient(d - p.frequency_offset, &w);
            let e = (-k * sigma).exp();
            let ae = p.amplitude * e;
            values[i] = ae + p.baseline;
            jac[(i, 0)] = -ae * k * sigma;
            jac[(i, 1)] = -ae * k * d_sigma_dextra;
            jac[(i, 2)] = ae * k * d_sigma_dd;
            jac[(i, 3)] = e;
            jac[(i, 4)] = 1.0;
        }
        (values, jac)
    }

    /// OD at the centre of `line` for the fitted density scale and width.
    pub fn od_at(&self, p: &FitParams, line: TransitionLabel) -> Result<f64> {
        let center = self.model.line(line)?.transition.detuning_ref;
        let w = self.widths(p.lorentz_extra);
        Ok(p.density_scale * self.column * self.model.cross_section(center, &w))
    }
}

/// Fits a transmission trace whose metadata records the cell conditions
/// (as written by the spectrum synthesis).
pub fn fit_spectrum(model: &SpectrumModel, data: &SpectrumTrace, init: Option<FitParams>) -> Result<FitResult> {
    let cond = conditions_from_metadata(data)?;
    fit_spectrum_with(model, data, &cond, init, &FitOptions::default())
}

pub fn fit_spectrum_with(
    model: &SpectrumModel,
    data: &SpectrumTrace,
    cond: &CellConditions,
    init: Option<FitParams>,
    options: &FitOptions,
) -> Result<FitResult> {
    if data.kind() != TraceKind::Transmission {
        return Err(Error::WrongKind {
            expected: TraceKind::Transmission.name(),
            found: data.kind().name(),
        });
    }
    if data.len() < MIN_POINTS {
        return Err(Error::Data(format!(
            "{} points; at least {MIN_POINTS} are needed",
            data.len()
        )));
    }
    let y = data.values();
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= 1e-9 * hi.abs().max(1e-300) {
        return Err(Error::Unidentifiable("the trace is flat".into()));
    }
    let guess = match init {
        Some(p) => InitialGuess {
            params: p,
            low_confidence: false,
        },
        None => peak_find_init(model, data, cond)?,
    };
    check_line_groups(model, data, guess.params.frequency_offset)?;

    let tm = TransmissionModel::new(model, data.detunings(), cond)?;
    let y = DVector::from_column_slice(y);
    let mut result = levenberg_marquardt(&tm, &y, guess.params, options)?;
    result.low_confidence = guess.low_confidence;
    if result.params.density_scale < 1e-12 {
        return Err(Error::Unidentifiable("fitted density vanished".into()));
    }
    if !result.converged {
        return Err(Error::NotConverged { best: Box::new(result) });
    }
    Ok(result)
}

/// Centres of the four Doppler-blended line groups for a unit frequency offset.
fn group_centres(model: &SpectrumModel) -> Vec<f64> {
    let mut centres: Vec<f64> = Vec::new();
    let mut members: Vec<(f64, f64)> = Vec::new();
    let flush = |members: &mut Vec<(f64, f64)>, centres: &mut Vec<f64>| {
        let w: f64 = members.iter().map(|m| m.1).sum();
        if w > 0.0 {
            centres.push(members.iter().map(|m| m.0 * m.1).sum::<f64>() / w);
        }
        members.clear();
    };
    for l in model.lines() {
        let d = l.transition.detuning_ref;
        if let Some(&(last, _)) = members.last() {
            if d - last > 600.0 {
                flush(&mut members, &mut centres);
            }
        }
        members.push((d, l.integrated_cross_section));
    }
    flush(&mut members, &mut centres);
    centres
}

fn check_line_groups(model: &SpectrumModel, data: &SpectrumTrace, offset: f64) -> Result<()> {
    let d = data.detunings();
    let (lo, hi) = (d[0], d[d.len() - 1]);
    let covered = group_centres(model)
        .into_iter()
        .filter(|c| (lo..=hi).contains(&(c + offset)))
        .count();
    if covered < 2 {
        return Err(Error::Data(format!(
            "the trace spans {lo}..{hi} MHz and covers {covered} hyperfine line group(s); two are needed"
        )));
    }
    Ok(())
}

fn levenberg_marquardt(
    tm: &TransmissionModel<'_>,
    y: &DVector<f64>,
    start: FitParams,
    options: &FitOptions,
) -> Result<FitResult> {
    let mut theta = start.to_internal();
    theta[1] = theta[1].clamp(0.0, LORENTZ_EXTRA_MAX);
    let (values, mut jac) = tm.evaluate_with_jacobian(&FitParams::from_internal(&theta));
    let mut r = values - y;
    let mut cost = r.norm_squared();
    let mut history = vec![cost];
    let mut damping = options.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    let mut stalled = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let g = jac.transpose() * &r;
        if projected_gradient(&g, &theta) <= options.gtol {
            converged = true;
            break;
        }
        // the width is held fixed while it sits on a bound it is pushing against
        let frozen = pinned_width(&g, &theta);
        let jtj = jac.transpose() * &jac;
        let mut a = jtj.clone();
        let mut rhs = -&g;
        for k in 0..5 {
            a[(k, k)] += damping * jtj[(k, k)].max(1e-30);
        }
        if frozen {
            a.row_mut(1).fill(0.0);
            a.column_mut(1).fill(0.0);
            a[(1, 1)] = 1.0;
            rhs[1] = 0.0;
        }
        let Some(step) = a.cholesky().map(|c| c.solve(&rhs)) else {
            damping *= 10.0;
            continue;
        };
        let mut trial = theta;
        for k in 0..5 {
            trial[k] += step[k];
        }
        trial[1] = trial[1].clamp(0.0, LORENTZ_EXTRA_MAX);
        let (tv, tj) = tm.evaluate_with_jacobian(&FitParams::from_internal(&trial));
        let tr = tv - y;
        let tcost = tr.norm_squared();
        if tcost.is_finite() && tcost <= cost {
            let rel = (cost.sqrt() - tcost.sqrt()) / cost.sqrt().max(f64::MIN_POSITIVE);
            theta = trial;
            r = tr;
            jac = tj;
            cost = tcost;
            history.push(cost);
            damping = (damping / 10.0).max(1e-12);
            stalled = if rel < options.ftol { stalled + 1 } else { 0 };
            if stalled >= STALL_STEPS {
                converged = projected_gradient(&(jac.transpose() * &r), &theta) <= options.gtol;
                break;
            }
        } else {
            damping *= 10.0;
            if damping > 1e16 {
                // no descent left at working precision
                converged = projected_gradient(&(jac.transpose() * &r), &theta) <= options.gtol;
                break;
            }
        }
    }

    let params = FitParams::from_internal(&theta);
    let n = y.len();
    let dof = (n - 5).max(1) as f64;
    let s2 = cost / dof;
    let cov = (jac.transpose() * &jac)
        .try_inverse()
        .ok_or_else(|| Error::Unidentifiable("normal matrix is singular at the optimum".into()))?;
    let sd: Vec<f64> = (0..5).map(|k| (s2 * cov[(k, k)]).max(0.0).sqrt()).collect();
    let uncertainties = FitParams {
        density_scale: params.density_scale * sd[0],
        lorentz_extra: sd[1],
        frequency_offset: sd[2],
        amplitude: sd[3],
        baseline: sd[4],
    };
    Ok(FitResult {
        params,
        uncertainties,
        residual_norm: cost.sqrt(),
        gradient_norm: projected_gradient(&(jac.transpose() * &r), &theta),
        od_ref: tm.od_at(&params, TransitionLabel::OD_REFERENCE)?.max(0.0),
        converged,
        n_iterations: iterations,
        low_confidence: false,
        cost_history: history,
    })
}

fn pinned_width(g: &DVector<f64>, theta: &[f64; 5]) -> bool {
    (theta[1] <= 0.0 && g[1] > 0.0) || (theta[1] >= LORENTZ_EXTRA_MAX && g[1] < 0.0)
}

/// Infinity norm of the gradient of half the squared residual, ignoring the
/// width component while the width is pinned at a bound.
fn projected_gradient(g: &DVector<f64>, theta: &[f64; 5]) -> f64 {
    let pinned = pinned_width(g, theta);
    (0..5)
        .filter(|&k| !(k == 1 && pinned))
        .map(|k| g[k].abs())
        .fold(0.0, f64::max)
}

/// Estimates offset, density scale and transmission level from the two
/// deepest dips. Falls back to an absorption-weighted centroid, flagged as
/// low confidence, when fewer than two dips are found.
pub fn peak_find_init(model: &SpectrumModel, data: &SpectrumTrace, cond: &CellConditions) -> Result<InitialGuess> {
    let x = data.detunings();
    let y = smooth(x, data.values(), 30.0);
    let top = quantile(&y, 0.98);
    let noise = noise_level(data.values());
    let threshold = (6.0 * noise).max(1e-4 * top.abs());

    // template: unit offset, nominal density, no extra width
    let tm = TransmissionModel::new(model, x, cond)?;
    let nominal = FitParams::default();
    let tpl_x = dense_template_grid(x);
    let tpl = TransmissionModel::new(model, &tpl_x, cond)?;
    let tpl_y = tpl.evaluate(&nominal);
    let tpl_dips = dips(&tpl_x, &tpl_y, 1.0, 1e-6, 300.0);

    let observed = dips(x, &y, top, threshold, 300.0);
    let mut guess = FitParams {
        amplitude: top,
        lorentz_extra: 5.0,
        ..nominal
    };
    let depth = |v: f64| -((v.max(1e-3 * top)) / top).ln();

    if observed.len() >= 2 && tpl_dips.len() >= 2 {
        let mut two = observed[..2].to_vec();
        two.sort_by(|a, b| a.0.total_cmp(&b.0));
        let gap = two[1].0 - two[0].0;
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..tpl_dips.len() {
            for j in 0..tpl_dips.len() {
                let tgap = tpl_dips[j].0 - tpl_dips[i].0;
                if tgap > 0.0 && (tgap - gap).abs() < best.0 {
                    best = ((tgap - gap).abs(), i, j);
                }
            }
        }
        let (_, i, j) = best;
        guess.frequency_offset = 0.5 * ((two[0].0 - tpl_dips[i].0) + (two[1].0 - tpl_dips[j].0));
        let od_obs = depth(two[0].1).max(depth(two[1].1));
        let od_tpl = depth(tpl_dips[i].1).max(depth(tpl_dips[j].1));
        guess.density_scale = (od_obs / od_tpl).max(1e-6);
        return Ok(InitialGuess {
            params: guess,
            low_confidence: false,
        });
    }

    // centroid fallback
    let (area, moment) = weighted(x, &y, top);
    let (tarea, tmoment) = weighted(&tpl_x, &tpl_y, 1.0);
    if area > 0.0 && tarea > 0.0 {
        guess.frequency_offset = moment / area - tmoment / tarea;
        let model_area: f64 = {
            let v = tm.evaluate(&FitParams {
                frequency_offset: guess.frequency_offset,
                ..nominal
            });
            weighted(x, &v, 1.0).0
        };
        if model_area > 0.0 {
            guess.density_scale = (area / top / model_area).max(1e-6);
        }
    }
    Ok(InitialGuess {
        params: guess,
        low_confidence: true,
    })
}

fn dense_template_grid(x: &[f64]) -> Vec<f64> {
    let (lo, hi) = (x[0].min(-1500.0), x[x.len() - 1].max(7500.0));
    let n = ((hi - lo) / 2.0).ceil() as usize;
    (0..=n).map(|i| lo + i as f64 * 2.0).collect()
}

/// Local minima deeper than `threshold` below `top`, at least `separation`
/// apart, deepest first, as (position, value).
fn dips(x: &[f64], y: &[f64], top: f64, threshold: f64, separation: f64) -> Vec<(f64, f64)> {
    let mut mins: Vec<(f64, f64)> = (1..y.len().saturating_sub(1))
        .filter(|&i| y[i] <= y[i - 1] && y[i] < y[i + 1] && top - y[i] > threshold)
        .map(|i| (x[i], y[i]))
        .collect();
    mins.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut kept: Vec<(f64, f64)> = Vec::new();
    for m in mins {
        if kept.iter().all(|k| (k.0 - m.0).abs() >= separation) {
            kept.push(m);
        }
    }
    kept
}

/// Moving average over a window of `width` MHz.
fn smooth(x: &[f64], y: &[f64], width: f64) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    let (mut lo, mut hi, mut sum) = (0usize, 0usize, 0.0);
    for i in 0..n {
        while hi < n && x[hi] <= x[i] + 0.5 * width {
            sum += y[hi];
            hi += 1;
        }
        while x[lo] < x[i] - 0.5 * width {
            sum -= y[lo];
            lo += 1;
        }
        out.push(sum / (hi - lo) as f64);
    }
    out
}

fn quantile(y: &[f64], q: f64) -> f64 {
    let mut s = y.to_vec();
    s.sort_by(f64::total_cmp);
    s[((s.len() - 1) as f64 * q).round() as usize]
}

/// Robust white-noise estimate from successive differences.
fn noise_level(y: &[f64]) -> f64 {
    let mut d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    d[d.len() / 2] / (0.6745 * std::f64::consts::SQRT_2)
}

/// Trapezoid integrals of `top - y` and `x (top - y)`.
fn weighted(x: &[f64], y: &[f64], top: f64) -> (f64, f64) {
    let mut area = 0.0;
    let mut moment = 0.0;
    for i in 1..x.len() {
        let h = x[i] - x[i - 1];
        let (a, b) = ((top - y[i - 1]).max(0.0), (top - y[i]).max(0.0));
        area += 0.5 * h * (a + b);
        moment += 0.5 * h * (a * x[i - 1] + b * x[i]);
    }
    (area, moment)
}

/// Result of the temperature-offset calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetFit {
    /// K, to be added to reservoir readings.
    pub delta_t: f64,
    /// K, one standard deviation.
    pub uncertainty: f64,
    pub points_used: usize,
    pub n_iterations: usize,
    pub residual_norm: f64,
}

/// Finds the offset `dT` minimizing `sum (ln OD_model(T_i + dT) - ln OD_i)^2`
/// over points with readings at or below [`OFFSET_FIT_CEILING`].
/// `template` supplies the cell-temperature step, path length, width and line.
pub fn fit_temperature_offset(
    model: &SpectrumModel,
    points: &[(f64, f64)],
    template: &OdCurveTemplate,
) -> Result<OffsetFit> {
    let used: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0 <= OFFSET_FIT_CEILING).collect();
    if used.len() < 3 {
        return Err(Error::Data(format!(
            "{} point(s) at or below {OFFSET_FIT_CEILING} K; at least 3 are needed",
            used.len()
        )));
    }
    if let Some(p) = used.iter().find(|p| !(p.1 > 0.0 && p.1.is_finite())) {
        return Err(Error::Data(format!("OD {} at {} K is not positive", p.1, p.0)));
    }
    let vapor = model.vapor();
    // residual ln OD(T + dT) - ln OD and its derivative in dT; only the density depends on dT
    let residuals = |dt: f64| -> Result<Vec<(f64, f64)>> {
        let tpl = template.with_offset(dt);
        used.iter()
            .map(|&(t, od)| {
                let model_od = model.optical_density_at(&tpl.conditions(t)?, tpl.line)?;
                let te = t + dt;
                let dln = vapor.vapor_pressure_slope(te)? / vapor.vapor_pressure(te)? - 1.0 / te;
                Ok((model_od.ln() - od.ln(), dln))
            })
            .collect()
    };

    let mut dt = template.temperature_offset;
    let mut rj = residuals(dt)?;
    let mut cost: f64 = rj.iter().map(|p| p.0 * p.0).sum();
    let mut damping = 1e-3;
    let mut iterations = 0;
    loop {
        if iterations >= 200 {
            return Err(Error::Numeric(format!(
                "offset fit did not converge: dT = {dt} K after {iterations} iterations"
            )));
        }
        iterations += 1;
        let g: f64 = rj.iter().map(|p| p.0 * p.1).sum();
        let h: f64 = rj.iter().map(|p| p.1 * p.1).sum();
        let step = -g / (h * (1.0 + damping));
        if step.abs() < 1e-12 * (1.0 + dt.abs()) || cost == 0.0 {
            break;
        }
        match residuals(dt + step) {
            Ok(trial) => {
                let tcost: f64 = trial.iter().map(|p| p.0 * p.0).sum();
                if tcost <= cost {
                    dt += step;
                    rj = trial;
                    cost = tcost;
                    damping = (damping / 10.0).max(1e-12);
                    continue;
                }
                damping *= 10.0;
            }
            // the step pushed a point outside the vapor model; shorten it
            Err(Error::OutOfRange { .. }) => damping *= 10.0,
            Err(e) => return Err(e),
        }
        if damping > 1e12 {
            break;
        }
    }
    let h: f64 = rj.iter().map(|p| p.1 * p.1).sum();
    let dof = (used.len() - 1) as f64;
    Ok(OffsetFit {
        delta_t: dt,
        uncertainty: (cost / dof / h).sqrt(),
        points_used: used.len(),
        n_iterations: iterations,
        residual_norm: cost.sqrt(),
    })
}
