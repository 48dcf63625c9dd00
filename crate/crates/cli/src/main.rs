mod units;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use vaporcell::atomic::TransitionLabel;
use vaporcell::constants::{Constants, CONSTANTS_ENV};
use vaporcell::eit::{self, EitParams, Geometry, DEFAULT_OMEGA_C};
use vaporcell::fit::{self, FitOptions};
use vaporcell::scan::{self, BeamProfile, ChannelGeometry, ScanProfile, WidthConvention};
use vaporcell::spectrum::{self, uniform_grid, OdCurveTemplate, SpectrumModel, SpectrumTrace};
use vaporcell::vapor::{kelvin_to_celsius, CellConditions};

/// Simulate and fit rubidium spectra of micrometre-scale vapor cells.
#[derive(Parser, Debug)]
#[command(name = "vaporcell", version, about)]
struct Cli {
    /// Constants table to load instead of the bundled one.
    /// Falls back to $VAPORCELL_CONSTANTS when not given.
    #[arg(long, global = true, value_name = "FILE")]
    constants: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a D2 spectrum as CSV.
    Spectrum(SpectrumArgs),
    /// Optical density at Rb85 F=3 -> F'=4 versus reservoir temperature.
    Odcurve(OdCurveArgs),
    /// Lateral absorption and fluorescence scan across a channel.
    Scan(ScanArgs),
    /// Coupling-laser scan of the ladder EIT signal.
    Eit(EitArgs),
    /// Fit a transmission spectrum; writes the result as JSON.
    Fit(FitArgs),
    /// Fit the reservoir temperature offset to an OD series.
    FitOffset(FitOffsetArgs),
    /// Print the loaded constants with their sources.
    Constants,
}

#[derive(Args, Debug)]
struct Conditions {
    /// Reservoir temperature (e.g. 160C, 433K).
    #[arg(long, value_parser = units::temperature, allow_hyphen_values = true)]
    res: f64,
    /// Cell body temperature.
    #[arg(long, value_parser = units::temperature, allow_hyphen_values = true)]
    cell: f64,
    /// Vapor thickness along the beam (e.g. 10um).
    #[arg(long, value_parser = units::length, default_value = "10um")]
    length: f64,
    /// Calibration offset added to the reservoir reading (e.g. -7K).
    #[arg(long, value_parser = units::temperature_step, default_value = "0K", allow_hyphen_values = true)]
    offset: f64,
    /// Extra Lorentzian FWHM in MHz.
    #[arg(long, default_value_t = 0.0)]
    lorentz_extra: f64,
    /// Number density in m^-3, replacing the vapor-pressure model.
    #[arg(long)]
    density: Option<f64>,
}

impl Conditions {
    fn build(&self) -> vaporcell::Result<CellConditions> {
        let c = CellConditions::new(self.res, self.cell, self.length)?
            .with_offset(self.offset)
            .with_lorentz_extra(self.lorentz_extra)?;
        match self.density {
            Some(n) => c.with_density(n),
            None => Ok(c),
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SpectrumKind {
    Transmission,
    Absorption,
    Od,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    conditions: Conditions,
    /// Quantity to write.
    #[arg(long, value_enum, default_value = "transmission")]
    kind: SpectrumKind,
    /// First detuning, MHz from Rb87 F=2 -> F'=3.
    #[arg(long, default_value_t = -4000.0, allow_hyphen_values = true)]
    from: f64,
    /// Last detuning, MHz.
    #[arg(long, default_value_t = 7000.0, allow_hyphen_values = true)]
    to: f64,
    /// Detuning step, MHz.
    #[arg(long, default_value_t = 2.0)]
    step: f64,
    /// Standard deviation of additive Gaussian noise.
    #[arg(long, requires = "seed")]
    noise: Option<f64>,
    /// Seed for the noise generator.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OdCurveArgs {
    #[arg(long, value_parser = units::temperature)]
    res_min: f64,
    #[arg(long, value_parser = units::temperature)]
    res_max: f64,
    #[arg(long, value_parser = units::temperature_step, default_value = "5K")]
    res_step: f64,
    /// Cell minus reservoir temperature.
    #[arg(long, value_parser = units::temperature_step, default_value = "10K", allow_hyphen_values = true)]
    cell_delta: f64,
    #[arg(long, value_parser = units::temperature_step, default_value = "0K", allow_hyphen_values = true)]
    offset: f64,
    #[arg(long, value_parser = units::length, default_value = "10um")]
    length: f64,
    /// Extra Lorentzian FWHM in MHz.
    #[arg(long, default_value_t = 0.0)]
    lorentz_extra: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BeamArgs {
    /// Channel cross-section as top,bottom,depth in um.
    #[arg(long, default_value = "40,20,10")]
    geometry: ChannelGeometry,
    /// Beam width at the focus, um.
    #[arg(long, default_value_t = 3.0)]
    waist: f64,
    /// How --waist is read: radius, diameter (1/e^2) or fwhm.
    #[arg(long, default_value = "diameter")]
    waist_convention: WidthConvention,
    /// Multiplies the 1/e^2 radius to mimic divergence over the depth.
    #[arg(long, default_value_t = 1.0)]
    inflation: f64,
}

impl BeamArgs {
    fn beam(&self) -> vaporcell::Result<BeamProfile> {
        BeamProfile::from_width(self.waist, self.waist_convention)?.with_inflation(self.inflation)
    }
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[command(flatten)]
    beam: BeamArgs,
    /// Scan from -SPAN to +SPAN, um.
    #[arg(long, default_value_t = 40.0)]
    span: f64,
    /// Stage step, um.
    #[arg(long, default_value_t = 0.5)]
    step: f64,
    #[arg(long, value_parser = units::temperature, default_value = "160C")]
    abs_res: f64,
    #[arg(long, value_parser = units::temperature, default_value = "180C")]
    abs_cell: f64,
    #[arg(long, value_parser = units::temperature, default_value = "130C")]
    fl_res: f64,
    #[arg(long, value_parser = units::temperature, default_value = "190C")]
    fl_cell: f64,
    #[arg(long, value_parser = units::temperature_step, default_value = "0K", allow_hyphen_values = true)]
    offset: f64,
    /// Line the lasers are tuned to.
    #[arg(long, default_value = "Rb87:2->3")]
    line: TransitionLabel,
    /// Fraction of first-step excitations promoted to 5D5/2.
    #[arg(long, default_value_t = 1.0)]
    efficiency: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Beams {
    Counter,
    Co,
}

#[derive(Args, Debug)]
struct EitArgs {
    #[command(flatten)]
    beam: BeamArgs,
    /// Coupling Rabi frequency, MHz.
    #[arg(long, default_value_t = DEFAULT_OMEGA_C)]
    omega_c: f64,
    #[arg(long, value_parser = units::temperature, default_value = "460K")]
    temperature: f64,
    /// Beam arrangement.
    #[arg(long, value_enum, default_value = "counter")]
    beams: Beams,
    /// Transit dephasing in MHz, replacing the beam and channel estimate.
    #[arg(long)]
    transit: Option<f64>,
    /// Probe detuning, MHz.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    probe_detuning: f64,
    /// Gaussian smoothing FWHM applied to the scan, MHz.
    #[arg(long, default_value_t = 0.0)]
    smoothing: f64,
    #[arg(long, default_value_t = -150.0, allow_hyphen_values = true)]
    from: f64,
    #[arg(long, default_value_t = 150.0, allow_hyphen_values = true)]
    to: f64,
    #[arg(long, default_value_t = 0.5)]
    step: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Transmission CSV; `-` or absent reads standard input.
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Reservoir temperature, when the file does not record it.
    #[arg(long, value_parser = units::temperature, requires_all = ["cell", "length"])]
    res: Option<f64>,
    #[arg(long, value_parser = units::temperature, requires = "res")]
    cell: Option<f64>,
    #[arg(long, value_parser = units::length, requires = "res")]
    length: Option<f64>,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitOffsetArgs {
    /// CSV of reservoir_K,optical_density as written by `odcurve`.
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(long, value_parser = units::temperature_step, default_value = "10K", allow_hyphen_values = true)]
    cell_delta: f64,
    #[arg(long, value_parser = units::length, default_value = "10um")]
    length: f64,
    #[arg(long, default_value_t = 0.0)]
    lorentz_extra: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Failures that map onto the exit codes: 1 usage, 2 numeric or model, 3 input data.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Model(vaporcell::Error),
    Input(String),
    /// The reader of our output went away (e.g. `| head`).
    Closed,
}

impl From<vaporcell::Error> for Failure {
    fn from(e: vaporcell::Error) -> Self {
        match e {
            vaporcell::Error::Io(io) if io.kind() == io::ErrorKind::BrokenPipe => Failure::Closed,
            e => Failure::Model(e),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        use vaporcell::Error as E;
        match self {
            Failure::Closed => 0,
            Failure::Usage(_) => 1,
            Failure::Input(_) => 3,
            Failure::Model(e) => match e {
                E::InvalidParameter { .. } => 1,
                E::Data(_) | E::WrongKind { .. } | E::Io(_) | E::ConstantsParse { .. } | E::Config(_) => 3,
                _ => 2,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Input(m) => m.clone(),
            Failure::Model(e) => e.to_string(),
            Failure::Closed => String::new(),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Closed) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            if let Failure::Model(vaporcell::Error::NotConverged { best }) = &f {
                eprintln!("{}", best.to_json());
            }
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let constants = load_constants(cli.constants.as_deref())?;
    match cli.command {
        Command::Spectrum(a) => run_spectrum(&constants, a),
        Command::Odcurve(a) => run_odcurve(&constants, a),
        Command::Scan(a) => run_scan(&constants, a),
        Command::Eit(a) => run_eit(&constants, a),
        Command::Fit(a) => run_fit(&constants, a),
        Command::FitOffset(a) => run_fit_offset(&constants, a),
        Command::Constants => {
            let mut out = io::stdout().lock();
            writeln!(out, "# key\tvalue\tunit\tsource").map_err(write_failure)?;
            for e in constants.entries() {
                writeln!(out, "{}\t{}\t{}\t{}", e.key, show_value(e.value), e.unit, e.source).map_err(write_failure)?;
            }
            Ok(())
        }
    }
}

fn show_value(v: f64) -> String {
    if v != 0.0 && !(1e-3..1e7).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn load_constants(path: Option<&Path>) -> Result<Constants, Failure> {
    let loaded = match path {
        Some(p) => Constants::load(p),
        None => Constants::from_env_or_bundled(),
    };
    loaded.map_err(|e| {
        let origin = path
            .map(|p| p.display().to_string())
            .or_else(|| std::env::var(CONSTANTS_ENV).ok())
            .unwrap_or_else(|| "bundled table".into());
        Failure::Input(format!("constants ({origin}): {e}"))
    })
}

fn write_failure(e: io::Error) -> Failure {
    if e.kind() == io::ErrorKind::BrokenPipe {
        return Failure::Closed;
    }
    Failure::Input(format!("cannot write output: {e}"))
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) if p != Path::new("-") => {
            let f = File::create(p).map_err(|e| Failure::Input(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        _ => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn open_input(path: Option<&Path>) -> Result<Box<dyn BufRead>, Failure> {
    match path {
        Some(p) if p != Path::new("-") => {
            let f = File::open(p).map_err(|e| Failure::Input(format!("cannot open {}: {e}", p.display())))?;
            Ok(Box::new(BufReader::new(f)))
        }
        _ => Ok(Box::new(BufReader::new(io::stdin().lock()))),
    }
}

fn finish(mut w: Box<dyn Write>) -> Outcome {
    w.flush().map_err(write_failure)
}

fn run_spectrum(constants: &Constants, a: SpectrumArgs) -> Outcome {
    let model = SpectrumModel::from_constants(constants)?;
    let cond = a.conditions.build()?;
    let grid = uniform_grid(a.from, a.to, a.step)?;
    let alpha = model.absorption_coefficient(&grid, &cond)?;
    let mut trace = match a.kind {
        SpectrumKind::Absorption => alpha,
        SpectrumKind::Transmission => spectrum::transmission(&alpha, cond.path_length)?,
        SpectrumKind::Od => spectrum::optical_density(&alpha, cond.path_length)?,
    }
    .with_conditions(&cond);
    if let (Some(sigma), Some(seed)) = (a.noise, a.seed) {
        trace = trace.with_gaussian_noise(sigma, seed)?;
    }
    let od = model.optical_density_at(&cond, TransitionLabel::OD_REFERENCE)?;
    let mut w = open_output(a.output.as_deref())?;
    trace.write_csv(&mut w)?;
    finish(w)?;
    eprintln!(
        "spectrum: {} points of {}, OD at {} = {:.6}, density {:.4e} m^-3",
        trace.len(),
        trace.kind(),
        TransitionLabel::OD_REFERENCE,
        od,
        cond.density(model.vapor())?
    );
    Ok(())
}

fn run_odcurve(constants: &Constants, a: OdCurveArgs) -> Outcome {
    if !(a.res_step > 0.0) {
        return Err(Failure::Usage("--res-step must be positive".into()));
    }
    if a.res_max < a.res_min {
        return Err(Failure::Usage("--res-max is below --res-min".into()));
    }
    let model = SpectrumModel::from_constants(constants)?;
    let tpl = OdCurveTemplate {
        cell_delta: a.cell_delta,
        temperature_offset: a.offset,
        path_length: a.length,
        lorentz_extra: a.lorentz_extra,
        line: TransitionLabel::OD_REFERENCE,
    };
    let n = ((a.res_max - a.res_min) / a.res_step + 1e-9).floor() as usize;
    let temps: Vec<f64> = (0..=n).map(|i| a.res_min + i as f64 * a.res_step).collect();
    let points = model.od_curve(&temps, &tpl);
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        rows.push((p.reservoir_t, p.od?));
    }
    let mut w = open_output(a.output.as_deref())?;
    (|| -> io::Result<()> {
        writeln!(
            w,
            "# kind=od_curve line={} cell_delta_K={} temperature_offset_K={} path_length_m={} lorentz_extra_MHz={}",
            tpl.line, tpl.cell_delta, tpl.temperature_offset, tpl.path_length, tpl.lorentz_extra
        )?;
        writeln!(w, "reservoir_C,reservoir_K,optical_density")?;
        for (t, od) in &rows {
            writeln!(w, "{},{},{}", kelvin_to_celsius(*t), t, od)?;
        }
        Ok(())
    })()
    .map_err(write_failure)?;
    finish(w)?;
    let (lo, hi) = (rows[0].1, rows[rows.len() - 1].1);
    eprintln!(
        "odcurve: {} points, OD {:.4} .. {:.4} ({:.2} decades)",
        rows.len(),
        lo,
        hi,
        (hi / lo).log10()
    );
    Ok(())
}

fn run_scan(constants: &Constants, a: ScanArgs) -> Outcome {
    let model = SpectrumModel::from_constants(constants)?;
    let g = a.beam.geometry;
    let beam = a.beam.beam()?;
    let positions = scan::scan_positions(a.span, a.step)?;
    let depth = g.depth() * 1e-6;
    let abs_cond = CellConditions::new(a.abs_res, a.abs_cell, depth)?.with_offset(a.offset);
    let fl_cond = CellConditions::new(a.fl_res, a.fl_cell, depth)?.with_offset(a.offset);
    let absorption = scan::scan_absorption(&model, &positions, &g, &beam, &abs_cond, a.line)?;
    let fluorescence = scan::scan_fluorescence(&model, &positions, &g, &beam, &fl_cond, a.line, a.efficiency)?;
    let abs_width = scan::fwhm(&positions, &absorption);
    let fl_width = scan::fwhm(&positions, &fluorescence);
    let mut profile = ScanProfile::new(positions, absorption, fluorescence, &g, &beam);
    profile.metadata.push(("line".into(), a.line.to_string()));
    profile.add_conditions("abs_", &abs_cond);
    profile.add_conditions("fl_", &fl_cond);
    let mut w = open_output(a.output.as_deref())?;
    profile.write_csv(&mut w)?;
    finish(w)?;
    let show = |w: Option<f64>| w.map_or("unresolved".to_owned(), |w| format!("{w:.2} um"));
    eprintln!(
        "scan: {} positions, FWHM absorption {}, fluorescence {}",
        profile.positions.len(),
        show(abs_width),
        show(fl_width)
    );
    Ok(())
}

fn run_eit(constants: &Constants, a: EitArgs) -> Outcome {
    let atoms = vaporcell::atomic::AtomicData::from_constants(constants)?;
    let beam = a.beam.beam()?;
    let mut p = EitParams::for_cell(&atoms, &beam, &a.beam.geometry)?;
    p.omega_c = a.omega_c;
    p.temperature = a.temperature;
    p.gamma_transit = match a.transit {
        Some(t) => t,
        None => eit::transit_rate(&beam, &a.beam.geometry, a.temperature, p.mass)?,
    };
    p.geometry = match a.beams {
        Beams::Counter => Geometry::CounterPropagating,
        Beams::Co => Geometry::CoPropagating,
    };
    p.probe_detuning = a.probe_detuning;
    p.smoothing_fwhm = a.smoothing;
    let grid = uniform_grid(a.from, a.to, a.step)?;
    let trace = eit::coupling_scan(&grid, &p)?;
    let width = eit::transparency_fwhm(&trace);
    let mut w = open_output(a.output.as_deref())?;
    trace.write_csv(&mut w)?;
    finish(w)?;
    match width {
        Ok(fw) => eprintln!(
            "eit: {} points, transparency FWHM {fw:.3} MHz (transit {:.3} MHz)",
            trace.len(),
            p.gamma_transit
        ),
        Err(_) => eprintln!("eit: {} points, no transparency peak resolved", trace.len()),
    }
    Ok(())
}

fn run_fit(constants: &Constants, a: FitArgs) -> Outcome {
    let model = SpectrumModel::from_constants(constants)?;
    let data = SpectrumTrace::read_csv(open_input(a.input.as_deref())?)?;
    let cond = match (a.res, a.cell, a.length) {
        (Some(r), Some(c), Some(l)) => CellConditions::new(r, c, l)?,
        _ => spectrum::conditions_from_metadata(&data)?,
    };
    let opts = FitOptions {
        max_iterations: a.max_iterations,
        ..FitOptions::default()
    };
    let r = fit::fit_spectrum_with(&model, &data, &cond, None, &opts)?;
    let mut w = open_output(a.output.as_deref())?;
    writeln!(w, "{}", r.to_json()).map_err(write_failure)?;
    finish(w)?;
    eprintln!(
        "fit: od_ref {:.6}, lorentz_extra {:.3} MHz, offset {:.3} MHz, {} iterations{}",
        r.od_ref,
        r.params.lorentz_extra,
        r.params.frequency_offset,
        r.n_iterations,
        if r.low_confidence { " (low-confidence start)" } else { "" }
    );
    Ok(())
}

/// Reads `(reservoir K, OD)` pairs. A header row naming `reservoir_K` and
/// `optical_density` selects those columns; otherwise the first two are used.
fn read_od_points(r: impl BufRead) -> Result<Vec<(f64, f64)>, Failure> {
    let mut cols = (0, 1);
    let mut points = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Failure::Input(format!("cannot read OD series: {e}")))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.iter().any(|f| f.parse::<f64>().is_err()) {
            if !points.is_empty() {
                return Err(Failure::Input(format!("line {}: `{line}` is not numeric", i + 1)));
            }
            let find = |name: &str| fields.iter().position(|f| *f == name);
            if let (Some(t), Some(od)) = (find("reservoir_K"), find("optical_density")) {
                cols = (t, od);
            }
            continue;
        }
        let get = |k: usize| {
            fields
                .get(k)
                .and_then(|f| f.parse::<f64>().ok())
                .ok_or_else(|| Failure::Input(format!("line {}: missing column {}", i + 1, k + 1)))
        };
        points.push((get(cols.0)?, get(cols.1)?));
    }
    Ok(points)
}

fn run_fit_offset(constants: &Constants, a: FitOffsetArgs) -> Outcome {
    let model = SpectrumModel::from_constants(constants)?;
    let points = read_od_points(open_input(a.input.as_deref())?)?;
    let tpl = OdCurveTemplate {
        cell_delta: a.cell_delta,
        temperature_offset: 0.0,
        path_length: a.length,
        lorentz_extra: a.lorentz_extra,
        line: TransitionLabel::OD_REFERENCE,
    };
    let r = fit::fit_temperature_offset(&model, &points, &tpl)?;
    let doc = json!({
        "delta_t_K": r.delta_t,
        "uncertainty_K": r.uncertainty,
        "points_used": r.points_used,
        "n_iterations": r.n_iterations,
        "residual_norm": r.residual_norm,
    });
    let mut w = open_output(a.output.as_deref())?;
    writeln!(w, "{}", serde_json::to_string_pretty(&doc).expect("plain values serialize")).map_err(write_failure)?;
    finish(w)?;
    eprintln!(
        "fit-offset: dT = {:.3} +- {:.3} K from {} points",
        r.delta_t, r.uncertainty, r.points_used
    );
    Ok(())
}
