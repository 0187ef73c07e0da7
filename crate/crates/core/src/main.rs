use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nucpol::analytics::predictions;
use nucpol::channel::{cycle_channel, fully_mixed, lindblad_cycle_channel, unitary_cycle_channel, QuantumChannel};
use nucpol::estimator::{fit_couplings, EstimatorError, FitOptions, FitResult};
use nucpol::experiments::{
    decoherence_robustness, halving_variants, hh_baseline, two_spin_resolution, convergence_traces, window,
    ScenarioError, ScenarioReport, TwoSpinOptions,
};
use nucpol::io::csv::{format_value, records_csv};
use nucpol::io::{parse_config, render_svg, spectrum_table, table_to_spectrum, trajectory_table, RunConfig, Series, Table};
use nucpol::steady::steady_state;
use nucpol::sweep::{
    find_reversals, measure_linewidth, run_sweep, sensitivity_estimate, ChannelChoice, Component, Signal, Spectrum,
    SweepParameter, SweepSpec,
};
use nucpol::{hz, to_hz};

#[derive(Parser, Debug)]
#[command(name = "nucpol", version, about = "Steady-state nuclear polarisation under a periodically reset electron spin")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// Run configuration (flat `section.key = value` file).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; falls back to `output.csv` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional SVG plot; falls back to `output.plot`.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Worker threads for sweep points.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Steady state versus the nuclear Larmor frequency.
    SweepLarmor(Common),
    /// Steady state versus the dressed splitting Ω.
    SweepRabi(Common),
    /// Steady state versus the reset period.
    SweepReset(Common),
    /// Fixed point, gap and convergence time at one operating point.
    Steady(Common),
    /// Cycle-by-cycle trajectory from the fully mixed nuclear state.
    Converge(Common),
    /// Reversal position, widths and closed-form predictions from a Larmor sweep.
    Features(Common),
    /// Recover couplings from a spectrum CSV (`fit.input`).
    Fit(Common),
    /// Packaged scenarios.
    Scenario {
        id: ScenarioId,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ScenarioId {
    Decoherence,
    HhBaseline,
    TwoSpin,
    Convergence,
}

enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

fn numerical(e: impl std::fmt::Display) -> Failure {
    Failure::Numerical(e.to_string())
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

struct Outputs {
    csv: PathBuf,
    plot: Option<PathBuf>,
}

impl Outputs {
    fn sibling(&self, label: &str) -> PathBuf {
        let stem = self.csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let clean: String = label
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
            .collect();
        self.csv.with_file_name(format!("{stem}.{clean}.csv"))
    }

    fn plot(&self, series: &[Series], x: &str, y: &str) -> Result<(), Failure> {
        match &self.plot {
            Some(p) => write_file(p, &render_svg(series, x, y)),
            None => Ok(()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (name, common, scenario) = match &cli.command {
        Command::SweepLarmor(c) => ("sweep-larmor", c, None),
        Command::SweepRabi(c) => ("sweep-rabi", c, None),
        Command::SweepReset(c) => ("sweep-reset", c, None),
        Command::Steady(c) => ("steady", c, None),
        Command::Converge(c) => ("converge", c, None),
        Command::Features(c) => ("features", c, None),
        Command::Fit(c) => ("fit", c, None),
        Command::Scenario { id, common } => ("scenario", common, Some(*id)),
    };
    let text = fs::read_to_string(&common.config)
        .map_err(|e| Failure::Io(format!("cannot read {}: {e}", common.config.display())))?;
    let cfg = parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", common.config.display())))?;
    let csv = common
        .out
        .clone()
        .or_else(|| cfg.output_csv.clone())
        .ok_or_else(|| Failure::Config("no output path: pass --out or set output.csv".into()))?;
    let out = Outputs {
        csv,
        plot: common.plot.clone().or_else(|| cfg.output_plot.clone()),
    };
    if common.threads == Some(0) {
        return Err(Failure::Config("--threads must be at least 1".into()));
    }

    println!("# nucpol {}", env!("CARGO_PKG_VERSION"));
    println!("# command: {name}{}", scenario.map(|s| format!(" {s:?}")).unwrap_or_default());
    println!("# config: {}", common.config.display());
    println!("# seed: none (no random numbers are drawn)");
    match common.threads {
        Some(n) => println!("# threads: {n}"),
        None => println!("# threads: default"),
    }
    for (k, v) in &cfg.resolved {
        println!("# {k} = {v}");
    }

    let body = || -> Result<(), Failure> {
        match (&cli.command, scenario) {
            (Command::SweepLarmor(_), _) => sweep(&cfg, SweepParameter::Larmor, &out),
            (Command::SweepRabi(_), _) => sweep(&cfg, SweepParameter::Rabi, &out),
            (Command::SweepReset(_), _) => sweep(&cfg, SweepParameter::ResetTime, &out),
            (Command::Steady(_), _) => steady(&cfg, &out),
            (Command::Converge(_), _) => converge(&cfg, &out),
            (Command::Features(_), _) => features(&cfg, &out),
            (Command::Fit(_), _) => fit(&cfg, &out),
            (_, Some(id)) => run_scenario(&cfg, id, &out),
            (Command::Scenario { .. }, None) => unreachable!("scenario id is required by the parser"),
        }
    };
    match common.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?
            .install(body),
        None => body(),
    }
}

fn sweep_spec(cfg: &RunConfig, parameter: SweepParameter) -> Result<SweepSpec, Failure> {
    let missing = |k: &str| Failure::Config(format!("missing required key `{k}` for this command"));
    let (start, stop) = if parameter.is_frequency() {
        (cfg.sweep.start.ok_or_else(|| missing("sweep.start_hz"))?, cfg.sweep.stop.ok_or_else(|| missing("sweep.stop_hz"))?)
    } else {
        (cfg.sweep.start_s.ok_or_else(|| missing("sweep.start_s"))?, cfg.sweep.stop_s.ok_or_else(|| missing("sweep.stop_s"))?)
    };
    let mut spec = SweepSpec::new(parameter, start, stop, cfg.sweep.steps);
    spec.channel = cfg.sweep.channel;
    spec.tol = cfg.sweep.tol;
    spec.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(spec)
}

fn spectrum_series(spectrum: &Spectrum, component: Component, name: &str) -> Vec<Series> {
    let x_scale = if spectrum.parameter.is_frequency() { to_hz(1.0) } else { 1.0 };
    let scale = |pts: Vec<(f64, f64)>| pts.into_iter().map(|(x, y)| (x * x_scale, y)).collect();
    let mut out: Vec<Series> = (0..spectrum.n_nuclei)
        .map(|i| Series {
            label: format!("{name}_{}", i + 1),
            points: scale(spectrum.series(Signal::Nucleus(i), component)),
        })
        .collect();
    if spectrum.n_nuclei > 1 {
        out.push(Series {
            label: format!("{name}_sum"),
            points: scale(spectrum.series(Signal::Sum, component)),
        });
    }
    out
}

fn x_label(parameter: SweepParameter) -> &'static str {
    match parameter {
        SweepParameter::Larmor => "nuclear Larmor frequency (Hz)",
        SweepParameter::Rabi => "dressed splitting (Hz)",
        SweepParameter::ResetTime => "reset period (s)",
    }
}

fn sweep(cfg: &RunConfig, parameter: SweepParameter, out: &Outputs) -> Result<(), Failure> {
    let spec = sweep_spec(cfg, parameter)?;
    let spectrum = run_sweep(&cfg.system, &cfg.drive, &spec).map_err(numerical)?;
    if spectrum.flagged() > 0 {
        eprintln!("warning: {} of {} points have no unique fixed point (written as NaN)", spectrum.flagged(), spectrum.rows.len());
    }
    write_file(&out.csv, &spectrum_table(&spectrum).to_csv())?;
    out.plot(&spectrum_series(&spectrum, Component::Z, "2Iz"), x_label(parameter), "steady <2Iz> (dimensionless)")?;
    println!("wrote {} rows to {}", spectrum.rows.len(), out.csv.display());
    Ok(())
}

fn channel_for(cfg: &RunConfig) -> Result<QuantumChannel, Failure> {
    let ch = match cfg.sweep.channel {
        ChannelChoice::Auto => cycle_channel(&cfg.system, &cfg.drive),
        ChannelChoice::Unitary => unitary_cycle_channel(&cfg.system, &cfg.drive),
        ChannelChoice::Lindblad => lindblad_cycle_channel(&cfg.system, &cfg.drive),
    }
    .map_err(numerical)?;
    let report = ch.cptp_report().map_err(numerical)?;
    if !report.passes(1e-9) {
        return Err(Failure::Numerical(format!("cycle channel is not CPTP within 1e-9: {report:?}")));
    }
    Ok(ch)
}

fn steady(cfg: &RunConfig, out: &Outputs) -> Result<(), Failure> {
    let ch = channel_for(cfg)?;
    let ss = steady_state(&ch, cfg.steady_tol).map_err(numerical)?;
    let n = cfg.system.n_nuclei();
    let mut header = Vec::new();
    let mut row = Vec::new();
    for (i, o) in ss.observables.iter().enumerate() {
        header.extend([format!("Iz_{}", i + 1), format!("Ix_{}", i + 1), format!("Iy_{}", i + 1)]);
        row.extend([o.iz, o.ix, o.iy]);
    }
    header.extend(["gap".into(), "tau_converge_s".into(), "residual".into()]);
    row.extend([ss.gap, ss.tau_converge.unwrap_or(f64::INFINITY), ss.residual]);
    write_file(&out.csv, &Table { header, rows: vec![row] }.to_csv())?;
    for (i, o) in ss.observables.iter().enumerate().take(n) {
        println!("nucleus {}: <2Iz> = {}  <2Ix> = {}  <2Iy> = {}", i + 1, format_value(o.iz), format_value(o.ix), format_value(o.iy));
    }
    println!("gap = {}  tau_converge = {} s", format_value(ss.gap), format_value(ss.tau_converge.unwrap_or(f64::INFINITY)));
    Ok(())
}

fn converge(cfg: &RunConfig, out: &Outputs) -> Result<(), Failure> {
    let ch = channel_for(cfg)?;
    let traj = ch.evolve(&fully_mixed(ch.dim), cfg.converge_cycles).map_err(numerical)?;
    write_file(&out.csv, &trajectory_table(&traj).to_csv())?;
    let series: Vec<Series> = (0..cfg.system.n_nuclei())
        .flat_map(|i| {
            [
                Series { label: format!("2Iz_{}", i + 1), points: traj.series(i, |o| o.iz) },
                Series { label: format!("2Ix_{}", i + 1), points: traj.series(i, |o| o.ix) },
            ]
        })
        .collect();
    out.plot(&series, "time (s)", "nuclear polarisation (dimensionless)")?;
    println!("wrote {} cycles to {}", cfg.converge_cycles, out.csv.display());
    Ok(())
}

fn features(cfg: &RunConfig, out: &Outputs) -> Result<(), Failure> {
    let spec = sweep_spec(cfg, SweepParameter::Larmor)?;
    let spectrum = run_sweep(&cfg.system, &cfg.drive, &spec).map_err(numerical)?;
    let center = cfg.features.center.unwrap_or(0.5 * (spec.start + spec.stop));
    let signal = cfg.features.signal;
    let mut rec: Vec<(String, String, f64, String)> = Vec::new();
    let mut push = |kind: &str, name: &str, v: f64, d: &str| rec.push((kind.into(), name.into(), v, d.into()));
    for (j, r) in find_reversals(&spectrum, signal).iter().enumerate() {
        push("reversal", &format!("crossing{}_hz", j + 1), to_hz(r.position), "Hz");
        push("reversal", &format!("crossing{}_slope_per_hz", j + 1), r.slope * hz(1.0), "1/Hz");
    }
    let m = measure_linewidth(&spectrum, center, signal).map_err(numerical)?;
    push("feature", "reversal_hz", to_hz(m.reversal), "Hz");
    push("feature", "peak_to_peak_hz", to_hz(m.peak_to_peak), "Hz");
    push("feature", "x_trough_fwhm_hz", to_hz(m.x_trough_fwhm), "Hz");
    push("feature", "x_trough_hz", to_hz(m.trough_position), "Hz");
    push("feature", "x_trough_value", m.trough_value, "1");
    if let (Some(noise), Some(t2e)) = (cfg.features.noise, cfg.drive.t2e) {
        let s = sensitivity_estimate(&spectrum, m.reversal, noise, t2e, signal).map_err(numerical)?;
        push("sensitivity", "hz_per_sqrt_hz", s.hz_per_sqrt_hz, "Hz/sqrt(Hz)");
        push("sensitivity", "slope_per_hz", s.slope_per_hz, "1/Hz");
        push("sensitivity", "shots_per_second", s.shots_per_second, "1/s");
    }
    let system = cfg.system.with_primary_larmor(m.reversal);
    match predictions(&system, &cfg.drive, cfg.features.k) {
        Ok(preds) => {
            for p in preds {
                for &(label, v, unit) in &p.values {
                    match unit {
                        "rad/s" => push("predicted", &format!("{label}_hz"), to_hz(v), "Hz"),
                        _ => push("predicted", label, v, unit),
                    }
                }
            }
        }
        Err(e) => eprintln!("warning: closed forms unavailable: {e}"),
    }
    write_file(&out.csv, &records_csv(&rec))?;
    out.plot(&spectrum_series(&spectrum, Component::Z, "2Iz"), x_label(SweepParameter::Larmor), "steady <2Iz> (dimensionless)")?;
    println!("reversal {} Hz, peak-to-peak width {} Hz", format_value(to_hz(m.reversal)), format_value(to_hz(m.peak_to_peak)));
    Ok(())
}

fn fit_records(f: &FitResult) -> Vec<(String, String, f64, String)> {
    let r = |name: &str, v: f64, unit: &str| ("fit".to_string(), name.to_string(), v, unit.to_string());
    vec![
        r("a_perp_hz", to_hz(f.a_perp), "Hz"),
        r("a_perp_lower_hz", to_hz(f.a_perp_interval.0), "Hz"),
        r("a_perp_upper_hz", to_hz(f.a_perp_interval.1), "Hz"),
        r("a_par_abs_hz", to_hz(f.a_par), "Hz (sign not identifiable)"),
        r("a_par_lower_hz", to_hz(f.a_par_interval.0), "Hz"),
        r("a_par_upper_hz", to_hz(f.a_par_interval.1), "Hz"),
        r("larmor_offset_hz", to_hz(f.larmor_offset), "Hz"),
        r("rms_residual", f.residual, "1"),
        r("iterations", f.iterations as f64, "count"),
        r("converged", if f.converged { 1.0 } else { 0.0 }, "flag"),
    ]
}

fn fit(cfg: &RunConfig, out: &Outputs) -> Result<(), Failure> {
    let input = cfg
        .fit
        .input
        .as_ref()
        .ok_or_else(|| Failure::Config("missing required key `fit.input` for this command".into()))?;
    let text = fs::read_to_string(input).map_err(|e| Failure::Io(format!("cannot read {}: {e}", input.display())))?;
    let table = Table::from_csv(&text).map_err(|e| Failure::Config(format!("{}: {e}", input.display())))?;
    let spectrum = table_to_spectrum(&table, cfg.drive.t_reset).map_err(|e| Failure::Config(format!("{}: {e}", input.display())))?;
    let mut opts = FitOptions::new(cfg.drive.omega);
    opts.t2e = cfg.drive.t2e;
    opts.max_iterations = cfg.fit.max_iterations;
    opts.fit_larmor_offset = cfg.fit.fit_larmor;
    opts.tolerance = cfg.fit.tolerance;
    match fit_couplings(&spectrum, cfg.drive.t_reset, cfg.fit.k, &opts) {
        Ok(f) => {
            write_file(&out.csv, &records_csv(&fit_records(&f)))?;
            println!(
                "a_perp = {} Hz  |a_par| = {} Hz  rms residual = {}",
                format_value(to_hz(f.a_perp)),
                format_value(to_hz(f.a_par)),
                format_value(f.residual)
            );
            Ok(())
        }
        Err(EstimatorError::NotConverged { best, .. }) => {
            write_file(&out.csv, &records_csv(&fit_records(&best)))?;
            Err(Failure::Numerical(format!("fit did not converge; best estimate written to {}", out.csv.display())))
        }
        Err(e) => Err(numerical(e)),
    }
}

fn scenario_error(e: ScenarioError) -> Failure {
    match e {
        ScenarioError::Precondition(m) => Failure::Config(m),
        other => numerical(other),
    }
}

fn run_scenario(cfg: &RunConfig, id: ScenarioId, out: &Outputs) -> Result<(), Failure> {
    let sc = &cfg.scenario;
    let report = match id {
        ScenarioId::Decoherence => decoherence_robustness(
            &sc.t2e_values,
            &cfg.system,
            &cfg.drive,
            sc.half_window.unwrap_or(hz(150.0)),
            sc.steps.unwrap_or(301),
        ),
        ScenarioId::HhBaseline => {
            let deltas = window(0.5 * (sc.delta_min + sc.delta_max), 0.5 * (sc.delta_max - sc.delta_min), sc.steps.unwrap_or(81));
            hh_baseline(&deltas, cfg.drive.omega, cfg.drive.t2e, sc.probe, cfg.system.nuclei[0])
        }
        ScenarioId::TwoSpin => {
            let defaults = TwoSpinOptions::default();
            let opts = TwoSpinOptions {
                half_window: sc.half_window.unwrap_or(defaults.half_window),
                steps: sc.steps.unwrap_or(defaults.steps),
                evolution_time: sc.evolution_time,
                literal_iteration: sc.literal_iteration,
            };
            two_spin_resolution(&cfg.system, &cfg.drive, &opts)
        }
        ScenarioId::Convergence => {
            let n = cfg.system.nuclei[0];
            println!("# convergence variants sit at their own reversal points; configured Larmor values are not used");
            convergence_traces(&halving_variants(cfg.drive.omega, cfg.drive.t_reset, n.a_perp, n.a_par), sc.horizon_taus)
        }
    }
    .map_err(scenario_error)?;
    emit_report(&report, id, out)
}

fn emit_report(report: &ScenarioReport, id: ScenarioId, out: &Outputs) -> Result<(), Failure> {
    for (k, v) in &report.echo {
        println!("# scenario.{k} = {v}");
    }
    let mut rec = Vec::new();
    for (name, v, unit) in &report.features {
        rec.push(("feature".to_string(), name.clone(), *v, unit.clone()));
    }
    for v in &report.verdicts {
        let status = if v.passed { "PASS" } else { "FAIL" };
        rec.push(("verdict".into(), v.name.clone(), v.measured, format!("{status} ({})", v.threshold)));
        println!("{status} {}: measured {} (threshold {})", v.name, format_value(v.measured), v.threshold);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
        rec.push(("warning".into(), w.clone(), f64::NAN, String::new()));
    }
    write_file(&out.csv, &records_csv(&rec))?;

    let mut series = Vec::new();
    for (label, s) in &report.spectra {
        let path = out.sibling(label);
        let mut table = spectrum_table(s);
        if matches!(id, ScenarioId::HhBaseline) {
            // detuning axis and the electron signal
            table.header = vec!["delta_hz".into(), "electron_2Sz".into(), "unused_x".into(), "unused_y".into(), "gap".into()];
        }
        write_file(&path, &table.to_csv())?;
        println!("wrote {}", path.display());
        let component = if matches!(id, ScenarioId::TwoSpin) { Component::X } else { Component::Z };
        for mut ser in spectrum_series(s, component, if component == Component::X { "2Ix" } else { "2Iz" }) {
            ser.label = format!("{label} {}", ser.label);
            series.push(ser);
        }
    }
    for (label, traj) in &report.trajectories {
        let path = out.sibling(label);
        let table = Table {
            header: vec!["time_s".into(), "Ix_1".into()],
            rows: traj.iter().map(|&(t, x)| vec![t, x]).collect(),
        };
        write_file(&path, &table.to_csv())?;
        println!("wrote {}", path.display());
        series.push(Series { label: label.clone(), points: traj.clone() });
    }
    let (x, y) = match id {
        ScenarioId::Convergence => ("time (s)", "<2Ix> (dimensionless)"),
        ScenarioId::HhBaseline => ("detuning from resonance (Hz)", "electron <2Sz> after probe (dimensionless)"),
        ScenarioId::TwoSpin => ("nuclear Larmor frequency (Hz)", "steady <2Ix> (dimensionless)"),
        ScenarioId::Decoherence => ("nuclear Larmor frequency (Hz)", "steady <2Iz> (dimensionless)"),
    };
    out.plot(&series, x, y)?;
    println!("wrote {}", out.csv.display());
    Ok(())
}
