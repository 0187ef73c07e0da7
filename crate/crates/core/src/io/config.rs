//! Flat `section.key = value` run configuration. Frequencies are given in Hz
//! and converted to angular units here, once.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::model::{DephasingAxis, DriveSpec, NucleusSpec, SystemSpec};
use crate::sweep::{ChannelChoice, Signal};
use crate::{hz, to_hz};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigErrorKind {
    Syntax(String),
    UnknownKey(String),
    DuplicateKey(String),
    MissingKey(String),
    NotNumeric { key: String, value: String },
    OutOfRange { key: String, value: String, reason: String },
}

/// A configuration problem; `line` is 1-based, `None` means end of input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub kind: ConfigErrorKind,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: ")?,
            None => write!(f, "end of input: ")?,
        }
        match &self.kind {
            ConfigErrorKind::Syntax(s) => write!(f, "syntax error: {s}"),
            ConfigErrorKind::UnknownKey(k) => write!(f, "unknown key `{k}`"),
            ConfigErrorKind::DuplicateKey(k) => write!(f, "key `{k}` given twice"),
            ConfigErrorKind::MissingKey(k) => write!(f, "missing required key `{k}`"),
            ConfigErrorKind::NotNumeric { key, value } => write!(f, "`{key}` expects a number, got `{value}`"),
            ConfigErrorKind::OutOfRange { key, value, reason } => write!(f, "`{key}` = {value} is out of range: {reason}"),
        }
    }
}

impl std::error::Error for ConfigError {}

const NUCLEUS_KEYS: &[&str] = &["a_perp_hz", "a_par_hz", "t2n_s", "larmor_hz"];

fn allowed(section: &str) -> Option<&'static [&'static str]> {
    Some(match section {
        "system" => &["gamma_b0_hz"],
        "nucleus1" | "nucleus2" | "nucleus3" => NUCLEUS_KEYS,
        "drive" => &["rabi_hz", "t_reset_s", "t2e_s", "dephasing_axis"],
        "sweep" => &["start_hz", "stop_hz", "start_s", "stop_s", "steps", "channel", "tol"],
        "steady" => &["tol"],
        "converge" => &["cycles"],
        "features" => &["center_hz", "signal", "noise", "k"],
        "fit" => &["input", "k", "max_iterations", "fit_larmor", "tolerance"],
        "scenario" => &[
            "t2e_s_list",
            "half_window_hz",
            "steps",
            "delta_min_hz",
            "delta_max_hz",
            "probe_s",
            "evolution_time_s",
            "literal_iteration",
            "horizon_taus",
        ],
        "output" => &["csv", "plot"],
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    /// Frequency-sweep range (rad/s).
    pub start: Option<f64>,
    pub stop: Option<f64>,
    /// Reset-time sweep range (s).
    pub start_s: Option<f64>,
    pub stop_s: Option<f64>,
    pub steps: usize,
    pub channel: ChannelChoice,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturesSection {
    /// rad/s; defaults to the middle of the sweep range.
    pub center: Option<f64>,
    pub signal: Signal,
    /// Readout noise per shot for the sensitivity estimate.
    pub noise: Option<f64>,
    pub k: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSection {
    pub input: Option<PathBuf>,
    pub k: u32,
    pub max_iterations: usize,
    pub fit_larmor: bool,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSection {
    /// `None` entries are the unitary limit.
    pub t2e_values: Vec<Option<f64>>,
    pub half_window: Option<f64>,
    pub steps: Option<usize>,
    pub delta_min: f64,
    pub delta_max: f64,
    pub probe: f64,
    pub evolution_time: f64,
    pub literal_iteration: bool,
    pub horizon_taus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub drive: DriveSpec,
    pub sweep: SweepSection,
    pub steady_tol: f64,
    pub converge_cycles: usize,
    pub features: FeaturesSection,
    pub fit: FitSection,
    pub scenario: ScenarioSection,
    pub output_csv: Option<PathBuf>,
    pub output_plot: Option<PathBuf>,
    /// Every resolved key (defaults included) in user units, for the run header.
    pub resolved: Vec<(String, String)>,
}

struct Raw {
    entries: BTreeMap<String, (usize, String)>,
    resolved: Vec<(String, String)>,
}

fn err(line: Option<usize>, kind: ConfigErrorKind) -> ConfigError {
    ConfigError { line, kind }
}

impl Raw {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(Some(line), ConfigErrorKind::Syntax(format!("expected `section.key = value`, got `{content}`"))))?;
            let (key, value) = (key.trim(), value.trim());
            let (section, name) = key
                .split_once('.')
                .ok_or_else(|| err(Some(line), ConfigErrorKind::UnknownKey(key.to_string())))?;
            if !allowed(section).is_some_and(|keys| keys.contains(&name)) {
                return Err(err(Some(line), ConfigErrorKind::UnknownKey(key.to_string())));
            }
            if value.is_empty() {
                return Err(err(Some(line), ConfigErrorKind::Syntax(format!("`{key}` has no value"))));
            }
            if entries.insert(key.to_string(), (line, value.to_string())).is_some() {
                return Err(err(Some(line), ConfigErrorKind::DuplicateKey(key.to_string())));
            }
        }
        Ok(Self { entries, resolved: Vec::new() })
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.0)
    }

    fn record(&mut self, key: &str, shown: String) {
        self.resolved.push((key.to_string(), shown));
    }

    fn out_of_range(&self, key: &str, value: impl fmt::Display, reason: &str) -> ConfigError {
        err(
            self.line(key),
            ConfigErrorKind::OutOfRange {
                key: key.to_string(),
                value: value.to_string(),
                reason: reason.to_string(),
            },
        )
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some((line, v)) = self.entries.get(key) else {
            return Ok(None);
        };
        let parsed = if v.eq_ignore_ascii_case("inf") {
            Ok(f64::INFINITY)
        } else {
            v.parse::<f64>()
        };
        match parsed {
            Ok(x) if !x.is_nan() => Ok(Some(x)),
            _ => Err(err(
                Some(*line),
                ConfigErrorKind::NotNumeric {
                    key: key.to_string(),
                    value: v.clone(),
                },
            )),
        }
    }

    fn required(&mut self, key: &str, check: fn(f64) -> Result<(), &'static str>) -> Result<f64, ConfigError> {
        self.optional(key, check)?
            .ok_or_else(|| err(None, ConfigErrorKind::MissingKey(key.to_string())))
    }

    fn optional(&mut self, key: &str, check: fn(f64) -> Result<(), &'static str>) -> Result<Option<f64>, ConfigError> {
        let v = self.number(key)?;
        if let Some(x) = v {
            check(x).map_err(|reason| self.out_of_range(key, x, reason))?;
            self.record(key, fmt_num(x));
        }
        Ok(v)
    }

    fn defaulted(&mut self, key: &str, default: f64, check: fn(f64) -> Result<(), &'static str>) -> Result<f64, ConfigError> {
        match self.optional(key, check)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, fmt_num(default));
                Ok(default)
            }
        }
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> Result<usize, ConfigError> {
        let v = self.defaulted(key, default as f64, |x| {
            if x.fract() == 0.0 && (0.0..=1e9).contains(&x) {
                Ok(())
            } else {
                Err("expected a non-negative integer")
            }
        })?;
        if (v as usize) < min {
            return Err(self.out_of_range(key, v, &format!("must be at least {min}")));
        }
        Ok(v as usize)
    }

    fn word<T>(&mut self, key: &str, default: &str, choices: &[(&str, T)]) -> Result<T, ConfigError>
    where
        T: Copy,
    {
        let value = self.entries.get(key).map(|e| e.1.clone()).unwrap_or_else(|| default.to_string());
        let hit = choices.iter().find(|c| c.0.eq_ignore_ascii_case(&value));
        match hit {
            Some(&(name, v)) => {
                self.record(key, name.to_string());
                Ok(v)
            }
            None => {
                let names: Vec<&str> = choices.iter().map(|c| c.0).collect();
                Err(self.out_of_range(key, &value, &format!("expected one of {}", names.join(", "))))
            }
        }
    }

    fn flag(&mut self, key: &str) -> Result<bool, ConfigError> {
        self.word(key, "false", &[("false", false), ("true", true), ("0", false), ("1", true)])
    }

    fn path(&mut self, key: &str) -> Option<PathBuf> {
        let v = self.entries.get(key).map(|e| e.1.clone())?;
        self.record(key, v.clone());
        Some(PathBuf::from(v))
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x}")
    }
}

fn finite_nonneg(x: f64) -> Result<(), &'static str> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err("must be finite and >= 0")
    }
}

fn finite_positive(x: f64) -> Result<(), &'static str> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err("must be finite and > 0")
    }
}

fn positive_or_inf(x: f64) -> Result<(), &'static str> {
    if x > 0.0 {
        Ok(())
    } else {
        Err("must be > 0 (or inf)")
    }
}

fn finite(x: f64) -> Result<(), &'static str> {
    if x.is_finite() {
        Ok(())
    } else {
        Err("must be finite")
    }
}

fn k_order(x: f64) -> Result<(), &'static str> {
    if x.fract() == 0.0 && (1.0..=1000.0).contains(&x) {
        Ok(())
    } else {
        Err("must be an integer resonance order >= 1")
    }
}

fn finite_time(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Parses and validates a configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut raw = Raw::parse(text)?;

    let rabi = raw.required("drive.rabi_hz", finite_nonneg)?;
    let t_reset = raw.required("drive.t_reset_s", finite_positive)?;
    let gamma_b0 = raw.optional("system.gamma_b0_hz", finite_nonneg)?;

    let mut nuclei = Vec::new();
    for i in 1..=3 {
        let section = format!("nucleus{i}");
        let present = i == 1 || NUCLEUS_KEYS.iter().any(|k| raw.has(&format!("{section}.{k}")));
        if !present {
            continue;
        }
        if nuclei.len() + 1 != i {
            let first = NUCLEUS_KEYS.iter().map(|k| format!("{section}.{k}")).find(|k| raw.has(k)).unwrap_or_default();
            return Err(err(raw.line(&first), ConfigErrorKind::MissingKey(format!("nucleus{}.a_perp_hz", i - 1))));
        }
        let a_perp = raw.required(&format!("{section}.a_perp_hz"), finite_nonneg)?;
        let a_par = raw.required(&format!("{section}.a_par_hz"), finite)?;
        let larmor = raw.optional(&format!("{section}.larmor_hz"), finite_nonneg)?;
        if larmor.is_none() && gamma_b0.is_none() {
            return Err(err(None, ConfigErrorKind::MissingKey(format!("{section}.larmor_hz"))));
        }
        let t2n = raw.optional(&format!("{section}.t2n_s"), positive_or_inf)?;
        let mut n = NucleusSpec::new(hz(a_perp), hz(a_par));
        if let Some(l) = larmor {
            n = n.with_larmor(hz(l));
        }
        n.t2n = t2n.and_then(finite_time);
        nuclei.push(n);
    }
    let system = SystemSpec {
        nuclei,
        gamma_b0: hz(gamma_b0.unwrap_or(0.0)),
    };
    if let Err(e) = system.validate() {
        return Err(raw.out_of_range("nucleus1.a_perp_hz", "", &e.to_string()));
    }

    let t2e = raw.optional("drive.t2e_s", positive_or_inf)?;
    if t2e.is_none() {
        raw.record("drive.t2e_s", "inf".into());
    }
    let axis = raw.word(
        "drive.dephasing_axis",
        "lab",
        &[("lab", DephasingAxis::Lab), ("dressed", DephasingAxis::Dressed)],
    )?;
    let mut drive = DriveSpec::new(hz(rabi), t_reset).with_t2e(t2e.and_then(finite_time));
    drive.dephasing_axis = axis;
    if let Err(e) = drive.validate() {
        return Err(raw.out_of_range("drive.rabi_hz", rabi, &e.to_string()));
    }

    let sweep = SweepSection {
        start: raw.optional("sweep.start_hz", finite_nonneg)?.map(hz),
        stop: raw.optional("sweep.stop_hz", finite_nonneg)?.map(hz),
        start_s: raw.optional("sweep.start_s", finite_positive)?,
        stop_s: raw.optional("sweep.stop_s", finite_positive)?,
        steps: raw.count("sweep.steps", 201, 2)?,
        channel: raw.word(
            "sweep.channel",
            "auto",
            &[
                ("auto", ChannelChoice::Auto),
                ("unitary", ChannelChoice::Unitary),
                ("lindblad", ChannelChoice::Lindblad),
            ],
        )?,
        tol: raw.defaulted("sweep.tol", 1e-9, finite_positive)?,
    };
    let steady_tol = raw.defaulted("steady.tol", 1e-10, finite_positive)?;
    let converge_cycles = raw.count("converge.cycles", 1000, 1)?;

    let signal = match raw.entries.get("features.signal").map(|e| e.1.clone()) {
        None => {
            raw.record("features.signal", "sum".into());
            Signal::Sum
        }
        Some(v) if v.eq_ignore_ascii_case("sum") => {
            raw.record("features.signal", "sum".into());
            Signal::Sum
        }
        Some(v) => match v.parse::<usize>() {
            Ok(i) if (1..=system.n_nuclei()).contains(&i) => {
                raw.record("features.signal", v.clone());
                Signal::Nucleus(i - 1)
            }
            _ => return Err(raw.out_of_range("features.signal", &v, "expected `sum` or a configured nucleus number")),
        },
    };
    let features = FeaturesSection {
        center: raw.optional("features.center_hz", finite_nonneg)?.map(hz),
        signal,
        noise: raw.optional("features.noise", finite_positive)?,
        k: raw.defaulted("features.k", 1.0, k_order)? as u32,
    };

    let fit = FitSection {
        input: raw.path("fit.input"),
        k: raw.defaulted("fit.k", 1.0, k_order)? as u32,
        max_iterations: raw.count("fit.max_iterations", 60, 1)?,
        fit_larmor: raw.flag("fit.fit_larmor")?,
        tolerance: raw.defaulted("fit.tolerance", 1e-9, finite_positive)?,
    };

    let t2e_values = match raw.entries.get("scenario.t2e_s_list").cloned() {
        None => {
            raw.record("scenario.t2e_s_list", "1e-4, 5e-4, inf".into());
            vec![Some(1e-4), Some(5e-4), None]
        }
        Some((line, list)) => {
            let mut out = Vec::new();
            for item in list.split(',').map(str::trim) {
                let v = if item.eq_ignore_ascii_case("inf") {
                    f64::INFINITY
                } else {
                    item.parse::<f64>().map_err(|_| {
                        err(
                            Some(line),
                            ConfigErrorKind::NotNumeric {
                                key: "scenario.t2e_s_list".into(),
                                value: item.to_string(),
                            },
                        )
                    })?
                };
                positive_or_inf(v).map_err(|r| raw.out_of_range("scenario.t2e_s_list", item, r))?;
                out.push(finite_time(v));
            }
            raw.record("scenario.t2e_s_list", list);
            out
        }
    };
    let scenario = ScenarioSection {
        t2e_values,
        half_window: raw.optional("scenario.half_window_hz", finite_positive)?.map(hz),
        steps: match raw.has("scenario.steps") {
            true => Some(raw.count("scenario.steps", 0, 3)?),
            false => None,
        },
        delta_min: hz(raw.defaulted("scenario.delta_min_hz", -8e3, finite)?),
        delta_max: hz(raw.defaulted("scenario.delta_max_hz", 8e3, finite)?),
        probe: raw.defaulted("scenario.probe_s", 250e-6, finite_positive)?,
        evolution_time: raw.defaulted("scenario.evolution_time_s", 0.32, finite_positive)?,
        literal_iteration: raw.flag("scenario.literal_iteration")?,
        horizon_taus: raw.defaulted("scenario.horizon_taus", 3.0, finite_positive)?,
    };
    if scenario.delta_max <= scenario.delta_min {
        return Err(raw.out_of_range("scenario.delta_max_hz", to_hz(scenario.delta_max), "must exceed scenario.delta_min_hz"));
    }

    let output_csv = raw.path("output.csv");
    let output_plot = raw.path("output.plot");

    Ok(RunConfig {
        system,
        drive,
        sweep,
        steady_tol,
        converge_cycles,
        features,
        fit,
        scenario,
        output_csv,
        output_plot,
        resolved: raw.resolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::TWO_PI;

    const MINIMAL: &str = "\
# operating point
drive.rabi_hz = 2000
drive.t_reset_s = 44e-6
nucleus1.a_perp_hz = 4000
nucleus1.a_par_hz = 500
nucleus1.larmor_hz = 22640
";

    #[test]
    fn minimal_config_converts_once() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.drive.omega, TWO_PI * 2000.0);
        assert_eq!(c.drive.t_reset, 44e-6);
        assert_eq!(c.drive.t2e, None);
        assert_eq!(c.system.nuclei[0].a_perp, TWO_PI * 4000.0);
        assert_eq!(c.system.nuclei[0].a_par, TWO_PI * 500.0);
        assert_eq!(c.system.larmor(0), TWO_PI * 22640.0);
        assert_eq!(c.system.n_nuclei(), 1);
        assert!(c.resolved.iter().any(|(k, v)| k == "drive.t2e_s" && v == "inf"));
    }

    #[test]
    fn empty_file_names_first_required_key() {
        let e = parse_config("").unwrap_err();
        assert_eq!(e.kind, ConfigErrorKind::MissingKey("drive.rabi_hz".into()));
        let e = parse_config("# nothing\n\n").unwrap_err();
        assert_eq!(e.kind, ConfigErrorKind::MissingKey("drive.rabi_hz".into()));
    }

    #[test]
    fn infinite_t2e_selects_unitary() {
        let c = parse_config(&format!("{MINIMAL}drive.t2e_s = inf\n")).unwrap();
        assert_eq!(c.drive.t2e, None);
        let c = parse_config(&format!("{MINIMAL}drive.t2e_s = 1e-4\n")).unwrap();
        assert_eq!(c.drive.t2e, Some(1e-4));
    }

    #[test]
    fn typos_and_bad_values_carry_line_numbers() {
        let e = parse_config(&format!("{MINIMAL}drive.rabi_hzz = 1\n")).unwrap_err();
        assert_eq!((e.line, e.kind), (Some(7), ConfigErrorKind::UnknownKey("drive.rabi_hzz".into())));
        let e = parse_config(&format!("{MINIMAL}bogus.key = 1\n")).unwrap_err();
        assert!(matches!(e.kind, ConfigErrorKind::UnknownKey(_)));
        let e = parse_config(&MINIMAL.replace("= 4000", "= four")).unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(matches!(e.kind, ConfigErrorKind::NotNumeric { .. }));
        let e = parse_config(&MINIMAL.replace("44e-6", "-1")).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(matches!(e.kind, ConfigErrorKind::OutOfRange { .. }));
        let e = parse_config(&format!("{MINIMAL}drive.rabi_hz = 3\n")).unwrap_err();
        assert!(matches!(e.kind, ConfigErrorKind::DuplicateKey(_)));
        let e = parse_config(&format!("{MINIMAL}just words\n")).unwrap_err();
        assert!(matches!(e.kind, ConfigErrorKind::Syntax(_)));
    }

    #[test]
    fn larmor_source_required() {
        let text = MINIMAL.replace("nucleus1.larmor_hz = 22640\n", "");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.kind, ConfigErrorKind::MissingKey("nucleus1.larmor_hz".into()));
        let c = parse_config(&format!("{text}system.gamma_b0_hz = 22890\n")).unwrap();
        assert!((c.system.larmor(0) - TWO_PI * 22640.0).abs() < 1e-9);
    }

    #[test]
    fn second_nucleus_and_lists() {
        let text = format!(
            "{MINIMAL}nucleus2.a_perp_hz = 5000\nnucleus2.a_par_hz = 200\nnucleus2.larmor_hz = 22590\n\
             scenario.t2e_s_list = 1e-4, inf\nsweep.channel = Lindblad\nfit.fit_larmor = true\nfeatures.signal = 2\n"
        );
        let c = parse_config(&text).unwrap();
        assert_eq!(c.system.n_nuclei(), 2);
        assert_eq!(c.scenario.t2e_values, vec![Some(1e-4), None]);
        assert_eq!(c.sweep.channel, ChannelChoice::Lindblad);
        assert!(c.fit.fit_larmor);
        assert_eq!(c.features.signal, Signal::Nucleus(1));
        let e = parse_config(&format!("{MINIMAL}nucleus3.a_perp_hz = 1\n")).unwrap_err();
        assert!(matches!(e.kind, ConfigErrorKind::MissingKey(_)));
        let e = parse_config(&format!("{MINIMAL}features.signal = 2\n")).unwrap_err();
        assert!(matches!(e.kind, ConfigErrorKind::OutOfRange { .. }));
    }
}
