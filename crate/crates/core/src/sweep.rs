//! Parameter sweeps and spectral feature extraction.

use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{cycle_channel, lindblad_cycle_channel, unitary_cycle_channel, ChannelError, QuantumChannel};
use crate::model::{DriveSpec, SystemSpec};
use crate::steady::{steady_state, NuclearObservables, SteadyError};
use crate::TWO_PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("feature not bracketed by the sweep range: {0}")]
    NotBracketed(String),
    #[error("feature under-resolved: {points} points across it, need {needed}; refine the step to at most {suggested_step:e}")]
    Resolution { points: usize, needed: usize, suggested_step: f64 },
    #[error("slope at the feature is zero; sensitivity is infinite")]
    ZeroSlope,
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    /// Effective Larmor frequency of the first nucleus (rad/s); other nuclei keep their offsets.
    Larmor,
    /// Dressed splitting Ω (rad/s).
    Rabi,
    /// Reset period (s).
    ResetTime,
}

impl SweepParameter {
    /// Whether values are angular frequencies (otherwise seconds).
    pub fn is_frequency(self) -> bool {
        !matches!(self, SweepParameter::ResetTime)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelChoice {
    /// Lindblad when a dephasing time is set, unitary otherwise.
    #[default]
    Auto,
    Unitary,
    Lindblad,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    pub channel: ChannelChoice,
    pub tol: f64,
}

impl SweepSpec {
    pub fn new(parameter: SweepParameter, start: f64, stop: f64, steps: usize) -> Self {
        Self {
            parameter,
            start,
            stop,
            steps,
            channel: ChannelChoice::Auto,
            tol: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if !(self.start.is_finite() && self.stop.is_finite()) || self.start >= self.stop {
            return Err(SweepError::InvalidSpec("start must be below stop".into()));
        }
        if self.steps < 2 {
            return Err(SweepError::InvalidSpec("at least 2 steps are required".into()));
        }
        if self.parameter == SweepParameter::ResetTime && self.start <= 0.0 {
            return Err(SweepError::InvalidSpec("reset times must be positive".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = self.steps;
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    /// Swept value (rad/s or s).
    pub param: f64,
    /// Reset period in force at this row (s).
    pub t_reset: f64,
    /// Absent when the steady state could not be determined.
    pub observables: Option<Vec<NuclearObservables>>,
    pub gap: Option<f64>,
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub parameter: SweepParameter,
    pub n_nuclei: usize,
    pub rows: Vec<SpectrumRow>,
}

/// Which spin's signal a feature is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Nucleus(usize),
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Z,
    X,
    Y,
}

fn pick(o: &NuclearObservables, c: Component) -> f64 {
    match c {
        Component::Z => o.iz,
        Component::X => o.ix,
        Component::Y => o.iy,
    }
}

impl Spectrum {
    /// (param, value) pairs over the unflagged rows, sorted by parameter.
    pub fn series(&self, signal: Signal, component: Component) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter_map(|r| {
                let obs = r.observables.as_ref()?;
                let v = match signal {
                    Signal::Nucleus(i) => pick(&obs[i], component),
                    Signal::Sum => obs.iter().map(|o| pick(o, component)).sum(),
                };
                Some((r.param, v))
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts
    }

    pub fn flagged(&self) -> usize {
        self.rows.iter().filter(|r| r.observables.is_none()).count()
    }

    /// Copy with rows in reverse order.
    pub fn reversed(&self) -> Self {
        let mut s = self.clone();
        s.rows.reverse();
        s
    }
}

fn build_channel(system: &SystemSpec, drive: &DriveSpec, choice: ChannelChoice) -> Result<QuantumChannel, ChannelError> {
    match choice {
        ChannelChoice::Auto => cycle_channel(system, drive),
        ChannelChoice::Unitary => unitary_cycle_channel(system, drive),
        ChannelChoice::Lindblad => lindblad_cycle_channel(system, drive),
    }
}

/// Steady state at one parameter value.
pub fn evaluate_point(
    system: &SystemSpec,
    drive: &DriveSpec,
    parameter: SweepParameter,
    value: f64,
    choice: ChannelChoice,
    tol: f64,
) -> Result<SpectrumRow, ChannelError> {
    let mut sys = system.clone();
    let mut drv = *drive;
    match parameter {
        SweepParameter::Larmor => sys = system.with_primary_larmor(value),
        SweepParameter::Rabi => drv.omega = value,
        SweepParameter::ResetTime => drv.t_reset = value,
    }
    let channel = build_channel(&sys, &drv, choice)?;
    let row = match steady_state(&channel, tol) {
        Ok(r) => SpectrumRow {
            param: value,
            t_reset: drv.t_reset,
            observables: Some(r.observables),
            gap: Some(r.gap),
            flag: None,
        },
        Err(e @ (SteadyError::NonUnique { .. } | SteadyError::Negativity { .. } | SteadyError::NotConverged { .. })) => {
            SpectrumRow {
                param: value,
                t_reset: drv.t_reset,
                observables: None,
                gap: None,
                flag: Some(e.to_string()),
            }
        }
        Err(SteadyError::Numerics(e)) => return Err(e.into()),
    };
    Ok(row)
}

/// Steady states over an explicit list of parameter values, in list order.
pub fn sweep_points(
    system: &SystemSpec,
    drive: &DriveSpec,
    parameter: SweepParameter,
    values: &[f64],
    choice: ChannelChoice,
    tol: f64,
) -> Result<Spectrum, SweepError> {
    system.validate().map_err(ChannelError::from)?;
    drive.validate().map_err(ChannelError::from)?;
    let rows: Result<Vec<SpectrumRow>, ChannelError> = values
        .par_iter()
        .map(|&v| evaluate_point(system, drive, parameter, v, choice, tol))
        .collect();
    Ok(Spectrum {
        parameter,
        n_nuclei: system.n_nuclei(),
        rows: rows?,
    })
}

/// Steady-state spectrum on a uniform grid. Points run on the current rayon
/// pool; output order is the grid order regardless of scheduling.
pub fn run_sweep(system: &SystemSpec, drive: &DriveSpec, spec: &SweepSpec) -> Result<Spectrum, SweepError> {
    spec.validate()?;
    sweep_points(system, drive, spec.parameter, &spec.grid(), spec.channel, spec.tol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reversal {
    /// Interpolated zero crossing (parameter units).
    pub position: f64,
    /// Secant slope across the crossing (per parameter unit).
    pub slope: f64,
}

/// Sign changes of a sorted series, located by linear interpolation.
pub fn crossings(points: &[(f64, f64)]) -> Vec<Reversal> {
    let mut out = Vec::new();
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if y0 == 0.0 {
            continue;
        }
        if y1 == 0.0 {
            // an exact zero at x1 counts once, if the sign really changes across it
            continue;
        }
        if (y0 < 0.0) != (y1 < 0.0) {
            out.push(Reversal {
                position: x0 + (x1 - x0) * (-y0) / (y1 - y0),
                slope: (y1 - y0) / (x1 - x0),
            });
        }
    }
    // exact zeros on grid points
    for i in 1..points.len().saturating_sub(1) {
        let (y_prev, (x, y), y_next) = (points[i - 1].1, points[i], points[i + 1].1);
        if y == 0.0 && y_prev != 0.0 && y_next != 0.0 && (y_prev < 0.0) != (y_next < 0.0) {
            out.push(Reversal {
                position: x,
                slope: (y_next - y_prev) / (points[i + 1].0 - points[i - 1].0),
            });
        }
    }
    out.sort_by(|a, b| a.position.total_cmp(&b.position));
    out
}

/// Zero crossings of ⟨2I_z⟩ of the chosen signal, in increasing parameter order.
/// Row order of the input does not matter.
pub fn find_reversals(spectrum: &Spectrum, signal: Signal) -> Vec<Reversal> {
    crossings(&spectrum.series(signal, Component::Z))
}

/// Reversal positions only.
pub fn reversal_positions(spectrum: &Spectrum, signal: Signal) -> Vec<f64> {
    find_reversals(spectrum, signal).into_iter().map(|r| r.position).collect()
}

/// Local extrema of a component with |value| ≥ `min_depth`, as (position, value).
pub fn find_extrema(spectrum: &Spectrum, signal: Signal, component: Component, min_depth: f64) -> Vec<(f64, f64)> {
    let pts = spectrum.series(signal, component);
    let mut out = Vec::new();
    for i in 1..pts.len().saturating_sub(1) {
        let (a, b, c) = (pts[i - 1].1, pts[i].1, pts[i + 1].1);
        let is_min = b < a && b <= c;
        let is_max = b > a && b >= c;
        if (is_min || is_max) && b.abs() >= min_depth {
            out.push(parabolic_vertex(&pts, i));
        }
    }
    out
}

/// Vertex of the parabola through points i−1, i, i+1.
fn parabolic_vertex(pts: &[(f64, f64)], i: usize) -> (f64, f64) {
    let ((x0, y0), (x1, y1), (x2, y2)) = (pts[i - 1], pts[i], pts[i + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if a == 0.0 {
        return (x1, y1);
    }
    let b = d01 - a * (x0 + x1);
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    // Newton form
    (xv, y0 + d01 * (xv - x0) + a * (xv - x0) * (xv - x1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinewidthMeasurement {
    /// Distance between the ⟨2I_z⟩ extrema flanking the reversal (parameter units).
    pub peak_to_peak: f64,
    /// Full width at half depth of the ⟨2I_x⟩ extremum (parameter units).
    pub x_trough_fwhm: f64,
    /// The reversal used.
    pub reversal: f64,
    /// Position and value of the ⟨2I_x⟩ extremum.
    pub trough_position: f64,
    pub trough_value: f64,
    /// Positions of the flanking ⟨2I_z⟩ extrema.
    pub z_extrema: (f64, f64),
}

/// Minimum number of grid points required between the flanking extrema.
pub const MIN_FEATURE_POINTS: usize = 8;

/// Both width measures for the feature nearest `center`.
pub fn measure_linewidth(spectrum: &Spectrum, center: f64, signal: Signal) -> Result<LinewidthMeasurement, SweepError> {
    let z = spectrum.series(signal, Component::Z);
    let x = spectrum.series(signal, Component::X);
    if z.len() < 3 {
        return Err(SweepError::NotBracketed("fewer than 3 valid rows".into()));
    }
    let rev = crossings(&z)
        .into_iter()
        .min_by(|a, b| (a.position - center).abs().total_cmp(&(b.position - center).abs()))
        .ok_or_else(|| SweepError::NotBracketed("no sign change of <2Iz> in range".into()))?;
    // j: last index left of the crossing
    let j = z.iter().rposition(|p| p.0 < rev.position).unwrap_or(0);
    let walk = |start: usize, step: isize| -> Option<usize> {
        let sign = z[start].1.signum();
        let mut i = start as isize;
        loop {
            let n = i + step;
            if n < 0 || n as usize >= z.len() {
                return None;
            }
            if sign * z[n as usize].1 > sign * z[i as usize].1 {
                i = n;
            } else {
                return Some(i as usize);
            }
        }
    };
    let right_start = (j + 1).min(z.len() - 1);
    let (l, r) = match (walk(j, -1), walk(right_start, 1)) {
        (Some(l), Some(r)) if l > 0 && r + 1 < z.len() => (l, r),
        _ => return Err(SweepError::NotBracketed("<2Iz> extrema flanking the reversal lie outside the range".into())),
    };
    let points = r - l + 1;
    let (zl, zr) = (z[l].0, z[r].0);
    let peak_to_peak = zr - zl;
    if points < MIN_FEATURE_POINTS {
        return Err(SweepError::Resolution {
            points,
            needed: MIN_FEATURE_POINTS,
            suggested_step: peak_to_peak.abs() / (2 * MIN_FEATURE_POINTS) as f64,
        });
    }

    // ⟨2I_x⟩: climb |value| from the grid point nearest the reversal
    let mut k = x
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 .0 - rev.position).abs().total_cmp(&(b.1 .0 - rev.position).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    loop {
        let here = x[k].1.abs();
        let left = if k > 0 { x[k - 1].1.abs() } else { f64::NEG_INFINITY };
        let right = if k + 1 < x.len() { x[k + 1].1.abs() } else { f64::NEG_INFINITY };
        if left > here && left >= right {
            k -= 1;
        } else if right > here {
            k += 1;
        } else {
            break;
        }
    }
    if k == 0 || k + 1 >= x.len() {
        return Err(SweepError::NotBracketed("<2Ix> extremum at the edge of the range".into()));
    }
    let (tx, tv) = parabolic_vertex(&x, k);
    let half = tv.abs() / 2.0;
    let half_crossing = |step: isize| -> Option<f64> {
        let mut i = k as isize;
        loop {
            let n = i + step;
            if n < 0 || n as usize >= x.len() {
                return None;
            }
            let (xa, ya) = x[i as usize];
            let (xb, yb) = x[n as usize];
            if yb.abs() <= half {
                let (ya, yb) = (ya.abs(), yb.abs());
                return Some(xa + (xb - xa) * (ya - half) / (ya - yb));
            }
            i = n;
        }
    };
    let (hl, hr) = match (half_crossing(-1), half_crossing(1)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(SweepError::NotBracketed("<2Ix> half-depth points lie outside the range".into())),
    };
    Ok(LinewidthMeasurement {
        peak_to_peak,
        x_trough_fwhm: hr - hl,
        reversal: rev.position,
        trough_position: tx,
        trough_value: tv,
        z_extrema: (zl, zr),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityEstimate {
    /// Frequency sensitivity (Hz/√Hz).
    pub hz_per_sqrt_hz: f64,
    /// |d⟨2I_z⟩/df| at the feature (1/Hz).
    pub slope_per_hz: f64,
    /// Interrogations per second, 1/τ.
    pub shots_per_second: f64,
    /// 1/√T₂ₑ (1/√s), the reported electron-coherence scaling factor.
    pub t2e_scaling: f64,
}

/// noise / (|d⟨2I_z⟩/df| · √(shots per second)), with the interrogation time
/// taken as the convergence time t_reset/gap at the feature.
pub fn sensitivity_estimate(
    spectrum: &Spectrum,
    center: f64,
    readout_noise_per_shot: f64,
    t2e: f64,
    signal: Signal,
) -> Result<SensitivityEstimate, SweepError> {
    if !spectrum.parameter.is_frequency() {
        return Err(SweepError::InvalidSpec("sensitivity needs a frequency sweep".into()));
    }
    let z = spectrum.series(signal, Component::Z);
    if z.len() < 2 {
        return Err(SweepError::NotBracketed("fewer than 2 valid rows".into()));
    }
    let i = z
        .windows(2)
        .position(|w| w[0].0 <= center && center <= w[1].0)
        .ok_or_else(|| SweepError::NotBracketed("center outside the sweep range".into()))?;
    let slope_per_rad = (z[i + 1].1 - z[i].1) / (z[i + 1].0 - z[i].0);
    let slope_per_hz = (slope_per_rad * TWO_PI).abs();
    if slope_per_hz == 0.0 {
        return Err(SweepError::ZeroSlope);
    }
    let row = spectrum
        .rows
        .iter()
        .filter(|r| r.gap.is_some())
        .min_by(|a, b| (a.param - center).abs().total_cmp(&(b.param - center).abs()))
        .ok_or_else(|| SweepError::NotBracketed("no valid row".into()))?;
    let gap = row.gap.unwrap_or(0.0);
    if gap <= 0.0 {
        return Err(SweepError::ZeroSlope);
    }
    let tau = row.t_reset / gap;
    let shots = 1.0 / tau;
    Ok(SensitivityEstimate {
        hz_per_sqrt_hz: readout_noise_per_shot / (slope_per_hz * shots.sqrt()),
        slope_per_hz,
        shots_per_second: shots,
        t2e_scaling: 1.0 / t2e.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hz;
    use crate::model::NucleusSpec;

    fn synthetic(points: &[(f64, f64, f64)]) -> Spectrum {
        Spectrum {
            parameter: SweepParameter::Larmor,
            n_nuclei: 1,
            rows: points
                .iter()
                .map(|&(p, z, x)| SpectrumRow {
                    param: p,
                    t_reset: 1e-5,
                    observables: Some(vec![NuclearObservables { iz: z, ix: x, iy: 0.0 }]),
                    gap: Some(1e-3),
                    flag: None,
                })
                .collect(),
        }
    }

    /// Dispersive ⟨2I_z⟩ = −2u/(1+u²) with u = 2(f − c)/w, extrema at f = c ± w/2;
    /// ⟨2I_x⟩ a Lorentzian dip of FWHM w.
    fn dispersive(c: f64, w: f64, n: usize, span: f64) -> Spectrum {
        let pts: Vec<(f64, f64, f64)> = (0..n)
            .map(|i| {
                let f = c - span / 2.0 + span * i as f64 / (n - 1) as f64;
                let u = 2.0 * (f - c) / w;
                (f, -2.0 * u / (1.0 + u * u) * 0.5, -0.4 / (1.0 + u * u))
            })
            .collect();
        synthetic(&pts)
    }

    #[test]
    fn constant_sign_has_no_reversals() {
        let s = synthetic(&[(1.0, 0.2, 0.0), (2.0, 0.5, 0.0), (3.0, 0.1, 0.0)]);
        assert!(find_reversals(&s, Signal::Nucleus(0)).is_empty());
    }

    #[test]
    fn interpolated_crossing() {
        let s = synthetic(&[(100.0, -0.5, 0.0), (200.0, 0.5, 0.0)]);
        assert_eq!(reversal_positions(&s, Signal::Nucleus(0)), vec![150.0]);
    }

    #[test]
    fn exact_zero_on_grid_counted_once() {
        let s = synthetic(&[(1.0, -1.0, 0.0), (2.0, 0.0, 0.0), (3.0, 1.0, 0.0)]);
        assert_eq!(reversal_positions(&s, Signal::Nucleus(0)), vec![2.0]);
        let touch = synthetic(&[(1.0, 1.0, 0.0), (2.0, 0.0, 0.0), (3.0, 1.0, 0.0)]);
        assert!(reversal_positions(&touch, Signal::Nucleus(0)).is_empty());
    }

    #[test]
    fn synthetic_dispersive_width_is_exact() {
        let w = 50.0;
        // grid aligned so that c ± w/2 are grid points
        let s = dispersive(1000.0, w, 401, 400.0);
        let m = measure_linewidth(&s, 1000.0, Signal::Nucleus(0)).unwrap();
        assert!((m.peak_to_peak - w).abs() < 1e-6, "{}", m.peak_to_peak);
        assert!((m.x_trough_fwhm - w).abs() < 0.1, "{}", m.x_trough_fwhm);
        assert!((m.reversal - 1000.0).abs() < 1e-9);
        assert!((m.trough_position - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn under_resolved_feature_suggests_step() {
        let s = dispersive(1000.0, 50.0, 41, 400.0);
        match measure_linewidth(&s, 1000.0, Signal::Nucleus(0)) {
            Err(SweepError::Resolution { suggested_step, .. }) => assert!(suggested_step > 0.0 && suggested_step < 10.0),
            other => panic!("{other:?}"),
        }
        let narrow = dispersive(1000.0, 50.0, 101, 40.0);
        assert!(matches!(
            measure_linewidth(&narrow, 1000.0, Signal::Nucleus(0)),
            Err(SweepError::NotBracketed(_))
        ));
    }

    #[test]
    fn sensitivity_is_linear_in_noise() {
        let s = dispersive(hz(1000.0), hz(50.0), 201, hz(400.0));
        let a = sensitivity_estimate(&s, hz(1000.0), 0.01, 1e-3, Signal::Nucleus(0)).unwrap();
        let b = sensitivity_estimate(&s, hz(1000.0), 0.02, 1e-3, Signal::Nucleus(0)).unwrap();
        assert!((b.hz_per_sqrt_hz / a.hz_per_sqrt_hz - 2.0).abs() < 1e-12);
        assert!((a.t2e_scaling - 1e-3f64.sqrt().recip()).abs() < 1e-9);
        let flat = synthetic(&[(1.0, 0.2, 0.0), (2.0, 0.2, 0.0)]);
        assert_eq!(
            sensitivity_estimate(&flat, 1.5, 0.01, 1e-3, Signal::Nucleus(0)),
            Err(SweepError::ZeroSlope)
        );
    }

    #[test]
    fn two_step_sweep_reproduces_point_solves() {
        let sys = SystemSpec::single(NucleusSpec::new(hz(4e3), hz(500.0)).with_larmor(hz(22.6e3)), 0.0);
        let drive = DriveSpec::new(hz(2e3), 44e-6);
        let spec = SweepSpec::new(SweepParameter::Larmor, hz(22.6e3), hz(22.61e3), 2);
        let s = run_sweep(&sys, &drive, &spec).unwrap();
        for (row, v) in s.rows.iter().zip([hz(22.6e3), hz(22.61e3)]) {
            let ch = unitary_cycle_channel(&sys.with_primary_larmor(v), &drive).unwrap();
            let r = steady_state(&ch, spec.tol).unwrap();
            assert_eq!(row.observables.as_ref().unwrap(), &r.observables);
            assert_eq!(row.gap, Some(r.gap));
        }
    }

    #[test]
    fn degenerate_points_are_flagged() {
        let sys = SystemSpec::single(NucleusSpec::new(0.0, hz(500.0)).with_larmor(hz(22.6e3)), 0.0);
        let drive = DriveSpec::new(hz(2e3), 44e-6);
        let spec = SweepSpec::new(SweepParameter::Larmor, hz(22.6e3), hz(22.7e3), 3);
        let s = run_sweep(&sys, &drive, &spec).unwrap();
        assert_eq!(s.flagged(), 3);
        assert!(s.rows[0].flag.as_ref().unwrap().contains("not unique"));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(SweepSpec::new(SweepParameter::Larmor, 2.0, 1.0, 10).validate().is_err());
        assert!(SweepSpec::new(SweepParameter::Larmor, 1.0, 2.0, 1).validate().is_err());
        assert!(SweepSpec::new(SweepParameter::ResetTime, 0.0, 2.0, 5).validate().is_err());
        let g = SweepSpec::new(SweepParameter::Rabi, 0.0, 1.0, 5).grid();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn rabi_and_reset_sweeps_run() {
        let sys = SystemSpec::single(NucleusSpec::new(hz(40e3), hz(10e3)).with_larmor(hz(15e3)), 0.0);
        let drive = DriveSpec::new(hz(200e3), 11e-6);
        let r = run_sweep(&sys, &drive, &SweepSpec::new(SweepParameter::Rabi, hz(150e3), hz(250e3), 5)).unwrap();
        assert_eq!(r.rows.len(), 5);
        let t = run_sweep(&sys, &drive, &SweepSpec::new(SweepParameter::ResetTime, 5e-6, 15e-6, 5)).unwrap();
        assert_eq!(t.rows[4].t_reset, 15e-6);
    }

    proptest::proptest! {
        #[test]
        fn reversed_rows_give_identical_reversals(ys in proptest::collection::vec(-1.0f64..1.0, 2..60)) {
            let pts: Vec<(f64, f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (i as f64 * 3.7, y, 0.0)).collect();
            let s = synthetic(&pts);
            let a = find_reversals(&s, Signal::Nucleus(0));
            let b = find_reversals(&s.reversed(), Signal::Nucleus(0));
            proptest::prop_assert_eq!(a, b);
        }
    }
}
