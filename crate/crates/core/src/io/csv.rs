//! Numeric CSV tables. Values are written with 17 significant digits so a
//! write/read cycle is bit-exact; missing values are written as `NaN`.

use thiserror::Error;

use crate::steady::NuclearObservables;
use crate::sweep::{Spectrum, SpectrumRow, SweepParameter};
use crate::{to_hz, TWO_PI};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CsvError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("unexpected header: {0}")]
    Header(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut w = writer();
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|&x| format_value(x))).expect("in-memory write");
        }
        finish(w)
    }

    pub fn from_csv(text: &str) -> Result<Self, CsvError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut records = reader.records();
        let malformed = |e: csv::Error| CsvError::Malformed {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        };
        let header: Vec<String> = match records.next() {
            Some(r) => r.map_err(malformed)?.iter().map(str::to_string).collect(),
            None => return Err(CsvError::Header("empty input".into())),
        };
        let mut rows = Vec::new();
        for record in records {
            let record = record.map_err(malformed)?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != header.len() {
                return Err(CsvError::Malformed {
                    line,
                    reason: format!("{} fields, header has {}", record.len(), header.len()),
                });
            }
            let row = record
                .iter()
                .map(|cell| {
                    cell.parse::<f64>().map_err(|_| CsvError::Malformed {
                        line,
                        reason: format!("`{cell}` is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

fn observable_header(n_nuclei: usize) -> Vec<String> {
    (1..=n_nuclei)
        .flat_map(|i| [format!("Iz_{i}"), format!("Ix_{i}"), format!("Iy_{i}")])
        .collect()
}

fn push_observables(row: &mut Vec<f64>, obs: Option<&[NuclearObservables]>, n: usize) {
    match obs {
        Some(o) => row.extend(o.iter().flat_map(|x| [x.iz, x.ix, x.iy])),
        None => row.extend(std::iter::repeat_n(f64::NAN, 3 * n)),
    }
}

/// Sweep table: `param_hz` (or `param_s` for reset sweeps), per-nucleus
/// observables, then the spectral gap.
pub fn spectrum_table(spectrum: &Spectrum) -> Table {
    let mut header = vec![if spectrum.parameter.is_frequency() { "param_hz" } else { "param_s" }.to_string()];
    header.extend(observable_header(spectrum.n_nuclei));
    header.push("gap".into());
    let rows = spectrum
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![if spectrum.parameter.is_frequency() { to_hz(r.param) } else { r.param }];
            push_observables(&mut row, r.observables.as_deref(), spectrum.n_nuclei);
            row.push(r.gap.unwrap_or(f64::NAN));
            row
        })
        .collect();
    Table { header, rows }
}

/// Reads a sweep table back into a spectrum. A `param_hz` column is taken as
/// a Larmor sweep; rows with missing observables come back flagged.
pub fn table_to_spectrum(table: &Table, t_reset: f64) -> Result<Spectrum, CsvError> {
    let first = table.header.first().map(String::as_str).unwrap_or("");
    let parameter = match first {
        "param_hz" => SweepParameter::Larmor,
        "param_s" => SweepParameter::ResetTime,
        other => return Err(CsvError::Header(format!("first column must be param_hz or param_s, got `{other}`"))),
    };
    let n = (table.header.len().saturating_sub(2)) / 3;
    let mut expected = vec![first.to_string()];
    expected.extend(observable_header(n));
    expected.push("gap".into());
    if n == 0 || table.header != expected {
        return Err(CsvError::Header(table.header.join(",")));
    }
    let rows = table
        .rows
        .iter()
        .map(|r| {
            let obs: Vec<NuclearObservables> = (0..n)
                .map(|i| NuclearObservables {
                    iz: r[1 + 3 * i],
                    ix: r[2 + 3 * i],
                    iy: r[3 + 3 * i],
                })
                .collect();
            let complete = obs.iter().all(|o| o.iz.is_finite() && o.ix.is_finite() && o.iy.is_finite());
            let param = if parameter == SweepParameter::Larmor { TWO_PI * r[0] } else { r[0] };
            SpectrumRow {
                param,
                t_reset: if parameter == SweepParameter::ResetTime { param } else { t_reset },
                observables: complete.then_some(obs),
                gap: r[3 * n + 1].is_finite().then_some(r[3 * n + 1]),
                flag: (!complete).then(|| "missing in source table".to_string()),
            }
        })
        .collect();
    Ok(Spectrum {
        parameter,
        n_nuclei: n,
        rows,
    })
}

/// Trajectory table: cycle, time_s, then per-nucleus observables.
pub fn trajectory_table(traj: &crate::channel::Trajectory) -> Table {
    let n = traj.rows.first().map_or(0, |r| r.observables.len());
    let mut header = vec!["cycle".to_string(), "time_s".to_string()];
    header.extend(observable_header(n));
    let rows = traj
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.cycle as f64, r.time];
            push_observables(&mut row, Some(&r.observables), n);
            row
        })
        .collect();
    Table { header, rows }
}

/// Text records (`kind,name,value,detail`) for features, fits and verdicts.
pub fn records_csv(records: &[(String, String, f64, String)]) -> String {
    let mut w = writer();
    w.write_record(["kind", "name", "value", "detail"]).expect("in-memory write");
    for (kind, name, value, detail) in records {
        w.write_record([kind.as_str(), name, &format_value(*value), detail]).expect("in-memory write");
    }
    finish(w)
}
