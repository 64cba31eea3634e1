//! Summary rows and their CSV form.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const CSV_HEADER: [&str; 8] = [
    "instance",
    "solver",
    "function_value",
    "iterations",
    "function_evaluations",
    "stationarity",
    "feasibility",
    "cpu_time_s",
];

/// Marker written in place of a time for runs stopped by the time limit.
pub const CAP_MARKER: &str = ">cap";

/// Scientific notation with four significant digits and a two-digit
/// exponent, e.g. `5.435e-06`.
pub fn format_sci(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.3e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CpuTime {
    Seconds(f64),
    Capped,
}

impl CpuTime {
    pub fn render(self) -> String {
        match self {
            CpuTime::Seconds(s) => format!("{s:.3}"),
            CpuTime::Capped => CAP_MARKER.to_string(),
        }
    }

    fn sort_key(self) -> f64 {
        match self {
            CpuTime::Seconds(s) => s,
            CpuTime::Capped => f64::INFINITY,
        }
    }
}

/// One line of a summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub instance: String,
    pub solver: String,
    pub function_value: f64,
    pub iterations: usize,
    pub function_evaluations: usize,
    pub stationarity: f64,
    pub feasibility: f64,
    pub cpu_time: CpuTime,
}

/// The printed form of a row, field by field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub instance: String,
    pub solver: String,
    pub function_value: String,
    pub iterations: String,
    pub function_evaluations: String,
    pub stationarity: String,
    pub feasibility: String,
    pub cpu_time_s: String,
}

impl SummaryRow {
    pub fn record(&self) -> CsvRecord {
        CsvRecord {
            instance: self.instance.clone(),
            solver: self.solver.clone(),
            function_value: format_sci(self.function_value),
            iterations: self.iterations.to_string(),
            function_evaluations: self.function_evaluations.to_string(),
            stationarity: format_sci(self.stationarity),
            feasibility: format_sci(self.feasibility),
            cpu_time_s: self.cpu_time.render(),
        }
    }

    /// Reads back a printed row. Values carry the printed precision.
    pub fn parse(rec: &CsvRecord) -> Result<Self, String> {
        let float = |name: &str, s: &str| s.parse::<f64>().map_err(|e| format!("{name}: {e}"));
        let int = |name: &str, s: &str| s.parse::<usize>().map_err(|e| format!("{name}: {e}"));
        Ok(Self {
            instance: rec.instance.clone(),
            solver: rec.solver.clone(),
            function_value: float("function_value", &rec.function_value)?,
            iterations: int("iterations", &rec.iterations)?,
            function_evaluations: int("function_evaluations", &rec.function_evaluations)?,
            stationarity: float("stationarity", &rec.stationarity)?,
            feasibility: float("feasibility", &rec.feasibility)?,
            cpu_time: if rec.cpu_time_s == CAP_MARKER {
                CpuTime::Capped
            } else {
                CpuTime::Seconds(float("cpu_time_s", &rec.cpu_time_s)?)
            },
        })
    }
}

pub fn write_csv<W: io::Write>(out: W, rows: &[SummaryRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row.record())?;
    }
    if rows.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, rows: &[SummaryRow]) -> csv::Result<()> {
    write_csv(std::fs::File::create(path)?, rows)
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<SummaryRow>, String> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(format!("unexpected header: {header:?}"));
    }
    r.deserialize::<CsvRecord>()
        .map(|rec| SummaryRow::parse(&rec.map_err(|e| e.to_string())?))
        .collect()
}

fn median_by<T: Copy>(values: &mut [T], key: impl Fn(&T) -> f64) -> T {
    values.sort_by(|a, b| key(a).total_cmp(&key(b)));
    values[(values.len() - 1) / 2]
}

/// Column-wise median of a group of runs, as one row.
///
/// Even-sized groups take the lower middle element so every reported value
/// was observed in some run; capped times sort last.
pub fn median_row(instance: String, solver: String, rows: &[SummaryRow]) -> SummaryRow {
    assert!(!rows.is_empty(), "median of an empty group");
    let col =
        |f: fn(&SummaryRow) -> f64| median_by(&mut rows.iter().map(f).collect::<Vec<_>>(), |v| *v);
    SummaryRow {
        instance,
        solver,
        function_value: col(|r| r.function_value),
        iterations: col(|r| r.iterations as f64) as usize,
        function_evaluations: col(|r| r.function_evaluations as f64) as usize,
        stationarity: col(|r| r.stationarity),
        feasibility: col(|r| r.feasibility),
        cpu_time: median_by(
            &mut rows.iter().map(|r| r.cpu_time).collect::<Vec<_>>(),
            |t| t.sort_key(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_format_matches_table_style() {
        assert_eq!(format_sci(5.4349e-6), "5.435e-06");
        assert_eq!(format_sci(0.0), "0.000e+00");
        assert_eq!(format_sci(2.220446e-16), "2.220e-16");
        assert_eq!(format_sci(-123.456), "-1.235e+02");
        assert_eq!(format_sci(1e100), "1.000e+100");
    }

    fn row(t: CpuTime, it: usize) -> SummaryRow {
        SummaryRow {
            instance: "x".into(),
            solver: "pgd".into(),
            function_value: -1.5,
            iterations: it,
            function_evaluations: 2 * it,
            stationarity: 3e-6,
            feasibility: 0.0,
            cpu_time: t,
        }
    }

    #[test]
    fn median_treats_cap_as_slowest() {
        let rows = [
            row(CpuTime::Capped, 9),
            row(CpuTime::Seconds(0.2), 3),
            row(CpuTime::Seconds(0.1), 5),
        ];
        let m = median_row("m".into(), "pgd".into(), &rows);
        assert_eq!(m.cpu_time, CpuTime::Seconds(0.2));
        assert_eq!(m.iterations, 5);
        let rows = [
            row(CpuTime::Capped, 9),
            row(CpuTime::Capped, 3),
            row(CpuTime::Seconds(0.1), 5),
        ];
        assert_eq!(
            median_row("m".into(), "pgd".into(), &rows).cpu_time,
            CpuTime::Capped
        );
    }

    #[test]
    fn empty_table_still_has_a_header() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), CSV_HEADER.join(","));
    }
}
