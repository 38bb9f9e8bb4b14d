//! CSV records, convergence tables and the stratified calibration report.

use std::io::{Read, Write};

use cavlab_core::estimator::{calibrate, calibrate_by, Calibration};
use serde::Serialize;

use crate::experiment::{ConvergenceRow, ExperimentRecord};
use crate::LabError;

pub const HEADER: [&str; 16] = [
    "run_id",
    "cx",
    "cy",
    "radius",
    "area_frac",
    "d0",
    "h",
    "W0",
    "W",
    "ratio",
    "grad_energy_D",
    "identity_residual",
    "gnorm2",
    "lower",
    "upper",
    "wall_ms",
];

/// Scientific notation with 17 significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

impl ExperimentRecord {
    fn fields(&self) -> [f64; 15] {
        [
            self.cx,
            self.cy,
            self.radius,
            self.area_frac,
            self.d0,
            self.h,
            self.w0,
            self.w,
            self.ratio,
            self.grad_energy_d,
            self.identity_residual,
            self.gnorm2,
            self.lower,
            self.upper,
            self.wall_ms,
        ]
    }

    fn from_fields(run_id: u64, f: [f64; 15]) -> Self {
        let [cx, cy, radius, area_frac, d0, h, w0, w, ratio, grad_energy_d, identity_residual, gnorm2, lower, upper, wall_ms] =
            f;
        ExperimentRecord {
            run_id,
            cx,
            cy,
            radius,
            area_frac,
            d0,
            h,
            w0,
            w,
            ratio,
            grad_energy_d,
            identity_residual,
            gnorm2,
            lower,
            upper,
            wall_ms,
        }
    }
}

fn csv_err(e: csv::Error) -> LabError {
    LabError::Io(e.to_string())
}

pub fn write_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<(), LabError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(csv_err)?;
    for r in records {
        let mut row = vec![r.run_id.to_string()];
        row.extend(r.fields().iter().map(|&x| sci(x)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ExperimentRecord>, LabError> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(LabError::Config(format!("unexpected CSV header: {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let bad = |what: &str| LabError::Config(format!("CSV row {}: bad {what}", line + 2));
        let run_id = row[0].parse().map_err(|_| bad("run_id"))?;
        let mut f = [0.0; 15];
        for (k, v) in f.iter_mut().enumerate() {
            *v = row[k + 1].parse().map_err(|_| bad(HEADER[k + 1]))?;
        }
        out.push(ExperimentRecord::from_fields(run_id, f));
    }
    Ok(out)
}

pub fn write_convergence<W: Write>(rows: &[ConvergenceRow], out: W) -> Result<(), LabError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "level",
        "h",
        "h_max",
        "n_triangles",
        "W",
        "W0",
        "ratio",
        "identity_residual",
        "rel_change_W",
        "rel_change_W0",
        "rel_change_ratio",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.level.to_string(),
            sci(r.h),
            sci(r.h_max),
            r.n_triangles.to_string(),
            sci(r.w),
            sci(r.w0),
            sci(r.ratio),
            sci(r.identity_residual),
            sci(r.dw),
            sci(r.dw0),
            sci(r.dratio),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Stratum {
    /// d₀ / d0_unit, rounded to the nearest 1e-9.
    pub d0_index: f64,
    pub d0: f64,
    pub records: usize,
    pub k_hat: Option<f64>,
    pub c_hat: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub records: usize,
    pub used: usize,
    pub excluded: usize,
    pub k_hat: f64,
    pub c_hat: f64,
    /// Share of records with lower ≤ |D| ≤ upper under (k_hat, c_hat).
    pub sandwich_fraction: f64,
    /// Groups by requested d₀, largest first.
    pub by_d0: Vec<Stratum>,
    /// Whether c_hat is non-increasing along `by_d0` over the non-empty groups.
    pub c_hat_non_increasing: bool,
}

fn d0_key(d0: f64, unit: f64) -> i64 {
    (d0 / unit * 1e9).round() as i64
}

/// Overall and per-d₀ calibration of `records`.
pub fn calibration_report(
    records: &[ExperimentRecord],
    domain_area: f64,
    d0_unit: f64,
    d0_indices: &[f64],
) -> Result<CalibrationReport, LabError> {
    let samples: Vec<_> = records.iter().map(|r| r.sample(domain_area)).collect();
    let all: Calibration<f64> = calibrate(&samples)?;
    let inside = samples
        .iter()
        .filter(|s| s.lower(all.c_hat) <= s.area && s.area <= s.upper(all.k_hat))
        .count();

    let keyed: Vec<_> = records
        .iter()
        .zip(&samples)
        .map(|(r, s)| (std::cmp::Reverse(d0_key(r.d0, d0_unit)), *s))
        .collect();
    let mut groups = calibrate_by(&keyed);
    // configured indices with no record still get a row
    for &ix in d0_indices {
        let key = std::cmp::Reverse(d0_key(ix * d0_unit, d0_unit));
        if !groups.iter().any(|(k, _)| *k == key) {
            groups.push((key, Err(cavlab_core::estimator::EstimatorError::NoValidRecords { excluded: 0 })));
        }
    }
    groups.sort_by_key(|(k, _)| *k);
    let by_d0: Vec<Stratum> = groups
        .into_iter()
        .map(|(std::cmp::Reverse(key), cal)| {
            let index = key as f64 / 1e9;
            let n = records.iter().filter(|r| d0_key(r.d0, d0_unit) == key).count();
            match cal {
                Ok(c) => Stratum {
                    d0_index: index,
                    d0: index * d0_unit,
                    records: n,
                    k_hat: Some(c.k_hat),
                    c_hat: Some(c.c_hat),
                    note: None,
                },
                Err(e) => Stratum {
                    d0_index: index,
                    d0: index * d0_unit,
                    records: n,
                    k_hat: None,
                    c_hat: None,
                    note: Some(if n == 0 { "no feasible record".into() } else { e.to_string() }),
                },
            }
        })
        .collect();
    let cs: Vec<f64> = by_d0.iter().filter_map(|s| s.c_hat).collect();
    let c_hat_non_increasing = cs.windows(2).all(|w| w[1] <= w[0]);
    Ok(CalibrationReport {
        records: records.len(),
        used: all.used,
        excluded: all.excluded,
        k_hat: all.k_hat,
        c_hat: all.c_hat,
        sandwich_fraction: inside as f64 / records.len() as f64,
        by_d0,
        c_hat_non_increasing,
    })
}

impl CalibrationReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "records {} (used {}, excluded {})\nK_hat {:.6e}\nC_hat {:.6e}\nsandwich {:.1}%\n\nd0_index        d0  records         K_hat         C_hat\n",
            self.records,
            self.used,
            self.excluded,
            self.k_hat,
            self.c_hat,
            100.0 * self.sandwich_fraction
        );
        let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6e}"));
        for g in &self.by_d0 {
            s += &format!(
                "{:>8} {:>9.4} {:>8} {:>13} {:>13}{}\n",
                g.d0_index,
                g.d0,
                g.records,
                opt(g.k_hat),
                opt(g.c_hat),
                g.note.as_ref().map_or(String::new(), |n| format!("  ({n})"))
            );
        }
        s += &format!("C_hat non-increasing as d0 decreases: {}\n", self.c_hat_non_increasing);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: u64, x: f64) -> ExperimentRecord {
        ExperimentRecord::from_fields(
            id,
            [0.25, 0.75, 0.1 * x, 0.031, 0.15, 1.0 / 64.0, 0.29, 0.3 + x, 1.0 / 3.0, 1e-3, 2e-9, 21.5, 1e-5, 0.5, 1234.5],
        )
    }

    #[test]
    fn empty_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), HEADER.join(",") + "\n");
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let rs = vec![rec(0, 0.1), rec(7, std::f64::consts::PI * 1e-7)];
        let mut buf = Vec::new();
        write_csv(&rs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in rs.iter().zip(&back) {
            assert_eq!(a.run_id, b.run_id);
            for (x, y) in a.fields().iter().zip(b.fields()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
