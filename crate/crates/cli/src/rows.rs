//! CSV row types and their aggregation.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// One replicate at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub study: String,
    pub n: usize,
    /// Edge probability for Erdos-Renyi graphs, edge density otherwise.
    pub p: f64,
    pub p_exponent: Option<f64>,
    pub beta_true: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub replicate: usize,
    pub beta_hat_nonprivate: f64,
    pub beta_hat_private: f64,
    pub nonprivate_saturated_low: bool,
    pub nonprivate_saturated_high: bool,
    pub private_saturated_low: bool,
    pub private_saturated_high: bool,
    pub noise_draw: f64,
    /// Seconds spent on the replicate; only filled when timings are asked
    /// for, so that default output is reproducible byte for byte.
    pub wall_time: Option<f64>,
}

/// Mean, spread and error of one estimator over replicates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub mse: f64,
    pub mean: f64,
    /// Per-replicate sample standard deviation.
    pub sd: f64,
    /// Standard deviation of the mean.
    pub sem: f64,
}

impl Moments {
    pub fn of(values: &[f64], target: f64) -> Self {
        let k = values.len();
        if k == 0 {
            return Self::default();
        }
        let kf = k as f64;
        let mean = values.iter().sum::<f64>() / kf;
        let mse = values.iter().map(|v| (v - target).powi(2)).sum::<f64>() / kf;
        let sd = if k > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (kf - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mse,
            mean,
            sd,
            sem: sd / kf.sqrt(),
        }
    }
}

/// Replicates of one grid point, aggregated. Saturated estimates enter the
/// moments at their clamped value and are counted separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub study: String,
    pub n: usize,
    pub p: f64,
    pub p_exponent: Option<f64>,
    pub beta_true: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub replicates: usize,
    pub mse_private: f64,
    pub mse_nonprivate: f64,
    pub mean_private: f64,
    pub sd_private: f64,
    pub sem_private: f64,
    pub mean_nonprivate: f64,
    pub sd_nonprivate: f64,
    pub sem_nonprivate: f64,
    pub private_saturated_low: usize,
    pub private_saturated_high: usize,
    pub nonprivate_saturated_low: usize,
    pub nonprivate_saturated_high: usize,
}

impl SummaryRow {
    /// Aggregates a block of rows sharing one grid point.
    fn from_block(block: &[ResultRow]) -> Self {
        let first = &block[0];
        let private: Vec<f64> = block.iter().map(|r| r.beta_hat_private).collect();
        let nonprivate: Vec<f64> = block.iter().map(|r| r.beta_hat_nonprivate).collect();
        let mp = Moments::of(&private, first.beta_true);
        let mn = Moments::of(&nonprivate, first.beta_true);
        let count = |f: fn(&ResultRow) -> bool| block.iter().filter(|r| f(r)).count();
        Self {
            study: first.study.clone(),
            n: first.n,
            p: first.p,
            p_exponent: first.p_exponent,
            beta_true: first.beta_true,
            epsilon: first.epsilon,
            delta: first.delta,
            replicates: block.len(),
            mse_private: mp.mse,
            mse_nonprivate: mn.mse,
            mean_private: mp.mean,
            sd_private: mp.sd,
            sem_private: mp.sem,
            mean_nonprivate: mn.mean,
            sd_nonprivate: mn.sd,
            sem_nonprivate: mn.sem,
            private_saturated_low: count(|r| r.private_saturated_low),
            private_saturated_high: count(|r| r.private_saturated_high),
            nonprivate_saturated_low: count(|r| r.nonprivate_saturated_low),
            nonprivate_saturated_high: count(|r| r.nonprivate_saturated_high),
        }
    }
}

fn same_point(a: &ResultRow, b: &ResultRow) -> bool {
    a.n == b.n
        && a.p == b.p
        && a.p_exponent == b.p_exponent
        && a.beta_true == b.beta_true
        && a.epsilon == b.epsilon
        && a.delta == b.delta
}

/// Aggregates consecutive runs of rows that share a grid point, keeping the
/// input order.
pub fn summarise(rows: &[ResultRow]) -> Vec<SummaryRow> {
    rows.chunk_by(same_point)
        .map(SummaryRow::from_block)
        .collect()
}

/// Per-budget result of the real-data analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataRow {
    pub study: String,
    pub n: usize,
    pub edges: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub replicates: usize,
    pub beta_hat_nonprivate: f64,
    /// Monte Carlo mean of the squared gap between private and non-private
    /// estimates on the fixed data.
    pub cost_of_privacy: f64,
    pub mean_private: f64,
    pub sd_private: f64,
    pub private_saturated_low: usize,
    pub private_saturated_high: usize,
}

/// One audit on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub instance: usize,
    pub audit_name: String,
    pub n: usize,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub checked: usize,
    pub worst_gap: f64,
    pub bound: f64,
    pub violations: usize,
    pub excluded: usize,
    pub excluded_exceeding: usize,
    pub pass: bool,
}

/// Writes `rows` with a header line to `out`.
pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Data(format!("flushing csv: {e}")))?;
    Ok(())
}

pub fn write_csv_file<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_csv(rows, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(beta_true: f64, epsilon: f64, replicate: usize, private: f64) -> ResultRow {
        ResultRow {
            study: "beta_sweep".into(),
            n: 10,
            p: 0.5,
            p_exponent: None,
            beta_true,
            epsilon,
            delta: 0.1,
            replicate,
            beta_hat_nonprivate: beta_true,
            beta_hat_private: private,
            nonprivate_saturated_low: false,
            nonprivate_saturated_high: false,
            private_saturated_low: private == 0.0,
            private_saturated_high: false,
            noise_draw: 0.0,
            wall_time: None,
        }
    }

    #[test]
    fn moments_of_small_sample() {
        let m = Moments::of(&[1.0, 2.0, 3.0], 1.0);
        assert!((m.mean - 2.0).abs() < 1e-15);
        assert!((m.sd - 1.0).abs() < 1e-15);
        assert!((m.mse - 5.0 / 3.0).abs() < 1e-15);
        assert!((m.sem - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(Moments::of(&[4.0], 4.0).sd, 0.0);
    }

    #[test]
    fn summary_groups_consecutive_grid_points() {
        let rows = vec![
            row(0.5, 1.0, 0, 0.0),
            row(0.5, 1.0, 1, 1.0),
            row(0.5, 2.0, 0, 0.5),
            row(1.5, 1.0, 0, 1.5),
        ];
        let s = summarise(&rows);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].replicates, 2);
        assert_eq!(s[0].private_saturated_low, 1);
        assert!((s[0].mse_private - 0.25).abs() < 1e-15);
        assert_eq!(s[0].mse_nonprivate, 0.0);
        assert_eq!(s[2].beta_true, 1.5);
    }

    #[test]
    fn csv_has_header_and_empty_optionals() {
        let mut buf = Vec::new();
        write_csv(&[row(0.5, 1.0, 0, 0.25)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "study,n,p,p_exponent,beta_true,epsilon,delta,replicate,beta_hat_nonprivate,\
             beta_hat_private,nonprivate_saturated_low,nonprivate_saturated_high,\
             private_saturated_low,private_saturated_high,noise_draw,wall_time"
        );
        assert_eq!(
            lines.next().unwrap(),
            "beta_sweep,10,0.5,,0.5,1.0,0.1,0,0.5,0.25,false,false,false,false,0.0,"
        );
    }
}
