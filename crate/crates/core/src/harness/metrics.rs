//! Per-interval metrics rows and their CSV form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use crate::env::{MdpAction, StepOutcome};
use crate::error::{Error, Result};
use crate::num::Real;

pub const HEADER: [&str; 13] = [
    "episode",
    "iteration",
    "reward",
    "avg_queue",
    "avg_aou_slots",
    "avg_dropped",
    "avg_delivered_pkts_per_slot",
    "avg_capacity_bps",
    "avg_velocity_rmse_ms",
    "sinr_db",
    "blocking_level",
    "mod_bits",
    "n_frames",
];

/// Averages over one logging interval. `sinr_db`, `blocking_level`,
/// `mod_bits` and `n_frames` describe the interval's last slot.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct MetricsRow {
    pub episode: u64,
    /// Total steps taken when the row was closed.
    pub iteration: u64,
    pub reward: f64,
    pub avg_queue: f64,
    pub avg_aou_slots: f64,
    pub avg_dropped: f64,
    pub avg_delivered_pkts_per_slot: f64,
    pub avg_capacity_bps: f64,
    pub avg_velocity_rmse_ms: f64,
    pub sinr_db: f64,
    /// 0 = LoS, 1..3 = number of blocking vehicles.
    pub blocking_level: u8,
    pub mod_bits: u8,
    pub n_frames: u64,
}

/// Formats `x` with six significant digits in plain decimal notation.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if exp < 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(&digits);
    } else {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            out.push_str(&digits);
            out.extend(std::iter::repeat_n('0', int_len - digits.len()));
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    if out.contains('.') {
        while out.ends_with('0') {
            out.pop();
        }
        if out.ends_with('.') {
            out.pop();
        }
    }
    out
}

impl MetricsRow {
    fn record(&self) -> [String; 13] {
        [
            self.episode.to_string(),
            self.iteration.to_string(),
            format_sig6(self.reward),
            format_sig6(self.avg_queue),
            format_sig6(self.avg_aou_slots),
            format_sig6(self.avg_dropped),
            format_sig6(self.avg_delivered_pkts_per_slot),
            format_sig6(self.avg_capacity_bps),
            format_sig6(self.avg_velocity_rmse_ms),
            format_sig6(self.sinr_db),
            self.blocking_level.to_string(),
            self.mod_bits.to_string(),
            self.n_frames.to_string(),
        ]
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Renders rows as CSV text. Errors on an empty slice.
pub fn metrics_csv_string(rows: &[MetricsRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::NoMetrics);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let path = Path::new("<memory>");
    w.write_record(HEADER).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row.record()).map_err(csv_err(path))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is ascii"))
}

pub fn write_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let text = metrics_csv_string(rows)?;
    let mut f = BufWriter::new(File::create(path).map_err(io_err(path))?);
    f.write_all(text.as_bytes()).map_err(io_err(path))?;
    f.flush().map_err(io_err(path))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<MetricsRow>, _>>()
        .map_err(csv_err(path))?;
    Ok(rows)
}

/// Rewards min-max scaled to `[0, 1]`; all zeros when the rewards are constant.
pub fn normalized_rewards(rows: &[MetricsRow]) -> Vec<f64> {
    let lo = rows.iter().map(|r| r.reward).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.reward).fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    rows.iter()
        .map(|r| if span > 0.0 { (r.reward - lo) / span } else { 0.0 })
        .collect()
}

/// Reads a metrics file and writes it back with a `normalized_reward` column.
pub fn postprocess(input: &Path, output: &Path) -> Result<usize> {
    let rows = read_metrics_csv(input)?;
    if rows.is_empty() {
        return Err(Error::NoMetrics);
    }
    let norm = normalized_rewards(&rows);
    let mut w = csv::Writer::from_path(output).map_err(csv_err(output))?;
    let mut header: Vec<&str> = HEADER.to_vec();
    header.push("normalized_reward");
    w.write_record(&header).map_err(csv_err(output))?;
    for (row, n) in rows.iter().zip(norm) {
        let mut rec = row.record().to_vec();
        rec.push(format_sig6(n));
        w.write_record(&rec).map_err(csv_err(output))?;
    }
    w.flush().map_err(io_err(output))?;
    Ok(rows.len())
}

/// Accumulates per-slot outcomes into interval rows.
#[derive(Debug, Clone, Default)]
pub struct IntervalLog {
    n: u64,
    reward: f64,
    queue: f64,
    aou: f64,
    dropped: f64,
    delivered: f64,
    capacity: f64,
    rmse: f64,
    last: Option<(f64, u8, u8, u64)>,
}

impl IntervalLog {
    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn record<T: Real>(&mut self, action: MdpAction, out: &StepOutcome<T>) {
        self.n += 1;
        self.reward += out.reward.as_f64();
        self.queue += out.q_end as f64;
        self.aou += out.aou_avg.as_f64();
        self.dropped += out.dropped as f64;
        self.delivered += out.delivered_rate_pkts.as_f64();
        self.capacity += out.capacity_bps.as_f64();
        self.rmse += out.velocity_rmse.as_f64();
        self.last = Some((
            out.eta.to_db().as_f64(),
            out.blocking.index() as u8,
            action.mod_bits,
            action.n_frames as u64,
        ));
    }

    /// Closes the interval, returning its row if any slot was recorded.
    pub fn flush(&mut self, episode: u64, iteration: u64) -> Option<MetricsRow> {
        let (sinr_db, blocking_level, mod_bits, n_frames) = self.last?;
        let n = self.n as f64;
        let row = MetricsRow {
            episode,
            iteration,
            reward: self.reward / n,
            avg_queue: self.queue / n,
            avg_aou_slots: self.aou / n,
            avg_dropped: self.dropped / n,
            avg_delivered_pkts_per_slot: self.delivered / n,
            avg_capacity_bps: self.capacity / n,
            avg_velocity_rmse_ms: self.rmse / n,
            sinr_db,
            blocking_level,
            mod_bits,
            n_frames,
        };
        *self = Self::default();
        Some(row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(1.23456789), "1.23457");
        assert_eq!(format_sig6(-0.000123456789), "-0.000123457");
        assert_eq!(format_sig6(34_012_345_678.0), "34012300000");
        assert_eq!(format_sig6(9.9999996), "10");
        assert_eq!(format_sig6(100.0), "100");
        assert_eq!(format_sig6(-0.1006), "-0.1006");
        assert!(!format_sig6(1e-12).contains('e'));
    }
}
