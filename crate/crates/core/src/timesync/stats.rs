use std::io::Write;

use serde::{Deserialize, Serialize};

use super::SyncError;

/// Statistics of consecutive sampling intervals, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub mean_ms: f64,
    /// Population standard deviation of the intervals.
    pub std_ms: f64,
    /// Number of timestamps the intervals were taken from.
    pub n_samples: usize,
}

pub fn interval_stats(timestamps: &[f64]) -> Result<IntervalStats, SyncError> {
    if timestamps.len() < 2 {
        return Err(SyncError::TooFewSamples(timestamps.len()));
    }
    if let Some(i) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(SyncError::NotIncreasing(i + 1));
    }
    let n = (timestamps.len() - 1) as f64;
    let mean = (timestamps[timestamps.len() - 1] - timestamps[0]) / n;
    let var = timestamps.windows(2).map(|w| (w[1] - w[0] - mean).powi(2)).sum::<f64>() / n;
    Ok(IntervalStats { mean_ms: mean * 1e3, std_ms: var.sqrt() * 1e3, n_samples: timestamps.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncRow {
    pub sensor: String,
    pub stats: IntervalStats,
}

/// Writes `sensor,mean_ms,std_ms,n_samples`.
pub fn write_stats_csv<W: Write>(out: W, rows: &[SyncRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sensor", "mean_ms", "std_ms", "n_samples"])?;
    for r in rows {
        w.write_record([
            r.sensor.clone(),
            format!("{:.3}", r.stats.mean_ms),
            format!("{:.3}", r.stats.std_ms),
            r.stats.n_samples.to_string(),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_200hz() {
        let ts: Vec<f64> = (0..520 * 200).map(|k| k as f64 * 0.005).collect();
        let s = interval_stats(&ts).unwrap();
        assert!((s.mean_ms - 5.0).abs() < 1e-9);
        assert!(s.std_ms < 1e-6);
        assert_eq!(s.n_samples, 104_000);
    }

    #[test]
    fn hand_computed() {
        let s = interval_stats(&[0.0, 0.001, 0.003, 0.006]).unwrap();
        assert!((s.mean_ms - 2.0).abs() < 1e-12);
        assert!((s.std_ms - (2.0f64 / 3.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert_eq!(interval_stats(&[1.0]), Err(SyncError::TooFewSamples(1)));
        assert_eq!(interval_stats(&[0.0, 1.0, 1.0]), Err(SyncError::NotIncreasing(2)));
    }

    #[test]
    fn csv_layout() {
        let rows = vec![SyncRow {
            sensor: "imu".into(),
            stats: IntervalStats { mean_ms: 5.0, std_ms: 0.5, n_samples: 3 },
        }];
        let mut buf = Vec::new();
        write_stats_csv(&mut buf, &rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "sensor,mean_ms,std_ms,n_samples\nimu,5.000,0.500,3\n");
    }
}
