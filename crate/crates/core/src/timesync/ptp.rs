use serde::{Deserialize, Serialize};

use super::SyncError;

/// Timestamps of one two-way exchange: `t1` master send, `t2` slave
/// receive, `t3` slave send, `t4` master receive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtpExchange {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

impl PtpExchange {
    /// Simulates an exchange against a slave whose clock reads `master + offset`.
    pub fn simulate(t1: f64, offset: f64, forward_delay: f64, reverse_delay: f64, turnaround: f64) -> Self {
        let t2 = t1 + forward_delay + offset;
        let t3 = t2 + turnaround;
        let t4 = t3 - offset + reverse_delay;
        Self { t1, t2, t3, t4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtpEstimate {
    /// Slave minus master, seconds.
    pub offset: f64,
    pub path_delay: f64,
}

/// Offset and mean path delay from a two-way exchange, exact under symmetric delay.
pub fn ptp_estimate_offset(x: &PtpExchange) -> Result<PtpEstimate, SyncError> {
    if !(x.t1 < x.t4) || !(x.t2 < x.t3) {
        return Err(SyncError::UnorderedExchange);
    }
    let forward = x.t2 - x.t1;
    let reverse = x.t4 - x.t3;
    let path_delay = (forward + reverse) / 2.0;
    if path_delay < 0.0 {
        return Err(SyncError::NegativePathDelay(path_delay));
    }
    Ok(PtpEstimate { offset: (forward - reverse) / 2.0, path_delay })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_offset_exact() {
        let x = PtpExchange::simulate(0.0, 0.003, 0.001, 0.001, 0.001);
        let e = ptp_estimate_offset(&x).unwrap();
        assert!((e.offset - 0.003).abs() < 1e-15);
        assert!((e.path_delay - 0.001).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_delay_biases_by_half() {
        let x = PtpExchange { t1: 0.0, t2: 0.002, t3: 0.003, t4: 0.004 };
        let e = ptp_estimate_offset(&x).unwrap();
        assert!((e.offset - 0.0005).abs() < 1e-15);
    }

    #[test]
    fn zero_everything() {
        let x = PtpExchange { t1: 0.0, t2: 0.0, t3: 1e-3, t4: 1e-3 };
        let e = ptp_estimate_offset(&x).unwrap();
        assert_eq!(e.offset, 0.0);
        assert_eq!(e.path_delay, 0.0);
    }

    #[test]
    fn negative_delay_rejected() {
        // Slave reports receive time far before the master sent.
        let x = PtpExchange { t1: 10.0, t2: 1.0, t3: 1.1, t4: 10.05 };
        assert!(matches!(ptp_estimate_offset(&x), Err(SyncError::NegativePathDelay(_))));
        let bad = PtpExchange { t1: 1.0, t2: 2.0, t3: 1.5, t4: 3.0 };
        assert_eq!(ptp_estimate_offset(&bad), Err(SyncError::UnorderedExchange));
    }

    proptest! {
        #[test]
        fn symmetric_delay_recovers_offset(
            offset in -1.0f64..1.0,
            delay in 0.0f64..0.05,
            t1 in 0.0f64..1000.0,
        ) {
            let x = PtpExchange::simulate(t1, offset, delay, delay, 1e-4);
            let e = ptp_estimate_offset(&x).unwrap();
            prop_assert!((e.offset - offset).abs() < 1e-12 * (1.0 + t1.abs()));
        }
    }
}
