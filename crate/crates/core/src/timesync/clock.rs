use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SyncError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockKind {
    Host,
    PtpSlave,
    Triggered,
    FreeRunning,
}

/// Affine device clock with per-event Gaussian jitter:
/// `local(t) = t * (1 + drift) + offset + N(0, jitter_sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockDomain {
    pub offset: f64,
    pub drift_ppm: f64,
    pub jitter_sigma: f64,
    pub kind: ClockKind,
}

impl ClockDomain {
    pub fn new(offset: f64, drift_ppm: f64, jitter_sigma: f64, kind: ClockKind) -> Result<Self, SyncError> {
        if !(jitter_sigma >= 0.0) || !jitter_sigma.is_finite() {
            return Err(SyncError::InvalidClock(format!("jitter sigma {jitter_sigma}")));
        }
        if !(drift_ppm.abs() < 1000.0) {
            return Err(SyncError::InvalidClock(format!("drift {drift_ppm} ppm")));
        }
        if !offset.is_finite() {
            return Err(SyncError::InvalidClock("non-finite offset".into()));
        }
        Ok(Self { offset, drift_ppm, jitter_sigma, kind })
    }

    pub fn ideal(kind: ClockKind) -> Self {
        Self { offset: 0.0, drift_ppm: 0.0, jitter_sigma: 0.0, kind }
    }

    pub fn with_jitter(mut self, sigma: f64) -> Self {
        self.jitter_sigma = sigma.max(0.0);
        self
    }

    /// Deterministic part of the clock reading at true time `t`.
    pub fn nominal(&self, t: f64) -> f64 {
        t * (1.0 + self.drift_ppm * 1e-6) + self.offset
    }

    /// Clock reading at `t` including one jitter draw.
    pub fn local<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        self.nominal(t) + self.jitter(rng)
    }

    pub fn jitter<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.jitter_sigma > 0.0 {
            Normal::new(0.0, self.jitter_sigma).expect("validated sigma").sample(rng)
        } else {
            0.0
        }
    }

    /// Inverse of [`ClockDomain::nominal`].
    pub fn to_true(&self, local: f64) -> f64 {
        (local - self.offset) / (1.0 + self.drift_ppm * 1e-6)
    }
}

/// Serial link from a device to the host: constant latency plus Gaussian jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HostLink {
    pub latency: f64,
    pub jitter_sigma: f64,
}

impl HostLink {
    pub fn ideal() -> Self {
        Self { latency: 0.0, jitter_sigma: 0.0 }
    }
}

/// Host arrival stamp for a sample emitted at true time `emit_time`. No
/// latency correction is applied: the stamp carries the link bias.
pub fn host_timestamp_imu<R: Rng + ?Sized>(
    emit_time: f64,
    link: &HostLink,
    host: &ClockDomain,
    rng: &mut R,
) -> f64 {
    let jitter = if link.jitter_sigma > 0.0 {
        Normal::new(0.0, link.jitter_sigma).expect("finite sigma").sample(rng)
    } else {
        0.0
    };
    host.local(emit_time + link.latency + jitter, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timesync::interval_stats;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn validation() {
        assert!(ClockDomain::new(0.0, 1200.0, 0.0, ClockKind::FreeRunning).is_err());
        assert!(ClockDomain::new(0.0, 10.0, -1.0, ClockKind::FreeRunning).is_err());
        assert!(ClockDomain::new(0.1, -999.0, 1e-4, ClockKind::PtpSlave).is_ok());
    }

    #[test]
    fn affine_model_inverts() {
        let c = ClockDomain::new(0.25, 50.0, 0.0, ClockKind::FreeRunning).unwrap();
        let t = 123.456;
        assert!((c.to_true(c.nominal(t)) - t).abs() < 1e-12);
        assert!((c.nominal(1.0) - (1.0 + 50e-6 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn zero_latency_is_true_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let host = ClockDomain::ideal(ClockKind::Host);
        for t in [0.0, 0.005, 17.3] {
            assert_eq!(host_timestamp_imu(t, &HostLink::ideal(), &host, &mut rng), t);
        }
    }

    #[test]
    fn constant_latency_is_constant_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let host = ClockDomain::ideal(ClockKind::Host);
        let link = HostLink { latency: 0.0003, jitter_sigma: 0.0 };
        let stamps: Vec<f64> = (0..1000)
            .map(|k| {
                let t = k as f64 * 0.005;
                let s = host_timestamp_imu(t, &link, &host, &mut rng);
                assert!((s - t - 0.0003).abs() < 1e-12);
                s
            })
            .collect();
        let st = interval_stats(&stamps).unwrap();
        assert!(st.std_ms < 1e-9);
    }

    #[test]
    fn jittered_latency_interval_std() {
        // Difference of two i.i.d. N(0, s^2) has std s * sqrt(2).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let host = ClockDomain::ideal(ClockKind::Host);
        let sigma = 0.0006;
        let link = HostLink { latency: 0.0, jitter_sigma: sigma };
        let stamps: Vec<f64> = (0..10_000)
            .map(|k| host_timestamp_imu(k as f64 * 0.005, &link, &host, &mut rng))
            .collect();
        let st = interval_stats(&stamps).unwrap();
        let expected = sigma * 1e3 * 2f64.sqrt();
        assert!((st.std_ms - expected).abs() / expected < 0.10, "{} vs {}", st.std_ms, expected);
    }
}
