use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::assign::assign_entries;
use super::{
    host_timestamp_imu, interval_stats, ptp_estimate_offset, trigger_schedule, ClockDomain,
    ClockKind, ExposureProfile, HostLink, PtpExchange, SharedTriggerBuffer, SyncError, SyncRow,
};

/// A camera or radar fired by IMU trigger pulses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggeredSensor {
    pub name: String,
    pub rate: f64,
    pub exposure: f64,
    pub processing_delay: f64,
    /// Prior used by the assignment; may differ from the true delay.
    pub processing_delay_prior: f64,
    /// Jitter of the host stamp on this sensor's trigger line.
    pub capture_jitter: f64,
    /// Jitter of the frame's arrival at the host.
    pub arrival_jitter: f64,
    pub drop_probability: f64,
}

/// Ethernet device whose samples are stamped on a PTP-disciplined clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtpStream {
    pub name: String,
    pub rate: f64,
    pub clock: ClockDomain,
    pub sync_interval: f64,
    pub path_delay: f64,
    pub path_jitter: f64,
}

/// Device with its own timing, stamped on arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeRunningStream {
    pub name: String,
    pub period: f64,
    pub link: HostLink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub duration: f64,
    pub seed: u64,
    pub imu_name: String,
    pub imu_rate: f64,
    pub imu_clock: ClockDomain,
    pub imu_link: HostLink,
    pub triggered: Vec<TriggeredSensor>,
    pub ptp: Vec<PtpStream>,
    pub free_running: Vec<FreeRunningStream>,
    pub buffer_capacity: usize,
    /// Frames collected before each assignment pass.
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<SyncRow>,
    pub frames: usize,
    pub unassigned: usize,
    pub misassigned: usize,
}

impl BenchReport {
    pub fn row(&self, sensor: &str) -> Option<&SyncRow> {
        self.rows.iter().find(|r| r.sensor == sensor)
    }
}

fn ms(v: f64) -> f64 {
    v * 1e-3
}

/// Rig with jitter defaults calibrated against the reference bench. A
/// difference of two i.i.d. stamps has std sigma * sqrt(2), so each line's
/// sigma is the target interval std divided by sqrt(2).
pub fn calibrated_bench(duration: f64, seed: u64) -> BenchConfig {
    let s2 = std::f64::consts::SQRT_2;
    let cam = |name: &str, exposure: f64, delay: f64, rate: f64, target_std_ms: f64| TriggeredSensor {
        name: name.into(),
        rate,
        exposure: ms(exposure),
        processing_delay: ms(delay),
        processing_delay_prior: ms(delay - 1.0),
        capture_jitter: ms(target_std_ms / s2),
        arrival_jitter: ms(1.3),
        drop_probability: 0.0,
    };
    BenchConfig {
        duration,
        seed,
        imu_name: "imu".into(),
        imu_rate: 200.0,
        imu_clock: ClockDomain { offset: 0.0, drift_ppm: 0.0, jitter_sigma: 0.0, kind: ClockKind::Triggered },
        imu_link: HostLink { latency: ms(0.3), jitter_sigma: ms(0.654 / s2) },
        triggered: vec![
            cam("front_camera", 5.0, 25.0, 20.0, 1.286),
            cam("left_camera", 8.0, 30.0, 20.0, 1.079),
            cam("right_camera", 8.0, 30.0, 20.0, 1.080),
            cam("radar", 2.0, 40.0, 10.0, 0.986),
        ],
        ptp: vec![PtpStream {
            name: "lidar_imu".into(),
            rate: 200.0,
            clock: ClockDomain {
                offset: 0.37,
                drift_ppm: 20.0,
                jitter_sigma: ms(0.005 / s2),
                kind: ClockKind::PtpSlave,
            },
            sync_interval: 1.0,
            path_delay: ms(0.05),
            path_jitter: 1e-7,
        }],
        free_running: vec![FreeRunningStream {
            name: "tof".into(),
            period: ms(100.242),
            link: HostLink { latency: ms(2.0), jitter_sigma: ms(0.880 / s2) },
        }],
        buffer_capacity: 64,
        window: 4,
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Simulates the whole rig and reports sampling-interval statistics per
/// sensor in the order IMU, PTP streams, triggered sensors, free-running.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, SyncError> {
    let host = ClockDomain::ideal(ClockKind::Host);
    let mut rows = Vec::new();
    let mut stream = 0u64;
    let mut next_rng = || {
        stream += 1;
        stream_rng(cfg.seed, stream)
    };

    let mut rng = next_rng();
    let n_imu = (cfg.duration * cfg.imu_rate).floor() as usize;
    let imu: Vec<f64> = (0..n_imu)
        .map(|k| {
            let t = cfg.imu_clock.nominal(k as f64 / cfg.imu_rate);
            host_timestamp_imu(t, &cfg.imu_link, &host, &mut rng)
        })
        .collect();
    rows.push(SyncRow { sensor: cfg.imu_name.clone(), stats: interval_stats(&imu)? });

    for p in &cfg.ptp {
        let mut rng = next_rng();
        let stamps = simulate_ptp(p, cfg.duration, &mut rng)?;
        rows.push(SyncRow { sensor: p.name.clone(), stats: interval_stats(&stamps)? });
    }

    let (mut frames, mut unassigned, mut misassigned) = (0, 0, 0);
    for s in &cfg.triggered {
        let mut rng = next_rng();
        let out = simulate_triggered(cfg, s, &mut rng)?;
        frames += out.frames;
        unassigned += out.unassigned;
        misassigned += out.misassigned;
        rows.push(SyncRow { sensor: s.name.clone(), stats: interval_stats(&out.stamps)? });
    }

    for f in &cfg.free_running {
        let mut rng = next_rng();
        let n = (cfg.duration / f.period).floor() as usize;
        let stamps: Vec<f64> =
            (0..n).map(|k| host_timestamp_imu(k as f64 * f.period, &f.link, &host, &mut rng)).collect();
        rows.push(SyncRow { sensor: f.name.clone(), stats: interval_stats(&stamps)? });
    }

    Ok(BenchReport { rows, frames, unassigned, misassigned })
}

/// Device stamps mapped to host time with offset and rate estimated from
/// the two most recent exchanges.
fn simulate_ptp<R: Rng>(p: &PtpStream, duration: f64, rng: &mut R) -> Result<Vec<f64>, SyncError> {
    let noise = Normal::new(0.0, p.path_jitter.max(1e-15)).expect("finite sigma");
    let exchange = |t1: f64, rng: &mut R| -> Result<(f64, f64), SyncError> {
        let offset = p.clock.nominal(t1) - t1;
        let fwd = p.path_delay + noise.sample(rng);
        let rev = p.path_delay + noise.sample(rng);
        let est = ptp_estimate_offset(&PtpExchange::simulate(t1, offset, fwd, rev, 1e-4))?;
        Ok((t1 + est.offset, est.offset))
    };
    let n_sync = (duration / p.sync_interval).ceil() as usize + 1;
    let mut syncs = Vec::with_capacity(n_sync);
    for i in 0..n_sync {
        syncs.push(exchange(i as f64 * p.sync_interval, rng)?);
    }
    let n = (duration * p.rate).floor() as usize;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / p.rate;
        let local = p.clock.local(t, rng);
        let i = ((t / p.sync_interval).floor() as usize).min(n_sync - 1);
        let (l0, o0) = syncs[i];
        let rate = if i > 0 {
            let (lp, op) = syncs[i - 1];
            (o0 - op) / (l0 - lp)
        } else {
            0.0
        };
        out.push(local - o0 - rate * (local - l0));
    }
    Ok(out)
}

struct TriggeredOutcome {
    stamps: Vec<f64>,
    frames: usize,
    unassigned: usize,
    misassigned: usize,
}

fn simulate_triggered<R: Rng>(
    cfg: &BenchConfig,
    s: &TriggeredSensor,
    rng: &mut R,
) -> Result<TriggeredOutcome, SyncError> {
    let period = 1.0 / s.rate;
    let line = cfg.imu_clock.with_jitter(s.capture_jitter);
    let schedule = trigger_schedule(&line, s.rate, cfg.duration, rng)?;
    let profile = ExposureProfile::for_period(s.exposure, s.processing_delay_prior, period)?;
    profile.validate_for_period(period)?;

    let jit = Normal::new(0.0, s.arrival_jitter.max(1e-15)).expect("finite sigma");
    let drop = Bernoulli::new(s.drop_probability.clamp(0.0, 1.0)).expect("probability");
    let mut arrivals: Vec<(f64, u64)> = Vec::new();
    for e in &schedule {
        let t = e.seq as f64 * period + s.exposure + s.processing_delay + jit.sample(rng);
        if !drop.sample(rng) {
            arrivals.push((t, e.seq));
        }
    }
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0));

    let buffer = SharedTriggerBuffer::new(cfg.buffer_capacity);
    let mut next_trigger = 0;
    let mut consumed: HashSet<u64> = HashSet::new();
    let mut matched: Vec<(f64, f64)> = Vec::new();
    let (mut unassigned, mut misassigned) = (0, 0);
    let window = cfg.window.max(1);

    for chunk in arrivals.chunks(window) {
        let now = chunk.last().unwrap().0;
        while next_trigger < schedule.len() && schedule[next_trigger].timestamp <= now {
            buffer.push(schedule[next_trigger])?;
            next_trigger += 1;
        }
        let snap = buffer.snapshot();
        let times: Vec<f64> = chunk.iter().map(|a| a.0).collect();
        let a = assign_entries(&times, &snap.entries(), &profile, |q| consumed.contains(&q));
        unassigned += a.unassigned.len();
        for f in &a.assigned {
            consumed.insert(f.seq);
            if f.seq != chunk[f.frame].1 {
                misassigned += 1;
            }
            matched.push((chunk[f.frame].0, f.corrected_timestamp));
        }
    }
    let mut stamps: Vec<f64> = matched.iter().map(|m| m.1).collect();
    stamps.sort_by(f64::total_cmp);
    Ok(TriggeredOutcome { stamps, frames: arrivals.len(), unassigned, misassigned })
}
