use std::collections::VecDeque;
use std::sync::{Arc, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClockDomain, SyncError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerEntry {
    pub seq: u64,
    /// Host timestamp of the pulse, seconds.
    pub timestamp: f64,
}

/// Ring of the most recent trigger pulses. Sequence ids are contiguous and
/// timestamps strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerBuffer {
    entries: VecDeque<TriggerEntry>,
    capacity: usize,
}

impl TriggerBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { entries: VecDeque::with_capacity(capacity.min(4096)), capacity: capacity.max(1) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: TriggerEntry) -> Result<(), SyncError> {
        if let Some(last) = self.entries.back() {
            if entry.seq != last.seq + 1 {
                return Err(SyncError::NonContiguous { last: last.seq, found: entry.seq });
            }
            if !(entry.timestamp > last.timestamp) {
                return Err(SyncError::NotIncreasing(self.entries.len()));
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &TriggerEntry> {
        self.entries.iter()
    }

    pub fn entries(&self) -> Vec<TriggerEntry> {
        self.entries.iter().copied().collect()
    }

    pub fn first(&self) -> Option<&TriggerEntry> {
        self.entries.front()
    }

    pub fn last(&self) -> Option<&TriggerEntry> {
        self.entries.back()
    }
}

/// Single-writer, multi-reader handle. Readers take whole-buffer snapshots
/// so they never observe a half-applied push.
#[derive(Debug, Clone)]
pub struct SharedTriggerBuffer {
    inner: Arc<RwLock<TriggerBuffer>>,
}

impl SharedTriggerBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { inner: Arc::new(RwLock::new(TriggerBuffer::new(capacity))) }
    }

    pub fn push(&self, entry: TriggerEntry) -> Result<(), SyncError> {
        self.inner.write().expect("trigger buffer poisoned").push(entry)
    }

    pub fn snapshot(&self) -> TriggerBuffer {
        self.inner.read().expect("trigger buffer poisoned").clone()
    }
}

/// Host timestamps of `floor(horizon * rate)` pulses emitted on the IMU's
/// tick grid and stamped through `imu_clock`. Jitter draws are clipped to
/// +-0.45 periods so the sequence stays strictly increasing.
pub fn trigger_schedule<R: Rng + ?Sized>(
    imu_clock: &ClockDomain,
    rate: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<TriggerEntry>, SyncError> {
    if !(rate > 0.0) || !(horizon > 0.0) {
        return Err(SyncError::InvalidRate);
    }
    let period = 1.0 / rate;
    let n = (horizon * rate + 1e-9).floor() as u64;
    let clip = 0.45 * period;
    Ok((0..n)
        .map(|k| {
            let t = k as f64 * period;
            let j = imu_clock.jitter(rng).clamp(-clip, clip);
            TriggerEntry { seq: k, timestamp: imu_clock.nominal(t) + j }
        })
        .collect())
}

/// Generates pulses into a ring of `capacity`, retaining the newest entries.
pub fn generate_triggers<R: Rng + ?Sized>(
    imu_clock: &ClockDomain,
    rate: f64,
    horizon: f64,
    capacity: usize,
    rng: &mut R,
) -> Result<TriggerBuffer, SyncError> {
    let mut buf = TriggerBuffer::new(capacity);
    for e in trigger_schedule(imu_clock, rate, horizon, rng)? {
        buf.push(e)?;
    }
    Ok(buf)
}
