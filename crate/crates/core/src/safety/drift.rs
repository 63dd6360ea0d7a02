use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Vec3};

/// Horizontal random-walk position error. Each metre travelled adds an
/// independent `N(0, rate^2)` offset per horizontal axis, so after a
/// distance `L` the expected error magnitude is `rate * sqrt(L * pi / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftModel {
    pub rate: f64,
    pub seed: u64,
}

impl DriftModel {
    pub fn none() -> Self {
        Self { rate: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct DriftState {
    model: DriftModel,
    rng: ChaCha8Rng,
    pub offset: Vec3,
    pub travelled: f64,
}

impl DriftState {
    pub fn new(model: DriftModel) -> Self {
        Self { model, rng: ChaCha8Rng::seed_from_u64(model.seed), offset: Vec3::zeros(), travelled: 0.0 }
    }

    /// Advances by a true displacement and returns the estimate of `truth`.
    pub fn advance(&mut self, step: f64, truth: &Pose) -> Pose {
        let step = step.max(0.0);
        self.travelled += step;
        if self.model.rate > 0.0 && step > 0.0 {
            let s = self.model.rate * step.sqrt();
            let dx: f64 = StandardNormal.sample(&mut self.rng);
            let dy: f64 = StandardNormal.sample(&mut self.rng);
            self.offset += Vec3::new(dx * s, dy * s, 0.0);
        }
        self.estimate(truth)
    }

    pub fn estimate(&self, truth: &Pose) -> Pose {
        Pose { position: truth.position + self.offset, ..*truth }
    }
}

/// Estimated poses for a true pose stream.
pub fn inject_drift(truth: &[Pose], model: &DriftModel) -> Vec<Pose> {
    let mut state = DriftState::new(*model);
    let mut prev: Option<&Pose> = None;
    truth
        .iter()
        .map(|p| {
            let step = prev.map_or(0.0, |q| (p.position - q.position).norm());
            prev = Some(p);
            state.advance(step, p)
        })
        .collect()
}
