use serde::{Deserialize, Serialize};

use crate::diffcore::numeric;
use crate::{Error, Result};

/// Smallest temperature the controller will produce.
pub const ALPHA_FLOOR: f64 = 1e-6;

/// Largest allowed gradient magnitude, as a fraction of the current alpha.
pub const ALPHA_CLIP_FRACTION: f64 = 0.01;

/// Temperature controller driving the mean policy entropy toward
/// `p_alpha * ln |A|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyControllerState {
    pub alpha: f64,
    pub p_alpha: f64,
    pub target_entropy: f64,
    pub lr_alpha: f64,
    /// Clipped gradient applied by the last update.
    pub last_grad: f64,
}

impl EntropyControllerState {
    pub fn new(alpha: f64, p_alpha: f64, n_actions: usize, lr_alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::config(format!("temperature must be positive, got {alpha}")));
        }
        if !(0.0..=1.0).contains(&p_alpha) {
            return Err(Error::config(format!("p_alpha must lie in [0, 1], got {p_alpha}")));
        }
        if n_actions == 0 {
            return Err(Error::config("the action set is empty"));
        }
        if !(lr_alpha > 0.0) {
            return Err(Error::config(format!("lr_alpha must be positive, got {lr_alpha}")));
        }
        Ok(Self {
            alpha,
            p_alpha,
            target_entropy: p_alpha * (n_actions as f64).ln(),
            lr_alpha,
            last_grad: 0.0,
        })
    }

    /// One controller step from a measured batch entropy; returns the new
    /// temperature.
    pub fn update(&mut self, measured_entropy: f64) -> f64 {
        let bound = ALPHA_CLIP_FRACTION * self.alpha;
        let grad = (measured_entropy - self.target_entropy).clamp(-bound, bound);
        self.last_grad = grad;
        self.alpha = (self.alpha - self.lr_alpha * grad).max(ALPHA_FLOOR);
        self.alpha
    }
}

/// Functional form of [`EntropyControllerState::update`].
pub fn temperature_update(measured_entropy: f64, state: &mut EntropyControllerState) -> f64 {
    state.update(measured_entropy)
}

/// Shannon entropy of an action distribution in nats.
pub fn action_entropy(probs: &[f64]) -> f64 {
    numeric::entropy(probs)
}
