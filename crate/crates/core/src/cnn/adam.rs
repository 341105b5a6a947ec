use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Roll each training pair by a random offset every time it is drawn.
    pub shift_augment: bool,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 50,
            batch_size: 50,
            seed: 0,
            shift_augment: false,
        }
    }
}

impl TrainHyper {
    /// Small-scale preset: 50 epochs of batch 50 at ten times the default
    /// learning rate, with shift augmentation. Without the shifts the
    /// fully-connected layer memorizes the 500 training spectra.
    pub fn desk() -> Self {
        TrainHyper {
            learning_rate: 1e-3,
            shift_augment: true,
            ..TrainHyper::default()
        }
    }

    pub fn paper() -> Self {
        TrainHyper {
            epochs: 600,
            ..TrainHyper::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.epsilon > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.epochs > 0
            && self.batch_size > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "bad training hyperparameters {self:?}"
            )))
        }
    }
}

/// First and second moment estimates plus the number of steps taken.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    weights: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    hyper: &TrainHyper,
) -> Result<()> {
    let n = weights.len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::CountMismatch {
            expected: n,
            found: grads.len(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let lr = hyper.learning_rate;
    let eps = hyper.epsilon;
    for (((w, &g), m), v) in weights
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *w -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
