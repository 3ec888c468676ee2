use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// RMSprop hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsPropParams {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmsPropParams {
    fn default() -> Self {
        RmsPropParams {
            learning_rate: 0.001,
            decay: 0.9,
            epsilon: 1e-8,
        }
    }
}

impl RmsPropParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("learning_rate", self.learning_rate)?;
        positive("rms_decay", self.decay)?;
        positive("rms_epsilon", self.epsilon)?;
        if self.decay >= 1.0 {
            return Err(Error::Config(format!(
                "rms_decay must be below 1, got {}",
                self.decay
            )));
        }
        Ok(())
    }
}

/// One RMSprop update:
///
/// ```text
/// ms <- decay * ms + (1 - decay) * g^2
/// w  <- w - lr * g / sqrt(ms + eps)
/// ```
pub fn rmsprop_step<F: Scalar>(
    weights: &mut Array2<F>,
    grad: &Array2<F>,
    mean_square: &mut Array2<F>,
    params: RmsPropParams,
) -> Result<()> {
    params.validate()?;
    if weights.dim() != grad.dim() || weights.dim() != mean_square.dim() {
        return Err(Error::Data(format!(
            "RMSprop shape mismatch: weights {:?}, gradient {:?}, state {:?}",
            weights.dim(),
            grad.dim(),
            mean_square.dim()
        )));
    }
    let lr = F::lit(params.learning_rate);
    let decay = F::lit(params.decay);
    let keep = F::one() - decay;
    let eps = F::lit(params.epsilon);
    Zip::from(weights)
        .and(mean_square)
        .and(grad)
        .for_each(|w, ms, &g| {
            *ms = decay * *ms + keep * g * g;
            *w = *w - lr * g / (*ms + eps).sqrt();
        });
    Ok(())
}

/// Optimizer holding the running mean of squared gradients for one matrix.
#[derive(Debug, Clone)]
pub struct RmsProp<F> {
    params: RmsPropParams,
    mean_square: Array2<F>,
}

impl<F: Scalar> RmsProp<F> {
    pub fn new(dim: (usize, usize), params: RmsPropParams) -> Result<Self> {
        params.validate()?;
        Ok(RmsProp {
            params,
            mean_square: Array2::zeros(dim),
        })
    }

    pub fn step(&mut self, weights: &mut Array2<F>, grad: &Array2<F>) -> Result<()> {
        rmsprop_step(weights, grad, &mut self.mean_square, self.params)
    }

    pub fn mean_square(&self) -> &Array2<F> {
        &self.mean_square
    }
}
