use super::TrainError;
use crate::autodiff::Tensor;
use crate::model::{ModelParams, PARAM_NAMES};

pub const ADADELTA_RHO: f64 = 0.95;
pub const ADADELTA_EPS: f64 = 1e-6;

/// Running averages of squared gradients and squared updates, one pair of
/// tensors per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdadeltaState {
    pub rho: f64,
    pub eps: f64,
    pub acc_grad: Vec<Tensor>,
    pub acc_update: Vec<Tensor>,
}

impl AdadeltaState {
    pub fn new(params: &ModelParams) -> Self {
        Self::for_shapes(params.tensors().into_iter().map(|t| t.shape().to_vec()))
    }

    pub fn for_shapes(shapes: impl IntoIterator<Item = Vec<usize>>) -> Self {
        let zeros: Vec<Tensor> = shapes.into_iter().map(|s| Tensor::zeros(&s)).collect();
        AdadeltaState {
            rho: ADADELTA_RHO,
            eps: ADADELTA_EPS,
            acc_update: zeros.clone(),
            acc_grad: zeros,
        }
    }

    /// One update of `params` from `grads`, both in the same order as the
    /// accumulators. Nothing changes when any gradient is non-finite.
    pub fn update(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[Tensor],
    ) -> Result<(), TrainError> {
        assert_eq!(params.len(), self.acc_grad.len(), "parameter count");
        assert_eq!(grads.len(), self.acc_grad.len(), "gradient count");
        for (k, g) in grads.iter().enumerate() {
            if !g.is_finite() {
                let name = PARAM_NAMES
                    .get(k)
                    .map_or_else(|| format!("#{k}"), |n| n.to_string());
                return Err(TrainError::NonFiniteGradient(name));
            }
        }
        let (rho, eps) = (self.rho, self.eps);
        for (((p, g), ag), au) in params
            .iter_mut()
            .zip(grads)
            .zip(self.acc_grad.iter_mut())
            .zip(self.acc_update.iter_mut())
        {
            let p = p.data_mut();
            let (ag, au) = (ag.data_mut(), au.data_mut());
            for (i, &gi) in g.data().iter().enumerate() {
                ag[i] = rho * ag[i] + (1.0 - rho) * gi * gi;
                let delta = -((au[i] + eps).sqrt() / (ag[i] + eps).sqrt()) * gi;
                au[i] = rho * au[i] + (1.0 - rho) * delta * delta;
                p[i] += delta;
            }
        }
        Ok(())
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &[Tensor]) -> Result<(), TrainError> {
        self.update(&mut params.tensors_mut(), grads)
    }
}
