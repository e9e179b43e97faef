//! SGD with momentum and L2 weight decay under a poly schedule.

use std::collections::BTreeMap;

use super::config::OptimConfig;
use super::params::Params;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `base * (1 - iter / max_iter)^power`.
pub fn poly_lr(iter: usize, max_iter: usize, base: f64, power: f64) -> Result<f64> {
    if max_iter == 0 {
        return Err(Error::invalid("poly_lr", "max_iter must be positive"));
    }
    if iter > max_iter {
        return Err(Error::invalid(
            "poly_lr",
            format!("iteration {iter} beyond max_iter {max_iter}"),
        ));
    }
    Ok(base * (1.0 - iter as f64 / max_iter as f64).powf(power))
}

/// Parameters that are not decayed: batch-norm scale/shift and the
/// denoising penalties.
pub fn excluded_from_decay(name: &str) -> bool {
    name.ends_with(".gamma") || name.ends_with(".beta") || name.starts_with("ld.")
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub config: OptimConfig,
    pub iteration: usize,
    velocity: BTreeMap<String, Tensor>,
}

impl OptimizerState {
    pub fn new(config: OptimConfig) -> Self {
        OptimizerState {
            config,
            iteration: 0,
            velocity: BTreeMap::new(),
        }
    }

    pub fn velocity(&self, name: &str) -> Option<&Tensor> {
        self.velocity.get(name)
    }

    pub fn current_lr(&self) -> Result<f64> {
        let c = &self.config;
        poly_lr(self.iteration.min(c.max_iter), c.max_iter, c.base_lr, c.power)
    }
}

/// `v <- momentum * v + grad + wd * param; param <- param - lr * v`, with
/// `lr` from the schedule at the current iteration. Every gradient is
/// checked before any parameter changes. Returns the learning rate used.
pub fn sgd_step(params: &mut Params, grads: &Params, state: &mut OptimizerState) -> Result<f64> {
    for (name, param) in params.named() {
        let g = grads
            .get(&name)
            .ok_or_else(|| Error::invalid("sgd_step", format!("no gradient for `{name}`")))?;
        param.expect_same_shape("sgd_step", g)?;
        if !g.is_finite() {
            return Err(Error::NonFinite {
                what: format!("gradient of `{name}`"),
                iteration: state.iteration,
            });
        }
    }
    let lr = state.current_lr()?;
    let (mu, wd) = (state.config.momentum, state.config.weight_decay);
    for (name, param) in params.iter_mut() {
        let g = grads.get(name).expect("checked above");
        let decay = if excluded_from_decay(name) { 0.0 } else { wd };
        let v = state
            .velocity
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(param.shape()));
        for ((vv, pv), gv) in v.data_mut().iter_mut().zip(param.data_mut()).zip(g.data()) {
            *vv = mu * *vv + gv + decay * *pv;
            *pv -= lr * *vv;
        }
    }
    state.iteration += 1;
    Ok(lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_endpoints() {
        assert_eq!(poly_lr(0, 100, 5e-3, 0.9).unwrap(), 5e-3);
        assert_eq!(poly_lr(100, 100, 5e-3, 0.9).unwrap(), 0.0);
        assert!(poly_lr(0, 0, 1.0, 0.9).is_err());
        assert!(poly_lr(101, 100, 1.0, 0.9).is_err());
    }

    #[test]
    fn decay_exclusions() {
        assert!(excluded_from_decay("stage1.gamma"));
        assert!(excluded_from_decay("context.beta"));
        assert!(excluded_from_decay("ld.level3.delta"));
        assert!(!excluded_from_decay("stage1.weight"));
        assert!(!excluded_from_decay("paired.offset"));
    }
}
