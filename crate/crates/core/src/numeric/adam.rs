//! Adam with decoupled weight decay and global-norm gradient clipping.

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Global L2 norm cap applied to the whole gradient set; `None` disables it.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 5e-4,
            clip_norm: Some(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    /// Factor applied to the gradients (1 when no clipping occurred).
    pub clip_scale: f64,
}

impl AdamState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let first: Vec<Tensor> = params.into_iter().map(Tensor::zeros_like).collect();
        AdamState {
            second: first.clone(),
            first,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Global-norm clipping. Returns `(norm, scale)`; gradients are multiplied by
/// `scale`, which is `1` unless the norm exceeds `clip_norm`.
pub fn clip_global_norm(grads: &mut [Tensor], clip_norm: f64) -> (f64, f64) {
    let norm = grads.iter().map(Tensor::norm_sq).sum::<f64>().sqrt();
    let scale = if norm > clip_norm { clip_norm / norm } else { 1.0 };
    if scale != 1.0 {
        for g in grads.iter_mut() {
            for x in g.data_mut() {
                *x *= scale;
            }
        }
    }
    (norm, scale)
}

/// One optimizer step. On a non-finite gradient nothing is modified.
pub fn adam_step(
    params: &mut [&mut Tensor],
    mut grads: Vec<Tensor>,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<StepInfo> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::contract(format!(
            "adam: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(&grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.first[i].shape() {
            return Err(Error::contract(format!(
                "adam: shape mismatch at parameter {i}: {:?} vs {:?}",
                p.shape(),
                g.shape()
            )));
        }
    }
    if !(cfg.lr > 0.0) {
        return Err(Error::contract("adam: learning rate must be positive"));
    }
    if let Some(i) = grads.iter().position(|g| !g.all_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient for parameter {i}")));
    }

    let (grad_norm, clip_scale) = match cfg.clip_norm {
        Some(c) => clip_global_norm(&mut grads, c),
        None => (grads.iter().map(Tensor::norm_sq).sum::<f64>().sqrt(), 1.0),
    };

    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);
    let decay = 1.0 - cfg.lr * cfg.weight_decay;

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(&grads)
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        let pd = p.data_mut();
        for (((x, &gi), mi), vi) in pd
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = *mi / bias1;
            let v_hat = *vi / bias2;
            *x = *x * decay - cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(StepInfo {
        grad_norm,
        clip_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(wd: f64, clip: Option<f64>) -> AdamConfig {
        AdamConfig {
            weight_decay: wd,
            clip_norm: clip,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Tensor::vector(vec![0.5, -2.0, 3.0]);
        let before = p.clone();
        let mut st = AdamState::new([&p]);
        for _ in 0..5 {
            adam_step(&mut [&mut p], vec![Tensor::zeros(vec![3])], &mut st, &cfg(0.0, Some(1.0)))
                .unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 5);
    }

    #[test]
    fn clipping_scales_norm_ten_to_one() {
        let mut g = vec![Tensor::vector(vec![6.0, 0.0]), Tensor::vector(vec![8.0])];
        let (norm, scale) = clip_global_norm(&mut g, 1.0);
        assert!((norm - 10.0).abs() < 1e-12);
        assert!((scale - 0.1).abs() < 1e-15);
        assert!((g[0].data()[0] - 0.6).abs() < 1e-15);
        assert!((g[1].data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn clipping_below_threshold_is_identity() {
        let mut g = vec![Tensor::vector(vec![0.3, 0.4])];
        let (_, scale) = clip_global_norm(&mut g, 1.0);
        assert_eq!(scale, 1.0);
        assert_eq!(g[0].data(), &[0.3, 0.4]);
    }

    /// Minimizing (x - 3)^2 from x = 0 with the analytic gradient: the
    /// simulated trajectory must approach 3 monotonically.
    #[test]
    fn scalar_quadratic_moves_monotonically_toward_minimizer() {
        let mut x = Tensor::scalar(0.0);
        let mut st = AdamState::new([&x]);
        let c = AdamConfig {
            lr: 0.01,
            ..cfg(0.0, None)
        };
        let mut prev = (x.item() - 3.0).abs();
        for _ in 0..100 {
            let g = Tensor::scalar(2.0 * (x.item() - 3.0));
            adam_step(&mut [&mut x], vec![g], &mut st, &c).unwrap();
            let dist = (x.item() - 3.0).abs();
            assert!(dist < prev, "distance grew: {dist} >= {prev}");
            prev = dist;
        }
        // Adam steps are at most about lr each.
        assert!(x.item() > 0.5 && x.item() <= 1.0 + 1e-9, "x = {}", x.item());
    }

    #[test]
    fn nan_gradient_aborts_without_mutation() {
        let mut p = Tensor::vector(vec![1.0, 2.0]);
        let mut st = AdamState::new([&p]);
        let r = adam_step(
            &mut [&mut p],
            vec![Tensor::vector(vec![f64::NAN, 0.0])],
            &mut st,
            &cfg(0.0, Some(1.0)),
        );
        assert!(matches!(r, Err(Error::Numeric(_))));
        assert_eq!(p.data(), &[1.0, 2.0]);
        assert_eq!(st.step_count(), 0);
    }

    #[test]
    fn decoupled_decay_shrinks_with_zero_gradient() {
        let mut p = Tensor::scalar(2.0);
        let mut st = AdamState::new([&p]);
        let c = AdamConfig {
            lr: 0.1,
            ..cfg(0.5, None)
        };
        adam_step(&mut [&mut p], vec![Tensor::scalar(0.0)], &mut st, &c).unwrap();
        assert!((p.item() - 2.0 * (1.0 - 0.05)).abs() < 1e-15);
    }
}
