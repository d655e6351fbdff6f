//! Central finite-difference verification of tape gradients.

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// max over entries of `|autodiff - fd| / max(1, |fd|)`
    pub max_rel_error: f64,
    pub entries: usize,
}

/// Compares autodiff gradients of the scalar built by `f` against central
/// differences with the given `step`.
///
/// `f` receives the parameters as tape variables (leaves on the autodiff
/// pass, constants on the probing passes) and must be deterministic.
pub fn finite_diff_check<F>(params: &[Tensor], step: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::contract("finite-difference step must be positive"));
    }
    let mut tape = Tape::new();
    let leaves: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let out = f(&mut tape, &leaves)?;
    ensure_finite(tape.value(out).item())?;
    let grads = tape.backward(out);

    let eval = |probe: &[Tensor]| -> Result<f64> {
        let mut t = Tape::new();
        let vars: Vec<Var> = probe.iter().map(|p| t.constant(p.clone())).collect();
        let out = f(&mut t, &vars)?;
        ensure_finite(t.value(out).item())
    };

    let mut probe: Vec<Tensor> = params.to_vec();
    let mut worst = 0.0f64;
    let mut entries = 0;
    for (pi, leaf) in leaves.iter().enumerate() {
        let auto = grads.get(*leaf);
        for j in 0..params[pi].len() {
            let orig = params[pi].data()[j];
            probe[pi].data_mut()[j] = orig + step;
            let up = eval(&probe)?;
            probe[pi].data_mut()[j] = orig - step;
            let down = eval(&probe)?;
            probe[pi].data_mut()[j] = orig;
            let fd = (up - down) / (2.0 * step);
            let err = (auto.data()[j] - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(err);
            entries += 1;
        }
    }
    Ok(GradCheck {
        max_rel_error: worst,
        entries,
    })
}

fn ensure_finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Numeric(format!("objective evaluated to {x}")))
    }
}
