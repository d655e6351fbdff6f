//! Dual-sampling link loss and the two attention regularizers.
//!
//! The link loss is binary cross-entropy over each positive and its
//! negatives, with the negative terms averaged per positive:
//!
//! `L = -sum_pos [ ln s_pos + (1/n) sum_i ln(1 - s_tail_i) + (1/m) sum_j ln(1 - s_rel_j) ]`

use crate::error::{Error, Result};
use crate::numeric::{Tape, Tensor, Var};

/// Scores are clamped to `[SCORE_CLAMP, 1 - SCORE_CLAMP]` before logs.
pub const SCORE_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    /// Tail-corrupted negatives per positive.
    pub n_tail: usize,
    /// Relation-corrupted negatives per positive.
    pub n_rel: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Per-epoch multiplicative growth of both lambdas.
    pub anneal: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            n_tail: 2,
            n_rel: 2,
            lambda1: 0.1,
            lambda2: 0.1,
            anneal: 1.1,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::Config("lambdas must be non-negative".into()));
        }
        if !(self.anneal >= 1.0) {
            return Err(Error::Config("anneal factor must be at least 1".into()));
        }
        Ok(())
    }

    /// `(lambda1, lambda2)` in force during `epoch` (0-based).
    pub fn lambdas(&self, epoch: usize) -> (f64, f64) {
        let f = self.anneal.powi(epoch as i32);
        (self.lambda1 * f, self.lambda2 * f)
    }
}

fn sum_ln(tape: &mut Tape, s: Var, complement: bool) -> Result<Var> {
    let c = tape.clamp(s, SCORE_CLAMP, 1.0 - SCORE_CLAMP);
    let arg = if complement {
        let neg = tape.scale(c, -1.0);
        tape.add_scalar(neg, 1.0)
    } else {
        c
    };
    let l = tape.ln(arg)?;
    Ok(tape.sum(l))
}

/// Dual-sampling loss over score columns. `tail` holds `n` entries per
/// positive and `rel` holds `m`; either family may be absent (`n` or `m` 0).
pub fn dual_loss(
    tape: &mut Tape,
    pos: Var,
    tail: Option<Var>,
    rel: Option<Var>,
    n: usize,
    m: usize,
) -> Result<Var> {
    let b = tape.value(pos).len();
    if b == 0 {
        return Err(Error::contract("dual loss needs at least one positive"));
    }
    let mut total = sum_ln(tape, pos, false)?;
    for (scores, k) in [(tail, n), (rel, m)] {
        match (scores, k) {
            (None, 0) => {}
            (Some(s), k) if k > 0 && tape.value(s).len() == b * k => {
                let t = sum_ln(tape, s, true)?;
                let t = tape.scale(t, 1.0 / k as f64);
                total = tape.add(total, t);
            }
            _ => return Err(Error::contract("negative scores do not match the per-positive count")),
        }
    }
    Ok(tape.scale(total, -1.0))
}

/// Plain-value convenience wrapper around [`dual_loss`].
pub fn dual_loss_value(pos: &[f64], tail: &[f64], rel: &[f64], n: usize, m: usize) -> Result<f64> {
    let mut tape = Tape::new();
    let mut col = |v: &[f64]| (!v.is_empty()).then(|| tape.constant(Tensor::matrix(v.len(), 1, v.to_vec())));
    let (p, t, r) = (col(pos), col(tail), col(rel));
    let p = p.ok_or_else(|| Error::contract("dual loss needs at least one positive"))?;
    let out = dual_loss(&mut tape, p, t, r, n, m)?;
    Ok(tape.value(out).item())
}

/// `sum_r H(alpha_r) = -sum_{r,j} alpha_rj ln alpha_rj`, with `0 ln 0 = 0`.
pub fn one_hot_entropy(tape: &mut Tape, alpha: Var) -> Var {
    let x = tape.xlogx(alpha);
    let s = tape.sum(x);
    tape.scale(s, -1.0)
}

/// `-sum_j ln Gamma(1 + sum_r alpha_rj)`: lower when mass sits in few columns.
pub fn concentration_lgamma(tape: &mut Tape, alpha: Var) -> Result<Var> {
    let cols = tape.sum_cols(alpha);
    let shifted = tape.add_scalar(cols, 1.0);
    let lg = tape.ln_gamma(shifted)?;
    let s = tape.sum(lg);
    Ok(tape.scale(s, -1.0))
}

/// `dual + lambda1 * L_1hot(alpha) + lambda2 * L_conc(alpha)`.
pub fn total_loss(tape: &mut Tape, dual: Var, alpha: Var, lambda1: f64, lambda2: f64) -> Result<Var> {
    let h = one_hot_entropy(tape, alpha);
    let c = concentration_lgamma(tape, alpha)?;
    let h = tape.scale(h, lambda1);
    let c = tape.scale(c, lambda2);
    let reg = tape.add(h, c);
    Ok(tape.add(dual, reg))
}

pub fn one_hot_entropy_value(alpha: &Tensor) -> f64 {
    let mut tape = Tape::new();
    let a = tape.constant(alpha.clone());
    let out = one_hot_entropy(&mut tape, a);
    tape.value(out).item()
}

pub fn concentration_lgamma_value(alpha: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let a = tape.constant(alpha.clone());
    let out = concentration_lgamma(&mut tape, a)?;
    Ok(tape.value(out).item())
}
