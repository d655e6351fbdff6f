use std::sync::Arc;

use mtdea_core::numeric::{clip_global_norm, finite_diff_check, SparseRows, Tape, Tensor, Var};
use mtdea_core::rng::substream;
use mtdea_core::Result;
use proptest::prelude::*;
use rand::Rng;

const OPS: usize = 27;

/// Entries bounded away from zero, so kinks and poles stay out of reach of
/// the probing step.
fn away_from_zero(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let m = rng.gen_range(0.1..1.5);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::matrix(rows, cols, data)
}

/// `sum(y * w)` for a fixed random weight of `y`'s shape.
fn weighted(tape: &mut Tape, y: Var, seed: u64) -> Var {
    let shape = tape.shape(y).to_vec();
    let mut rng = substream(seed, "weights");
    let n: usize = shape.iter().product();
    let w = tape.constant(Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()));
    let p = tape.mul(y, w);
    tape.sum(p)
}

fn op_graph(op: usize, tape: &mut Tape, v: &[Var], seed: u64) -> Result<Var> {
    let (a, b) = (v[0], v[1]);
    let y = match op {
        0 => tape.add(a, b),
        1 => tape.sub(a, b),
        2 => tape.mul(a, b),
        3 => {
            let bt = tape.transpose(b);
            tape.matmul(a, bt)
        }
        4 => {
            let bias = tape.gather_rows(b, vec![2]);
            tape.linear(a, b, bias)
        }
        5 => {
            let row = tape.gather_rows(b, vec![1]);
            tape.add_row(a, row)
        }
        6 => {
            let col = tape.sum_rows(b);
            tape.mul_col(a, col)
        }
        7 => {
            let sq = tape.mul(b, b);
            let col = tape.sum_rows(sq);
            let col = tape.add_scalar(col, 0.5);
            tape.div_col(a, col)
        }
        8 => tape.scale(a, -1.7),
        9 => tape.add_scalar(a, 3.0),
        10 => {
            let r = tape.reshape(a, vec![tape_len(tape, a), 1]);
            tape.transpose(r)
        }
        11 => tape.concat(&[a, b], 0),
        12 => tape.concat(&[a, b], 1),
        13 => {
            let row = tape.gather_rows(a, vec![1]);
            tape.repeat_rows(row, 3)
        }
        14 => tape.gather_rows(a, vec![2, 0, 2, 1]),
        15 => {
            let op = Arc::new(SparseRows::from_rows(3, vec![vec![(0, 0.5), (2, 1.5)], vec![], vec![(1, -1.0)]]));
            tape.sparse_apply(&op, a)
        }
        16 => tape.relu(a),
        17 => tape.sigmoid(a),
        18 => {
            let s = tape.mul(a, a);
            let p = tape.add_scalar(s, 0.5);
            tape.ln(p)?
        }
        19 => tape.exp(a),
        20 => {
            let s = tape.mul(a, a);
            let p = tape.add_scalar(s, 0.7);
            tape.ln_gamma(p)?
        }
        21 => {
            let s = tape.mul(a, a);
            let p = tape.add_scalar(s, 0.1);
            tape.xlogx(p)
        }
        22 => tape.softmax_rows(a),
        23 => tape.mean(a),
        24 => tape.sum_cols(a),
        25 => tape.clamp(a, -0.6, 0.6),
        _ => tape.clamp_min(a, 0.3),
    };
    Ok(weighted(tape, y, seed))
}

fn tape_len(tape: &Tape, v: Var) -> usize {
    tape.value(v).len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn every_op_matches_finite_differences(op in 0..OPS, seed in any::<u64>()) {
        let mut rng = substream(seed, "ops");
        let params = [away_from_zero(&mut rng, 3, 3), away_from_zero(&mut rng, 3, 3)];
        let check = finite_diff_check(&params, 1e-6, |tape, v| op_graph(op, tape, v, seed)).unwrap();
        prop_assert!(check.max_rel_error <= 1e-5, "op {op}: {:e}", check.max_rel_error);
    }

    #[test]
    fn softmax_rows_are_distributions(
        rows in 1usize..6,
        cols in 1usize..6,
        seed in any::<u64>(),
        spread in 0.0f64..60.0,
    ) {
        let mut rng = substream(seed, "softmax");
        let x = Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-spread..=spread)).collect());
        let s = x.softmax_rows();
        for r in 0..rows {
            prop_assert!(s.row(r).iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((s.row(r).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn clipping_preserves_direction(
        seed in any::<u64>(),
        scale in 0.01f64..100.0,
        clip in 0.1f64..10.0,
    ) {
        let mut rng = substream(seed, "clip");
        let before: Vec<Tensor> = (0..3)
            .map(|i| Tensor::matrix(2, i + 1, (0..2 * (i + 1)).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let mut after = before.clone();
        let (norm, factor) = clip_global_norm(&mut after, clip);
        prop_assert!(factor > 0.0 && factor <= 1.0);
        let clipped: f64 = after.iter().map(Tensor::norm_sq).sum::<f64>().sqrt();
        prop_assert!(clipped <= clip.max(norm) * (1.0 + 1e-12));
        for (b, a) in before.iter().zip(&after) {
            for (x, y) in b.data().iter().zip(a.data()) {
                prop_assert!((y - factor * x).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }
}
