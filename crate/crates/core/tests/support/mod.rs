//! Brute-force sensitivity enumeration that shares no code with the
//! scorer: bit flips are decoded by hand and every flipped model is run
//! through a naive dense integer recurrence.

use esnq_core::data::EvalSet;
use esnq_core::quant::QuantizedModel;
use esnq_core::reservoir::Activation;

/// Two's-complement flip of bit `b` (1 = LSB) of a `q`-bit value.
pub fn hand_flip(w: i64, b: u32, q: u32) -> i64 {
    let modulus = 1i64 << q;
    let raw = w.rem_euclid(modulus) ^ (1 << (b - 1));
    if raw >= modulus / 2 {
        raw - modulus
    } else {
        raw
    }
}

fn round_away(x: f64) -> i64 {
    if x >= 0.0 {
        (x + 0.5).floor() as i64
    } else {
        -((-x + 0.5).floor() as i64)
    }
}

fn act_code(qm: &QuantizedModel, acc: i64) -> i64 {
    let half = 1i64 << (qm.q - 1);
    let x = acc as f64 / qm.acc_scale;
    let y = match qm.activation {
        Activation::Tanh => x.tanh(),
        Activation::HardTanh => x.clamp(-1.0, 1.0),
    };
    round_away(y * half as f64).clamp(-half, half - 1)
}

/// RMSE of the model with a dense `W_r` on the calibration window.
fn dense_rmse(qm: &QuantizedModel, w: &[Vec<i64>], set: &EvalSet) -> f64 {
    let EvalSet::Series(win) = set else { panic!("series calibration expected") };
    let n = qm.n;
    let half = (1i64 << (qm.q - 1)) as f64;
    let (in_lo, in_hi) = (-(1i64 << (qm.input_params.bits - 1)), (1i64 << (qm.input_params.bits - 1)) - 1);
    let mut s = vec![0i64; n];
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in 0..win.inputs.rows() {
        let u: Vec<i64> = win.inputs.row(t).iter().map(|&x| round_away(x * qm.input_params.scale).clamp(in_lo, in_hi)).collect();
        let mut next = vec![0i64; n];
        for i in 0..n {
            let mut acc = qm.bias[i];
            for (j, &uj) in u.iter().enumerate() {
                acc += qm.w_in[i * qm.d_in + j] * uj;
            }
            for j in 0..n {
                acc += w[i][j] * s[j];
            }
            next[i] = act_code(qm, acc);
        }
        s = next;
        if t >= win.skip {
            for o in 0..qm.d_out {
                let mut y = 0.0;
                for i in 0..n {
                    y += qm.w_out[(o, i)] * (s[i] as f64 / half);
                }
                let e = y - win.targets[(t, o)];
                sum += e * e;
                count += 1;
            }
        }
    }
    (sum / count as f64).sqrt()
}

pub fn brute_force_scores(qm: &QuantizedModel, set: &EvalSet) -> Vec<f64> {
    let mut dense = vec![vec![0i64; qm.n]; qm.n];
    for e in &qm.w_r {
        dense[e.row][e.col] = e.value;
    }
    let base = dense_rmse(qm, &dense, set);
    qm.w_r
        .iter()
        .map(|e| {
            let mut total = 0.0;
            for b in 1..=qm.q {
                let mut w = dense.clone();
                w[e.row][e.col] = hand_flip(e.value, b, qm.q);
                total += (base - dense_rmse(qm, &w, set)).abs();
            }
            total / qm.q as f64
        })
        .collect()
}
