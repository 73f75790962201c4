//! Threshold tables against the float composition on every accumulator
//! value a datapath can produce.

use esnq_core::quant::{build_thresholds, compute_quant_params, dequantize, quantize, QuantParams};
use esnq_core::reservoir::Activation;
use proptest::prelude::*;

/// `quantize(f(acc / scale))` on the `2^(q−1)` state grid, written out.
fn reference(act: Activation, q: u32, acc_scale: f64, acc: i64) -> i64 {
    let half = 1i64 << (q - 1);
    let x = acc as f64 / acc_scale;
    let y = match act {
        Activation::HardTanh => x.clamp(-1.0, 1.0),
        Activation::Tanh => x.tanh(),
    };
    ((y * half as f64).round() as i64).clamp(-half, half - 1)
}

/// Accumulator range of an `N = 50` reservoir: `2q + ⌈log₂ 50⌉ + 1` bits.
fn acc_range(q: u32) -> (i64, i64) {
    let bits = 2 * q + 6 + 1;
    (-(1i64 << (bits - 1)), (1i64 << (bits - 1)) - 1)
}

fn exhaustive(act: Activation) {
    for q in 1..=8u32 {
        // weight scales (2^(q−1)−1)/max|w| for a spread of max|w|
        for max_w in [0.05, 0.37, 0.9, 1.0, 2.5] {
            let w_scale = compute_quant_params(&[max_w, -0.01], q).unwrap().scale;
            let acc_scale = w_scale * (1u64 << (q - 1)) as f64;
            let table = build_thresholds(act, q, acc_scale).unwrap();
            assert_eq!(table.thresholds.len(), (1 << q) - 1);
            let (lo, hi) = acc_range(q);
            for acc in lo..=hi {
                assert_eq!(table.apply(acc), reference(act, q, acc_scale, acc), "q={q} max_w={max_w} acc={acc}");
            }
        }
    }
}

#[test]
fn hardtanh_tables_are_exact_for_every_accumulator_value() {
    exhaustive(Activation::HardTanh);
}

#[test]
fn tanh_tables_are_exact_for_every_accumulator_value() {
    exhaustive(Activation::Tanh);
}

#[test]
fn one_bit_table_is_a_sign_function() {
    let t = build_thresholds(Activation::HardTanh, 1, 1.0).unwrap();
    assert_eq!(t.thresholds.len(), 1);
    assert_eq!(t.codes, vec![-1, 0]);
    assert_eq!(t.apply(-1_000_000), -1);
    assert_eq!(t.apply(1_000_000), 0);
}

#[test]
fn four_bit_table_has_fifteen_thresholds_and_saturates() {
    let t = build_thresholds(Activation::HardTanh, 4, 56.0).unwrap();
    assert_eq!(t.thresholds.len(), 15);
    assert_eq!(t.apply(i64::MIN / 2), -8);
    assert_eq!(t.apply(i64::MAX / 2), 7);
}

#[test]
fn quantizer_examples() {
    let p = compute_quant_params(&[1.0, -0.25], 4).unwrap();
    assert_eq!((p.scale, p.bias), (7.0, 0.0));
    assert_eq!(compute_quant_params(&[-2.0, 0.5], 8).unwrap().scale, 63.5);
    assert_eq!(quantize(-1.0, &p), -7);
    assert_eq!(quantize(0.5, &p), 4);
    assert_eq!(quantize(-0.5, &p), -4);
    assert_eq!(dequantize(-8, &p), -8.0 / 7.0);
    let unit = QuantParams { scale: 1.0, bias: 0.0, bits: 8, zero_tensor: false };
    for x in -128..128 {
        assert_eq!(quantize(x as f64, &unit), x);
    }
    let zeros = compute_quant_params(&[0.0; 4], 6).unwrap();
    assert!(zeros.zero_tensor);
    assert_eq!(zeros.scale, 1.0);
}

proptest! {
    #[test]
    fn round_trip_error_is_half_a_step(xs in prop::collection::vec(-3.0f64..3.0, 1..64), q in 2u32..=8) {
        let p = compute_quant_params(&xs, q).unwrap();
        for &x in &xs {
            let back = dequantize(quantize(x, &p), &p);
            prop_assert!((back - x).abs() <= 0.5 / p.scale * (1.0 + 1e-12));
        }
    }

    #[test]
    fn quantize_is_monotone(a in -5.0f64..5.0, b in -5.0f64..5.0, q in 1u32..=8) {
        let p = compute_quant_params(&[a, b, 1.0], q).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantize(lo, &p) <= quantize(hi, &p));
    }

    #[test]
    fn tables_are_monotone_step_functions(q in 1u32..=8, scale in 0.5f64..5000.0, acc in -100_000i64..100_000) {
        let t = build_thresholds(Activation::Tanh, q, scale).unwrap();
        prop_assert!(t.thresholds.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(t.apply(acc) <= t.apply(acc + 1));
        prop_assert_eq!(t.apply(acc), reference(Activation::Tanh, q, scale, acc));
    }
}
