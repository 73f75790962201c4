use alloc::vec::Vec;

/// One nonzero canonical-signed-digit: `sign · 2^shift`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Digit {
    pub shift: u32,
    pub negative: bool,
}

/// Canonical signed-digit form of `v`, least significant digit first.
///
/// No two adjacent digits are nonzero, which gives the minimum number of
/// nonzero digits of any signed-binary representation.
pub fn csd(v: i64) -> Vec<Digit> {
    let mut digits = Vec::new();
    let mut x = v as i128;
    let mut shift = 0;
    while x != 0 {
        if x & 1 == 1 {
            // x ≡ 1 (mod 4) → +1, x ≡ 3 (mod 4) → −1
            let negative = x.rem_euclid(4) == 3;
            x += if negative { 1 } else { -1 };
            digits.push(Digit { shift, negative });
        }
        x >>= 1;
        shift += 1;
    }
    digits
}

pub fn csd_value(digits: &[Digit]) -> i64 {
    digits.iter().map(|d| if d.negative { -(1i64 << d.shift) } else { 1i64 << d.shift }).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_is_eight_minus_two() {
        assert_eq!(
            csd(6),
            [Digit { shift: 1, negative: true }, Digit { shift: 3, negative: false }]
        );
    }

    #[test]
    fn zero_has_no_digits() {
        assert!(csd(0).is_empty());
    }

    #[test]
    fn round_trip_and_non_adjacency() {
        for v in -300..=300 {
            let d = csd(v);
            assert_eq!(csd_value(&d), v);
            for w in d.windows(2) {
                assert!(w[1].shift >= w[0].shift + 2);
            }
        }
    }

    #[test]
    fn digit_bound_for_q_bit_codes() {
        for q in 1..=8u32 {
            let half = 1i64 << (q - 1);
            for v in -half..half {
                assert!(csd(v).len() as u32 <= q.div_ceil(2) + 1, "v={v} q={q}");
            }
        }
    }
}
