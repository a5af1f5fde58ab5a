//! Puncturing of the rate-1/2 mother code to 2/3, 3/4 and 5/6.

use crate::modem::CodeRate;

/// Keep-mask applied cyclically to the interleaved mother codeword.
pub fn pattern(rate: CodeRate) -> &'static [bool] {
    const T: bool = true;
    const F: bool = false;
    match rate {
        CodeRate::R1_2 => &[T],
        CodeRate::R2_3 => &[T, T, T, F],
        CodeRate::R3_4 => &[T, T, F, T, T, F],
        CodeRate::R5_6 => &[T, T, F, T, F, T, F, T, T, F],
    }
}

/// Number of bits surviving puncturing of a `mother_len`-bit codeword.
pub fn punctured_len(mother_len: usize, rate: CodeRate) -> usize {
    let p = pattern(rate);
    let kept = p.iter().filter(|&&k| k).count();
    let full = mother_len / p.len();
    full * kept + p[..mother_len % p.len()].iter().filter(|&&k| k).count()
}

pub fn puncture<T: Copy>(coded: &[T], rate: CodeRate) -> Vec<T> {
    let p = pattern(rate);
    coded
        .iter()
        .zip(p.iter().cycle())
        .filter_map(|(&c, &keep)| keep.then_some(c))
        .collect()
}

/// Re-inserts zero LLRs (erasures) at punctured positions, producing a
/// vector of `mother_len` LLRs. Missing trailing LLRs are also erasures.
pub fn depuncture(llrs: &[f64], rate: CodeRate, mother_len: usize) -> Vec<f64> {
    let p = pattern(rate);
    let mut src = llrs.iter();
    (0..mother_len)
        .map(|i| {
            if p[i % p.len()] {
                src.next().copied().unwrap_or(0.0)
            } else {
                0.0
            }
        })
        .collect()
}
