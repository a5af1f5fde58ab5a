//! Soft-input Viterbi decoder for the zero-tail terminated K=7 code.

use super::conv::{step, MEMORY, NUM_STATES};

/// Decodes a depunctured mother codeword of LLRs (positive favours bit 0).
///
/// Maximises `sum_i (1 - 2 c_i) L_i` over all zero-tail codewords and
/// returns the information bits without the tail.
pub fn viterbi_decode(llrs: &[f64]) -> Vec<u8> {
    assert!(llrs.len() % 2 == 0, "mother codeword has even length");
    let steps = llrs.len() / 2;
    if steps <= MEMORY {
        return vec![];
    }

    // Expected outputs per (state, input) as +/-1 correlations.
    let mut table = [[[0.0f64; 2]; 2]; NUM_STATES];
    for (s, row) in table.iter_mut().enumerate() {
        for b in 0..2u8 {
            let (o, _) = step(s, b);
            row[b as usize] = [1.0 - 2.0 * o[0] as f64, 1.0 - 2.0 * o[1] as f64];
        }
    }

    const NEG: f64 = f64::NEG_INFINITY;
    let mut metric = [NEG; NUM_STATES];
    metric[0] = 0.0;
    let mut next = [NEG; NUM_STATES];
    // Bit s of decisions[t] says whether state s at t+1 came from the
    // predecessor with LSB 1.
    let mut decisions: Vec<u64> = Vec::with_capacity(steps);

    for t in 0..steps {
        let (l0, l1) = (llrs[2 * t], llrs[2 * t + 1]);
        let mut dec = 0u64;
        for ns in 0..NUM_STATES {
            let b = ns >> (MEMORY - 1);
            let base = (ns & ((NUM_STATES >> 1) - 1)) << 1;
            let p0 = base;
            let p1 = base | 1;
            let e0 = &table[p0][b];
            let e1 = &table[p1][b];
            let m0 = metric[p0] + e0[0] * l0 + e0[1] * l1;
            let m1 = metric[p1] + e1[0] * l0 + e1[1] * l1;
            if m1 > m0 {
                next[ns] = m1;
                dec |= 1 << ns;
            } else {
                next[ns] = m0;
            }
        }
        decisions.push(dec);
        std::mem::swap(&mut metric, &mut next);
    }

    // Trace back from the zero state.
    let mut bits = vec![0u8; steps];
    let mut s = 0usize;
    for t in (0..steps).rev() {
        bits[t] = (s >> (MEMORY - 1)) as u8;
        let lsb = (decisions[t] >> s) & 1;
        s = ((s & ((NUM_STATES >> 1) - 1)) << 1) | lsb as usize;
    }
    bits.truncate(steps - MEMORY);
    bits
}
