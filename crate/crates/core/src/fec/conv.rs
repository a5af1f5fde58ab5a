//! Rate-1/2, K=7 feedforward convolutional code with generators 133/171
//! (octal), zero-tail terminated.

/// Constraint length.
pub const K: usize = 7;
/// Encoder memory (tail length).
pub const MEMORY: usize = K - 1;
pub const NUM_STATES: usize = 1 << MEMORY;
/// Generator polynomials; the MSB taps the current input bit.
pub const GENERATORS: [u32; 2] = [0o133, 0o171];

/// Output pair for input `bit` leaving `state` (the previous six inputs,
/// most recent in bit 5), and the next state.
#[inline]
pub fn step(state: usize, bit: u8) -> ([u8; 2], usize) {
    let reg = ((bit as u32) << MEMORY) | state as u32;
    let out = [
        ((reg & GENERATORS[0]).count_ones() & 1) as u8,
        ((reg & GENERATORS[1]).count_ones() & 1) as u8,
    ];
    (out, (reg >> 1) as usize)
}

/// Length of the mother codeword for `n` information bits.
pub fn coded_len(n: usize) -> usize {
    2 * (n + MEMORY)
}

/// Encodes `bits` and appends the six-bit zero tail. Output interleaves the
/// two generator outputs: `a0 b0 a1 b1 ...`.
pub fn conv_encode(bits: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(coded_len(bits.len()));
    let mut state = 0;
    for &b in bits.iter().chain(std::iter::repeat_n(&0u8, MEMORY)) {
        let (o, next) = step(state, b & 1);
        out.extend_from_slice(&o);
        state = next;
    }
    out
}
