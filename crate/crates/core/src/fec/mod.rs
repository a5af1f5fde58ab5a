//! Coded-frame layer: CRC-16, K=7 convolutional code, puncturing and a
//! soft-input Viterbi decoder.

pub mod conv;
pub mod crc;
pub mod puncture;
pub mod viterbi;

use thiserror::Error;

pub use conv::conv_encode;
pub use crc::{crc16_attach, crc16_check, CRC_BITS};
pub use puncture::{depuncture, puncture, punctured_len};
pub use viterbi::viterbi_decode;

use crate::modem::CodeRate;

/// Payload bits per user per frame.
pub const PAYLOAD_BITS: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FecError {
    #[error("unsupported code rate {0}")]
    UnsupportedRate(String),
}

/// Parses a rate written as `"n/d"`.
pub fn parse_rate(s: &str) -> Result<CodeRate, FecError> {
    CodeRate::ALL
        .into_iter()
        .find(|r| r.to_string() == s.trim())
        .ok_or_else(|| FecError::UnsupportedRate(s.to_string()))
}

/// Mother codeword length for a payload of `payload_len` bits.
pub fn mother_len(payload_len: usize) -> usize {
    conv::coded_len(payload_len + CRC_BITS)
}

/// Number of transmitted coded bits for a payload at `rate`.
pub fn frame_coded_len(payload_len: usize, rate: CodeRate) -> usize {
    punctured_len(mother_len(payload_len), rate)
}

/// CRC attach, encode and puncture.
pub fn encode_frame(payload: &[u8], rate: CodeRate) -> Vec<u8> {
    puncture(&conv_encode(&crc16_attach(payload)), rate)
}

/// Depuncture, Viterbi and CRC check. Returns the decoded payload and
/// whether its CRC passed.
pub fn decode_frame(llrs: &[f64], rate: CodeRate, payload_len: usize) -> (Vec<u8>, bool) {
    let full = depuncture(llrs, rate, mother_len(payload_len));
    let mut bits = viterbi_decode(&full);
    let ok = crc16_check(&bits);
    bits.truncate(payload_len);
    (bits, ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn frame_roundtrip_all_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for rate in CodeRate::ALL {
            let payload: Vec<u8> = (0..PAYLOAD_BITS).map(|_| rng.random_range(0..2)).collect();
            let coded = encode_frame(&payload, rate);
            assert_eq!(coded.len(), frame_coded_len(PAYLOAD_BITS, rate));
            let llrs: Vec<f64> = coded.iter().map(|&b| if b == 0 { 5.0 } else { -5.0 }).collect();
            let (dec, ok) = decode_frame(&llrs, rate, PAYLOAD_BITS);
            assert!(ok);
            assert_eq!(dec, payload);
        }
    }

    #[test]
    fn frame_lengths() {
        assert_eq!(mother_len(PAYLOAD_BITS), 1068);
        assert_eq!(frame_coded_len(PAYLOAD_BITS, CodeRate::R1_2), 1068);
        assert_eq!(frame_coded_len(PAYLOAD_BITS, CodeRate::R2_3), 801);
        assert_eq!(frame_coded_len(PAYLOAD_BITS, CodeRate::R3_4), 712);
    }

    #[test]
    fn rate_parsing() {
        assert_eq!(parse_rate("3/4"), Ok(CodeRate::R3_4));
        assert_eq!(parse_rate("7/8"), Err(FecError::UnsupportedRate("7/8".into())));
    }

    #[test]
    fn garbage_fails_crc() {
        let llrs = vec![0.0; frame_coded_len(PAYLOAD_BITS, CodeRate::R1_2)];
        let (_, ok) = decode_frame(&llrs, CodeRate::R1_2, PAYLOAD_BITS);
        // all-erasure decodes to the all-zero word, whose CRC (init 0xFFFF) is nonzero
        assert!(!ok);
    }
}
