//! CRC-16-CCITT (poly 0x1021, init 0xFFFF, no reflection, no final XOR)
//! over bit sequences, MSB first.

pub const CRC_BITS: usize = 16;
pub const POLY: u16 = 0x1021;
pub const INIT: u16 = 0xFFFF;

pub fn crc16(bits: &[u8]) -> u16 {
    bits.iter().fold(INIT, |crc, &b| {
        let top = ((crc >> 15) as u8 ^ (b & 1)) & 1;
        let shifted = crc << 1;
        if top == 1 {
            shifted ^ POLY
        } else {
            shifted
        }
    })
}

/// Appends the 16 CRC bits, MSB first.
pub fn crc16_attach(bits: &[u8]) -> Vec<u8> {
    let crc = crc16(bits);
    let mut out = Vec::with_capacity(bits.len() + CRC_BITS);
    out.extend_from_slice(bits);
    out.extend((0..CRC_BITS).rev().map(|i| ((crc >> i) & 1) as u8));
    out
}

/// Checks a payload with its trailing 16 CRC bits.
pub fn crc16_check(bits: &[u8]) -> bool {
    if bits.len() < CRC_BITS {
        return false;
    }
    let (payload, tail) = bits.split_at(bits.len() - CRC_BITS);
    let got = tail.iter().fold(0u16, |acc, &b| (acc << 1) | (b & 1) as u16);
    crc16(payload) == got
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
        bytes.iter().flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1)).collect()
    }

    #[test]
    fn standard_check_value() {
        assert_eq!(crc16(&bytes_to_bits(b"123456789")), 0x29B1);
    }

    #[test]
    fn empty_payload_is_init() {
        assert_eq!(crc16(&[]), 0xFFFF);
        assert!(crc16_check(&crc16_attach(&[])));
    }

    #[test]
    fn roundtrip_random_payloads() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let n = rng.random_range(0..600);
            let p: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            assert!(crc16_check(&crc16_attach(&p)));
        }
    }

    #[test]
    fn every_single_bit_flip_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p: Vec<u8> = (0..64).map(|_| rng.random_range(0..2)).collect();
        let framed = crc16_attach(&p);
        for i in 0..framed.len() {
            let mut f = framed.clone();
            f[i] ^= 1;
            assert!(!crc16_check(&f), "flip at {i} undetected");
        }
    }

    #[test]
    fn bursts_up_to_16_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5000 {
            let p: Vec<u8> = (0..128).map(|_| rng.random_range(0..2)).collect();
            let mut f = crc16_attach(&p);
            let len = rng.random_range(1..=16);
            let start = rng.random_range(0..=f.len() - len);
            // a burst has both end bits flipped; interior bits arbitrary
            f[start] ^= 1;
            if len > 1 {
                f[start + len - 1] ^= 1;
                for i in start + 1..start + len - 1 {
                    f[i] ^= rng.random_range(0..2);
                }
            }
            assert!(!crc16_check(&f));
        }
    }
}
