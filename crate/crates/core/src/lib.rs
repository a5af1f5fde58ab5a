//! Link-level multi-user MIMO simulation: linear and sphere-decoding
//! detection, convolutional coding, rate adaptation and a Monte-Carlo
//! harness.

pub mod channel;
pub mod detect;
pub mod fec;
pub mod linalg;
pub mod modem;
pub mod ra;
pub mod rng;
pub mod sim;
