//! Reference network shipped with the crate, trained on the synthetic
//! training split with default [`TrainParams`](super::TrainParams).

use super::network::NetworkDef;

pub const FIXTURE_BYTES: &[u8] = include_bytes!("../../data/fixture.afpw");

pub fn network() -> NetworkDef<f32> {
    NetworkDef::from_bytes(FIXTURE_BYTES).expect("bundled fixture parses")
}
