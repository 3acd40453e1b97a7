//! Shared fixtures for the benchmarks under `benches/`.

use carleson_core::harness::{FSpec, NSpec};
use carleson_core::{CarlesonModel, GridFunction, KernelConfig};

/// Default model and a random step function at resolution `K`.
pub fn fixture(resolution: u32, seed: u64) -> (CarlesonModel, GridFunction) {
    let n = NSpec::RandomPiecewise(16).generate(resolution, seed).expect("N");
    let f = FSpec::RandomStep { cells: 32, max_level: 6 }.generate(resolution, seed).expect("f");
    let model = CarlesonModel::new(KernelConfig::default_for(resolution), n).expect("model");
    (model, f)
}
