//! Shared inputs for the benchmarks.

use spelaeo_core::synth::{self, Bundle, CorridorSpec};

/// Corridor bundle with a swim of `duration_s` seconds and mild noise.
pub fn bundle(duration_s: f64) -> Bundle {
    let spec = CorridorSpec {
        seed: 7,
        duration_s,
        time_shift_s: 250.0,
        depth_offset_m: 12.0,
        depth_noise_m: 0.05,
        position_noise_m: 0.01,
        ..CorridorSpec::default()
    };
    synth::generate(&spec).expect("default spec is valid")
}
