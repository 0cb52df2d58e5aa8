//! Benchmark fixtures shared by the criterion targets.

use nvdnp_core::{FieldConfig, RateModel, SystemParams};

/// The three measurement fields.
pub const FIELDS: [(f64, f64); 3] = [(252.0, 1.7), (348.0, 1.5), (411.0, 0.8)];

pub fn defaults() -> (SystemParams, RateModel) {
    (SystemParams::default(), RateModel::default())
}

pub fn field(k: usize) -> FieldConfig {
    let (b, t) = FIELDS[k % FIELDS.len()];
    FieldConfig::new(b, t)
}

/// Uniform pump-time grid on `[0, t_max]` µs.
pub fn time_grid(n: usize, t_max: f64) -> Vec<f64> {
    (0..n).map(|k| t_max * k as f64 / (n - 1).max(1) as f64).collect()
}
