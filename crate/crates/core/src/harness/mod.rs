//! Offline pipeline: labeled sample generation by timing both solvers on
//! every mode, train/test splitting, model evaluation, and strategy
//! comparison sweeps.

mod bench;
mod eval;
mod gen;
mod samples;

pub use bench::{
    bench_compare, BenchCase, BenchCaseSpec, BenchConfig, BenchReport, BenchRow, BenchSpec,
    StrategySummary,
};
pub use eval::{evaluate_model, evaluate_predictions, split_samples, EvalReport};
pub use gen::{generate_samples, rank_bounds, GenConfig, GenOutput};
pub use samples::{
    read_samples_csv, read_samples_from, write_samples_csv, write_samples_to, SAMPLES_HEADER,
};

use std::time::Instant;

/// Median of a nonempty slice; mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs `f` and returns its output with the elapsed wall time in seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}
