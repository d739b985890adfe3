//! The timing protocol with a deterministic clock.
//!
//! Every clock reading costs one tick on ranks 0..2 and three ticks on rank
//! 3, so the reported time is three times the tick count per run.

use std::sync::atomic::{AtomicU64, Ordering};

use subarray_fft::bench::{run_bench_with_clock, write_csv, BenchConfig, Clock};

struct Ticks(Vec<AtomicU64>);

impl Clock for Ticks {
    fn now(&self, rank: usize) -> f64 {
        let step = if rank == 3 { 3 } else { 1 };
        (self.0[rank].fetch_add(step, Ordering::Relaxed) + step) as f64
    }
}

fn main() -> subarray_fft::Result<()> {
    let cfg = BenchConfig {
        shape: vec![16, 16, 16],
        ranks: 4,
        repeats: 3,
        inner: 2,
        ..BenchConfig::default()
    };
    let clock = Ticks((0..4).map(|_| AtomicU64::new(0)).collect());
    let record = run_bench_with_clock(&cfg, &clock)?;
    write_csv(std::io::stdout().lock(), &[record])
}
