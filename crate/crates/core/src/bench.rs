//! Timing harness for parallel transforms on the simulated transport.
//!
//! Each outer repeat starts with a barrier and then runs `inner` consecutive
//! forward/backward transform pairs. A repeat's time is the maximum over
//! ranks; the reported figure is the minimum over repeats divided by
//! `inner`. Time spent in redistributions and in partial transforms is
//! accumulated separately and reduced the same way.
//!
//! Timings measure this crate's own copy and codec costs on threads in one
//! process. They say nothing about network behavior.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomp::{dims_create, ProcessGrid};
use crate::dense::{element_count, DenseArray};
use crate::error::{Error, Result};
use crate::fft::{dftn_oracle, relative_error, Direction};
use crate::plan::{gather, scatter, transform_global, BufferScheme, LocalPlan, Plan};
use crate::redistribute::{DistributedArray, GridComm, Method};
use crate::transport::run_simulated;

/// CSV header written by [`write_csv`].
pub const CSV_HEADER: [&str; 10] = [
    "method",
    "shape",
    "grid",
    "ranks",
    "repeats",
    "inner",
    "t_total_min",
    "t_redist_min",
    "t_fft_min",
    "check",
];

/// Largest global element count `verify` accepts.
pub const VERIFY_LIMIT: usize = 1 << 20;

/// Forward transform accuracy against the oracle, relative.
pub const FORWARD_TOLERANCE: f64 = 1e-10;
/// Backward-of-forward identity, relative.
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-12;

/// Source of timestamps, in seconds, as seen by one rank.
pub trait Clock: Sync {
    fn now(&self, rank: usize) -> f64;

    /// Called by every rank before the barrier that opens outer repeat `repeat`.
    fn start_repeat(&self, _rank: usize, _repeat: usize) {}
}

/// Wall-clock time since construction.
#[derive(Debug, Clone, Copy)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self, _rank: usize) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

/// Seconds spent in each kind of plan step.
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct StepTimes {
    pub redistribute: f64,
    pub transform: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GridSpec {
    Auto,
    Explicit(Vec<usize>),
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(GridSpec::Auto);
        }
        s.split('x')
            .map(|part| {
                part.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| Error::InvalidArgument(format!("bad grid {s:?}, expected e.g. 2x4 or auto")))
            })
            .collect::<Result<Vec<_>>>()
            .map(GridSpec::Explicit)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Auto => f.write_str("auto"),
            GridSpec::Explicit(dims) => f.write_str(&join(dims, "x")),
        }
    }
}

fn join(values: &[usize], sep: &str) -> String {
    values.iter().map(usize::to_string).collect::<Vec<_>>().join(sep)
}

/// Parses a comma-separated list of extents such as `64,64,64`.
pub fn parse_shape(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("bad shape {s:?}, expected e.g. 64,64,64")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub shape: Vec<usize>,
    pub ranks: usize,
    pub grid: GridSpec,
    pub method: Method,
    pub repeats: usize,
    pub inner: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            shape: vec![64, 64, 64],
            ranks: 8,
            grid: GridSpec::Auto,
            method: Method::Subarray,
            repeats: 50,
            inner: 3,
            seed: 1,
            out: None,
        }
    }
}

impl BenchConfig {
    /// Checks the configuration and resolves the process grid.
    ///
    /// `auto` picks a balanced grid of `min(2, d - 1)` dimensions.
    pub fn resolve_grid(&self) -> Result<Vec<usize>> {
        let d = self.shape.len();
        if d < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 axes, got shape {:?}", self.shape)));
        }
        if self.ranks == 0 || self.repeats == 0 || self.inner == 0 {
            return Err(Error::InvalidArgument("ranks, repeats and inner must all be at least 1".into()));
        }
        let dims = match &self.grid {
            GridSpec::Auto => dims_create(self.ranks, 2.min(d - 1))?,
            GridSpec::Explicit(dims) => dims.clone(),
        };
        let product: usize = dims.iter().product();
        if product != self.ranks {
            return Err(Error::GridMismatch {
                dims,
                nprocs: self.ranks,
            });
        }
        if dims.len() > d - 1 {
            return Err(Error::InvalidArgument(format!(
                "grid {} has more than {} dimensions",
                join(&dims, "x"),
                d - 1
            )));
        }
        Ok(dims)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timings {
    pub total: f64,
    pub redistribute: f64,
    pub transform: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub method: Method,
    pub shape: Vec<usize>,
    pub dims: Vec<usize>,
    pub ranks: usize,
    pub repeats: usize,
    pub inner: usize,
    /// Absent when the round-trip check failed.
    pub timings: Option<Timings>,
    pub check: bool,
    /// Gathered output of the last forward transform.
    pub spectrum: DenseArray<Complex64>,
}

impl BenchRecord {
    /// One CSV row matching [`CSV_HEADER`]. Fails if the check did not pass.
    pub fn csv_row(&self) -> Result<Vec<String>> {
        let t = self
            .timings
            .ok_or_else(|| Error::InvalidArgument("no timings: correctness check failed".into()))?;
        Ok(vec![
            self.method.name().to_string(),
            join(&self.shape, "x"),
            join(&self.dims, "x"),
            self.ranks.to_string(),
            self.repeats.to_string(),
            self.inner.to_string(),
            format!("{:.6e}", t.total),
            format!("{:.6e}", t.redistribute),
            format!("{:.6e}", t.transform),
            if self.check { "pass" } else { "fail" }.to_string(),
        ])
    }
}

/// Writes the header and one row per record.
pub fn write_csv<W: Write>(out: W, records: &[BenchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record(r.csv_row()?).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Deterministic complex data with components uniform in `[-1, 1)`.
pub fn random_global(shape: &[usize], seed: u64) -> DenseArray<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..element_count(shape))
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    DenseArray::from_vec(shape, data).expect("length matches shape")
}

/// `min over repeats (max over ranks)`, divided by `inner`.
///
/// `per_rank[r][k]` is rank `r`'s measurement in repeat `k`.
pub fn reduce_timings(per_rank: &[Vec<f64>], inner: usize) -> f64 {
    let repeats = per_rank.first().map_or(0, Vec::len);
    (0..repeats)
        .map(|k| per_rank.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min)
        / inner as f64
}

struct RankOutcome {
    total: Vec<f64>,
    redistribute: Vec<f64>,
    transform: Vec<f64>,
    round_trip_ok: bool,
    spectrum: DistributedArray,
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchRecord> {
    run_bench_with_clock(cfg, &SystemClock::default())
}

/// [`run_bench`] with an injected clock.
pub fn run_bench_with_clock(cfg: &BenchConfig, clock: &dyn Clock) -> Result<BenchRecord> {
    let global = random_global(&cfg.shape, cfg.seed);
    run_bench_on(cfg, &global, clock)
}

/// Benchmarks transforms of the given global array instead of seeded data.
pub fn run_bench_on(cfg: &BenchConfig, global: &DenseArray<Complex64>, clock: &dyn Clock) -> Result<BenchRecord> {
    let dims = cfg.resolve_grid()?;
    if global.shape() != cfg.shape.as_slice() {
        return Err(Error::ShapeMismatch {
            expected: cfg.shape.clone(),
            actual: global.shape().to_vec(),
        });
    }
    let grid = ProcessGrid::new(cfg.ranks, &dims)?;
    let plan = Plan::new(&cfg.shape, &grid)?;
    let pieces: Vec<Mutex<Option<DistributedArray>>> = scatter(global, &grid, plan.input_map(Direction::Forward))?
        .into_iter()
        .map(|p| Mutex::new(Some(p)))
        .collect();

    let outcomes = run_simulated(cfg.ranks, |world| -> Result<RankOutcome> {
        let rank = world.rank();
        let u = pieces[rank].lock().unwrap().take().expect("one piece per rank");
        let comm = GridComm::new(world, &dims)?;
        let mut local = LocalPlan::new(&plan, &comm, cfg.method, BufferScheme::TwoLargest)?;
        let mut outcome = RankOutcome {
            total: Vec::with_capacity(cfg.repeats),
            redistribute: Vec::with_capacity(cfg.repeats),
            transform: Vec::with_capacity(cfg.repeats),
            round_trip_ok: true,
            spectrum: u.clone(),
        };
        for repeat in 0..cfg.repeats {
            clock.start_repeat(rank, repeat);
            comm.world().barrier()?;
            let mut times = StepTimes::default();
            let t0 = clock.now(rank);
            for _ in 0..cfg.inner {
                let hat = local.execute_timed(Direction::Forward, &u, Some(clock), &mut times)?;
                let back = local.execute_timed(Direction::Backward, &hat, Some(clock), &mut times)?;
                let err = relative_error(back.local().as_slice(), u.local().as_slice());
                outcome.round_trip_ok &= err <= ROUND_TRIP_TOLERANCE;
                outcome.spectrum = hat;
            }
            outcome.total.push(clock.now(rank) - t0);
            outcome.redistribute.push(times.redistribute);
            outcome.transform.push(times.transform);
        }
        Ok(outcome)
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let check = outcomes.iter().all(|o| o.round_trip_ok);
    let reduce = |f: fn(&RankOutcome) -> &Vec<f64>| {
        let per_rank: Vec<Vec<f64>> = outcomes.iter().map(|o| f(o).clone()).collect();
        reduce_timings(&per_rank, cfg.inner)
    };
    let timings = check.then(|| Timings {
        total: reduce(|o| &o.total),
        redistribute: reduce(|o| &o.redistribute),
        transform: reduce(|o| &o.transform),
    });
    let spectra: Vec<DistributedArray> = outcomes.into_iter().map(|o| o.spectrum).collect();
    Ok(BenchRecord {
        method: cfg.method,
        shape: cfg.shape.clone(),
        dims,
        ranks: cfg.ranks,
        repeats: cfg.repeats,
        inner: cfg.inner,
        timings,
        check,
        spectrum: gather(&spectra)?,
    })
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub shape: Vec<usize>,
    pub dims: Vec<usize>,
    pub rows: Vec<CheckRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verify shape {} on grid {}", join(&self.shape, "x"), join(&self.dims, "x"))?;
        for r in &self.rows {
            writeln!(
                f,
                "  {:<34} {:>12.3e}  (tol {:.0e})  {}",
                r.name,
                r.value,
                r.tolerance,
                if r.pass { "PASS" } else { "FAIL" }
            )?;
        }
        write!(f, "result: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Checks the parallel transforms of seeded data against the serial oracle,
/// the backward identity, the baseline exchange and the per-stage buffers.
pub fn verify(cfg: &BenchConfig) -> Result<VerifyReport> {
    let global = random_global(&cfg.shape, cfg.seed);
    verify_on(cfg, &global)
}

pub fn verify_on(cfg: &BenchConfig, global: &DenseArray<Complex64>) -> Result<VerifyReport> {
    let dims = cfg.resolve_grid()?;
    let n = element_count(&cfg.shape);
    if n > VERIFY_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "verify is limited to {VERIFY_LIMIT} elements, shape has {n}"
        )));
    }
    let fwd = |method, scheme| transform_global(global, &dims, Direction::Forward, method, scheme);
    let hat = fwd(Method::Subarray, BufferScheme::TwoLargest)?;
    let oracle = dftn_oracle(global, Direction::Forward);
    let back = transform_global(&hat, &dims, Direction::Backward, Method::Subarray, BufferScheme::TwoLargest)?;
    let packed = fwd(Method::Pack, BufferScheme::TwoLargest)?;
    let per_stage = fwd(Method::Subarray, BufferScheme::PerStage)?;

    let exact = |a: &DenseArray<Complex64>| if a == &hat { 0.0 } else { f64::INFINITY };
    let row = |name, value: f64, tolerance: f64| CheckRow {
        name,
        value,
        tolerance,
        pass: value <= tolerance,
    };
    Ok(VerifyReport {
        shape: cfg.shape.clone(),
        dims,
        rows: vec![
            row("forward vs oracle (relative)", relative_error(hat.as_slice(), oracle.as_slice()), FORWARD_TOLERANCE),
            row("backward(forward) identity", relative_error(back.as_slice(), global.as_slice()), ROUND_TRIP_TOLERANCE),
            row("pack method bitwise equal", exact(&packed), 0.0),
            row("per-stage buffers bitwise equal", exact(&per_stage), 0.0),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_parsing() {
        assert_eq!("auto".parse::<GridSpec>().unwrap(), GridSpec::Auto);
        assert_eq!("2x4".parse::<GridSpec>().unwrap(), GridSpec::Explicit(vec![2, 4]));
        assert_eq!("8".parse::<GridSpec>().unwrap(), GridSpec::Explicit(vec![8]));
        assert!("2x0".parse::<GridSpec>().is_err());
        assert!("two".parse::<GridSpec>().is_err());
    }

    #[test]
    fn shape_parsing() {
        assert_eq!(parse_shape("64,64,64").unwrap(), vec![64, 64, 64]);
        assert!(parse_shape("64,,64").is_err());
    }

    #[test]
    fn grid_resolution() {
        let mut cfg = BenchConfig {
            shape: vec![16, 16, 16],
            ranks: 4,
            ..BenchConfig::default()
        };
        assert_eq!(cfg.resolve_grid().unwrap(), vec![2, 2]);
        cfg.grid = GridSpec::Explicit(vec![3, 2]);
        assert!(matches!(cfg.resolve_grid(), Err(Error::GridMismatch { .. })));
        cfg.grid = GridSpec::Explicit(vec![2, 1, 2]);
        assert!(cfg.resolve_grid().is_err());
        cfg.grid = GridSpec::Auto;
        cfg.inner = 0;
        assert!(cfg.resolve_grid().is_err());
        let cfg = BenchConfig {
            shape: vec![8, 8],
            ranks: 6,
            ..BenchConfig::default()
        };
        assert_eq!(cfg.resolve_grid().unwrap(), vec![6]);
    }

    #[test]
    fn reduction_is_min_of_max() {
        let per_rank = vec![vec![1.0, 3.0, 6.0], vec![5.0, 3.0, 1.0], vec![2.0, 4.0, 1.0]];
        // maxima per repeat: 5, 4, 6
        assert_eq!(reduce_timings(&per_rank, 2), 2.0);
    }

    #[test]
    fn seeded_data_is_reproducible() {
        assert_eq!(random_global(&[3, 4], 7), random_global(&[3, 4], 7));
        assert_ne!(random_global(&[3, 4], 7), random_global(&[3, 4], 8));
    }

    #[test]
    fn failed_check_has_no_csv_row() {
        let record = BenchRecord {
            method: Method::Pack,
            shape: vec![4, 4],
            dims: vec![2],
            ranks: 2,
            repeats: 1,
            inner: 1,
            timings: None,
            check: false,
            spectrum: DenseArray::zeros(&[4, 4]),
        };
        assert!(record.csv_row().is_err());
    }
}
