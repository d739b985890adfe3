//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! Run with `cargo test --test acceptance -- --nocapture --test-threads 1`
//! to see the lines in order.

use std::f64::consts::PI;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subarray_fft::bench::{self, BenchConfig, Clock, GridSpec, CSV_HEADER};
use subarray_fft::decomp::blocks;
use subarray_fft::dense::element_count;
use subarray_fft::fft::relative_error;
use subarray_fft::subarray::{pack, unpack};
use subarray_fft::transport::run_simulated_with;
use subarray_fft::*;

const FFT_ABS_TOL: f64 = 1e-10;
const UNIT_IMPULSE_TOL: f64 = 1e-15;
const FORWARD_REL_TOL: f64 = 1e-10;
const ROUND_TRIP_REL_TOL: f64 = 1e-12;
const DEADLOCK_BOUND: Duration = Duration::from_secs(5);

fn report(n: usize, name: &str, pass: bool, detail: String) {
    println!("criterion {n}: {} {name} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn random_complex(shape: &[usize], rng: &mut impl Rng) -> DenseArray<Complex64> {
    DenseArray::from_fn(shape, |_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// The part of `g` whose index along `axis` lies in `block`.
fn slice_axis(g: &DenseArray<Complex64>, axis: usize, block: Block) -> DenseArray<Complex64> {
    let mut shape = g.shape().to_vec();
    shape[axis] = block.count;
    DenseArray::from_fn(&shape, |j| {
        let mut gj = j.to_vec();
        gj[axis] += block.start;
        g.get(&gj)
    })
}

#[test]
fn criterion_01_decomposition_tiling() {
    let mut checked = 0;
    let mut bad = Vec::new();
    for n in 0..=200usize {
        for m in 1..=17usize {
            let parts = blocks(n, m).unwrap();
            let (q, r) = (n / m, n % m);
            let mut next = 0;
            for (p, b) in parts.iter().enumerate() {
                let want = if p < r { q + 1 } else { q };
                if b.start != next || b.count != want {
                    bad.push((n, m, p));
                }
                next = b.end();
            }
            if next != n {
                bad.push((n, m, usize::MAX));
            }
            checked += 1;
        }
    }
    report(1, "decomposition tiling", bad.is_empty(), format!("{checked} (N, M) pairs, {} bad", bad.len()));
}

#[test]
fn criterion_02_codec_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = 0;
    for _ in 0..1000 {
        let d = rng.gen_range(1..=4);
        let sizes: Vec<usize> = (0..d).map(|_| rng.gen_range(1..=9)).collect();
        let subsizes: Vec<usize> = sizes.iter().map(|&n| rng.gen_range(0..=n)).collect();
        let starts: Vec<usize> = sizes.iter().zip(&subsizes).map(|(&n, &s)| rng.gen_range(0..=n - s)).collect();
        let layout = SubarrayLayout::new(ElemKind::Complex128, &sizes, &subsizes, &starts).unwrap();
        let a = random_complex(&sizes, &mut rng);
        let buf = pack(&a, &layout).unwrap();
        let mut b = a.clone();
        unpack(&mut b, &layout, &buf).unwrap();
        let mut zeroed = DenseArray::<Complex64>::zeros(&sizes);
        unpack(&mut zeroed, &layout, &buf).unwrap();
        let again = pack(&zeroed, &layout).unwrap();
        if b != a || again != buf {
            failures += 1;
        }

        let axis = rng.gen_range(0..d);
        let parts = rng.gen_range(1..=12);
        let seq = subarray_sequence(ElemKind::Complex128, &sizes, axis, parts).unwrap();
        let mut hits = vec![0usize; element_count(&sizes)];
        for l in &seq {
            let mut marks = DenseArray::<f64>::zeros(&sizes);
            let ones = vec![1.0; l.element_count()];
            unpack(&mut marks, &SubarrayLayout::new(ElemKind::Real64, l.sizes(), l.subsizes(), l.starts()).unwrap(), &ones)
                .unwrap();
            for (h, m) in hits.iter_mut().zip(marks.as_slice()) {
                *h += *m as usize;
            }
        }
        if hits.iter().any(|&h| h != 1) {
            failures += 1;
        }
    }
    report(2, "codec round trip", failures == 0, format!("1000 cases, {failures} failures"));
}

fn random_exchange_case(rng: &mut impl Rng) -> (Vec<usize>, usize, usize, usize) {
    let d = rng.gen_range(2..=3);
    let limits = [7, 8, 9];
    let shape: Vec<usize> = limits[3 - d..].iter().map(|&l| rng.gen_range(1..=l)).collect();
    let m = [1, 2, 3, 4, 6, 12][rng.gen_range(0..6)];
    let v = rng.gen_range(0..d);
    let w = (v + rng.gen_range(1..d)) % d;
    (shape, m, v, w)
}

/// Runs `exchange` (or the baseline) on every rank of an `m`-member group.
fn run_exchange(g: &DenseArray<Complex64>, m: usize, v: usize, w: usize, method: Method) -> Vec<DenseArray<Complex64>> {
    run_simulated(m, |group| {
        let p = group.rank();
        let a = slice_axis(g, w, decompose(g.shape()[w], m, p).unwrap());
        let mut shape = g.shape().to_vec();
        shape[v] = decompose(shape[v], m, p).unwrap().count;
        let mut b = DenseArray::zeros(&shape);
        match method {
            Method::Subarray => exchange(&group, &a, v, &mut b, w).unwrap(),
            Method::Pack => exchange_baseline(&group, &a, v, &mut b, w).unwrap(),
        }
        b
    })
    .unwrap()
}

#[test]
fn criterion_03_alltoallw_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cases = 0;
    let mut mismatches = 0;
    let mut zero_blocks = 0;
    for _ in 0..150 {
        let (shape, m, v, w) = random_exchange_case(&mut rng);
        let g = random_complex(&shape, &mut rng);
        let got = run_exchange(&g, m, v, w, Method::Subarray);
        for (p, b) in got.iter().enumerate() {
            let block = decompose(shape[v], m, p).unwrap();
            zero_blocks += (block.count == 0) as usize;
            if *b != slice_axis(&g, v, block) {
                mismatches += 1;
            }
        }
        cases += 1;
    }
    let pass = mismatches == 0 && zero_blocks > 0;
    report(3, "alltoallw oracle equivalence", pass, format!("{cases} cases, {zero_blocks} empty blocks, {mismatches} mismatches"));
}

#[test]
fn criterion_04_differential_methods() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut even, mut uneven, mut differ) = (0, 0, 0);
    while even + uneven < 240 || even < 40 || uneven < 40 {
        let (mut shape, m, v, w) = random_exchange_case(&mut rng);
        if rng.gen_bool(0.3) {
            shape[v] = m * rng.gen_range(1..=2);
            shape[w] = m * rng.gen_range(1..=2);
        }
        if shape[v] % m == 0 && shape[w] % m == 0 {
            even += 1;
        } else {
            uneven += 1;
        }
        let g = random_complex(&shape, &mut rng);
        let a = run_exchange(&g, m, v, w, Method::Subarray);
        let b = run_exchange(&g, m, v, w, Method::Pack);
        if a != b {
            differ += 1;
        }
    }
    report(
        4,
        "subarray exchange equals pack baseline",
        differ == 0,
        format!("{even} even and {uneven} uneven cases, {differ} differ"),
    );
}

#[test]
fn criterion_05_serial_fft() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let lengths: Vec<usize> = (1..=64).chain([128, 243, 500]).collect();
    for &n in &lengths {
        let u: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        for dir in [Direction::Forward, Direction::Backward] {
            worst = worst.max(fft::max_abs_diff(&fft(&u, dir), &dft_oracle(&u, dir)));
        }
    }
    let ones = vec![Complex64::new(1.0, 0.0); 4];
    let impulse = fft(&ones, Direction::Forward);
    let expected = [1.0, 0.0, 0.0, 0.0].map(|x| Complex64::new(x, 0.0));
    let impulse_err = fft::max_abs_diff(&impulse, &expected);
    report(
        5,
        "serial FFT matches oracle",
        worst < FFT_ABS_TOL && impulse_err <= UNIT_IMPULSE_TOL,
        format!("{} lengths, max abs err {worst:.2e}, forward([1,1,1,1]) err {impulse_err:.1e}", lengths.len()),
    );
}

/// Direct evaluation of the forward-normalized d-dimensional DFT as one full sum.
fn direct_forward(x: &DenseArray<Complex64>) -> DenseArray<Complex64> {
    let shape = x.shape().to_vec();
    let n = element_count(&shape) as f64;
    let mut indices = Vec::with_capacity(x.len());
    DenseArray::<f64>::from_fn(&shape, |j| {
        indices.push(j.to_vec());
        0.0
    });
    DenseArray::from_fn(&shape, |k| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &xj) in indices.iter().zip(x.as_slice()) {
            let turns: f64 = (0..shape.len()).map(|i| ((k[i] * j[i]) % shape[i]) as f64 / shape[i] as f64).sum();
            acc += xj * Complex64::from_polar(1.0, -2.0 * PI * turns);
        }
        acc / n
    })
}

fn criterion_6_cases() -> Vec<(Vec<usize>, Vec<usize>)> {
    let grids3 = [vec![4], vec![3, 4], vec![2, 3]];
    let grids4 = [vec![2, 2, 2], vec![2, 3]];
    let shapes3 = [vec![8, 9, 10]];
    let shapes4 = [vec![6, 6, 6, 6], vec![5, 7, 6, 4]];
    let mut cases = Vec::new();
    for s in &shapes3 {
        cases.extend(grids3.iter().map(|g| (s.clone(), g.clone())));
    }
    for s in &shapes4 {
        cases.extend(grids4.iter().map(|g| (s.clone(), g.clone())));
    }
    cases
}

#[test]
fn criterion_06_parallel_transform() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_fwd, mut worst_rt): (f64, f64) = (0.0, 0.0);
    let cases = criterion_6_cases();
    for (shape, dims) in &cases {
        let x = random_complex(shape, &mut rng);
        let reference = direct_forward(&x);
        let hat = transform_global(&x, dims, Direction::Forward, Method::Subarray, BufferScheme::TwoLargest).unwrap();
        let back = transform_global(&hat, dims, Direction::Backward, Method::Subarray, BufferScheme::TwoLargest).unwrap();
        worst_fwd = worst_fwd.max(relative_error(hat.as_slice(), reference.as_slice()));
        worst_rt = worst_rt.max(relative_error(back.as_slice(), x.as_slice()));
    }
    report(
        6,
        "parallel transform correctness",
        worst_fwd < FORWARD_REL_TOL && worst_rt < ROUND_TRIP_REL_TOL,
        format!("{} cases, forward rel err {worst_fwd:.2e}, round trip rel err {worst_rt:.2e}", cases.len()),
    );
}

#[test]
fn criterion_07_step_counts() {
    let mut bad = Vec::new();
    let mut checked = 0;
    for d in 2..=5usize {
        for m in 1..d {
            let dims = vec![1; m];
            let shape = vec![4; d];
            let plan = Plan::new(&shape, &ProcessGrid::new(1, &dims).unwrap()).unwrap();
            for dir in [Direction::Forward, Direction::Backward] {
                if plan.step_counts(dir) != (d, m) {
                    bad.push((d, m, dir));
                }
            }
            let fwd: Vec<PlanStep> = plan.steps(Direction::Forward).to_vec();
            let bwd: Vec<PlanStep> = plan.steps(Direction::Backward).to_vec();
            let mirrored = fwd.iter().rev().zip(&bwd).all(|(f, b)| match (f, b) {
                (PlanStep::PartialTransform { axis: a, dir: x }, PlanStep::PartialTransform { axis: b, dir: y }) => {
                    a == b && x.inverse() == *y
                }
                (
                    PlanStep::Redistribute { direction: g, from_axis: f0, to_axis: t0 },
                    PlanStep::Redistribute { direction: h, from_axis: f1, to_axis: t1 },
                ) => g == h && f0 == t1 && t0 == f1,
                _ => false,
            });
            if !mirrored {
                bad.push((d, m, Direction::Backward));
            }
            checked += 1;
        }
    }
    report(7, "plan step counts", bad.is_empty(), format!("{checked} (d, m) plans, {} bad", bad.len()));
}

#[test]
fn criterion_08_two_buffer_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut differ = 0;
    let cases = criterion_6_cases();
    for (shape, dims) in &cases {
        let x = random_complex(shape, &mut rng);
        for dir in [Direction::Forward, Direction::Backward] {
            let two = transform_global(&x, dims, dir, Method::Subarray, BufferScheme::TwoLargest).unwrap();
            let per = transform_global(&x, dims, dir, Method::Subarray, BufferScheme::PerStage).unwrap();
            differ += (two != per) as usize;
        }
    }
    report(8, "two-buffer scheme is bitwise identical", differ == 0, format!("{} cases x 2 directions, {differ} differ", cases.len()));
}

/// Every `now` call advances the calling rank's time by `scale(rank, repeat)`.
struct FakeClock {
    scale: fn(usize, usize) -> f64,
    state: Vec<Mutex<(usize, f64)>>,
}

impl FakeClock {
    fn new(ranks: usize, scale: fn(usize, usize) -> f64) -> Self {
        FakeClock {
            scale,
            state: (0..ranks).map(|_| Mutex::new((0, 0.0))).collect(),
        }
    }
}

impl Clock for FakeClock {
    fn now(&self, rank: usize) -> f64 {
        let mut s = self.state[rank].lock().unwrap();
        s.1 += (self.scale)(s.0, rank);
        s.1
    }

    fn start_repeat(&self, rank: usize, repeat: usize) {
        self.state[rank].lock().unwrap().0 = repeat;
    }
}

fn skewed(repeat: usize, rank: usize) -> f64 {
    // maxima over ranks per repeat: 7, 4, 9, 5 -> min 4
    [[1.0, 7.0, 2.0, 3.0], [4.0, 1.0, 1.0, 2.0], [2.0, 3.0, 9.0, 1.0], [5.0, 5.0, 5.0, 5.0]][repeat][rank]
}

#[test]
fn criterion_09_bench_protocol() {
    let exe = env!("CARGO_BIN_EXE_bench-cli");
    let out = Command::new(exe)
        .args(["run", "--shape", "16,16,16", "--ranks", "4", "--repeats", "2", "--inner", "1"])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mut reader = csv::Reader::from_reader(stdout.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
    let rows: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>().unwrap();
    let row_ok = rows.len() == 1
        && rows[0].len() == CSV_HEADER.len()
        && &rows[0][0] == "subarray"
        && &rows[0][1] == "16x16x16"
        && &rows[0][2] == "2x2"
        && &rows[0][3] == "4"
        && (6..9).all(|i| rows[0][i].parse::<f64>().is_ok_and(|t| t >= 0.0))
        && &rows[0][9] == "pass";
    let schema_ok = out.status.success() && header == CSV_HEADER && row_ok;

    let cfg = BenchConfig {
        shape: vec![16, 16, 16],
        ranks: 4,
        grid: GridSpec::Auto,
        repeats: 4,
        inner: 2,
        ..BenchConfig::default()
    };
    let unit = bench::run_bench_with_clock(&cfg, &FakeClock::new(4, |_, _| 1.0)).unwrap().timings.unwrap();
    let skew = bench::run_bench_with_clock(&cfg, &FakeClock::new(4, skewed)).unwrap().timings.unwrap();
    let factor = 4.0;
    let reduction_ok = unit.total > 0.0
        && skew.total == factor * unit.total
        && skew.redistribute == factor * unit.redistribute
        && skew.transform == factor * unit.transform;
    report(
        9,
        "bench protocol shape",
        schema_ok && reduction_ok,
        format!(
            "csv schema {}, unit total {} ticks, skewed total {} ticks (expected x{factor})",
            if schema_ok { "ok" } else { "wrong" },
            unit.total,
            skew.total
        ),
    );
}

#[test]
fn criterion_10_deadlock_to_error() {
    let started = Instant::now();
    let config = SimConfig { timeout: DEADLOCK_BOUND };
    let result = run_simulated_with(&config, 2, |group| -> Result<()> {
        if group.rank() == 1 {
            return Ok(());
        }
        let a = DenseArray::<Complex64>::zeros(&[1, 4]);
        let mut b = DenseArray::<Complex64>::zeros(&[2, 2]);
        exchange(&group, &a, 1, &mut b, 0)
    });
    let elapsed = started.elapsed();
    let is_error = result.is_err() || matches!(&result, Ok(v) if v.iter().any(|r| r.is_err()));
    report(
        10,
        "skipped exchange is reported, not hung",
        is_error && elapsed < DEADLOCK_BOUND,
        format!("{result:?} after {elapsed:.2?}"),
    );
}
