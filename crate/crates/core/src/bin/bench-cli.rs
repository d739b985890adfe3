use std::fs::File;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subarray_fft::bench::{self, parse_shape, BenchConfig, GridSpec};
use subarray_fft::{nda, Error, Method};

#[derive(Parser)]
#[command(name = "bench-cli", about = "Time and check parallel FFTs on simulated ranks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time forward+backward transform pairs and print one CSV row.
    Run(Common),
    /// Check the parallel transform against the serial oracle.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Global extents, comma separated.
    #[arg(long, default_value = "64,64,64")]
    shape: String,
    #[arg(long, default_value_t = 8)]
    ranks: usize,
    /// `auto` or extents such as `2x4`.
    #[arg(long, default_value = "auto")]
    grid: GridSpec,
    #[arg(long, default_value = "subarray")]
    method: Method,
    #[arg(long, default_value_t = 50)]
    repeats: usize,
    #[arg(long, default_value_t = 3)]
    inner: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Read the input array from an NDA1 file instead of seeded data.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Write the forward transform as an NDA1 file.
    #[arg(long)]
    save_spectrum: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<BenchConfig, Error> {
        Ok(BenchConfig {
            shape: parse_shape(&self.shape)?,
            ranks: self.ranks,
            grid: self.grid.clone(),
            method: self.method,
            repeats: self.repeats,
            inner: self.inner,
            seed: self.seed,
            out: self.out.clone(),
        })
    }
}

enum Failure {
    Check,
    Config(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e)
    }
}

fn load_input(args: &Common, cfg: &mut BenchConfig) -> Result<subarray_fft::DenseArray<subarray_fft::Complex64>, Error> {
    match &args.input {
        Some(path) => {
            let a = nda::read_file(path)?.into_complex();
            cfg.shape = a.shape().to_vec();
            Ok(a)
        }
        None => Ok(bench::random_global(&cfg.shape, cfg.seed)),
    }
}

fn run(args: &Common) -> Result<(), Failure> {
    let mut cfg = args.config()?;
    let input = load_input(args, &mut cfg)?;
    eprintln!("note: simulated ranks share one process; timings do not reflect network behavior");
    let record = bench::run_bench_on(&cfg, &input, &bench::SystemClock::default())?;
    if let Some(path) = &args.save_spectrum {
        nda::write_file(path, &record.spectrum)?;
    }
    if !record.check {
        eprintln!("round-trip check failed; no timings reported");
        return Err(Failure::Check);
    }
    match &cfg.out {
        Some(path) => bench::write_csv(File::create(path).map_err(Error::from)?, &[record])?,
        None => bench::write_csv(io::stdout().lock(), &[record])?,
    }
    Ok(())
}

fn verify(args: &Common) -> Result<(), Failure> {
    let mut cfg = args.config()?;
    let input = load_input(args, &mut cfg)?;
    let report = bench::verify_on(&cfg, &input)?;
    println!("{report}");
    if let Some(path) = &args.save_spectrum {
        let dims = cfg.resolve_grid()?;
        let hat = subarray_fft::transform_global(
            &input,
            &dims,
            subarray_fft::Direction::Forward,
            cfg.method,
            subarray_fft::BufferScheme::TwoLargest,
        )?;
        nda::write_file(path, &hat)?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Verify(args) => verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
