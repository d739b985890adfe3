//! Parallel multidimensional FFTs over block-distributed dense arrays.
//!
//! Every global redistribution between two alignments is a single
//! generalized all-to-all exchange of rectangular subarray regions: no local
//! remapping, no intermediate packing by the caller. A traditional
//! pack-and-transpose redistribution is kept alongside as a baseline.
//!
//! The crate is organised bottom-up:
//!
//! - [`dense`]: row-major arrays, region copies and the local transpose the
//!   baseline needs; [`nda`] is the binary array file format.
//! - [`decomp`]: balanced block decomposition and Cartesian process grids.
//! - [`subarray`]: region descriptors and the pack/unpack codec.
//! - [`transport`]: process groups with collectives, backed by an in-process
//!   simulated world of virtual ranks.
//! - [`redistribute`]: distributed arrays and the two exchange strategies.
//! - [`fft`]: serial transforms and partial transforms along one axis.
//! - [`plan`]: slab, pencil and higher-dimensional parallel FFT programs.
//! - [`bench`]: the timing harness behind the `bench-cli` binary.
//!
//! Transforms follow the forward-normalized convention: the forward
//! transform carries the `1/N` factor, the backward transform carries none.

pub mod bench;
pub mod decomp;
pub mod dense;
pub mod error;
pub mod fft;
pub mod nda;
pub mod plan;
pub mod redistribute;
pub mod subarray;
pub mod transport;

pub use decomp::{decompose, dims_create, Block, ProcessGrid};
pub use dense::{DenseArray, ElemKind, Element};
pub use error::{Error, Result};
pub use fft::{dft_oracle, dftn_oracle, fft, partial_transform, Direction, FftPlan};
pub use plan::{gather, scatter, transform_global, BufferScheme, LocalPlan, Plan, PlanStep};
pub use bench::{run_bench, verify, BenchConfig, BenchRecord, Clock, GridSpec};
pub use redistribute::{
    exchange, exchange_baseline, redistribute, AxisMap, DistributedArray, GridComm, Method,
};
pub use subarray::{subarray_sequence, SubarrayLayout};
pub use transport::{run_simulated, Group, SimConfig};

pub use num_complex::Complex64;
