//! Serial DFTs and partial transforms along one axis of a dense array.
//!
//! Normalization is forward-weighted: the forward transform of a length-`N`
//! sequence is `X_k = (1/N) Σ_j x_j e^{-2πi jk/N}` and the backward
//! transform is the unscaled sum with `e^{+2πi jk/N}`. This differs from the
//! common unnormalized-forward convention.
//!
//! Powers of two use an iterative radix-2 kernel; every other length goes
//! through Bluestein's chirp convolution on a power-of-two radix-2 plan.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dense::DenseArray;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn inverse(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Backward => 1.0,
        }
    }
}

/// `e^{sign·2πi·num/den}`, with the angle reduced before evaluation.
fn unit_root(sign: f64, num: usize, den: usize) -> Complex64 {
    let angle = sign * 2.0 * PI * ((num % den) as f64) / den as f64;
    Complex64::new(angle.cos(), angle.sin())
}

/// Literal O(N²) evaluation of the forward (scaled by `1/N`) or backward DFT.
pub fn dft_oracle(u: &[Complex64], dir: Direction) -> Vec<Complex64> {
    let n = u.len();
    let scale = match dir {
        Direction::Forward => 1.0 / n as f64,
        Direction::Backward => 1.0,
    };
    (0..n)
        .map(|k| {
            let sum: Complex64 = u
                .iter()
                .enumerate()
                .map(|(j, &x)| x * unit_root(dir.sign(), j * k, n))
                .sum();
            sum * scale
        })
        .collect()
}

/// Multidimensional DFT by literal O(N²) sums along every axis in turn.
///
/// Separability makes this equal to the nested sum over all axes; it uses no
/// FFT kernel and serves as a reference for the parallel transforms.
pub fn dftn_oracle(a: &DenseArray<Complex64>, dir: Direction) -> DenseArray<Complex64> {
    let shape = a.shape().to_vec();
    let mut data = a.as_slice().to_vec();
    for axis in 0..shape.len() {
        let n = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        if data.is_empty() {
            break;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for block in data.chunks_exact_mut(n * inner) {
            for i in 0..inner {
                for (k, x) in line.iter_mut().enumerate() {
                    *x = block[k * inner + i];
                }
                for (k, x) in dft_oracle(&line, dir).into_iter().enumerate() {
                    block[k * inner + i] = x;
                }
            }
        }
    }
    DenseArray::from_vec(&shape, data).expect("shape preserved")
}

/// Largest elementwise distance between two equally long sequences.
pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `max|a - reference| / max|reference|` (absolute when the reference is 0).
pub fn relative_error(a: &[Complex64], reference: &[Complex64]) -> f64 {
    let scale = reference.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let diff = max_abs_diff(a, reference);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Powers of the forward root of unity `ω = e^{-2πi/N}`.
#[derive(Debug, Clone)]
pub struct TwiddleTable {
    roots: Vec<Complex64>,
}

impl TwiddleTable {
    pub fn new(n: usize) -> Self {
        TwiddleTable {
            roots: (0..n).map(|k| unit_root(-1.0, k, n)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// `ω^k`.
    pub fn forward(&self, k: usize) -> Complex64 {
        self.roots[k % self.roots.len()]
    }

    /// `ω^{-k}`.
    pub fn backward(&self, k: usize) -> Complex64 {
        self.forward(k).conj()
    }
}

#[derive(Debug, Clone)]
enum Algorithm {
    Identity,
    Radix2 {
        twiddles: TwiddleTable,
        bit_reverse: Vec<usize>,
    },
    Bluestein {
        chirp: Vec<Complex64>,
        filter: Vec<Complex64>,
        inner: Box<FftPlan>,
    },
}

/// A reusable transform of one fixed length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    algorithm: Algorithm,
}

impl FftPlan {
    pub fn new(len: usize) -> Self {
        let algorithm = if len <= 1 {
            Algorithm::Identity
        } else if len.is_power_of_two() {
            let bits = len.trailing_zeros();
            let bit_reverse = (0..len)
                .map(|i| i.reverse_bits() >> (usize::BITS - bits))
                .collect();
            Algorithm::Radix2 {
                twiddles: TwiddleTable::new(len),
                bit_reverse,
            }
        } else {
            let m = (2 * len - 1).next_power_of_two();
            // chirp_j = e^{-iπ j²/N}; j² is reduced mod 2N before scaling.
            let chirp: Vec<Complex64> = (0..len)
                .map(|j| unit_root(-1.0, (j * j) % (2 * len), 2 * len))
                .collect();
            let inner = Box::new(FftPlan::new(m));
            let mut filter = vec![Complex64::new(0.0, 0.0); m];
            filter[0] = chirp[0].conj();
            for j in 1..len {
                filter[j] = chirp[j].conj();
                filter[m - j] = chirp[j].conj();
            }
            inner.forward_unscaled(&mut filter, &mut Vec::new());
            Algorithm::Bluestein {
                chirp,
                filter,
                inner,
            }
        };
        FftPlan { len, algorithm }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Transforms `buf` in place.
    pub fn process(&self, buf: &mut [Complex64], dir: Direction) {
        self.process_with_scratch(buf, dir, &mut Vec::new());
    }

    pub fn process_with_scratch(&self, buf: &mut [Complex64], dir: Direction, scratch: &mut Vec<Complex64>) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match dir {
            Direction::Forward => {
                self.forward_unscaled(buf, scratch);
                let scale = 1.0 / self.len as f64;
                buf.iter_mut().for_each(|x| *x *= scale);
            }
            Direction::Backward => {
                // conj(F(conj(x))) is the unscaled inverse.
                buf.iter_mut().for_each(|x| *x = x.conj());
                self.forward_unscaled(buf, scratch);
                buf.iter_mut().for_each(|x| *x = x.conj());
            }
        }
    }

    fn forward_unscaled(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        match &self.algorithm {
            Algorithm::Identity => {}
            Algorithm::Radix2 {
                twiddles,
                bit_reverse,
            } => radix2(buf, twiddles, bit_reverse),
            Algorithm::Bluestein {
                chirp,
                filter,
                inner,
            } => {
                let m = inner.len;
                scratch.clear();
                scratch.resize(m, Complex64::new(0.0, 0.0));
                for (s, (&x, &c)) in scratch.iter_mut().zip(buf.iter().zip(chirp)) {
                    *s = x * c;
                }
                let mut unused = Vec::new();
                inner.forward_unscaled(scratch, &mut unused);
                for (s, &f) in scratch.iter_mut().zip(filter) {
                    *s = (*s * f).conj();
                }
                // Inverse of the convolution spectrum via conjugation.
                inner.forward_unscaled(scratch, &mut unused);
                let scale = 1.0 / m as f64;
                for (k, x) in buf.iter_mut().enumerate() {
                    *x = scratch[k].conj() * scale * chirp[k];
                }
            }
        }
    }
}

fn radix2(buf: &mut [Complex64], twiddles: &TwiddleTable, bit_reverse: &[usize]) {
    let n = buf.len();
    for (i, &j) in bit_reverse.iter().enumerate() {
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut size = 2;
    while size <= n {
        let half = size / 2;
        let step = n / size;
        for start in (0..n).step_by(size) {
            for k in 0..half {
                let w = twiddles.forward(k * step);
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        size *= 2;
    }
}

/// Transforms a whole sequence.
pub fn fft(u: &[Complex64], dir: Direction) -> Vec<Complex64> {
    let mut out = u.to_vec();
    FftPlan::new(u.len()).process(&mut out, dir);
    out
}

/// Plans keyed by length, shared by all partial transforms of one rank.
#[derive(Debug, Default, Clone)]
pub struct PlanCache {
    plans: HashMap<usize, FftPlan>,
    scratch: Vec<Complex64>,
    line: Vec<Complex64>,
}

impl PlanCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn plan(&mut self, len: usize) -> &FftPlan {
        self.plans.entry(len).or_insert_with(|| FftPlan::new(len))
    }

    /// Transforms every 1D line along `axis` of the row-major buffer `data`
    /// with extents `shape`.
    pub fn transform_axis(
        &mut self,
        data: &mut [Complex64],
        shape: &[usize],
        axis: usize,
        dir: Direction,
    ) -> Result<()> {
        if axis >= shape.len() {
            return Err(Error::AxisOutOfRange {
                axis,
                ndim: shape.len(),
            });
        }
        let n = shape[axis];
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        if data.len() != outer * n * inner {
            return Err(Error::LengthMismatch {
                expected: outer * n * inner,
                actual: data.len(),
            });
        }
        if data.is_empty() {
            return Ok(());
        }
        self.plans.entry(n).or_insert_with(|| FftPlan::new(n));
        let plan = &self.plans[&n];
        let scratch = &mut self.scratch;
        if inner == 1 {
            for line in data.chunks_exact_mut(n) {
                plan.process_with_scratch(line, dir, scratch);
            }
            return Ok(());
        }
        let line = &mut self.line;
        line.resize(n, Complex64::new(0.0, 0.0));
        for block in data.chunks_exact_mut(n * inner) {
            for i in 0..inner {
                for (k, x) in line.iter_mut().enumerate() {
                    *x = block[k * inner + i];
                }
                plan.process_with_scratch(line, dir, scratch);
                for (k, x) in line.iter().enumerate() {
                    block[k * inner + i] = *x;
                }
            }
        }
        Ok(())
    }
}

/// One-dimensional transform of every line of `a` along `axis`.
pub fn partial_transform(
    a: &DenseArray<Complex64>,
    axis: usize,
    dir: Direction,
) -> Result<DenseArray<Complex64>> {
    let mut out = a.clone();
    partial_transform_in_place(&mut out, axis, dir)?;
    Ok(out)
}

pub fn partial_transform_in_place(
    a: &mut DenseArray<Complex64>,
    axis: usize,
    dir: Direction,
) -> Result<()> {
    let shape = a.shape().to_vec();
    PlanCache::new().transform_axis(a.as_mut_slice(), &shape, axis, dir)
}
