//! Dense row-major arrays.
//!
//! Region copies ([`DenseArray::region_read`], [`DenseArray::region_write`])
//! back the subarray codec; [`DenseArray::local_transpose_01`] is only used by
//! the pack-and-transpose baseline.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::subarray::SubarrayLayout;

/// Elementary datatype of an array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElemKind {
    Real64,
    Complex128,
}

impl ElemKind {
    pub const fn byte_width(self) -> usize {
        match self {
            ElemKind::Real64 => 8,
            ElemKind::Complex128 => 16,
        }
    }

    /// Dtype code used by the NDA1 file format.
    pub const fn code(self) -> u8 {
        match self {
            ElemKind::Real64 => 1,
            ElemKind::Complex128 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(ElemKind::Real64),
            2 => Some(ElemKind::Complex128),
            _ => None,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            ElemKind::Real64 => "real64",
            ElemKind::Complex128 => "complex128",
        }
    }
}

impl fmt::Display for ElemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Scalar types an array can hold.
pub trait Element: Copy + Default + PartialEq + fmt::Debug + Send + Sync + 'static {
    const KIND: ElemKind;

    fn write_le(&self, out: &mut Vec<u8>);

    /// Decodes one element from exactly `KIND.byte_width()` bytes.
    fn read_le(bytes: &[u8]) -> Self;
}

impl Element for f64 {
    const KIND: ElemKind = ElemKind::Real64;

    fn write_le(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().unwrap())
    }
}

impl Element for Complex64 {
    const KIND: ElemKind = ElemKind::Complex128;

    fn write_le(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.re.to_le_bytes());
        out.extend_from_slice(&self.im.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let re = f64::from_le_bytes(bytes[..8].try_into().unwrap());
        let im = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
        Complex64::new(re, im)
    }
}

/// Row-major strides for `shape`, in elements.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

/// Number of elements of an array with the given extents (1 for rank 0).
pub fn element_count(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// A dense array stored in C (row-major) order.
#[derive(Clone, PartialEq)]
pub struct DenseArray<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Element> fmt::Debug for DenseArray<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseArray")
            .field("kind", &T::KIND)
            .field("shape", &self.shape)
            .field("len", &self.data.len())
            .finish()
    }
}

impl<T: Element> DenseArray<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        DenseArray {
            shape: shape.to_vec(),
            data: vec![T::default(); element_count(shape)],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let expected = element_count(shape);
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(DenseArray {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Builds an array by evaluating `f` at every multi-index, in row-major order.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Self {
        let n = element_count(shape);
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..n {
            data.push(f(&idx));
            for axis in (0..shape.len()).rev() {
                idx[axis] += 1;
                if idx[axis] < shape[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
        DenseArray {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn kind(&self) -> ElemKind {
        T::KIND
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut flat = 0;
        for (i, &j) in index.iter().enumerate() {
            debug_assert!(j < self.shape[i]);
            flat = flat * self.shape[i] + j;
        }
        flat
    }

    pub fn get(&self, index: &[usize]) -> T {
        self.data[self.flat_index(index)]
    }

    pub fn set(&mut self, index: &[usize], value: T) {
        let flat = self.flat_index(index);
        self.data[flat] = value;
    }

    /// Reinterprets the buffer with a new shape of equal element count.
    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        if element_count(shape) != self.data.len() {
            return Err(Error::ShapeMismatch {
                expected: self.shape,
                actual: shape.to_vec(),
            });
        }
        Ok(DenseArray {
            shape: shape.to_vec(),
            data: self.data,
        })
    }

    fn check_layout(&self, layout: &SubarrayLayout) -> Result<()> {
        layout.validate()?;
        if layout.sizes() != self.shape.as_slice() {
            return Err(Error::ShapeMismatch {
                expected: self.shape.clone(),
                actual: layout.sizes().to_vec(),
            });
        }
        if layout.kind() != T::KIND {
            return Err(Error::KindMismatch {
                expected: T::KIND.name(),
                actual: layout.kind().name(),
            });
        }
        Ok(())
    }

    /// Copies the region described by `layout` into a new buffer, in the
    /// region's own row-major order.
    pub fn region_read(&self, layout: &SubarrayLayout) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(layout.element_count());
        self.region_read_into(layout, &mut out)?;
        Ok(out)
    }

    /// Appends the region's elements to `out`.
    pub fn region_read_into(&self, layout: &SubarrayLayout, out: &mut Vec<T>) -> Result<()> {
        self.check_layout(layout)?;
        for_each_run(layout.sizes(), layout.subsizes(), layout.starts(), |offset, len| {
            out.extend_from_slice(&self.data[offset..offset + len]);
        });
        Ok(())
    }

    /// Overwrites the region with `src`; elements outside the region are untouched.
    pub fn region_write(&mut self, layout: &SubarrayLayout, src: &[T]) -> Result<()> {
        self.check_layout(layout)?;
        let expected = layout.element_count();
        if src.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: src.len(),
            });
        }
        let mut cursor = 0;
        let data = &mut self.data;
        for_each_run(layout.sizes(), layout.subsizes(), layout.starts(), |offset, len| {
            data[offset..offset + len].copy_from_slice(&src[cursor..cursor + len]);
            cursor += len;
        });
        Ok(())
    }

    /// Swaps the two leading axes: `out[j1, j0, rest..] = self[j0, j1, rest..]`.
    pub fn local_transpose_01(&self) -> Result<Self> {
        if self.ndim() < 2 {
            return Err(Error::InvalidArgument(format!(
                "local transpose needs at least 2 axes, got {}",
                self.ndim()
            )));
        }
        let block = element_count(&self.shape[2..]);
        let mut out_shape = self.shape.clone();
        out_shape.swap(0, 1);
        let mut data = Vec::with_capacity(self.data.len());
        transpose_01_into(&self.data, self.shape[0], self.shape[1], block, &mut data);
        Ok(DenseArray {
            shape: out_shape,
            data,
        })
    }
}

/// Appends `src`, viewed as `(s0, s1, block)`, to `dst` with its two leading
/// axes swapped.
pub fn transpose_01_into<T: Copy>(src: &[T], s0: usize, s1: usize, block: usize, dst: &mut Vec<T>) {
    debug_assert_eq!(src.len(), s0 * s1 * block);
    dst.reserve(src.len());
    for j1 in 0..s1 {
        for j0 in 0..s0 {
            let at = (j0 * s1 + j1) * block;
            dst.extend_from_slice(&src[at..at + block]);
        }
    }
}

/// Calls `f(offset, len)` for every contiguous run of a rectangular region of
/// a row-major array, in region row-major order.
///
/// Trailing axes the region covers completely are merged into one run.
pub(crate) fn for_each_run(
    sizes: &[usize],
    subsizes: &[usize],
    starts: &[usize],
    mut f: impl FnMut(usize, usize),
) {
    let d = sizes.len();
    if subsizes.contains(&0) {
        return;
    }
    if d == 0 {
        f(0, 1);
        return;
    }
    // Merge trailing fully covered axes into the run length.
    let mut split = d - 1;
    let mut run = subsizes[d - 1];
    while split > 0 && subsizes[split] == sizes[split] && starts[split] == 0 {
        split -= 1;
        run *= subsizes[split];
    }
    let strides = strides(sizes);
    let outer = &subsizes[..split];
    let mut idx = vec![0usize; split];
    let base: usize = (0..d).map(|i| starts[i] * strides[i]).sum();
    let n_runs = element_count(outer);
    for _ in 0..n_runs {
        let offset = base + idx.iter().zip(&strides).map(|(j, s)| j * s).sum::<usize>();
        f(offset, run);
        for axis in (0..split).rev() {
            idx[axis] += 1;
            if idx[axis] < outer[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}
