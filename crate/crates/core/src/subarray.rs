//! Subarray layouts: descriptors of rectangular regions of row-major arrays.
//!
//! A layout holds no element data. Layouts are built once (per plan step) and
//! reused by every exchange. [`pack`] and [`unpack`] are the codec the
//! transport uses to move a region; both serialize in region row-major order.

use crate::decomp::decompose;
use crate::dense::{element_count, DenseArray, ElemKind, Element};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubarrayLayout {
    kind: ElemKind,
    sizes: Vec<usize>,
    subsizes: Vec<usize>,
    starts: Vec<usize>,
}

impl SubarrayLayout {
    pub fn new(
        kind: ElemKind,
        sizes: &[usize],
        subsizes: &[usize],
        starts: &[usize],
    ) -> Result<Self> {
        let layout = SubarrayLayout {
            kind,
            sizes: sizes.to_vec(),
            subsizes: subsizes.to_vec(),
            starts: starts.to_vec(),
        };
        layout.validate()?;
        Ok(layout)
    }

    /// The layout covering a whole array of the given extents.
    pub fn full(kind: ElemKind, sizes: &[usize]) -> Result<Self> {
        Self::new(kind, sizes, sizes, &vec![0; sizes.len()])
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let d = self.sizes.len();
        if d == 0 {
            return Err(Error::InvalidLayout("layouts need at least one axis".into()));
        }
        if self.subsizes.len() != d || self.starts.len() != d {
            return Err(Error::InvalidLayout(format!(
                "axis counts differ: sizes {}, subsizes {}, starts {}",
                d,
                self.subsizes.len(),
                self.starts.len()
            )));
        }
        for i in 0..d {
            if self.starts[i] + self.subsizes[i] > self.sizes[i] {
                return Err(Error::InvalidLayout(format!(
                    "axis {i}: start {} + subsize {} exceeds size {}",
                    self.starts[i], self.subsizes[i], self.sizes[i]
                )));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ElemKind {
        self.kind
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn subsizes(&self) -> &[usize] {
        &self.subsizes
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn element_count(&self) -> usize {
        element_count(&self.subsizes)
    }

    /// True when both layouts describe regions of the same array that share
    /// at least one element.
    pub fn overlaps(&self, other: &SubarrayLayout) -> bool {
        if self.element_count() == 0 || other.element_count() == 0 {
            return false;
        }
        (0..self.sizes.len()).all(|i| {
            let (a0, a1) = (self.starts[i], self.starts[i] + self.subsizes[i]);
            let (b0, b1) = (other.starts[i], other.starts[i] + other.subsizes[i]);
            a0 < b1 && b0 < a1
        })
    }
}

/// Partitions axis `axis` of an array of extents `shape` into `parts`
/// balanced blocks; layout `p` selects block `p` and all of every other axis.
pub fn subarray_sequence(
    kind: ElemKind,
    shape: &[usize],
    axis: usize,
    parts: usize,
) -> Result<Vec<SubarrayLayout>> {
    if axis >= shape.len() {
        return Err(Error::AxisOutOfRange {
            axis,
            ndim: shape.len(),
        });
    }
    let mut subsizes = shape.to_vec();
    let mut starts = vec![0; shape.len()];
    (0..parts)
        .map(|p| {
            let block = decompose(shape[axis], parts, p)?;
            subsizes[axis] = block.count;
            starts[axis] = block.start;
            SubarrayLayout::new(kind, shape, &subsizes, &starts)
        })
        .collect()
}

pub fn layout_element_count(layout: &SubarrayLayout) -> usize {
    layout.element_count()
}

/// Serializes the region into a contiguous buffer.
pub fn pack<T: Element>(a: &DenseArray<T>, layout: &SubarrayLayout) -> Result<Vec<T>> {
    a.region_read(layout)
}

pub fn pack_into<T: Element>(a: &DenseArray<T>, layout: &SubarrayLayout, buf: &mut Vec<T>) -> Result<()> {
    a.region_read_into(layout, buf)
}

/// Writes a buffer produced by [`pack`] (for an equally sized region) into `a`.
pub fn unpack<T: Element>(a: &mut DenseArray<T>, layout: &SubarrayLayout, buf: &[T]) -> Result<()> {
    a.region_write(layout, buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_on_even_axis() {
        let s = subarray_sequence(ElemKind::Complex128, &[3, 12, 12], 1, 4).unwrap();
        assert_eq!(s.len(), 4);
        for (p, l) in s.iter().enumerate() {
            assert_eq!(l.subsizes(), &[3, 3, 12]);
            assert_eq!(l.starts(), &[0, 3 * p, 0]);
            assert_eq!(l.element_count(), 108);
        }
    }

    #[test]
    fn sequence_on_uneven_axis() {
        let s = subarray_sequence(ElemKind::Real64, &[4, 10, 5], 1, 3).unwrap();
        let counts: Vec<_> = s.iter().map(|l| l.subsizes()[1]).collect();
        let starts: Vec<_> = s.iter().map(|l| l.starts()[1]).collect();
        assert_eq!(counts, vec![4, 3, 3]);
        assert_eq!(starts, vec![0, 4, 7]);
    }

    #[test]
    fn single_part_is_full_array() {
        let s = subarray_sequence(ElemKind::Real64, &[4, 5], 0, 1).unwrap();
        assert_eq!(s, vec![SubarrayLayout::full(ElemKind::Real64, &[4, 5]).unwrap()]);
    }

    #[test]
    fn axis_out_of_range() {
        assert_eq!(
            subarray_sequence(ElemKind::Real64, &[4, 5], 2, 3).unwrap_err(),
            Error::AxisOutOfRange { axis: 2, ndim: 2 }
        );
    }

    #[test]
    fn element_counts() {
        assert_eq!(SubarrayLayout::full(ElemKind::Real64, &[3, 4]).unwrap().element_count(), 12);
        let l = SubarrayLayout::new(ElemKind::Real64, &[3, 4], &[0, 4], &[3, 0]).unwrap();
        assert_eq!(layout_element_count(&l), 0);
    }

    #[test]
    fn invalid_layouts() {
        assert!(SubarrayLayout::new(ElemKind::Real64, &[3, 4], &[2, 4], &[2, 0]).is_err());
        assert!(SubarrayLayout::new(ElemKind::Real64, &[3, 4], &[2], &[0, 0]).is_err());
        assert!(SubarrayLayout::new(ElemKind::Real64, &[], &[], &[]).is_err());
    }

    #[test]
    fn overlap_detection() {
        let a = SubarrayLayout::new(ElemKind::Real64, &[4, 4], &[2, 2], &[0, 0]).unwrap();
        let b = SubarrayLayout::new(ElemKind::Real64, &[4, 4], &[2, 2], &[1, 1]).unwrap();
        let c = SubarrayLayout::new(ElemKind::Real64, &[4, 4], &[2, 2], &[2, 0]).unwrap();
        let empty = SubarrayLayout::new(ElemKind::Real64, &[4, 4], &[0, 4], &[0, 0]).unwrap();
        assert!(a.overlaps(&b));
        assert!(!a.overlaps(&c));
        assert!(!a.overlaps(&empty));
    }

    #[test]
    fn packed_sequence_is_permutation() {
        let a = DenseArray::from_fn(&[3, 7, 2], |j| (j[0] * 14 + j[1] * 2 + j[2]) as f64);
        let mut all = Vec::new();
        for l in subarray_sequence(ElemKind::Real64, a.shape(), 1, 3).unwrap() {
            pack_into(&a, &l, &mut all).unwrap();
        }
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..42).map(|x| x as f64).collect::<Vec<_>>());
    }

    #[test]
    fn unpack_parts_in_any_order_rebuilds() {
        let a = DenseArray::from_fn(&[5, 4], |j| (j[0] * 4 + j[1]) as f64);
        let seq = subarray_sequence(ElemKind::Real64, a.shape(), 0, 3).unwrap();
        let parts: Vec<_> = seq.iter().map(|l| pack(&a, l).unwrap()).collect();
        let mut b = DenseArray::<f64>::zeros(a.shape());
        for p in [2, 0, 1] {
            unpack(&mut b, &seq[p], &parts[p]).unwrap();
        }
        assert_eq!(a, b);
    }
}
