//! Balanced block-contiguous decompositions and Cartesian process grids.

use crate::error::{Error, Result};

/// One contiguous cell of a partitioned index set `[0, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Block {
    pub count: usize,
    pub start: usize,
}

impl Block {
    pub fn end(&self) -> usize {
        self.start + self.count
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end()
    }
}

/// Splits `n` elements into `parts` contiguous blocks whose sizes differ by at
/// most one, the larger blocks first, and returns block `index`.
pub fn decompose(n: usize, parts: usize, index: usize) -> Result<Block> {
    if parts == 0 {
        return Err(Error::InvalidArgument("cannot decompose into 0 parts".into()));
    }
    if index >= parts {
        return Err(Error::InvalidArgument(format!(
            "part index {index} out of range for {parts} parts"
        )));
    }
    let q = n / parts;
    let r = n % parts;
    Ok(if r > index {
        let count = q + 1;
        Block { count, start: count * index }
    } else {
        Block { count: q, start: q * index + r }
    })
}

/// All `parts` blocks of `n`, in order.
pub fn blocks(n: usize, parts: usize) -> Result<Vec<Block>> {
    (0..parts).map(|p| decompose(n, parts, p)).collect()
}

/// Balanced factorization of `nprocs` into `ndims` non-increasing factors.
///
/// Among all such factorizations this returns the one with the smallest
/// spread `max - min`; ties go to the lexicographically smallest sequence.
pub fn dims_create(nprocs: usize, ndims: usize) -> Result<Vec<usize>> {
    if nprocs == 0 || ndims == 0 {
        return Err(Error::InvalidArgument(format!(
            "dims_create needs nprocs > 0 and ndims > 0, got ({nprocs}, {ndims})"
        )));
    }
    let mut best: Option<(usize, Vec<usize>)> = None;
    let mut current = Vec::with_capacity(ndims);
    search_factorizations(nprocs, ndims, nprocs, &mut current, &mut best);
    Ok(best.expect("the sequence [nprocs, 1, ..] always exists").1)
}

fn search_factorizations(
    remaining: usize,
    slots: usize,
    max_factor: usize,
    current: &mut Vec<usize>,
    best: &mut Option<(usize, Vec<usize>)>,
) {
    if slots == 0 {
        if remaining == 1 {
            let spread = current[0] - current[current.len() - 1];
            let better = match best {
                None => true,
                Some((s, seq)) => spread < *s || (spread == *s && current < seq),
            };
            if better {
                *best = Some((spread, current.clone()));
            }
        }
        return;
    }
    for f in (1..=max_factor.min(remaining)).rev() {
        if remaining % f == 0 {
            current.push(f);
            search_factorizations(remaining / f, slots - 1, f, current, best);
            current.pop();
        }
    }
}

/// A Cartesian arrangement of ranks with row-major rank numbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessGrid {
    dims: Vec<usize>,
    total: usize,
}

impl ProcessGrid {
    pub fn new(nprocs: usize, dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.iter().product::<usize>() != nprocs || nprocs == 0 {
            return Err(Error::GridMismatch {
                dims: dims.to_vec(),
                nprocs,
            });
        }
        Ok(ProcessGrid {
            dims: dims.to_vec(),
            total: nprocs,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndims(&self) -> usize {
        self.dims.len()
    }

    pub fn total_ranks(&self) -> usize {
        self.total
    }

    pub fn coords(&self, rank: usize) -> Vec<usize> {
        assert!(rank < self.total, "rank {rank} outside grid of {}", self.total);
        let mut coords = vec![0; self.dims.len()];
        let mut rest = rank;
        for i in (0..self.dims.len()).rev() {
            coords[i] = rest % self.dims[i];
            rest /= self.dims[i];
        }
        coords
    }

    pub fn rank_of(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&c, &m)| {
                debug_assert!(c < m);
                acc * m + c
            })
    }

    /// Ranks sharing every coordinate with `rank` except along `direction`,
    /// ordered by that coordinate, and the position of `rank` among them.
    pub fn subgroup(&self, direction: usize, rank: usize) -> (Vec<usize>, usize) {
        let mut coords = self.coords(rank);
        let position = coords[direction];
        let members = (0..self.dims[direction])
            .map(|c| {
                coords[direction] = c;
                self.rank_of(&coords)
            })
            .collect();
        (members, position)
    }

    /// Identifies which direction-`direction` subgroup a rank belongs to.
    pub fn subgroup_color(&self, direction: usize, rank: usize) -> usize {
        let mut coords = self.coords(rank);
        coords[direction] = 0;
        self.rank_of(&coords)
    }
}
