//! Distributed arrays and global redistribution between alignments.
//!
//! A global redistribution moves an array that is complete (aligned) in axis
//! `v` and block-distributed in axis `w` over a process group to the opposite
//! arrangement: complete in `w`, distributed in `v`. Every element keeps its
//! global multi-index and axes other than `v` and `w` are untouched.
//!
//! Two implementations exist:
//!
//! - [`exchange`]: one generalized all-to-all over subarray layouts. Layout
//!   `q` of the send side selects block `q` of axis `v` of the input; layout
//!   `p` of the receive side selects block `p` of axis `w` of the output.
//!   No local remapping happens outside the transport's codec.
//! - [`exchange_baseline`]: the traditional route. The input is viewed as
//!   `(outer, M, chunk)`, the two leading axes are swapped so every peer's
//!   chunk is contiguous, the chunks go through a contiguous all-to-all, and
//!   the received `(M, outer, chunk)` buffer is swapped back. Uneven extents
//!   use per-peer counts and displacements instead.
//!
//! On a Cartesian grid, a redistribution along grid direction `i` is an
//! exchange within each direction-`i` subgroup, run concurrently.

use num_complex::Complex64;

use crate::decomp::{decompose, Block, ProcessGrid};
use crate::dense::{element_count, transpose_01_into, DenseArray, Element};
use crate::error::{Error, Result};
use crate::subarray::{subarray_sequence, SubarrayLayout};
use crate::transport::Group;

/// Per array axis: the grid direction distributing it, or `None` when the
/// axis is held in full by every rank.
pub type AxisMap = Vec<Option<usize>>;

/// Redistribution strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Single generalized all-to-all over subarray layouts.
    Subarray,
    /// Local transpose into contiguous chunks plus contiguous all-to-all.
    Pack,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Subarray => "subarray",
            Method::Pack => "pack",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subarray" => Ok(Method::Subarray),
            "pack" => Ok(Method::Pack),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

pub(crate) fn validate_axis_map(ndim: usize, grid: &ProcessGrid, axis_map: &[Option<usize>]) -> Result<()> {
    if axis_map.len() != ndim {
        return Err(Error::DistributionMismatch(format!(
            "axis map has {} entries for {ndim} axes",
            axis_map.len()
        )));
    }
    let mut used = vec![false; grid.ndims()];
    for dir in axis_map.iter().flatten() {
        if *dir >= grid.ndims() {
            return Err(Error::DistributionMismatch(format!(
                "direction {dir} outside {}-dimensional grid",
                grid.ndims()
            )));
        }
        if std::mem::replace(&mut used[*dir], true) {
            return Err(Error::DistributionMismatch(format!(
                "direction {dir} distributes more than one axis"
            )));
        }
    }
    if axis_map.iter().all(Option::is_some) {
        return Err(Error::DistributionMismatch("no local axis left".into()));
    }
    Ok(())
}

/// The blocks of every axis owned by the rank at `coords`.
pub fn local_blocks(
    global_shape: &[usize],
    grid: &ProcessGrid,
    coords: &[usize],
    axis_map: &[Option<usize>],
) -> Vec<Block> {
    global_shape
        .iter()
        .zip(axis_map)
        .map(|(&n, dir)| match dir {
            Some(i) => decompose(n, grid.dims()[*i], coords[*i]).expect("coords inside grid"),
            None => Block { count: n, start: 0 },
        })
        .collect()
}

/// One rank's share of a block-distributed global array.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributedArray<T: Element = Complex64> {
    global_shape: Vec<usize>,
    grid: ProcessGrid,
    rank: usize,
    axis_map: AxisMap,
    local: DenseArray<T>,
}

impl<T: Element> DistributedArray<T> {
    pub fn zeros(global_shape: &[usize], grid: &ProcessGrid, rank: usize, axis_map: &[Option<usize>]) -> Result<Self> {
        validate_axis_map(global_shape.len(), grid, axis_map)?;
        let shape = Self::local_shape_for(global_shape, grid, rank, axis_map);
        Ok(DistributedArray {
            global_shape: global_shape.to_vec(),
            grid: grid.clone(),
            rank,
            axis_map: axis_map.to_vec(),
            local: DenseArray::zeros(&shape),
        })
    }

    pub fn from_local(
        global_shape: &[usize],
        grid: &ProcessGrid,
        rank: usize,
        axis_map: &[Option<usize>],
        local: DenseArray<T>,
    ) -> Result<Self> {
        validate_axis_map(global_shape.len(), grid, axis_map)?;
        let expected = Self::local_shape_for(global_shape, grid, rank, axis_map);
        if local.shape() != expected.as_slice() {
            return Err(Error::ShapeMismatch {
                expected,
                actual: local.shape().to_vec(),
            });
        }
        Ok(DistributedArray {
            global_shape: global_shape.to_vec(),
            grid: grid.clone(),
            rank,
            axis_map: axis_map.to_vec(),
            local,
        })
    }

    /// Cuts this rank's blocks out of a complete global array.
    pub fn from_global(global: &DenseArray<T>, grid: &ProcessGrid, rank: usize, axis_map: &[Option<usize>]) -> Result<Self> {
        validate_axis_map(global.ndim(), grid, axis_map)?;
        let blocks = local_blocks(global.shape(), grid, &grid.coords(rank), axis_map);
        let subsizes: Vec<usize> = blocks.iter().map(|b| b.count).collect();
        let starts: Vec<usize> = blocks.iter().map(|b| b.start).collect();
        let layout = SubarrayLayout::new(T::KIND, global.shape(), &subsizes, &starts)?;
        let local = DenseArray::from_vec(&subsizes, global.region_read(&layout)?)?;
        Self::from_local(global.shape(), grid, rank, axis_map, local)
    }

    pub fn local_shape_for(global_shape: &[usize], grid: &ProcessGrid, rank: usize, axis_map: &[Option<usize>]) -> Vec<usize> {
        local_blocks(global_shape, grid, &grid.coords(rank), axis_map)
            .iter()
            .map(|b| b.count)
            .collect()
    }

    pub fn global_shape(&self) -> &[usize] {
        &self.global_shape
    }

    pub fn grid(&self) -> &ProcessGrid {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn coords(&self) -> Vec<usize> {
        self.grid.coords(self.rank)
    }

    pub fn axis_map(&self) -> &[Option<usize>] {
        &self.axis_map
    }

    pub fn local(&self) -> &DenseArray<T> {
        &self.local
    }

    pub fn local_mut(&mut self) -> &mut DenseArray<T> {
        &mut self.local
    }

    pub fn into_local(self) -> DenseArray<T> {
        self.local
    }

    /// Global index range owned along every axis.
    pub fn blocks(&self) -> Vec<Block> {
        local_blocks(&self.global_shape, &self.grid, &self.coords(), &self.axis_map)
    }
}

/// Checks the shape contract of an exchange `A (aligned v) -> B (aligned w)`
/// for the member at position `rank` of a group of `m`.
fn check_exchange_shapes(a: &[usize], v: usize, b: &[usize], w: usize, m: usize, rank: usize) -> Result<()> {
    let d = a.len();
    if b.len() != d {
        return Err(Error::ShapeMismatch {
            expected: a.to_vec(),
            actual: b.to_vec(),
        });
    }
    for axis in [v, w] {
        if axis >= d {
            return Err(Error::AxisOutOfRange { axis, ndim: d });
        }
    }
    if v == w {
        return Err(Error::InvalidArgument(format!("exchange needs distinct axes, got v = w = {v}")));
    }
    let mut expected = a.to_vec();
    expected[v] = decompose(a[v], m, rank)?.count;
    expected[w] = b[w];
    let own_w = decompose(b[w], m, rank)?.count;
    if b != expected.as_slice() || a[w] != own_w {
        let mut a_expected = b.to_vec();
        a_expected[w] = own_w;
        a_expected[v] = a[v];
        return Err(Error::InvalidArgument(format!(
            "incompatible exchange shapes {a:?} (aligned {v}) -> {b:?} (aligned {w}) on member {rank} of {m}; \
             expected input {a_expected:?} and output {expected:?}"
        )));
    }
    Ok(())
}

/// Subarray layouts of one exchange, built once and reused.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeLayouts {
    pub send: Vec<SubarrayLayout>,
    pub recv: Vec<SubarrayLayout>,
}

impl ExchangeLayouts {
    pub fn new<T: Element>(a_shape: &[usize], v: usize, b_shape: &[usize], w: usize, group_size: usize) -> Result<Self> {
        Ok(ExchangeLayouts {
            send: subarray_sequence(T::KIND, a_shape, v, group_size)?,
            recv: subarray_sequence(T::KIND, b_shape, w, group_size)?,
        })
    }
}

/// Redistributes `a` (aligned in `v`, distributed over `group` in `w`) into
/// `b` (aligned in `w`, distributed in `v`) with one generalized all-to-all.
pub fn exchange<T: Element>(group: &Group, a: &DenseArray<T>, v: usize, b: &mut DenseArray<T>, w: usize) -> Result<()> {
    check_exchange_shapes(a.shape(), v, b.shape(), w, group.size(), group.rank())?;
    let layouts = ExchangeLayouts::new::<T>(a.shape(), v, b.shape(), w, group.size())?;
    exchange_with(group, &layouts, a, b)
}

/// [`exchange`] with precomputed layouts.
pub fn exchange_with<T: Element>(group: &Group, layouts: &ExchangeLayouts, a: &DenseArray<T>, b: &mut DenseArray<T>) -> Result<()> {
    group.alltoallw(a, &layouts.send, b, &layouts.recv)
}

/// Same contract as [`exchange`], implemented by local transposition into
/// contiguous per-peer chunks followed by `alltoall` (or `alltoallv` when
/// either redistributed extent is not divisible by the group size).
pub fn exchange_baseline<T: Element>(group: &Group, a: &DenseArray<T>, v: usize, b: &mut DenseArray<T>, w: usize) -> Result<()> {
    let m = group.size();
    check_exchange_shapes(a.shape(), v, b.shape(), w, m, group.rank())?;
    let (nv, nw) = (a.shape()[v], b.shape()[w]);
    let outer_a = element_count(&a.shape()[..v]);
    let inner_a = element_count(&a.shape()[v + 1..]);
    let outer_b = element_count(&b.shape()[..w]);
    let inner_b = element_count(&b.shape()[w + 1..]);

    if nv % m == 0 && nw % m == 0 {
        // (outer, M, n·inner) -> (M, outer, n·inner): peer q's chunk is contiguous.
        let mut send = Vec::with_capacity(a.len());
        transpose_01_into(a.as_slice(), outer_a, m, nv / m * inner_a, &mut send);
        let mut recv = vec![T::default(); b.len()];
        group.alltoall(&send, &mut recv)?;
        // (M, outer, n·inner) -> (outer, M, n·inner) is exactly B.
        let mut out = Vec::with_capacity(b.len());
        transpose_01_into(&recv, m, outer_b, nw / m * inner_b, &mut out);
        b.as_mut_slice().copy_from_slice(&out);
        return Ok(());
    }

    let send_blocks: Vec<Block> = (0..m).map(|q| decompose(nv, m, q)).collect::<Result<_>>()?;
    let recv_blocks: Vec<Block> = (0..m).map(|p| decompose(nw, m, p)).collect::<Result<_>>()?;
    let send_counts: Vec<usize> = send_blocks.iter().map(|blk| outer_a * blk.count * inner_a).collect();
    let recv_counts: Vec<usize> = recv_blocks.iter().map(|blk| outer_b * blk.count * inner_b).collect();
    let send_displs = prefix_sums(&send_counts);
    let recv_displs = prefix_sums(&recv_counts);

    // Ragged transpose: for each peer, its slice of axis v from every outer row.
    let src = a.as_slice();
    let mut send = Vec::with_capacity(a.len());
    for blk in &send_blocks {
        let run = blk.count * inner_a;
        for o in 0..outer_a {
            let at = (o * nv + blk.start) * inner_a;
            send.extend_from_slice(&src[at..at + run]);
        }
    }
    let mut recv = vec![T::default(); b.len()];
    group.alltoallv(&send, &send_counts, &send_displs, &mut recv, &recv_counts, &recv_displs)?;

    let dst = b.as_mut_slice();
    for (blk, displ) in recv_blocks.iter().zip(&recv_displs) {
        let run = blk.count * inner_b;
        for o in 0..outer_b {
            let from = displ + o * run;
            let at = (o * nw + blk.start) * inner_b;
            dst[at..at + run].copy_from_slice(&recv[from..from + run]);
        }
    }
    Ok(())
}

fn prefix_sums(counts: &[usize]) -> Vec<usize> {
    counts
        .iter()
        .scan(0, |acc, &c| {
            let start = *acc;
            *acc += c;
            Some(start)
        })
        .collect()
}

/// A rank's view of a Cartesian process grid: the world group plus one
/// subgroup per grid direction.
#[derive(Debug)]
pub struct GridComm {
    grid: ProcessGrid,
    world: Group,
    directions: Vec<Group>,
}

impl GridComm {
    /// Collective over `world`: builds the grid and splits out the subgroups.
    pub fn new(world: Group, dims: &[usize]) -> Result<Self> {
        let grid = ProcessGrid::new(world.size(), dims)?;
        let rank = world.rank();
        let coords = grid.coords(rank);
        let mut directions = Vec::with_capacity(dims.len());
        for i in 0..dims.len() {
            let sub = world.split(grid.subgroup_color(i, rank))?;
            debug_assert_eq!(sub.rank(), coords[i]);
            debug_assert_eq!(sub.size(), dims[i]);
            directions.push(sub);
        }
        Ok(GridComm {
            grid,
            world,
            directions,
        })
    }

    pub fn grid(&self) -> &ProcessGrid {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.world.rank()
    }

    pub fn coords(&self) -> Vec<usize> {
        self.grid.coords(self.rank())
    }

    pub fn world(&self) -> &Group {
        &self.world
    }

    pub fn direction(&self, i: usize) -> &Group {
        &self.directions[i]
    }
}

/// Realigns `u` from axis `v` to axis `w` within the direction-`direction`
/// subgroups: `v` must be local and `w` distributed along `direction`;
/// afterwards `w` is local and `v` is distributed along `direction`.
pub fn redistribute<T: Element>(
    comm: &GridComm,
    u: &DistributedArray<T>,
    v: usize,
    w: usize,
    direction: usize,
    method: Method,
) -> Result<DistributedArray<T>> {
    let map = u.axis_map();
    if v >= map.len() || w >= map.len() {
        return Err(Error::AxisOutOfRange {
            axis: v.max(w),
            ndim: map.len(),
        });
    }
    if map[v].is_some() || map[w] != Some(direction) {
        return Err(Error::DistributionMismatch(format!(
            "redistribution {v}->{w} along direction {direction} needs axis {v} local and axis {w} \
             distributed along {direction}, found {map:?}"
        )));
    }
    if u.grid() != comm.grid() || u.rank() != comm.rank() {
        return Err(Error::DistributionMismatch("array belongs to a different grid or rank".into()));
    }
    let mut new_map = map.to_vec();
    new_map[v] = Some(direction);
    new_map[w] = None;
    let mut out = DistributedArray::zeros(u.global_shape(), u.grid(), u.rank(), &new_map)?;
    let group = comm.direction(direction);
    match method {
        Method::Subarray => exchange(group, u.local(), v, out.local_mut(), w)?,
        Method::Pack => exchange_baseline(group, u.local(), v, out.local_mut(), w)?,
    }
    Ok(out)
}
