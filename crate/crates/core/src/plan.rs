//! Parallel FFT plans for `d`-dimensional arrays on `m`-dimensional grids.
//!
//! The input is distributed with grid direction `i` holding array axis `i`
//! for `i < m`; axes `m..d` are local. The forward program transforms the
//! local axes from last to first, then for `i = m-1 .. 0` realigns from axis
//! `i+1` to axis `i` within the direction-`i` subgroups and transforms axis
//! `i`. It ends with axis 0 local and axis `i+1` distributed on direction
//! `i`. The backward program runs the same steps in reverse with inverse
//! transforms. A slab (`m = 1`), pencil (`m = 2`) and any higher grid all use
//! the same schedule.
//!
//! Intermediate local arrays live in preallocated work buffers. The default
//! [`BufferScheme::TwoLargest`] uses two buffers sized to the two largest
//! stages and alternates between them; [`BufferScheme::PerStage`] allocates
//! one buffer per stage shape.

use num_complex::Complex64;

use crate::bench::{Clock, StepTimes};
use crate::decomp::ProcessGrid;
use crate::dense::{element_count, DenseArray, Element};
use crate::error::{Error, Result};
use crate::fft::{Direction, PlanCache};
use crate::redistribute::{
    exchange_baseline, exchange_with, local_blocks, validate_axis_map, AxisMap, DistributedArray,
    ExchangeLayouts, GridComm, Method,
};
use crate::subarray::SubarrayLayout;
use crate::transport::run_simulated;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlanStep {
    PartialTransform {
        axis: usize,
        dir: Direction,
    },
    /// Realign from `from_axis` to `to_axis` within the subgroups of grid
    /// direction `direction`.
    Redistribute {
        direction: usize,
        from_axis: usize,
        to_axis: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    global_shape: Vec<usize>,
    grid: ProcessGrid,
    forward: Vec<PlanStep>,
    backward: Vec<PlanStep>,
    /// Distribution of each alignment stage, input first.
    stages: Vec<AxisMap>,
}

impl Plan {
    pub fn new(global_shape: &[usize], grid: &ProcessGrid) -> Result<Self> {
        let d = global_shape.len();
        let m = grid.ndims();
        if d < 2 || m > d - 1 {
            return Err(Error::InvalidArgument(format!(
                "a {d}-dimensional array needs a grid of at most {} dimensions, got {m}",
                d.saturating_sub(1)
            )));
        }
        let mut forward = Vec::with_capacity(d + m);
        for axis in (m..d).rev() {
            forward.push(PlanStep::PartialTransform {
                axis,
                dir: Direction::Forward,
            });
        }
        for i in (0..m).rev() {
            forward.push(PlanStep::Redistribute {
                direction: i,
                from_axis: i + 1,
                to_axis: i,
            });
            forward.push(PlanStep::PartialTransform {
                axis: i,
                dir: Direction::Forward,
            });
        }
        let backward = forward
            .iter()
            .rev()
            .map(|step| match *step {
                PlanStep::PartialTransform { axis, dir } => PlanStep::PartialTransform {
                    axis,
                    dir: dir.inverse(),
                },
                PlanStep::Redistribute {
                    direction,
                    from_axis,
                    to_axis,
                } => PlanStep::Redistribute {
                    direction,
                    from_axis: to_axis,
                    to_axis: from_axis,
                },
            })
            .collect();

        let mut map: AxisMap = (0..d).map(|a| (a < m).then_some(a)).collect();
        let mut stages = vec![map.clone()];
        for i in (0..m).rev() {
            map[i + 1] = Some(i);
            map[i] = None;
            stages.push(map.clone());
        }
        for s in &stages {
            validate_axis_map(d, grid, s)?;
        }
        Ok(Plan {
            global_shape: global_shape.to_vec(),
            grid: grid.clone(),
            forward,
            backward,
            stages,
        })
    }

    pub fn global_shape(&self) -> &[usize] {
        &self.global_shape
    }

    pub fn grid(&self) -> &ProcessGrid {
        &self.grid
    }

    pub fn steps(&self, dir: Direction) -> &[PlanStep] {
        match dir {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        }
    }

    /// Number of partial transforms and of redistributions in one direction.
    pub fn step_counts(&self, dir: Direction) -> (usize, usize) {
        let steps = self.steps(dir);
        let transforms = steps
            .iter()
            .filter(|s| matches!(s, PlanStep::PartialTransform { .. }))
            .count();
        (transforms, steps.len() - transforms)
    }

    pub fn stage_maps(&self) -> &[AxisMap] {
        &self.stages
    }

    /// Distribution expected by a transform in `dir`.
    pub fn input_map(&self, dir: Direction) -> &AxisMap {
        match dir {
            Direction::Forward => &self.stages[0],
            Direction::Backward => self.stages.last().unwrap(),
        }
    }

    pub fn output_map(&self, dir: Direction) -> &AxisMap {
        self.input_map(dir.inverse())
    }

    /// Local extents of every stage on `rank`.
    pub fn stage_shapes(&self, rank: usize) -> Vec<Vec<usize>> {
        self.stages
            .iter()
            .map(|map| DistributedArray::<Complex64>::local_shape_for(&self.global_shape, &self.grid, rank, map))
            .collect()
    }
}

pub fn make_plan(global_shape: &[usize], grid: &ProcessGrid) -> Result<Plan> {
    Plan::new(global_shape, grid)
}

/// How intermediate stages are mapped onto work buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BufferScheme {
    #[default]
    TwoLargest,
    PerStage,
}

/// A plan bound to one rank's grid communicators, with cached subarray
/// layouts, FFT plans and preallocated work buffers.
pub struct LocalPlan<'c> {
    plan: Plan,
    comm: &'c GridComm,
    method: Method,
    stage_shapes: Vec<Vec<usize>>,
    /// Layouts for stage k -> k+1 and for stage k+1 -> k.
    forward_layouts: Vec<ExchangeLayouts>,
    backward_layouts: Vec<ExchangeLayouts>,
    buffers: Vec<Vec<Complex64>>,
    stage_buffer: Vec<usize>,
    ffts: PlanCache,
}

impl<'c> LocalPlan<'c> {
    pub fn new(plan: &Plan, comm: &'c GridComm, method: Method, scheme: BufferScheme) -> Result<Self> {
        if plan.grid() != comm.grid() {
            return Err(Error::DistributionMismatch("plan and communicator grids differ".into()));
        }
        let m = plan.grid().ndims();
        let stage_shapes = plan.stage_shapes(comm.rank());
        let mut forward_layouts = Vec::with_capacity(m);
        let mut backward_layouts = Vec::with_capacity(m);
        for k in 0..m {
            let i = m - 1 - k;
            let group_size = plan.grid().dims()[i];
            let (before, after) = (&stage_shapes[k], &stage_shapes[k + 1]);
            forward_layouts.push(ExchangeLayouts::new::<Complex64>(before, i + 1, after, i, group_size)?);
            backward_layouts.push(ExchangeLayouts::new::<Complex64>(after, i, before, i + 1, group_size)?);
        }

        let sizes: Vec<usize> = stage_shapes.iter().map(|s| element_count(s)).collect();
        let (capacities, stage_buffer) = match scheme {
            BufferScheme::PerStage => (sizes.clone(), (0..sizes.len()).collect()),
            BufferScheme::TwoLargest => {
                let largest = (0..sizes.len()).max_by_key(|&k| (sizes[k], std::cmp::Reverse(k))).unwrap();
                let mut sorted = sizes.clone();
                sorted.sort_unstable_by(|a, b| b.cmp(a));
                // Every stage of the other parity is at most the second largest.
                let second = sorted[1];
                let assignment = (0..sizes.len()).map(|k| usize::from(k % 2 != largest % 2)).collect();
                (vec![sizes[largest], second], assignment)
            }
        };
        let buffers = capacities.iter().map(|&c| Vec::with_capacity(c)).collect();
        Ok(LocalPlan {
            plan: plan.clone(),
            comm,
            method,
            stage_shapes,
            forward_layouts,
            backward_layouts,
            buffers,
            stage_buffer,
            ffts: PlanCache::new(),
        })
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    /// Capacity in elements of every work buffer.
    pub fn buffer_capacities(&self) -> Vec<usize> {
        self.buffers.iter().map(Vec::capacity).collect()
    }

    /// Work buffer used by each stage.
    pub fn stage_buffers(&self) -> &[usize] {
        &self.stage_buffer
    }

    pub fn execute(&mut self, dir: Direction, input: &DistributedArray) -> Result<DistributedArray> {
        self.execute_timed(dir, input, None, &mut StepTimes::default())
    }

    /// Runs the program in `dir`, adding the time spent in redistributions
    /// and in partial transforms to `times` when a clock is given.
    pub fn execute_timed(
        &mut self,
        dir: Direction,
        input: &DistributedArray,
        clock: Option<&dyn Clock>,
        times: &mut StepTimes,
    ) -> Result<DistributedArray> {
        let rank = self.comm.rank();
        let last = self.stage_shapes.len() - 1;
        let (mut stage, end) = match dir {
            Direction::Forward => (0, last),
            Direction::Backward => (last, 0),
        };
        if input.axis_map() != self.plan.stages[stage].as_slice()
            || input.global_shape() != self.plan.global_shape()
            || input.grid() != self.plan.grid()
            || input.rank() != rank
        {
            return Err(Error::DistributionMismatch(format!(
                "{dir:?} transform expects distribution {:?}, got {:?}",
                self.plan.stages[stage],
                input.axis_map()
            )));
        }
        {
            let buf = &mut self.buffers[self.stage_buffer[stage]];
            buf.clear();
            buf.extend_from_slice(input.local().as_slice());
        }
        let now = |c: Option<&dyn Clock>| c.map_or(0.0, |c| c.now(rank));

        for step in self.plan.steps(dir).to_vec() {
            match step {
                PlanStep::PartialTransform { axis, dir } => {
                    let t0 = now(clock);
                    let shape = &self.stage_shapes[stage];
                    let buf = &mut self.buffers[self.stage_buffer[stage]];
                    self.ffts.transform_axis(buf, shape, axis, dir)?;
                    times.transform += now(clock) - t0;
                }
                PlanStep::Redistribute {
                    direction,
                    from_axis,
                    to_axis,
                } => {
                    let t0 = now(clock);
                    let next = if dir == Direction::Forward { stage + 1 } else { stage - 1 };
                    let (src_idx, dst_idx) = (self.stage_buffer[stage], self.stage_buffer[next]);
                    assert_ne!(src_idx, dst_idx, "a redistribution's input and output share a buffer");
                    let src = DenseArray::from_vec(&self.stage_shapes[stage], std::mem::take(&mut self.buffers[src_idx]))?;
                    let mut dst_vec = std::mem::take(&mut self.buffers[dst_idx]);
                    dst_vec.clear();
                    dst_vec.resize(element_count(&self.stage_shapes[next]), Complex64::default());
                    let mut dst = DenseArray::from_vec(&self.stage_shapes[next], dst_vec)?;
                    let group = self.comm.direction(direction);
                    let result = match self.method {
                        Method::Subarray => {
                            let layouts = match dir {
                                Direction::Forward => &self.forward_layouts[stage],
                                Direction::Backward => &self.backward_layouts[next],
                            };
                            exchange_with(group, layouts, &src, &mut dst)
                        }
                        Method::Pack => exchange_baseline(group, &src, from_axis, &mut dst, to_axis),
                    };
                    self.buffers[src_idx] = src.into_vec();
                    self.buffers[dst_idx] = dst.into_vec();
                    result?;
                    stage = next;
                    times.redistribute += now(clock) - t0;
                }
            }
        }
        debug_assert_eq!(stage, end);
        let local = DenseArray::from_vec(&self.stage_shapes[end], self.buffers[self.stage_buffer[end]].clone())?;
        DistributedArray::from_local(
            self.plan.global_shape(),
            self.plan.grid(),
            rank,
            &self.plan.stages[end],
            local,
        )
    }
}

/// Assembles a global array from the pieces held by every rank.
pub fn gather<T: Element>(parts: &[DistributedArray<T>]) -> Result<DenseArray<T>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("gather needs at least one part".into()))?;
    let (shape, grid, map) = (first.global_shape(), first.grid(), first.axis_map());
    if parts.len() != grid.total_ranks() {
        return Err(Error::DistributionMismatch(format!(
            "gather got {} parts for {} ranks",
            parts.len(),
            grid.total_ranks()
        )));
    }
    let mut global = DenseArray::zeros(shape);
    let mut seen = vec![false; parts.len()];
    for part in parts {
        if part.global_shape() != shape || part.grid() != grid || part.axis_map() != map {
            return Err(Error::DistributionMismatch("parts disagree on distribution".into()));
        }
        if std::mem::replace(&mut seen[part.rank()], true) {
            return Err(Error::DistributionMismatch(format!("rank {} appears twice", part.rank())));
        }
        let blocks = part.blocks();
        let subsizes: Vec<usize> = blocks.iter().map(|b| b.count).collect();
        let starts: Vec<usize> = blocks.iter().map(|b| b.start).collect();
        let layout = SubarrayLayout::new(T::KIND, shape, &subsizes, &starts)?;
        global.region_write(&layout, part.local().as_slice())?;
    }
    Ok(global)
}

/// Splits a global array into one piece per rank.
pub fn scatter<T: Element>(global: &DenseArray<T>, grid: &ProcessGrid, axis_map: &[Option<usize>]) -> Result<Vec<DistributedArray<T>>> {
    (0..grid.total_ranks())
        .map(|rank| DistributedArray::from_global(global, grid, rank, axis_map))
        .collect()
}

/// Total number of elements held by all ranks at every stage of `plan`.
pub fn stage_totals(plan: &Plan) -> Vec<usize> {
    let grid = plan.grid();
    plan.stage_maps()
        .iter()
        .map(|map| {
            (0..grid.total_ranks())
                .map(|r| {
                    local_blocks(plan.global_shape(), grid, &grid.coords(r), map)
                        .iter()
                        .map(|b| b.count)
                        .product::<usize>()
                })
                .sum()
        })
        .collect()
}

/// Scatters `global` over a simulated world with grid `dims`, runs the
/// parallel transform in `dir` and gathers the result.
pub fn transform_global(
    global: &DenseArray<Complex64>,
    dims: &[usize],
    dir: Direction,
    method: Method,
    scheme: BufferScheme,
) -> Result<DenseArray<Complex64>> {
    let nprocs = dims.iter().product();
    let grid = ProcessGrid::new(nprocs, dims)?;
    let plan = Plan::new(global.shape(), &grid)?;
    let pieces = scatter(global, &grid, plan.input_map(dir))?;
    let parts = run_simulated(nprocs, |world| -> Result<DistributedArray> {
        let rank = world.rank();
        let comm = GridComm::new(world, dims)?;
        let mut local = LocalPlan::new(&plan, &comm, method, scheme)?;
        local.execute(dir, &pieces[rank])
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    gather(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    use Direction::{Backward, Forward};
    use PlanStep::{PartialTransform as T, Redistribute as R};

    #[test]
    fn slab_steps() {
        let grid = ProcessGrid::new(4, &[4]).unwrap();
        let plan = Plan::new(&[8, 8, 8], &grid).unwrap();
        assert_eq!(
            plan.steps(Forward),
            &[
                T { axis: 2, dir: Forward },
                T { axis: 1, dir: Forward },
                R { direction: 0, from_axis: 1, to_axis: 0 },
                T { axis: 0, dir: Forward },
            ]
        );
        assert_eq!(plan.output_map(Forward), &vec![None, Some(0), None]);
    }

    #[test]
    fn pencil_steps_and_shapes() {
        let grid = ProcessGrid::new(12, &[3, 4]).unwrap();
        let plan = Plan::new(&[12, 12, 12], &grid).unwrap();
        assert_eq!(
            plan.steps(Forward),
            &[
                T { axis: 2, dir: Forward },
                R { direction: 1, from_axis: 2, to_axis: 1 },
                T { axis: 1, dir: Forward },
                R { direction: 0, from_axis: 1, to_axis: 0 },
                T { axis: 0, dir: Forward },
            ]
        );
        assert_eq!(
            plan.steps(Backward),
            &[
                T { axis: 0, dir: Backward },
                R { direction: 0, from_axis: 0, to_axis: 1 },
                T { axis: 1, dir: Backward },
                R { direction: 1, from_axis: 1, to_axis: 2 },
                T { axis: 2, dir: Backward },
            ]
        );
        // (N0/P0, N1/P1, N2) -> (N0/P0, N1, N2/P1) -> (N0, N1/P0, N2/P1)
        assert_eq!(plan.stage_shapes(11), vec![vec![4, 3, 12], vec![4, 12, 3], vec![12, 4, 3]]);
    }

    #[test]
    fn grid_too_large() {
        let grid = ProcessGrid::new(8, &[2, 2, 2]).unwrap();
        assert!(Plan::new(&[4, 4, 4], &grid).is_err());
        let grid = ProcessGrid::new(2, &[2]).unwrap();
        assert!(Plan::new(&[4], &grid).is_err());
    }

    #[test]
    fn four_d_step_counts() {
        let grid = ProcessGrid::new(8, &[2, 2, 2]).unwrap();
        let plan = Plan::new(&[6, 6, 6, 6], &grid).unwrap();
        assert_eq!(plan.steps(Forward).len(), 7);
        assert_eq!(plan.step_counts(Forward), (4, 3));
        assert_eq!(plan.step_counts(Backward), (4, 3));
    }

    #[test]
    fn stage_totals_conserve_elements() {
        let grid = ProcessGrid::new(6, &[2, 3]).unwrap();
        let plan = Plan::new(&[5, 7, 6, 4], &grid).unwrap();
        assert!(stage_totals(&plan).iter().all(|&t| t == 5 * 7 * 6 * 4));
    }

    #[test]
    fn scatter_gather_identity() {
        let grid = ProcessGrid::new(12, &[3, 4]).unwrap();
        let global = DenseArray::from_fn(&[12, 12, 12], |j| Complex64::new((j[0] * 144 + j[1] * 12 + j[2]) as f64, 0.0));
        let parts = scatter(&global, &grid, &[Some(0), Some(1), None]).unwrap();
        assert_eq!(gather(&parts).unwrap(), global);
        assert!(gather(&parts[1..]).is_err());
    }

    #[test]
    fn gather_single_rank_is_local() {
        let grid = ProcessGrid::new(1, &[1]).unwrap();
        let global = DenseArray::from_fn(&[2, 3], |j| (j[0] + j[1]) as f64);
        let parts = scatter(&global, &grid, &[Some(0), None]).unwrap();
        assert_eq!(parts[0].local(), &global);
        assert_eq!(gather(&parts).unwrap(), global);
    }
}
