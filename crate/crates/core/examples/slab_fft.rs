//! A 3D transform on a slab decomposition, driven rank by rank.

use subarray_fft::bench::random_global;
use subarray_fft::fft::{dftn_oracle, relative_error};
use subarray_fft::{gather, run_simulated, scatter, BufferScheme, Direction, GridComm, LocalPlan, Method, Plan, ProcessGrid};

fn main() -> subarray_fft::Result<()> {
    let shape = [12, 10, 9];
    let dims = [4];
    let grid = ProcessGrid::new(4, &dims)?;
    let plan = Plan::new(&shape, &grid)?;
    for step in plan.steps(Direction::Forward) {
        println!("{step:?}");
    }

    let x = random_global(&shape, 1);
    let pieces = scatter(&x, &grid, plan.input_map(Direction::Forward))?;
    let parts = run_simulated(4, |world| {
        let rank = world.rank();
        let comm = GridComm::new(world, &dims)?;
        let mut local = LocalPlan::new(&plan, &comm, Method::Subarray, BufferScheme::TwoLargest)?;
        local.execute(Direction::Forward, &pieces[rank])
    })?
    .into_iter()
    .collect::<subarray_fft::Result<Vec<_>>>()?;
    for p in &parts {
        println!("rank {} holds {:?} with axis map {:?}", p.rank(), p.local().shape(), p.axis_map());
    }
    let hat = gather(&parts)?;
    let err = relative_error(hat.as_slice(), dftn_oracle(&x, Direction::Forward).as_slice());
    println!("relative error vs oracle: {err:.1e}");
    Ok(())
}
