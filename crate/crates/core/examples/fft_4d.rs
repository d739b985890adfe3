//! A 4D transform over a 3D process grid.

use subarray_fft::bench::random_global;
use subarray_fft::fft::{dftn_oracle, relative_error};
use subarray_fft::{transform_global, BufferScheme, Direction, Method, Plan, ProcessGrid};

fn main() -> subarray_fft::Result<()> {
    let shape = [6, 6, 6, 6];
    let dims = [2, 2, 2];
    let plan = Plan::new(&shape, &ProcessGrid::new(8, &dims)?)?;
    let (t, r) = plan.step_counts(Direction::Forward);
    println!("{t} partial transforms, {r} redistributions");

    let x = random_global(&shape, 4);
    let hat = transform_global(&x, &dims, Direction::Forward, Method::Subarray, BufferScheme::PerStage)?;
    let err = relative_error(hat.as_slice(), dftn_oracle(&x, Direction::Forward).as_slice());
    println!("relative error vs oracle: {err:.1e}");
    Ok(())
}
