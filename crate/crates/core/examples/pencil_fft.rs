//! Pencil decomposition on a 3x4 grid, with uneven extents.

use subarray_fft::bench::random_global;
use subarray_fft::fft::relative_error;
use subarray_fft::{transform_global, BufferScheme, Direction, Method, Plan, ProcessGrid};

fn main() -> subarray_fft::Result<()> {
    let shape = [8, 9, 10];
    let dims = [3, 4];
    let plan = Plan::new(&shape, &ProcessGrid::new(12, &dims)?)?;
    println!("stage maps: {:?}", plan.stage_maps());
    println!("rank 11 stage shapes: {:?}", plan.stage_shapes(11));

    let x = random_global(&shape, 3);
    let hat = transform_global(&x, &dims, Direction::Forward, Method::Subarray, BufferScheme::TwoLargest)?;
    let back = transform_global(&hat, &dims, Direction::Backward, Method::Subarray, BufferScheme::TwoLargest)?;
    println!("backward(forward(x)) relative error: {:.1e}", relative_error(back.as_slice(), x.as_slice()));
    Ok(())
}
