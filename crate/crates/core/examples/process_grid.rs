//! Cartesian process grids and their direction subgroups.

use subarray_fft::{dims_create, ProcessGrid};

fn main() -> subarray_fft::Result<()> {
    for n in [6, 12, 16, 30] {
        println!("dims_create({n}, 2) = {:?}", dims_create(n, 2)?);
    }

    let grid = ProcessGrid::new(12, &[3, 4])?;
    let rank = 11;
    println!("\nrank {rank} on a 3x4 grid sits at {:?}", grid.coords(rank));
    for dir in 0..grid.ndims() {
        let (members, position) = grid.subgroup(dir, rank);
        println!("  direction {dir}: members {members:?}, position {position}");
    }
    Ok(())
}
