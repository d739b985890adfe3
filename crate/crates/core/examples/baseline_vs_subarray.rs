//! The subarray exchange and the pack/transpose baseline agree bit for bit.

use std::time::Instant;

use subarray_fft::bench::random_global;
use subarray_fft::{transform_global, BufferScheme, Direction, Method};

fn main() -> subarray_fft::Result<()> {
    let x = random_global(&[32, 30, 28], 7);
    for dims in [vec![4], vec![3, 2], vec![4, 4]] {
        let mut results = Vec::new();
        for method in [Method::Subarray, Method::Pack] {
            let t = Instant::now();
            let hat = transform_global(&x, &dims, Direction::Forward, method, BufferScheme::TwoLargest)?;
            println!("grid {dims:?} {:>8}: {:.2?}", method.name(), t.elapsed());
            results.push(hat);
        }
        println!("  identical: {}", results[0] == results[1]);
    }
    Ok(())
}
