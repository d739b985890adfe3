//! Balanced block decomposition of an axis.
//!
//! `cargo run --example decompose -- 10 4`

use subarray_fft::decompose;

fn main() -> subarray_fft::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (n, m) = match args[..] {
        [n, m, ..] => (n, m),
        _ => (10, 4),
    };
    println!("{n} indices over {m} parts");
    for p in 0..m {
        let b = decompose(n, m, p)?;
        println!("  part {p}: start {:>3} count {:>3}  {:?}", b.start, b.count, b.range());
    }
    Ok(())
}
