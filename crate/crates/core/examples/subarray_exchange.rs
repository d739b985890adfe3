//! One generalized all-to-all turning row slabs into column slabs.
//!
//! Three ranks share a 6x5 array. Before the exchange each rank owns a block
//! of columns (axis 0 local); afterwards it owns a block of rows.

use subarray_fft::{decompose, exchange, run_simulated, subarray_sequence, DenseArray, ElemKind};

fn main() -> subarray_fft::Result<()> {
    let (rows, cols, m) = (6, 5, 3);
    for l in subarray_sequence(ElemKind::Real64, &[rows, 2], 0, m)? {
        println!("send layout from rank 0: subsizes {:?} starts {:?}", l.subsizes(), l.starts());
    }

    let out = run_simulated(m, |g| -> subarray_fft::Result<_> {
        let p = g.rank();
        let cb = decompose(cols, m, p)?;
        let a = DenseArray::from_fn(&[rows, cb.count], |j| (10 * j[0] + j[1] + cb.start) as f64);
        let mut b = DenseArray::zeros(&[decompose(rows, m, p)?.count, cols]);
        exchange(&g, &a, 0, &mut b, 1)?;
        Ok(b)
    })?;
    for (p, b) in out.into_iter().enumerate() {
        let b = b?;
        println!("rank {p} now holds rows of shape {:?}: {:?}", b.shape(), b.as_slice());
    }
    Ok(())
}
