//! Writing and reading arrays in the NDA1 binary format.

use subarray_fft::{nda, Complex64, DenseArray};

fn main() -> subarray_fft::Result<()> {
    let a = DenseArray::from_fn(&[2, 3], |j| Complex64::new(j[0] as f64, j[1] as f64));
    let bytes = nda::encode(&a)?;
    println!("{} bytes, magic {:?}", bytes.len(), std::str::from_utf8(&bytes[..4]).unwrap_or("?"));

    let path = std::env::temp_dir().join("subarray_fft_example.nda");
    nda::write_file(&path, &a)?;
    let back = nda::read_file(&path)?;
    println!("read back {:?} of kind {:?}", back.shape(), back.kind());
    println!("identical: {}", back.into_complex() == a);
    std::fs::remove_file(path)?;
    Ok(())
}
