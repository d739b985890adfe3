//! Serial transforms: radix-2, Bluestein and the brute-force oracle.

use subarray_fft::fft::max_abs_diff;
use subarray_fft::{dft_oracle, fft, Complex64, Direction, FftPlan};

fn main() {
    let ones = vec![Complex64::new(1.0, 0.0); 4];
    println!("forward([1,1,1,1]) = {:?}", fft(&ones, Direction::Forward));

    for n in [8, 12, 243, 500] {
        let u: Vec<Complex64> = (0..n).map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
        let hat = fft(&u, Direction::Forward);
        let err = max_abs_diff(&hat, &dft_oracle(&u, Direction::Forward));
        let back = fft(&hat, Direction::Backward);
        println!("n = {n:>3}: vs oracle {err:.1e}, round trip {:.1e}", max_abs_diff(&back, &u));
    }

    let plan = FftPlan::new(6);
    let mut buf: Vec<Complex64> = (0..6).map(|k| Complex64::new(k as f64, 0.0)).collect();
    plan.process(&mut buf, Direction::Forward);
    println!("reused plan of length {}: {:?}", plan.len(), buf[0]);
}
