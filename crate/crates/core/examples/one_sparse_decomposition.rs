//! Dilates a covariance matrix, quantizes it and splits it into reflections.

use cvgpr::dilation::{embed_khat, hermitian_dilation, OneSparseDecomposition, DEFAULT_QUANTIZATION_CAP};
use nalgebra::DMatrix;

fn main() -> cvgpr::Result<()> {
    let k = DMatrix::from_row_slice(3, 3, &[1.2, 0.5, 0.1, 0.5, 1.1, 0.4, 0.1, 0.4, 0.9]);
    let khat = embed_khat(&k)?;
    println!("K̂ is {0}x{0} (N = {1}, padding {2})", khat.dim(), khat.n(), khat.padding());

    for zeta in [0.3, 0.1, 0.03] {
        let dec = OneSparseDecomposition::from_khat(&khat, zeta, DEFAULT_QUANTIZATION_CAP)?;
        let err = dec.max_quantization_error(&hermitian_dilation(&khat));
        println!(
            "ζ = {zeta:<5} terms = {:>3}  max|H̃| = {:>3}  max|H − ζH̃| = {err:.4}  residual = {}",
            dec.terms.len(),
            dec.htilde.max_abs(),
            dec.reconstruction_residual().len()
        );
    }
    let dec = OneSparseDecomposition::from_khat(&khat, 0.3, DEFAULT_QUANTIZATION_CAP)?;
    for line in dec.dump().lines().take(12) {
        println!("{line}");
    }
    Ok(())
}
