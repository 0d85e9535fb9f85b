//! Small dense and sparse linear algebra kernels used by the solvers.

mod banded;
mod envelope;
mod lanczos;
mod sparse;
mod tridiag;

pub use banded::BandedLu;
pub use envelope::EnvelopeCholesky;
pub use lanczos::{lowest_eigenpairs, LanczosOptions, LanczosResult};
pub use sparse::CsrMatrix;
pub use tridiag::{SymTridiagonal, TridiagonalLu};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
