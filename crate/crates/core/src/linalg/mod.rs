//! Dense linear algebra kernels: Householder QR, one-sided Jacobi SVD,
//! Cholesky log-determinants, randomized PCA, and dissimilarity matrices.
//!
//! Everything here is self-contained f64 code sized for desk-scale matrices
//! (hundreds to a few thousand rows). The SVD is one-sided Jacobi, chosen for
//! its high relative accuracy on small singular values.

mod chol;
mod qr;
mod rdm;
mod rpca;
mod svd;

pub use chol::{chol_factor, chol_logdet};
pub use qr::{least_squares, qr_thin};
pub use rdm::{rdm, Rdm};
pub use rpca::{exact_pca, randomized_pca, PcaModel};
pub use svd::{singular_values_and_right_vectors, ThinSvd};
