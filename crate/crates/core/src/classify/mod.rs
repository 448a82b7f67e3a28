//! PCA dimensionality reduction and a class-weighted linear SVM.

mod pca;
mod svm;

pub use pca::{pca_fit, PcaModel};
pub use svm::{svm_train, ClassWeighting, SvmModel, SvmParams};
