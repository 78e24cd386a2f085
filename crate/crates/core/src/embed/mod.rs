//! Patch embeddings (grayscale thumbnail, PCA) and K-means clustering.

mod kmeans;
mod pca;
mod thumbnail;

pub use kmeans::{fit_kmeans, kmeans_cost, KMeansModel};
pub use pca::{fit_pca, PcaModel};
pub use thumbnail::thumbnail_embed;
