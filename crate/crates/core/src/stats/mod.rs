//! Population statistics built on pairwise matching: distance matrices,
//! spectral clustering, the Karcher mean, the log map and tangent PCA.

mod cluster;
mod distance;
mod karcher;
mod pca;

pub use cluster::{knn_graph, normalized_laplacian, purity, spectral_cluster, ClusterResult};
pub use distance::{
    all_pairs, compute_pairs, distance_matrix, match_pair, DistanceMatrix, EntryFlag, PairOutcome,
};
pub use karcher::{control_average, karcher_mean, log_map, KarcherResult, TangentVector};
pub use pca::{principal_geodesic_endpoints, tangent_pca, PcaResult};
