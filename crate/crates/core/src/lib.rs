//! Minimized residual quantization (MRQ) for IVF approximate nearest
//! neighbor search.
//!
//! Vectors are rotated onto their principal axes and split into a head of
//! `d` leading coordinates and a residual tail. Heads are centered on their
//! IVF centroid, normalized and sign-quantized into `d`-bit codes; tails are
//! reduced to a stored norm. At query time the distance estimate is refined
//! only when its combined error bound (quantization plus a Chebyshev bound on
//! the omitted tail) cannot rule the candidate out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod codec;
pub mod distance;
pub mod eigen;
pub mod error;
pub mod eval;
pub mod index;
pub mod io;
pub mod kmeans;
pub mod linalg;
pub mod pca;
pub mod quant;
pub mod rotation;
pub mod search;
pub mod synth;

pub use distance::{MrqRecordMeta, QueryConstants, SplitVector};
pub use error::{MrqError, Result};
pub use eval::{
    bench, generate_groundtruth, recall_at_k, spectrum_report, EvalReport, EvalRow, GridPoint,
    SpectrumReport,
};
pub use index::{CentroidSpace, ClusterBlock, IndexConfig, IvfIndex};
pub use io::{read_ivecs, read_vecs, write_ivecs, write_vecs, DatasetFile, ElementKind};
pub use kmeans::kmeans;
pub use linalg::{inner_product, squared_euclidean, Matrix};
pub use pca::{train_pca, PcaModel};
pub use quant::{BinaryCode, CodeFactors, QuantizedQuery, QuantizerConfig};
pub use rotation::{random_orthogonal, RandomRotation};
pub use search::{
    batch_search, brute_force, prepare_query, search, BatchResult, Neighbor, QueryContext,
    ResultHeap, SearchMode, SearchParams, SearchStats,
};
