//! Personalized k-wing search on bipartite graphs.
//!
//! A wing number ψ(e) is computed for every edge by butterfly peeling. Edges
//! are then grouped into super nodes (classes of equal ψ connected through
//! butterflies) and linked into a super graph. A k-wing query walks that
//! super graph.

pub mod baseline;
pub mod bench;
pub mod comp;
pub mod decomposition;
pub mod dynamic;

pub mod error;
pub mod format;
pub mod graph;
pub mod index;
pub mod supergraph;
pub mod synth;

pub use baseline::{baseline_search, WingResult};
pub use comp::{compress, compression_ratio, query_comp, EquiWingCompIndex};
pub use decomposition::{wing_decomposition, wing_decomposition_with, PeelOrder, WingLabeling};
pub use error::{Error, Result};
pub use graph::{
    load_edge_list, BipartiteGraph, Butterfly, EdgeId, EdgeKey, EdgeListFormat, Side, VertexId,
    VertexLabels,
};
pub use index::{build_equiwing, query_equiwing, EquiWingIndex};
pub use supergraph::{CanonicalIndex, QueryStats, SeedSource, SnId, SuperGraph, SuperNode};
