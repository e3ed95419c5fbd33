//! Abstract graphs and coalition product graphs: the search skeleton for
//! candidate joint policies.
//!
//! A specification compiles to a DAG whose vertices carry subgoal regions
//! and whose edges carry safe-trajectory sets; a trajectory satisfies the
//! graph exactly when it satisfies the source specification. Product
//! graphs combine the graphs of a coalition of agents asynchronously.

mod graph;
mod product;

pub use graph::{satisfies_graph, spec_to_abstract_graph, AbstractGraph, AgEdge, SafeSet};
pub use product::{
    achieves_edge, achieves_path, edge_achieved_at, enumerate_paths, product, GraphError, PgEdge,
    ProductGraph,
};
