//! spanflow: reading-pattern graphs and span embeddings for positioned
//! document text.
//!
//! The pipeline: segment positioned tokens into spans, connect spans into a
//! directed reading-pattern graph, embed span text through a trainable
//! masked-token table, run a neighborhood-masked graph transformer, train it
//! contrastively on bound page pairs, and evaluate the resulting embeddings
//! by pair retrieval, compositionality, and attention rollout.

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod eval;
pub mod featurize;
pub mod gnn;
pub mod io;
pub mod layout;
pub mod pagegraph;
pub mod pipeline;
pub mod svg;
pub mod synthdoc;
pub mod train;

pub use error::{ErrorKind, Result, SpanflowError};
