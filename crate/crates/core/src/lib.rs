pub mod binio;
pub mod cli;
pub mod composition;
pub mod config;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod fixtures;
pub mod inference;
pub mod oracle;
pub mod pipeline;
pub mod probability;
pub mod selection;
pub mod topk;
pub mod vocab;
