//! Embeddings, annotations and annotator metadata, joined into a [`Dataset`].

mod dataset;
mod embeddings;
mod records;

pub use dataset::{join_dataset, label_distribution, Dataset, JoinOptions, Weighting, UNKNOWN};
pub use embeddings::{
    load_embeddings, read_embeddings, save_embeddings, write_embeddings, EmbeddingFormat,
    EmbeddingMatrix, RowKey, BINARY_MAGIC, BINARY_VERSION,
};
pub use records::{
    load_item_texts, read_annotations, read_metadata, read_row_labels, write_annotations,
    write_metadata, write_row_labels,
    AnnotationRecord, AnnotatorMetadata,
};
