//! Annotation files, synthetic documents and few-shot subsets.

mod annotation;
mod subset;
mod synth;

pub use annotation::{parse_annotation, serialize_annotations, AnnotationRecord};
pub use subset::subset_sample;
pub use synth::{corpus_spec, synth_document, SyntheticDoc, SyntheticDocSpec};
