//! Heart-murmur label-noise reduction workbench.
//!
//! The crate covers the full offline pipeline: recordings and tables
//! ([`corpus`]), band-pass filtering and heart-cycle segmentation
//! ([`signalproc`]), per-cycle descriptors ([`featureset`]), expert label
//! selection and agreement statistics ([`labelkit`]), tree ensembles
//! ([`learners`]), leakage-safe splitting and clinical metrics ([`evalkit`]),
//! and a synthetic heart-sound and rater generator ([`hssynth`]).

pub mod corpus;
pub mod signalproc;
pub mod featureset;
pub mod labelkit;
pub mod learners;
pub mod evalkit;
pub mod hssynth;
pub mod pipeline;
mod fft;
