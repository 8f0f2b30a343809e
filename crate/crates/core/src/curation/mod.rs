//! Background cleaning and impulse-corpus filtering.

pub mod corpus;
pub mod gabor;
pub mod impulsiveness;
pub mod onset;
pub mod peaks;
pub mod removal;

pub use corpus::{curate_backgrounds_dir, filter_impulses_dir, list_wavs, FilterSummary, Rejection};
pub use gabor::{multi_gabor_scores, GaborConfig, GaborScores, GaborTrack};
pub use impulsiveness::{impulsiveness_filter, ImpulsivenessConfig, RejectReason, Verdict};
pub use onset::{detect_onsets, onset_envelope, DeltaMode, OnsetConfig, OnsetList, ANALYSIS_RATE};
pub use peaks::{find_peaks, Peak, PeakCriteria};
pub use removal::{
    curate_background, remove_spans, validate_and_remove, CurationConfig, CurationReport, RemovalConfig,
    RemovedSegment,
};
