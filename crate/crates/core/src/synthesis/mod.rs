//! Scene synthesis with ground-truth stems.

mod background;
pub mod config;
mod dataset;
mod impulse;
mod mix;
mod placement;
mod room;

pub use background::{gen_pink_background, ContourPoint, EqBand, PinkParams};
pub use config::{AugmentationConfig, CountRange, LevelDistribution, PinkConfig, Range, SceneConfig};
pub use dataset::{
    build_dataset, load_corpus_manifest, read_index, scene_name, ClassSampler, Corpora, CorpusEntry, DatasetOptions,
    IndexEntry, LabelMap, SourceRole, Split, PINK_LABEL,
};
pub use impulse::{asymmetric_gaussian, gen_synthetic_impulse, Carrier, ImpulseKind, ImpulseParams, Sweep};
pub use mix::{
    mix_scene, AugmentationRecord, BackgroundRecord, ImpulseRecord, SceneManifest, ScenePaths, SceneStems,
    SourceAudio, SourceRecord,
};
pub use placement::{place_impulses, place_intervals, Slot};
pub use room::{synth_room_ir, RoomIrParams};
