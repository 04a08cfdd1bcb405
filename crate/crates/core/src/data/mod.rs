//! Trial storage, manifests, fold plans, rating normalization, temporal
//! resampling and the synthetic trial generator.

mod grs;
mod manifest;
mod resample;
mod sequence_file;
mod splits;
mod synth;

pub use grs::{denormalize_grs, normalize_grs};
pub use manifest::{Manifest, Trial, TrialMeta, TrialRecord, MANIFEST_VERSION};
pub use resample::{decimation_indices, resample};
pub use sequence_file::{decode_sequence, encode_sequence, read_sequence, write_sequence};
pub use splits::{make_splits, SplitPlan, SplitScheme};
pub use synth::{event_chain, synth_generate, synth_trials, SynthConfig, SynthTrial};
