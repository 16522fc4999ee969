//! File formats, synthetic sequences, evaluation harness and command-line
//! front end for [`convtrack_core`].

pub mod cli;
pub mod config;
pub mod error;
mod kv;
pub mod results;
pub mod run;
pub mod selftest;
pub mod sequence;
pub mod synth;

pub use config::{format_config, load_config, parse_config};
pub use error::{Error, Result};
pub use results::{read_results, write_results, RunRecord};
pub use run::{evaluate, track_frames, track_sequence, EvalSummary, TrackedRun};
pub use sequence::{load_sequence, parse_groundtruth, Sequence};
pub use synth::{synth_sequence, SynthSpec, SyntheticSequence};
