//! Radio UNet: log-Mel of the RF trace in, log-Mel of the speech out.

mod config;
mod features;
mod infer;
mod net;
mod state;
mod train;

pub use config::{Bottleneck, RadioUNetConfig};
pub use features::{corpus_pairs, rf_mel, speech_mel, upsample_rf, MelPair, NormStats};
pub use infer::{cross_fade, infer, window_starts};
pub use net::{ftl_block, Forward, RadioUNet};
pub use state::{StateSidecar, TrainingState};
pub use train::{read_loss_csv, CropPolicy, LossLog, StepRecord, TrainConfig, Trainer, LOSS_CSV_HEADER};
