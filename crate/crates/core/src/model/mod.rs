//! Frame classifier: a bidirectional LSTM trained with CTC.

pub mod blstm;
pub mod checkpoint;
pub mod ctc;
pub mod decode;
pub mod loss;
pub mod oracle;
pub mod train;

pub use blstm::{log_softmax, softmax, Hyper, ModelParams};
pub use checkpoint::Checkpoint;
pub use ctc::{best_path, ctc_loss};
pub use decode::{decode_relation, decode_relations, recognize_1d, Aggregation, Junction, OneDSrt, OneDSymbol};
pub use loss::{
    combined_loss, constraint_loss, offstroke_symbol_loss, relation_penalty, weighted_loss, ExtraTerms, LossBreakdown,
};
pub use oracle::OracleClassifier;
pub use train::{train, Control, EpochMetrics, TrainConfig, TrainExample, TrainOutcome};

use crate::error::Result;
use crate::ink::FeatureSequence;

/// Anything that maps a feature sequence to per-frame distributions over
/// the 109 output labels.
pub trait Classifier: Sync {
    fn classify(&self, feats: &FeatureSequence) -> Result<Vec<Vec<f64>>>;
}

impl Classifier for ModelParams {
    fn classify(&self, feats: &FeatureSequence) -> Result<Vec<Vec<f64>>> {
        self.forward(feats)
    }
}
