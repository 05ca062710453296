//! The learnable flow map: a fully connected network over a memory window
//! of QoI vectors, trained on the multi-step recurrent loss with Adam and a
//! cyclic learning rate.

mod adam;
mod io;
mod model;
mod schedule;
mod train;

pub use adam::AdamState;
pub use io::{decode_model, encode_model, load_model, read_model_header, save_model, ModelHeader, MODEL_MAGIC, MODEL_VERSION};
pub use model::{layer_widths, FlowMapModel, NormalizedBatch, Normalization};
pub use schedule::CyclicLr;
pub use train::{
    cyclic_lr, plan_training, train, train_config_keys, train_with, TrainConfig, TrainOutcome, TrainPlan, TrainSpec,
};
