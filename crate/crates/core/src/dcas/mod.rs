//! The attention CNN survival model: CBAM and NAM gates, the four-part
//! network with a scalar risk head, the Cox loss and SGD training.

pub mod attention;
pub mod config;
pub mod loss;
pub mod model;
pub mod train;

pub use attention::{cam, cbam, nam, sam, Cbam, Mlp};
pub use config::DcasConfig;
pub use loss::{cox_loss, cox_loss_per_event};
pub use model::{patches_to_tensor, DcasModel, Forward};
pub use train::{patient_holdout, stratified_batches, train_cluster_model, EpochStat, TrainOutcome};
