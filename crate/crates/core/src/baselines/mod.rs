//! Baseline classifiers trained from scratch: multinomial logistic
//! regression and a feed-forward network (128/64 ReLU hidden layers, dropout,
//! Adam, early stopping).
//!
//! Both consume standardized features; trained models embed their
//! standardizer so serialized artifacts predict from raw feature files.

mod logistic;
mod mlp;

pub use logistic::{
    load_linear_model, save_linear_model, train_logistic, LinearModel, LogisticConfig,
};
pub use mlp::{
    load_mlp_model, mlp_loss_and_grads, mlp_predict, save_mlp_model, save_train_log_csv,
    train_mlp, DenseLayer, LayerGrads, MlpConfig, MlpModel, TrainLog,
};
