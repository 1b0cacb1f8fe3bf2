//! The MFCC material classifier, the recurrent slip/force predictor and the
//! registry that selects between default and material-specific predictors.

pub mod classifier;
pub mod codec;
pub mod metrics;
pub mod nn;
pub mod predictor;
pub mod registry;

pub use classifier::{
    argmax, evaluate_classifier, train_classifier, ClassifierArch, ClassifierTrainConfig,
    LabeledMfcc, MaterialClassifier, TrainedClassifier,
};
pub use codec::{decode_model, encode_model, ModelBlob, ModelKind, MAGIC, MODEL_FORMAT_VERSION};
pub use metrics::{mean, median, roc_auc, std_dev, ClassifierMetrics, PredictorMetrics};
pub use nn::{sigmoid, softmax, SgdConfig, Standardizer};
pub use predictor::{
    evaluate_predictor, slip_scores, train_predictor, Prediction, PredictorArch,
    PredictorTrainConfig, Scope, SlipPredictor, Target, TrainedPredictor, DEFAULT_HIDDEN,
    DEFAULT_HORIZON, DEFAULT_WINDOW,
};
pub use registry::{predictor_file_name, ModelRegistry, CLASSIFIER_FILE};
