//! Coherent probabilistic regression and black-box optimization driven by
//! token-level language models.
//!
//! The pipeline: numeric values serialize into digit strings ([`numcodec`]),
//! observation sets serialize into prompts ([`prompting`]), a model backend
//! samples or scores continuations token-by-token ([`backend`]), bin masses
//! become continuous densities ([`density`]), joints over many targets come
//! from independent or autoregressive composition ([`process`]), and
//! [`eval`] turns samples and densities into medians, bands, NLL and MAE.
//! [`gp`] provides the RBF Gaussian-process baseline, [`bbo`] the
//! Thompson-sampling optimizer with its benchmark objectives, and
//! [`harness`] dataset generation, loaders, reports and experiment drivers.
//! [`oracle`] holds brute-force references used by the verification suites.

pub mod backend;
pub mod bbo;
pub mod density;
pub mod eval;
pub mod gp;
pub mod harness;
pub mod numcodec;
pub mod oracle;
pub mod process;
pub mod prompting;

pub use backend::{
    BackendError, CheatFunctionBackend, ModelBackend, RemoteBackend, SamplingParams, StubServer,
    TableLM, TokenScores, UniformDigitLM,
};
pub use bbo::{BenchmarkFunction, BboError, OptConfig, OptTrace};
pub use density::{DensityError, MarginalDensity, SampleSet};
pub use eval::{EvalError, PredictiveSummary};
pub use gp::{GpError, GpHyperparams, GpPosterior};
pub use harness::{
    BimodalTask, DataError, HarnessError, RegressionConfig, RunReport, SyntheticFunction,
    SyntheticTask,
};
pub use numcodec::{NumError, NumericFormat, NumericString};
pub use process::{JointMode, JointResult, PathSample, ProcessError, TargetSet};
pub use prompting::{
    Affine, ExampleBlock, Observation, ObservationKey, Ordering, PairFormat, PromptConfig,
    PromptError, TrainingSet,
};
