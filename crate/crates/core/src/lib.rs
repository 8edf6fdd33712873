//! Stable symplectic embeddings of canonical Hamiltonian systems.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which all experiments use.

pub mod baselines;
pub mod decoders;
pub mod diffkit;
pub mod eval;
pub mod hamsys;
pub mod integrate;
pub mod latentham;
pub mod linalg;
pub mod pod;
pub mod presets;
pub mod scalar;
pub mod training;

pub use baselines::{opinf_fit, opinf_rollout, OpInfModel};
pub use decoders::{fit_quad_decoder, linear_reconstruct, quad_reconstruct, DecoderFitConfig, QuadDecoder};
pub use eval::{benchmark_suite, mean_l2, relative_l2, traj_error, ErrorReport, Metric};
pub use hamsys::{CanonicalSystem, SystemName};
pub use integrate::{integrate_trajectory, MidpointSolver, SolverConfig, Trajectory, VectorField};
pub use latentham::{CubicPoly, LatentHamiltonian, SosHamiltonian, SosKind};
pub use linalg::Mat;
pub use pod::{pod_basis, PodBasis};
pub use presets::{generate_dataset, Dataset, Preset};
pub use scalar::Scalar;
pub use training::{latent_rollout, train, EmbeddingModel, TrainingConfig, TrainingData, Variant};

pub type Model = training::EmbeddingModel<f64>;
pub type Traj = integrate::Trajectory<f64>;
pub type Matrix = linalg::Mat<f64>;
pub type Basis = pod::PodBasis<f64>;
pub type Decoder = decoders::QuadDecoder<f64>;
pub type OpInf = baselines::OpInfModel<f64>;
pub type Latent = latentham::LatentHamiltonian<f64>;
pub type Config = training::TrainingConfig<f64>;
