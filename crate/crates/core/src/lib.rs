//! Factor analysis whose loading rows are tied to knowledge-graph entity
//! embeddings.
//!
//! Attributes that correspond to graph entities get loading rows
//! `w_i = A e_i + b`; the embeddings `e_i` and DistMult relation vectors are
//! learned jointly from the factor-analysis marginal likelihood and a
//! triple-classification likelihood over positive and sampled negative
//! tuples. The remaining attributes keep free loading rows.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below are what the command-line tool uses.

pub mod bridge;
pub mod data;
pub mod error;
pub mod experiment;
pub mod fa;
mod fsutil;
pub mod kg;
pub mod linalg;
pub mod optim;
pub mod scalar;

pub use bridge::{affine_map, assemble_loadings, joint_objective, pack, unpack, AffineMap, JointDims, JointParams};
pub use error::{Error, Result};
pub use fa::{build_covariance, fa_marginal_nll, fa_marginal_nll_grad, Dataset, FaGradient, FaParams};
pub use kg::{KnowledgeGraph, Label, LabeledTuple, Triple};
pub use linalg::Matrix;
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type Dataset64 = Dataset<f64>;
pub type FaParams64 = FaParams<f64>;
pub type JointParams64 = JointParams<f64>;
pub type AffineMap64 = AffineMap<f64>;

pub type Matrix32 = Matrix<f32>;
pub type Dataset32 = Dataset<f32>;
pub type FaParams32 = FaParams<f32>;
pub type JointParams32 = JointParams<f32>;
