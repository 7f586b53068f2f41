//! Message-passing graph neural network over encoded CPGs.
//!
//! For node `v` with dense features `x_v` and operator slot `o_v`:
//!
//! ```text
//! h⁰_v = relu([x_v ∥ T[o_v]] · W_in)
//! hᵏ_v = relu(hᵏ⁻¹_v · W_self + Σ_r mean_{u ∈ N_r(v)} hᵏ⁻¹_u · W_r + b)     k = 1..K
//! e    = Σ_v sigmoid(hᴷ_v · W_g) ⊙ (hᴷ_v · W_o)
//! ```
//!
//! `r` ranges over the four edge types in both directions: along an edge
//! `u → v` the forward relation delivers `h_u` to `v` and the reverse relation
//! delivers `h_v` to `u`. The mean over an empty neighbor set is zero. Node
//! sums run in ascending node index, so results are bit-reproducible and do
//! not depend on how the source graph stored its nodes.

mod forward;
mod gradcheck;
mod loss;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::EdgeType;
use crate::linalg::Matrix;
use crate::vocab::{EncodedGraph, DENSE_FEATURES};

pub use forward::{GraphTopology, Trace};
pub use gradcheck::{gradient_check, GradCheckReport, RELATIVE_ERROR_FLOOR};
pub use loss::{accumulate_loss_and_gradients, loss_and_gradients, LossOutput, LossStats};

/// Model file format revision.
pub const MODEL_VERSION: u32 = 1;
/// Edge types times two directions.
pub const RELATIONS: usize = EdgeType::COUNT * 2;

pub const RELATION_NAMES: [&str; RELATIONS] = [
    "w_ast_fwd",
    "w_ast_rev",
    "w_cfg_fwd",
    "w_cfg_rev",
    "w_ddg_fwd",
    "w_ddg_rev",
    "w_cdg_fwd",
    "w_cdg_rev",
];

pub fn relation_index(etype: EdgeType, reverse: bool) -> usize {
    etype.index() * 2 + usize::from(reverse)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hyper {
    /// Node state and function vector width.
    pub dim: usize,
    /// Message-passing rounds.
    pub rounds: usize,
    /// Operator embedding width.
    pub embed_dim: usize,
    /// Number of vocabulary entries (the table has one extra OOV row).
    pub vocab_size: usize,
    pub vocab_version: u32,
    /// Seed the parameters were initialized from.
    pub seed: u64,
}

impl Hyper {
    pub fn new(dim: usize, rounds: usize, embed_dim: usize, vocab_size: usize) -> Self {
        Hyper {
            dim,
            rounds,
            embed_dim,
            vocab_size,
            vocab_version: 1,
            seed: 0,
        }
    }

    pub fn input_width(&self) -> usize {
        DENSE_FEATURES + self.embed_dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// A graph uses an operator index the model has no embedding row for.
    OpSlotOutOfRange {
        function: String,
        slot: usize,
        vocab_size: usize,
    },
    UnknownParameter(String),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "dimension mismatch in {what}: expected {expected}, found {found}"),
            ModelError::OpSlotOutOfRange {
                function,
                slot,
                vocab_size,
            } => write!(
                f,
                "function `{function}` uses operator index {slot} but the model vocabulary has {vocab_size} entries"
            ),
            ModelError::UnknownParameter(name) => write!(f, "unknown parameter `{name}`"),
        }
    }
}

impl core::error::Error for ModelError {}

/// Every learned tensor. Gradients and optimizer moments use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// `[V+1 × E]`, row 0 is the out-of-vocabulary embedding.
    pub op_embedding: Matrix,
    /// `[(F−1+E) × D]`
    pub w_in: Matrix,
    /// `[D × D]` per relation, indexed by [`relation_index`].
    pub w_rel: Vec<Matrix>,
    pub w_self: Matrix,
    /// `[1 × D]`
    pub bias: Matrix,
    pub w_gate: Matrix,
    pub w_out: Matrix,
}

impl Params {
    pub fn zeros(h: &Hyper) -> Self {
        let d = h.dim;
        Params {
            op_embedding: Matrix::zeros(h.vocab_size + 1, h.embed_dim),
            w_in: Matrix::zeros(h.input_width(), d),
            w_rel: (0..RELATIONS).map(|_| Matrix::zeros(d, d)).collect(),
            w_self: Matrix::zeros(d, d),
            bias: Matrix::zeros(1, d),
            w_gate: Matrix::zeros(d, d),
            w_out: Matrix::zeros(d, d),
        }
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))` per matrix; bias zero.
    pub fn glorot(h: &Hyper, rng: &mut impl Rng) -> Self {
        let mut p = Params::zeros(h);
        for (name, m) in p.tensors_mut() {
            if name == "b" {
                continue;
            }
            let limit = libm::sqrt(6.0 / (m.rows() + m.cols()) as f64);
            for x in m.data_mut() {
                *x = rng.gen_range(-limit..limit);
            }
        }
        p
    }

    /// Tensors in a fixed order with their stable names.
    pub fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        let mut v = vec![("op_embedding", &self.op_embedding), ("w_in", &self.w_in)];
        v.extend(RELATION_NAMES.iter().copied().zip(self.w_rel.iter()));
        v.extend([
            ("w_self", &self.w_self),
            ("b", &self.bias),
            ("w_gate", &self.w_gate),
            ("w_out", &self.w_out),
        ]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        let mut v = vec![("op_embedding", &mut self.op_embedding), ("w_in", &mut self.w_in)];
        v.extend(RELATION_NAMES.iter().copied().zip(self.w_rel.iter_mut()));
        v.extend([
            ("w_self", &mut self.w_self),
            ("b", &mut self.bias),
            ("w_gate", &mut self.w_gate),
            ("w_out", &mut self.w_out),
        ]);
        v
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.tensors_mut()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, m)| m)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.is_finite())
    }

    pub fn scale(&mut self, s: f64) {
        for (_, m) in self.tensors_mut() {
            m.scale(s);
        }
    }

    pub fn add_assign(&mut self, other: &Params) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.data().len()).sum()
    }
}

/// One function's vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionEmbedding {
    pub vector: Vec<f64>,
    pub function_name: String,
    pub address: String,
}

impl FunctionEmbedding {
    pub fn pearson(&self, other: &FunctionEmbedding) -> Result<f64, crate::SimilarityError> {
        crate::pearson::pearson(&self.vector, &other.vector)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub hyper: Hyper,
    pub params: Params,
}

impl GnnModel {
    /// All parameters zero.
    pub fn zeros(hyper: Hyper) -> Self {
        GnnModel {
            params: Params::zeros(&hyper),
            hyper,
        }
    }

    /// Glorot-uniform parameters drawn from `hyper.seed`.
    pub fn init(hyper: Hyper) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        GnnModel {
            params: Params::glorot(&hyper, &mut rng),
            hyper,
        }
    }

    /// Checks that stored tensor shapes agree with the hyperparameters.
    pub fn check_shapes(&self) -> Result<(), ModelError> {
        let want = Params::zeros(&self.hyper);
        for ((name, a), (_, b)) in self.params.tensors().into_iter().zip(want.tensors()) {
            if a.shape() != b.shape() {
                return Err(ModelError::DimensionMismatch {
                    what: name,
                    expected: b.rows() * b.cols(),
                    found: a.rows() * a.cols(),
                });
            }
        }
        if self.params.w_rel.len() != RELATIONS {
            return Err(ModelError::DimensionMismatch {
                what: "relations",
                expected: RELATIONS,
                found: self.params.w_rel.len(),
            });
        }
        Ok(())
    }

    pub fn check_graph(&self, g: &EncodedGraph) -> Result<(), ModelError> {
        let slot = g.max_op_slot();
        if slot > self.hyper.vocab_size {
            return Err(ModelError::OpSlotOutOfRange {
                function: g.function_name.clone(),
                slot,
                vocab_size: self.hyper.vocab_size,
            });
        }
        Ok(())
    }

    pub fn embed(&self, g: &EncodedGraph) -> Result<FunctionEmbedding, ModelError> {
        Ok(FunctionEmbedding {
            vector: self.embed_vector(g)?,
            function_name: g.function_name.clone(),
            address: g.address.clone(),
        })
    }

    pub fn embed_vector(&self, g: &EncodedGraph) -> Result<Vec<f64>, ModelError> {
        self.check_graph(g)?;
        let topo = GraphTopology::new(g);
        Ok(forward::embed_only(self, g, &topo))
    }

    /// Forward pass keeping every intermediate needed for backpropagation.
    pub fn trace(&self, g: &EncodedGraph) -> Result<(GraphTopology, Trace), ModelError> {
        self.check_graph(g)?;
        let topo = GraphTopology::new(g);
        let trace = forward::forward(self, g, &topo);
        Ok((topo, trace))
    }
}

#[cfg(test)]
mod tests;
