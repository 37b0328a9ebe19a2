//! The HGRN network: per-group MLP encoders, two stacked hierarchical graph
//! attention layers with skip connections, GRU memory and a Q or policy head.
//!
//! The batched path ([`Hgrn::step`]) records onto a [`Tape`](crate::Tape) so
//! the same code serves rollouts and training. Rows of a [`GraphBatch`] are
//! split by agent group, each group is evaluated with its own parameters and
//! the results are scattered back into batch order.

mod batch;
mod config;
mod hgat;
mod network;
mod plan;

pub use batch::GraphBatch;
pub use config::{CommMode, HeadKind, HgrnConfig};
pub use hgat::{GraphAttention, HgatLayer};
pub use network::{
    policy_from_q, AgentHiddenState, AgentIntrospection, AttentionEntry, ForwardOutput, HiddenStates, Hgrn,
    HgrnParams, Inference, Memory, StepOutput,
};

#[cfg(test)]
mod tests;
