use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How agents exchange messages in the two attention layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommMode {
    /// Separate attention per neighbour group, fused by a linear map.
    Hierarchical,
    /// Single attention over all neighbours regardless of group (plain GAT).
    Flat,
    /// Hierarchical parameters, but only neighbours of the agent's own group
    /// are attended; cross-group blocks stay zero.
    SameGroup,
    /// Every agent attends only to itself (communication disabled).
    Off,
}

/// What the network's final linear layer produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// One Q-value per action.
    QValues,
    /// Action logits, turned into a distribution by a softmax.
    Policy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HgrnConfig {
    /// Observation length of each agent group.
    pub obs_dims: Vec<usize>,
    pub n_actions: usize,
    pub encoder_hidden: usize,
    pub embed_dim: usize,
    pub attn_dim: usize,
    pub hidden_dim: usize,
    pub comm: CommMode,
    /// When false, the second attention layer only sees the agent itself.
    pub second_layer_comm: bool,
    /// When false the GRU is replaced by a feed-forward layer.
    pub recurrent: bool,
    pub head: HeadKind,
}

impl Default for HgrnConfig {
    fn default() -> Self {
        Self {
            obs_dims: vec![1],
            n_actions: 5,
            encoder_hidden: 64,
            embed_dim: 64,
            attn_dim: 32,
            hidden_dim: 64,
            comm: CommMode::Hierarchical,
            second_layer_comm: true,
            recurrent: true,
            head: HeadKind::QValues,
        }
    }
}

impl HgrnConfig {
    pub fn group_count(&self) -> usize {
        self.obs_dims.len()
    }

    /// Number of key/value partitions each attention layer holds.
    pub fn source_partitions(&self) -> usize {
        match self.comm {
            CommMode::Flat => 1,
            _ => self.group_count(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.obs_dims.is_empty() {
            return Err(Error::config("at least one agent group is required"));
        }
        if self.obs_dims.contains(&0) {
            return Err(Error::config("observation sizes must be positive"));
        }
        for (name, v) in [
            ("n_actions", self.n_actions),
            ("encoder_hidden", self.encoder_hidden),
            ("embed_dim", self.embed_dim),
            ("attn_dim", self.attn_dim),
            ("hidden_dim", self.hidden_dim),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}
