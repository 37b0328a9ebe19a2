use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::numeric::{argmax, softmax};
use crate::diffcore::{Matrix, ParamStore};
use crate::hgrn::{policy_from_q, GraphBatch, Hgrn};
use crate::{Error, Result};

/// How a trained policy picks actions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    /// As trained: sample the softmax / actor distribution, or
    /// epsilon-greedy for greedy-target learners.
    Stochastic,
    /// Argmax, ties to the lowest action index.
    Greedy,
}

/// Behaviour rule of a policy in [`ActionMode::Stochastic`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Behaviour {
    /// Sample `softmax(Q / alpha)`.
    Softmax { alpha: f64 },
    /// Sample the actor's distribution.
    Actor,
    /// Random action with probability `epsilon`, otherwise argmax.
    EpsilonGreedy { epsilon: f64 },
}

/// Recurrent state carried between steps of a rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyHidden {
    pub critic: Matrix,
    pub actor: Option<Matrix>,
}

impl PolicyHidden {
    pub fn rows(&self) -> usize {
        self.critic.rows()
    }

    /// Stacks per-environment states in order.
    pub fn concat(parts: &[&PolicyHidden]) -> Result<Self> {
        let stack = |ms: Vec<&Matrix>| -> Result<Matrix> {
            let cols = ms.first().map_or(0, |m| m.cols());
            let rows: Vec<&[f64]> = ms.iter().flat_map(|m| (0..m.rows()).map(move |r| m.row(r))).collect();
            Matrix::from_rows(&rows, cols)
        };
        let critic = stack(parts.iter().map(|p| &p.critic).collect())?;
        let actor = if parts.iter().all(|p| p.actor.is_some()) && !parts.is_empty() {
            Some(stack(parts.iter().map(|p| p.actor.as_ref().expect("checked")).collect())?)
        } else {
            None
        };
        Ok(Self { critic, actor })
    }

    /// Rows `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        let take = |m: &Matrix| {
            let data = m.data()[start * m.cols()..(start + len) * m.cols()].to_vec();
            Matrix::from_vec(len, m.cols(), data).expect("row range")
        };
        Self {
            critic: take(&self.critic),
            actor: self.actor.as_ref().map(take),
        }
    }
}

/// One action choice for every row of a batch.
#[derive(Clone, Debug)]
pub struct Decision {
    pub actions: Vec<usize>,
    pub hidden: PolicyHidden,
}

/// Read-only snapshot of the networks needed to act.
#[derive(Clone, Debug)]
pub struct Policy {
    pub critic: Hgrn,
    pub critic_store: ParamStore,
    pub actor: Option<(Hgrn, ParamStore)>,
    pub behaviour: Behaviour,
}

impl Policy {
    pub fn n_actions(&self) -> usize {
        self.critic.config.n_actions
    }

    pub fn zero_hidden(&self, agents: usize) -> PolicyHidden {
        PolicyHidden {
            critic: self.critic.zero_hidden(agents),
            actor: self.actor.as_ref().map(|(a, _)| a.zero_hidden(agents)),
        }
    }

    /// Action distribution per row under the stochastic behaviour, where one
    /// exists.
    fn distributions(&self, q: &Matrix, actor_out: Option<&Matrix>) -> Result<Option<Vec<Vec<f64>>>> {
        let rows = 0..q.rows();
        match (self.behaviour, actor_out) {
            (Behaviour::Softmax { alpha }, _) => Ok(Some(rows.map(|i| policy_from_q(q.row(i), alpha)).collect::<Result<_>>()?)),
            (Behaviour::Actor, Some(z)) => Ok(Some(rows.map(|i| softmax(z.row(i))).collect())),
            (Behaviour::Actor, None) => Err(Error::config("actor behaviour without an actor network")),
            (Behaviour::EpsilonGreedy { .. }, _) => Ok(None),
        }
    }

    pub fn act<R: Rng + ?Sized>(&self, batch: &GraphBatch, hidden: &PolicyHidden, mode: ActionMode, rng: &mut R) -> Result<Decision> {
        let critic = self.critic.forward_batch(&self.critic_store, batch, &hidden.critic, false)?;
        let actor = match (&self.actor, &hidden.actor) {
            (Some((net, store)), Some(h)) => Some(net.forward_batch(store, batch, h, false)?),
            (None, None) => None,
            _ => return Err(Error::config("policy and hidden state disagree on the actor network")),
        };
        let scores = actor.as_ref().map_or(&critic.output, |a| &a.output);
        let n_actions = self.n_actions();
        let actions = match mode {
            ActionMode::Greedy => (0..scores.rows()).map(|i| argmax(scores.row(i))).collect(),
            ActionMode::Stochastic => match self.distributions(&critic.output, actor.as_ref().map(|a| &a.output))? {
                Some(dists) => dists.iter().map(|p| sample(p, rng)).collect(),
                None => {
                    let Behaviour::EpsilonGreedy { epsilon } = self.behaviour else {
                        unreachable!("only epsilon-greedy has no distribution")
                    };
                    (0..scores.rows())
                        .map(|i| {
                            if rng.random::<f64>() < epsilon {
                                rng.random_range(0..n_actions)
                            } else {
                                argmax(scores.row(i))
                            }
                        })
                        .collect()
                }
            },
        };
        Ok(Decision {
            actions,
            hidden: PolicyHidden {
                critic: critic.hidden,
                actor: actor.map(|a| a.hidden),
            },
        })
    }
}

/// Inverse-CDF draw; rounding slack falls on the last action with mass.
pub fn sample<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hgrn::HeadKind;
    use crate::training::testutil::{network, random_graph, rng, tiny_config};

    #[test]
    fn sampling_follows_probabilities() {
        let mut r = rng(0);
        let p = [0.2, 0.0, 0.8];
        let mut counts = [0usize; 3];
        for _ in 0..20_000 {
            counts[sample(&p, &mut r)] += 1;
        }
        assert_eq!(counts[1], 0);
        assert!((counts[0] as f64 / 20_000.0 - 0.2).abs() < 0.015);
        assert_eq!(sample(&[0.0, 1.0], &mut r), 1);
    }

    #[test]
    fn greedy_ties_go_to_lowest_index() {
        let cfg = tiny_config(vec![2], HeadKind::QValues);
        let (net, mut store) = network(cfg, 1);
        let head = &net.groups[0].head;
        store.get_mut(head.weight).values.iter_mut().for_each(|w| *w = 0.0);
        let policy = Policy {
            critic: net,
            critic_store: store,
            actor: None,
            behaviour: Behaviour::Softmax { alpha: 1.0 },
        };
        let batch = random_graph(&mut rng(2), 4, &[2]);
        let d = policy.act(&batch, &policy.zero_hidden(4), ActionMode::Greedy, &mut rng(3)).unwrap();
        assert_eq!(d.actions, vec![0; 4]);
    }

    #[test]
    fn epsilon_one_is_uniform_and_zero_is_greedy() {
        let cfg = tiny_config(vec![2], HeadKind::QValues);
        let (net, store) = network(cfg, 4);
        let batch = random_graph(&mut rng(5), 3, &[2]);
        let mut policy = Policy {
            critic: net,
            critic_store: store,
            actor: None,
            behaviour: Behaviour::EpsilonGreedy { epsilon: 0.0 },
        };
        let h = policy.zero_hidden(3);
        let greedy = policy.act(&batch, &h, ActionMode::Greedy, &mut rng(0)).unwrap().actions;
        let eps0 = policy.act(&batch, &h, ActionMode::Stochastic, &mut rng(0)).unwrap().actions;
        assert_eq!(greedy, eps0);
        policy.behaviour = Behaviour::EpsilonGreedy { epsilon: 1.0 };
        let mut counts = [0usize; 3];
        let mut r = rng(6);
        for _ in 0..3000 {
            counts[policy.act(&batch, &h, ActionMode::Stochastic, &mut r).unwrap().actions[0]] += 1;
        }
        assert!(counts.iter().all(|&c| c > 850), "{counts:?}");
    }

    #[test]
    fn hidden_concat_and_slice_round_trip() {
        let a = PolicyHidden {
            critic: Matrix::filled(2, 3, 1.0),
            actor: None,
        };
        let b = PolicyHidden {
            critic: Matrix::filled(1, 3, 2.0),
            actor: None,
        };
        let c = PolicyHidden::concat(&[&a, &b]).unwrap();
        assert_eq!(c.rows(), 3);
        assert_eq!(c.slice(0, 2), a);
        assert_eq!(c.slice(2, 1), b);
    }
}
