use rand::Rng;

use crate::diffcore::Matrix;
use crate::hgrn::GraphBatch;
use crate::{Error, Result};

/// One system-wide transition.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// Observations, groups and communication graph before the step.
    pub graph: GraphBatch,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Agents still taking part when the step began.
    pub active: Vec<bool>,
    /// Agents whose part ended with this step.
    pub agent_done: Vec<bool>,
    /// The episode ended with this step.
    pub done: bool,
}

/// Up to `L` consecutive transitions of one episode, with the hidden states
/// the rollout networks held when the first of them was taken.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySegment {
    pub records: Vec<StepRecord>,
    pub init_hidden: Matrix,
    /// Actor hidden state at the segment start (actor-critic only).
    pub init_actor_hidden: Option<Matrix>,
    /// Observation after the last record, used to bootstrap it.
    pub next: GraphBatch,
}

impl TrajectorySegment {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn agents(&self) -> usize {
        self.next.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.agents();
        if self.records.is_empty() {
            return Err(Error::integrity("empty trajectory segment"));
        }
        for (t, r) in self.records.iter().enumerate() {
            let ok = r.graph.len() == n && r.actions.len() == n && r.rewards.len() == n && r.active.len() == n && r.agent_done.len() == n;
            if !ok {
                return Err(Error::integrity(format!("segment record {t} does not cover {n} agents")));
            }
            if r.done && t + 1 != self.records.len() {
                return Err(Error::integrity("segment continues past the end of its episode"));
            }
        }
        if self.init_hidden.rows() != n {
            return Err(Error::integrity("stored hidden state does not match the agent count"));
        }
        Ok(())
    }
}

/// Fixed-capacity ring of segments; the oldest segment is evicted first.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<TrajectorySegment>,
    next: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            items: Vec::new(),
            next: 0,
            pushed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, segment: TrajectorySegment) {
        if self.items.len() < self.capacity {
            self.items.push(segment);
        } else {
            self.items[self.next] = segment;
        }
        self.next = (self.next + 1) % self.capacity;
        self.pushed += 1;
    }

    pub fn get(&self, i: usize) -> &TrajectorySegment {
        &self.items[i]
    }

    /// `count` uniform draws with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::config("cannot sample from an empty replay buffer"));
        }
        Ok((0..count).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<&TrajectorySegment>> {
        Ok(self.sample_indices(count, rng)?.into_iter().map(|i| &self.items[i]).collect())
    }
}

/// Cuts one environment's stream of transitions into segments.
#[derive(Clone, Debug)]
pub struct SegmentBuilder {
    length: usize,
    records: Vec<StepRecord>,
    init_hidden: Option<Matrix>,
    init_actor_hidden: Option<Matrix>,
}

impl SegmentBuilder {
    pub fn new(length: usize) -> Self {
        Self {
            length: length.max(1),
            records: Vec::new(),
            init_hidden: None,
            init_actor_hidden: None,
        }
    }

    /// Adds a transition taken from hidden state `hidden` (and
    /// `actor_hidden`). `next` is the observation that follows it. Returns a
    /// finished segment when the length is reached or the episode ended.
    pub fn push(
        &mut self,
        record: StepRecord,
        hidden: &Matrix,
        actor_hidden: Option<&Matrix>,
        next: &GraphBatch,
    ) -> Option<TrajectorySegment> {
        if self.records.is_empty() {
            self.init_hidden = Some(hidden.clone());
            self.init_actor_hidden = actor_hidden.cloned();
        }
        let done = record.done;
        self.records.push(record);
        if self.records.len() < self.length && !done {
            return None;
        }
        Some(TrajectorySegment {
            records: std::mem::take(&mut self.records),
            init_hidden: self.init_hidden.take().expect("set with the first record"),
            init_actor_hidden: self.init_actor_hidden.take(),
            next: next.clone(),
        })
    }
}
