use rand::Rng;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    /// Agent-space action in [−1, 1]ᵈ.
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_observation: Vec<f64>,
    pub terminal: bool,
}

/// Sampled minibatch in stacked-row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub observations: Tensor,
    pub actions: Tensor,
    pub rewards: Vec<f64>,
    pub next_observations: Tensor,
    pub terminals: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(items: &[Transition]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::contract("empty batch"))?;
        let (o, a) = (first.observation.len(), first.action.len());
        let n = items.len();
        let stack = |f: &dyn Fn(&Transition) -> &[f64], w: usize| -> Result<Tensor> {
            let mut data = Vec::with_capacity(n * w);
            for t in items {
                let v = f(t);
                if v.len() != w {
                    return Err(Error::contract("transitions of mixed shapes"));
                }
                data.extend_from_slice(v);
            }
            Tensor::new(vec![n, w], data)
        };
        Ok(Batch {
            observations: stack(&|t| &t.observation, o)?,
            actions: stack(&|t| &t.action, a)?,
            rewards: items.iter().map(|t| t.reward).collect(),
            next_observations: stack(&|t| &t.next_observation, o)?,
            terminals: items.iter().map(|t| t.terminal).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Fixed-capacity FIFO ring of transitions. Storage grows on demand up to
/// the capacity, so a large capacity costs nothing until it is used.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::contract("replay capacity must be positive"));
        }
        Ok(ReplayBuffer { capacity, items: Vec::new(), cursor: 0, inserted: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        self.inserted += 1;
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Uniform sample with replacement.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Batch> {
        if self.items.len() < n || n == 0 {
            return Err(Error::contract(format!("cannot sample {n} from a buffer of {}", self.items.len())));
        }
        let picked: Vec<Transition> = (0..n).map(|_| self.items[rng.gen_range(0..self.items.len())].clone()).collect();
        Batch::from_transitions(&picked)
    }
}
