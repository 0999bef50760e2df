//! Ratio-objective MDPs: representation, probabilistic-termination
//! transform, and solvers.
//!
//! An [`Mdp`] stores every transition with a probability, a reward and a
//! difficulty contribution. The objective of interest is the long-run ratio of
//! accumulated reward to accumulated difficulty. [`pto_transform`] turns that
//! objective into a stochastic shortest path problem whose expected total
//! reward, divided by the horizon, approximates the ratio; the SSP is then
//! solved by [`policy_iteration`] or [`value_iteration`].

mod linear;
mod oracle;
mod policy_iteration;
mod pto;
mod value_iteration;

pub use linear::{bicg, bicgstab, dense_solve, KrylovOutcome, SparseMatrix, DENSE_SOLVE_LIMIT};
pub use oracle::{ratio_value_oracle, DENSE_ORACLE_LIMIT};
pub use policy_iteration::{evaluate_policy, policy_iteration};
pub use pto::{find_zero_difficulty_trap, pto_transform};
pub use value_iteration::value_iteration;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type StateId = u32;

/// Index of an action within its state's action list.
pub type ActionIndex = u32;

/// A policy maps every non-terminal state to one of its local action indices.
pub type Policy = Vec<ActionIndex>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<T> {
    pub next: StateId,
    pub prob: T,
    pub reward: T,
    pub difficulty: T,
}

impl<T: Scalar> Transition<T> {
    pub fn new(next: StateId, prob: T, reward: T, difficulty: T) -> Self {
        Self {
            next,
            prob,
            reward,
            difficulty,
        }
    }
}

/// Sparse MDP in compressed form: states own a contiguous run of actions,
/// actions own a contiguous run of transitions.
#[derive(Debug, Clone)]
pub struct Mdp<T> {
    action_offsets: Vec<usize>,
    transition_offsets: Vec<usize>,
    transitions: Vec<Transition<T>>,
    action_tags: Vec<u32>,
    honest: Vec<Option<ActionIndex>>,
    initial: StateId,
    terminal: Option<StateId>,
}

impl<T: Scalar> Mdp<T> {
    pub fn num_states(&self) -> usize {
        self.action_offsets.len() - 1
    }

    pub fn num_actions(&self) -> usize {
        self.action_tags.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    /// The absorbing state added by [`pto_transform`], if any.
    pub fn terminal(&self) -> Option<StateId> {
        self.terminal
    }

    pub fn is_terminal(&self, state: StateId) -> bool {
        self.terminal == Some(state)
    }

    pub fn num_actions_of(&self, state: StateId) -> usize {
        let s = state as usize;
        self.action_offsets[s + 1] - self.action_offsets[s]
    }

    fn global_action(&self, state: StateId, action: ActionIndex) -> usize {
        self.action_offsets[state as usize] + action as usize
    }

    pub fn transitions(&self, state: StateId, action: ActionIndex) -> &[Transition<T>] {
        let g = self.global_action(state, action);
        &self.transitions[self.transition_offsets[g]..self.transition_offsets[g + 1]]
    }

    /// Model-defined label of an action (decoded by the model that built it).
    pub fn action_tag(&self, state: StateId, action: ActionIndex) -> u32 {
        self.action_tags[self.global_action(state, action)]
    }

    /// The action a protocol-following miner would take, where the model marks one.
    pub fn honest_action(&self, state: StateId) -> Option<ActionIndex> {
        self.honest[state as usize]
    }

    /// Honest-mimicking policy, falling back to the first action where none is marked.
    pub fn honest_policy(&self) -> Policy {
        (0..self.num_states() as StateId)
            .map(|s| self.honest_action(s).unwrap_or(0))
            .collect()
    }

    /// Expected reward and difficulty of one step of `(state, action)`.
    pub fn expected_step(&self, state: StateId, action: ActionIndex) -> (T, T) {
        self.transitions(state, action)
            .iter()
            .fold((T::zero(), T::zero()), |(r, d), t| {
                (r + t.prob * t.reward, d + t.prob * t.difficulty)
            })
    }

    /// Checks the structural invariants: normalization, non-negativity,
    /// resolvable successors, and at least one action per non-terminal state.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_states();
        let tol = T::normalization_tolerance();
        if self.initial as usize >= n {
            return Err(Error::InvalidMdp(format!(
                "initial state {} out of range",
                self.initial
            )));
        }
        for s in 0..n as StateId {
            let count = self.num_actions_of(s);
            if self.is_terminal(s) {
                if count != 0 {
                    return Err(Error::InvalidMdp(format!("terminal state {s} has actions")));
                }
                continue;
            }
            if count == 0 {
                return Err(Error::InvalidMdp(format!("state {s} has no legal action")));
            }
            for a in 0..count as ActionIndex {
                let mut total = T::zero();
                for t in self.transitions(s, a) {
                    if t.next as usize >= n {
                        return Err(Error::InvalidMdp(format!(
                            "state {s} action {a} points at unknown state {}",
                            t.next
                        )));
                    }
                    if !(t.prob >= T::zero() && t.prob <= T::one() + tol) {
                        return Err(Error::InvalidMdp(format!(
                            "state {s} action {a} has probability {}",
                            t.prob
                        )));
                    }
                    if !(t.reward >= T::zero()) || !(t.difficulty >= T::zero()) {
                        return Err(Error::InvalidMdp(format!(
                            "state {s} action {a} has negative reward or difficulty"
                        )));
                    }
                    total += t.prob;
                }
                if (total - T::one()).abs() > tol {
                    return Err(Error::InvalidMdp(format!(
                        "state {s} action {a} probabilities sum to {total}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks that `policy` picks a legal action in every non-terminal state.
    pub fn check_policy(&self, policy: &[ActionIndex]) -> Result<()> {
        let n_policy_states = self.num_states() - usize::from(self.terminal.is_some());
        if policy.len() < n_policy_states {
            return Err(Error::IllegalPolicy(format!(
                "policy covers {} states, MDP has {}",
                policy.len(),
                n_policy_states
            )));
        }
        for s in 0..self.num_states() as StateId {
            if self.is_terminal(s) {
                continue;
            }
            if policy[s as usize] as usize >= self.num_actions_of(s) {
                return Err(Error::IllegalPolicy(format!(
                    "state {s} has no action {}",
                    policy[s as usize]
                )));
            }
        }
        Ok(())
    }
}

/// Incremental constructor for [`Mdp`]. States must be opened in index order.
#[derive(Debug, Clone)]
pub struct MdpBuilder<T> {
    mdp: Mdp<T>,
}

impl<T: Scalar> Default for MdpBuilder<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> MdpBuilder<T> {
    pub fn new() -> Self {
        Self {
            mdp: Mdp {
                action_offsets: vec![0],
                transition_offsets: vec![0],
                transitions: Vec::new(),
                action_tags: Vec::new(),
                honest: Vec::new(),
                initial: 0,
                terminal: None,
            },
        }
    }

    /// Opens the next state and returns its id.
    pub fn add_state(&mut self) -> StateId {
        let id = self.mdp.honest.len() as StateId;
        self.mdp.honest.push(None);
        self.mdp.action_offsets.push(self.mdp.action_tags.len());
        id
    }

    /// Appends an action to the most recently opened state.
    pub fn add_action<I>(&mut self, tag: u32, transitions: I) -> ActionIndex
    where
        I: IntoIterator<Item = Transition<T>>,
    {
        let state = self.mdp.honest.len() - 1;
        let local = (self.mdp.action_tags.len() - self.mdp.action_offsets[state]) as ActionIndex;
        self.mdp.action_tags.push(tag);
        self.mdp.transitions.extend(transitions);
        self.mdp.transition_offsets.push(self.mdp.transitions.len());
        *self.mdp.action_offsets.last_mut().expect("state opened") = self.mdp.action_tags.len();
        local
    }

    /// Marks the honest-mimicking action of the most recently opened state.
    pub fn mark_honest(&mut self, action: ActionIndex) {
        let state = self.mdp.honest.len() - 1;
        self.mdp.honest[state] = Some(action);
    }

    pub fn set_initial(&mut self, state: StateId) {
        self.mdp.initial = state;
    }

    pub fn set_terminal(&mut self, state: StateId) {
        self.mdp.terminal = Some(state);
    }

    pub fn build(self) -> Result<Mdp<T>> {
        let mdp = self.mdp;
        mdp.validate()?;
        Ok(mdp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    /// Expected difficulty accumulated before probabilistic termination.
    pub horizon: T,
    /// Stopping precision for policy and value iteration.
    pub precision: T,
    /// Relative residual tolerance of the inner linear solves.
    pub linear_tolerance: T,
    /// Iteration cap of the inner linear solves; `None` means `10 * sqrt(n)`.
    pub linear_max_iterations: Option<usize>,
    pub max_policy_rounds: usize,
    pub max_value_sweeps: usize,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            horizon: T::lit(1e5),
            precision: T::lit(1e-5),
            linear_tolerance: T::lit(1e-9),
            linear_max_iterations: None,
            max_policy_rounds: 1000,
            max_value_sweeps: 20_000_000,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon >= T::one()) {
            return Err(Error::InvalidParams(format!(
                "horizon must be >= 1, got {}",
                self.horizon
            )));
        }
        if !(self.precision > T::zero()) {
            return Err(Error::InvalidParams(format!(
                "precision must be positive, got {}",
                self.precision
            )));
        }
        if !(self.linear_tolerance > T::zero()) {
            return Err(Error::InvalidParams(
                "linear tolerance must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn linear_iteration_cap(&self, n: usize) -> usize {
        self.linear_max_iterations
            .unwrap_or_else(|| ((10.0 * (n as f64).sqrt()).ceil() as usize).max(10))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    /// One action per non-terminal state.
    pub policy: Policy,
    /// Expected total reward until termination, per non-terminal state.
    pub values: Vec<T>,
    /// Revenue rate: value of the initial state divided by the horizon.
    pub ratio: T,
    /// Improvement rounds (policy iteration) or sweeps (value iteration).
    pub iterations: usize,
}
