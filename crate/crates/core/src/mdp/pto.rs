use super::{Mdp, MdpBuilder, SolverConfig, StateId, Transition};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probability of surviving `difficulty` units when each unit terminates
/// with probability `1 / horizon`.
fn survival<T: Scalar>(difficulty: T, horizon: T) -> T {
    if difficulty == T::zero() {
        T::one()
    } else if difficulty == T::one() {
        T::one() - horizon.recip()
    } else {
        (difficulty * (-horizon.recip()).ln_1p()).exp()
    }
}

/// Converts a ratio-objective MDP into a stochastic shortest path problem.
///
/// Each transition with difficulty `d` continues with probability
/// `p * (1 - 1/H)^d` and otherwise moves to a fresh absorbing terminal state.
/// Both branches deliver the transition's full reward, so the expected reward
/// and difficulty of every state-action pair are unchanged.
pub fn pto_transform<T: Scalar>(mdp: &Mdp<T>, cfg: &SolverConfig<T>) -> Result<Mdp<T>> {
    cfg.validate()?;
    if mdp.terminal().is_some() {
        return Err(Error::InvalidMdp("MDP already has a terminal state".into()));
    }
    if let Some(state) = find_zero_difficulty_trap(mdp) {
        return Err(Error::NonTerminating { state });
    }
    let n = mdp.num_states();
    let terminal = n as StateId;
    let mut builder = MdpBuilder::new();
    let mut branches = Vec::new();
    for s in 0..n as StateId {
        builder.add_state();
        for a in 0..mdp.num_actions_of(s) as u32 {
            branches.clear();
            for t in mdp.transitions(s, a) {
                let keep = survival(t.difficulty, cfg.horizon);
                let cont = t.prob * keep;
                let stop = t.prob - cont;
                if cont > T::zero() {
                    branches.push(Transition::new(t.next, cont, t.reward, t.difficulty));
                }
                if stop > T::zero() {
                    branches.push(Transition::new(terminal, stop, t.reward, t.difficulty));
                }
            }
            builder.add_action(mdp.action_tag(s, a), branches.iter().copied());
        }
        if let Some(h) = mdp.honest_action(s) {
            builder.mark_honest(h);
        }
    }
    builder.add_state();
    builder.set_terminal(terminal);
    builder.set_initial(mdp.initial());
    builder.build()
}

/// Finds a state from which some policy can run forever without accruing
/// difficulty (so probabilistic termination would never fire). Returns the
/// smallest such state, or `None` when every policy accrues difficulty.
///
/// Computed as the greatest set of states in which each state keeps at least
/// one action whose transitions all have zero difficulty and stay in the set.
pub fn find_zero_difficulty_trap<T: Scalar>(mdp: &Mdp<T>) -> Option<usize> {
    let n = mdp.num_states();
    let mut alive = vec![true; n];
    let mut live_actions = vec![0u32; n];
    // Zero-difficulty actions, indexed globally; reverse edges successor -> action.
    let mut action_state: Vec<StateId> = Vec::new();
    let mut action_alive: Vec<bool> = Vec::new();
    let mut reverse: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut queue = Vec::new();

    for s in 0..n as StateId {
        if mdp.is_terminal(s) {
            alive[s as usize] = false;
            continue;
        }
        for a in 0..mdp.num_actions_of(s) as u32 {
            let ts = mdp.transitions(s, a);
            let zero = ts.iter().all(|t| {
                t.prob == T::zero() || (t.difficulty == T::zero() && !mdp.is_terminal(t.next))
            });
            if !zero {
                continue;
            }
            let id = action_state.len() as u32;
            action_state.push(s);
            action_alive.push(true);
            live_actions[s as usize] += 1;
            for t in ts.iter().filter(|t| t.prob > T::zero()) {
                reverse[t.next as usize].push(id);
            }
        }
        if live_actions[s as usize] == 0 {
            alive[s as usize] = false;
            queue.push(s as usize);
        }
    }
    for s in 0..n {
        if mdp.is_terminal(s as StateId) {
            queue.push(s);
        }
    }

    while let Some(dead) = queue.pop() {
        for &id in &reverse[dead] {
            if !action_alive[id as usize] {
                continue;
            }
            action_alive[id as usize] = false;
            let owner = action_state[id as usize] as usize;
            live_actions[owner] -= 1;
            if live_actions[owner] == 0 && alive[owner] {
                alive[owner] = false;
                queue.push(owner);
            }
        }
    }
    alive.iter().position(|&a| a)
}
