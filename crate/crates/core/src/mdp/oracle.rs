use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::{ActionIndex, Mdp, StateId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest recurrent class the dense stationary solve accepts.
pub const DENSE_ORACLE_LIMIT: usize = 10_000;

/// Exact long-run reward-to-difficulty ratio of a fixed policy on the
/// original (untransformed) MDP.
///
/// Restricts the induced chain to states reachable from the initial state,
/// requires exactly one closed communicating class, and divides the
/// stationary expected reward per step by the stationary expected difficulty
/// per step.
pub fn ratio_value_oracle<T: Scalar>(mdp: &Mdp<T>, policy: &[ActionIndex]) -> Result<T> {
    if mdp.terminal().is_some() {
        return Err(Error::InvalidMdp(
            "oracle expects the MDP before the transform".into(),
        ));
    }
    mdp.check_policy(policy)?;

    let successors = |s: StateId| {
        mdp.transitions(s, policy[s as usize])
            .iter()
            .filter(|t| t.prob > T::zero())
            .map(|t| t.next)
    };

    // Reachable states, in discovery order.
    let n = mdp.num_states();
    let mut local = vec![u32::MAX; n];
    let mut reach = vec![mdp.initial()];
    local[mdp.initial() as usize] = 0;
    let mut head = 0;
    while head < reach.len() {
        let s = reach[head];
        head += 1;
        for t in successors(s) {
            if local[t as usize] == u32::MAX {
                local[t as usize] = reach.len() as u32;
                reach.push(t);
            }
        }
    }
    let adjacency: Vec<Vec<u32>> = reach
        .iter()
        .map(|&s| successors(s).map(|t| local[t as usize]).collect())
        .collect();

    let mut graph = DiGraph::<(), ()>::with_capacity(reach.len(), 0);
    for _ in 0..reach.len() {
        graph.add_node(());
    }
    for (u, edges) in adjacency.iter().enumerate() {
        for &v in edges {
            graph.add_edge(NodeIndex::new(u), NodeIndex::new(v as usize), ());
        }
    }
    let components = tarjan_scc(&graph);
    let mut comp = vec![0usize; reach.len()];
    for (c, nodes) in components.iter().enumerate() {
        for v in nodes {
            comp[v.index()] = c;
        }
    }
    let closed: Vec<usize> = (0..components.len())
        .filter(|&c| {
            components[c]
                .iter()
                .all(|v| adjacency[v.index()].iter().all(|&w| comp[w as usize] == c))
        })
        .collect();
    if closed.len() != 1 {
        return Err(Error::Multichain {
            classes: closed.len(),
        });
    }
    let mut members: Vec<usize> = components[closed[0]].iter().map(|v| v.index()).collect();
    members.sort_unstable();
    let m = members.len();
    if m > DENSE_ORACLE_LIMIT {
        return Err(Error::OracleTooLarge {
            states: m,
            limit: DENSE_ORACLE_LIMIT,
        });
    }
    let mut index = vec![usize::MAX; reach.len()];
    for (i, &u) in members.iter().enumerate() {
        index[u] = i;
    }

    // mu (P - I) = 0 with the last equation replaced by sum(mu) = 1, solved
    // in double precision whatever the model scalar.
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (j, &u) in members.iter().enumerate() {
        let s = reach[u];
        for t in mdp.transitions(s, policy[s as usize]) {
            if t.prob > T::zero() {
                let i = index[local[t.next as usize] as usize];
                a[(i, j)] += t.prob.to_f64_lossy();
            }
        }
        a[(j, j)] -= 1.0;
    }
    a.row_mut(m - 1).fill(1.0);
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let mu = a.lu().solve(&b).ok_or(Error::Singular)?;

    let (mut reward, mut difficulty) = (T::zero(), T::zero());
    for (j, &u) in members.iter().enumerate() {
        let s = reach[u];
        let (r, d) = mdp.expected_step(s, policy[s as usize]);
        let weight = T::lit(mu[j]);
        reward += weight * r;
        difficulty += weight * d;
    }
    if !(difficulty > T::normalization_tolerance()) {
        return Err(Error::ZeroDifficulty);
    }
    Ok(reward / difficulty)
}
