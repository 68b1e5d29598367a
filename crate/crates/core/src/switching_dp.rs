//! Backward induction for the switching game.
//!
//! After the control gains are fixed, each player's remaining cost depends on
//! the switching decisions only through the predicted error covariance. The
//! reachable predicted covariances form a small tree: at stage `k` the
//! covariance is determined by how many stages ago the switch last closed
//! (or by the fact that it never closed), so there are at most `k + 1`
//! distinct nodes. Nodes are keyed by that integer age instead of by matrix
//! contents.
//!
//! At every node both players compare the closed branch (pay the switching
//! fee and the estimate jump, restart the covariance chain) against the open
//! branch (let the covariance grow). The switch closes only if closing is
//! strictly cheaper for both. Ties stay open.
//!
//! The same tree carries the centralized benchmark, which closes whenever the
//! summed cost strictly drops, and the per-node social loss between the two.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::estimator::{predict_cov, update_cov};
use crate::linalg::trace_product;
use crate::model::{GameSpec, Player, ValidatedSpec};
use crate::riccati::RiccatiSolution;

#[derive(Debug, Error, PartialEq)]
pub enum DpError {
    #[error("no switching action exists at the terminal stage {0}")]
    TerminalSwitch(usize),
    #[error("stage {stage} is beyond the horizon {horizon}")]
    StageOutOfRange { stage: usize, horizon: usize },
    #[error("node (k={k}, age={age}) is not reachable")]
    Unreachable { k: usize, age: ObsAge },
    #[error("gain solution covers horizon {got} but the game has horizon {expected}")]
    HorizonMismatch { expected: usize, got: usize },
    #[error("schedule has {got} stages, expected {expected}")]
    ScheduleLength { expected: usize, got: usize },
}

/// Stages since the switch last closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObsAge {
    /// The switch has never closed; the covariance descends from `Sigma0`.
    Init,
    /// The switch closed `τ >= 1` stages ago.
    Since(usize),
}

impl ObsAge {
    /// Age at the next stage after this stage's decision.
    pub fn successor(self, closed: bool) -> ObsAge {
        match (closed, self) {
            (true, _) => ObsAge::Since(1),
            (false, ObsAge::Init) => ObsAge::Init,
            (false, ObsAge::Since(tau)) => ObsAge::Since(tau + 1),
        }
    }

    /// Position of this age within a stage's node list.
    pub fn slot(self) -> usize {
        match self {
            ObsAge::Init => 0,
            ObsAge::Since(tau) => tau,
        }
    }

    /// Whether this age can occur at stage `k`.
    pub fn admissible_at(self, k: usize) -> bool {
        match self {
            ObsAge::Init => true,
            ObsAge::Since(tau) => (1..=k).contains(&tau),
        }
    }
}

impl fmt::Display for ObsAge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObsAge::Init => f.write_str("init"),
            ObsAge::Since(tau) => write!(f, "{tau}"),
        }
    }
}

/// Cost-to-go of both decisions at a node, per player.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branches {
    pub closed: [f64; 2],
    pub open: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovNode {
    pub k: usize,
    pub age: ObsAge,
    pub m_pred: DMatrix<f64>,
    pub v1: f64,
    pub v2: f64,
    /// Centralized welfare value.
    pub vw: f64,
    pub delta_star: bool,
    pub delta_central: bool,
    /// `v1 + v2 - vw`.
    pub poa: f64,
    /// `None` at the terminal stage.
    pub branches: Option<Branches>,
    pub welfare_branches: Option<(f64, f64)>,
}

impl CovNode {
    pub fn value(&self, player: Player) -> f64 {
        match player {
            Player::One => self.v1,
            Player::Two => self.v2,
        }
    }
}

/// Reachable nodes of every stage `0..=T`, indexed by [`ObsAge::slot`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    pub nodes: Vec<Vec<CovNode>>,
    /// Number of next-stage value lookups (both players) the induction
    /// needed to store.
    pub eval_count: usize,
}

impl ValueTables {
    pub fn horizon(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn node(&self, k: usize, age: ObsAge) -> Option<&CovNode> {
        if !age.admissible_at(k) {
            return None;
        }
        self.nodes.get(k)?.get(age.slot())
    }

    fn require(&self, k: usize, age: ObsAge) -> Result<&CovNode, DpError> {
        self.node(k, age).ok_or(DpError::Unreachable { k, age })
    }

    pub fn iter(&self) -> impl Iterator<Item = &CovNode> {
        self.nodes.iter().flatten()
    }

    /// Nodes visited when the equilibrium decisions are played from `Init`.
    pub fn equilibrium_path(&self) -> Vec<&CovNode> {
        let mut age = ObsAge::Init;
        let mut path = Vec::with_capacity(self.nodes.len());
        for stage in &self.nodes {
            let node = &stage[age.slot()];
            path.push(node);
            age = age.successor(node.delta_star);
        }
        path
    }
}

/// Joint equilibrium switching decision per `(k, age)`. Both players request
/// the same bit, so the link closes exactly when the bit is set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchPolicy {
    decisions: Vec<Vec<bool>>,
}

impl SwitchPolicy {
    /// Policy that never closes the switch.
    pub fn never_close(horizon: usize) -> Self {
        SwitchPolicy {
            decisions: (0..=horizon).map(|k| vec![false; k + 1]).collect(),
        }
    }

    /// Policy that reproduces a fixed schedule when played from `Init`.
    /// Off-path nodes stay open; closing at the terminal stage is ignored.
    pub fn from_schedule(schedule: &[bool]) -> Self {
        let horizon = schedule.len().saturating_sub(1);
        let mut policy = Self::never_close(horizon);
        let mut age = ObsAge::Init;
        for (k, &delta) in schedule.iter().enumerate().take(horizon) {
            policy.decisions[k][age.slot()] = delta;
            age = age.successor(delta);
        }
        policy
    }

    pub fn horizon(&self) -> usize {
        self.decisions.len() - 1
    }

    pub fn decision(&self, k: usize, age: ObsAge) -> Option<bool> {
        if !age.admissible_at(k) {
            return None;
        }
        self.decisions.get(k)?.get(age.slot()).copied()
    }

    /// Switch decisions for `k = 0..=T` played forward from `Init`.
    pub fn replay(&self) -> Vec<bool> {
        let mut age = ObsAge::Init;
        self.decisions
            .iter()
            .map(|stage| {
                let d = stage[age.slot()];
                age = age.successor(d);
                d
            })
            .collect()
    }
}

/// Reduced per-stage cost in covariance space:
/// `(1-Δ) tr(Q^i M) + Δ (tr(M P^i_t) + λ_i)`.
pub fn stage_cost(
    m_pred: &DMatrix<f64>,
    delta: bool,
    t: usize,
    player: Player,
    ric: &RiccatiSolution,
    spec: &GameSpec,
) -> Result<f64, DpError> {
    let horizon = spec.horizon;
    if t > horizon {
        return Err(DpError::StageOutOfRange { stage: t, horizon });
    }
    if delta {
        if t == horizon {
            return Err(DpError::TerminalSwitch(t));
        }
        Ok(trace_product(m_pred, ric.p(player, t)) + spec.lambda(player))
    } else {
        Ok(trace_product(spec.q_state(player), m_pred))
    }
}

/// Predicted covariances of all reachable nodes, per stage, indexed by
/// [`ObsAge::slot`].
pub fn reachable_nodes(spec: &ValidatedSpec) -> Vec<Vec<(ObsAge, DMatrix<f64>)>> {
    let horizon = spec.horizon;
    // since_chain[τ] = f^τ(0)
    let mut since_chain = vec![DMatrix::zeros(spec.n, spec.n)];
    for tau in 1..=horizon {
        let next = predict_cov(&since_chain[tau - 1], spec);
        since_chain.push(next);
    }
    let mut init = spec.sigma0.clone();
    let mut stages = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        if k > 0 {
            init = predict_cov(&init, spec);
        }
        let mut stage = vec![(ObsAge::Init, init.clone())];
        stage.extend((1..=k).map(|tau| (ObsAge::Since(tau), since_chain[tau].clone())));
        stages.push(stage);
    }
    stages
}

fn check_horizon(spec: &GameSpec, ric: &RiccatiSolution) -> Result<(), DpError> {
    if ric.horizon() != spec.horizon {
        return Err(DpError::HorizonMismatch {
            expected: spec.horizon,
            got: ric.horizon(),
        });
    }
    Ok(())
}

/// Centralized benchmark: welfare values and decisions per node, indexed
/// like [`reachable_nodes`].
#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedValues {
    pub values: Vec<Vec<f64>>,
    pub decisions: Vec<Vec<bool>>,
    /// `(closed, open)` welfare cost-to-go; `None` at the terminal stage.
    pub branches: Vec<Vec<Option<(f64, f64)>>>,
}

/// Same recursion as the game, on the summed cost of both players.
///
/// Each player's share of the welfare value is carried separately and only
/// summed when compared or reported, so a node where the centralized and
/// equilibrium decisions agree downstream reports exactly zero social loss.
pub fn centralized_induction(
    spec: &ValidatedSpec,
    ric: &RiccatiSolution,
) -> Result<CentralizedValues, DpError> {
    check_horizon(spec, ric)?;
    let nodes = reachable_nodes(spec);
    let horizon = spec.horizon;
    let mut shares: Vec<Vec<[f64; 2]>> = vec![Vec::new(); horizon + 1];
    let mut decisions: Vec<Vec<bool>> = vec![Vec::new(); horizon + 1];
    let mut branches: Vec<Vec<Option<(f64, f64)>>> = vec![Vec::new(); horizon + 1];

    shares[horizon] = nodes[horizon]
        .iter()
        .map(|(_, m)| [trace_product(&spec.q1, m), trace_product(&spec.q2, m)])
        .collect();
    decisions[horizon] = vec![false; horizon + 1];
    branches[horizon] = vec![None; horizon + 1];

    for k in (0..horizon).rev() {
        let next_closed = shares[k + 1][ObsAge::Since(1).slot()];
        let mut stage_shares = Vec::with_capacity(k + 1);
        let mut stage_decisions = Vec::with_capacity(k + 1);
        let mut stage_branches = Vec::with_capacity(k + 1);
        for (age, m) in &nodes[k] {
            let next_open = shares[k + 1][age.successor(false).slot()];
            let mut closed = [0.0; 2];
            let mut open = [0.0; 2];
            for p in Player::BOTH {
                let i = p.index();
                closed[i] = stage_cost(m, true, k, p, ric, spec)? + next_closed[i];
                open[i] = stage_cost(m, false, k, p, ric, spec)? + next_open[i];
            }
            let (closed_sum, open_sum) = (closed[0] + closed[1], open[0] + open[1]);
            let close = closed_sum < open_sum;
            stage_shares.push(if close { closed } else { open });
            stage_decisions.push(close);
            stage_branches.push(Some((closed_sum, open_sum)));
        }
        shares[k] = stage_shares;
        decisions[k] = stage_decisions;
        branches[k] = stage_branches;
    }
    let values = shares
        .iter()
        .map(|stage| stage.iter().map(|s| s[0] + s[1]).collect())
        .collect();
    Ok(CentralizedValues {
        values,
        decisions,
        branches,
    })
}

/// Least-cost subgame-perfect switching values and policy, with the
/// centralized benchmark and social loss filled in on every node.
pub fn backward_induction(
    spec: &ValidatedSpec,
    ric: &RiccatiSolution,
) -> Result<(ValueTables, SwitchPolicy), DpError> {
    check_horizon(spec, ric)?;
    let horizon = spec.horizon;
    let reachable = reachable_nodes(spec);
    let central = centralized_induction(spec, ric)?;

    let mut stages: Vec<Vec<CovNode>> = vec![Vec::new(); horizon + 1];
    let mut eval_count = 0;

    stages[horizon] = reachable[horizon]
        .iter()
        .map(|(age, m)| CovNode {
            k: horizon,
            age: *age,
            m_pred: m.clone(),
            v1: trace_product(&spec.q1, m),
            v2: trace_product(&spec.q2, m),
            vw: 0.0,
            delta_star: false,
            delta_central: false,
            poa: 0.0,
            branches: None,
            welfare_branches: None,
        })
        .collect();

    for k in (0..horizon).rev() {
        let next = &stages[k + 1];
        let closed_next = &next[ObsAge::Since(1).slot()];
        let mut referenced = BTreeSet::new();
        referenced.insert(closed_next.age);
        let mut stage = Vec::with_capacity(k + 1);
        for (age, m) in &reachable[k] {
            let open_next = &next[age.successor(false).slot()];
            referenced.insert(open_next.age);
            let mut closed = [0.0; 2];
            let mut open = [0.0; 2];
            for p in Player::BOTH {
                closed[p.index()] = stage_cost(m, true, k, p, ric, spec)? + closed_next.value(p);
                open[p.index()] = stage_cost(m, false, k, p, ric, spec)? + open_next.value(p);
            }
            let close = closed[0] < open[0] && closed[1] < open[1];
            let chosen = if close { closed } else { open };
            stage.push(CovNode {
                k,
                age: *age,
                m_pred: m.clone(),
                v1: chosen[0],
                v2: chosen[1],
                vw: 0.0,
                delta_star: close,
                delta_central: false,
                poa: 0.0,
                branches: Some(Branches { closed, open }),
                welfare_branches: None,
            });
        }
        eval_count += 2 * referenced.len();
        stages[k] = stage;
    }

    for (k, stage) in stages.iter_mut().enumerate() {
        for (slot, node) in stage.iter_mut().enumerate() {
            node.vw = central.values[k][slot];
            node.delta_central = central.decisions[k][slot];
            node.welfare_branches = central.branches[k][slot];
        }
    }
    let mut tables = ValueTables {
        nodes: stages,
        eval_count,
    };
    let loss = price_of_anarchy(&tables);
    for (stage, stage_loss) in tables.nodes.iter_mut().zip(loss) {
        for (node, l) in stage.iter_mut().zip(stage_loss) {
            node.poa = l;
        }
    }
    let policy = SwitchPolicy {
        decisions: tables
            .nodes
            .iter()
            .map(|stage| stage.iter().map(|n| n.delta_star).collect())
            .collect(),
    };
    Ok((tables, policy))
}

/// Social loss `V1 + V2 - Vw` per node.
pub fn price_of_anarchy(tables: &ValueTables) -> Vec<Vec<f64>> {
    tables
        .nodes
        .iter()
        .map(|stage| stage.iter().map(|n| n.v1 + n.v2 - n.vw).collect())
        .collect()
}

/// Equilibrium decision at a node: close iff the closed branch is strictly
/// cheaper for both players.
pub fn switch_decision(k: usize, age: ObsAge, tables: &ValueTables) -> Result<bool, DpError> {
    let node = tables.require(k, age)?;
    Ok(match node.branches {
        None => false,
        Some(b) => b.closed[0] < b.open[0] && b.closed[1] < b.open[1],
    })
}

/// Largest switching cost for which `player` still strictly prefers to
/// close at this node:
/// `V_{k+1}(open successor) - V_{k+1}(closed successor) - tr((P^i_k - Q^i) M)`.
pub fn switching_threshold(
    k: usize,
    age: ObsAge,
    tables: &ValueTables,
    ric: &RiccatiSolution,
    spec: &GameSpec,
    player: Player,
) -> Result<f64, DpError> {
    let node = tables.require(k, age)?;
    if k >= tables.horizon() {
        return Err(DpError::TerminalSwitch(k));
    }
    let open_next = tables.require(k + 1, age.successor(false))?;
    let closed_next = tables.require(k + 1, ObsAge::Since(1))?;
    let excess = ric.p(player, k) - spec.q_state(player);
    Ok(open_next.value(player) - closed_next.value(player) - trace_product(&excess, &node.m_pred))
}

/// Variant of [`switching_threshold`] with the trace taken on the successor
/// covariance `A M Aᵀ + S`. Diagnostic only; decisions never use it.
pub fn successor_trace_threshold(
    k: usize,
    age: ObsAge,
    tables: &ValueTables,
    ric: &RiccatiSolution,
    spec: &GameSpec,
    player: Player,
) -> Result<f64, DpError> {
    if k >= tables.horizon() {
        return Err(DpError::TerminalSwitch(k));
    }
    let open_next = tables.require(k + 1, age.successor(false))?;
    let closed_next = tables.require(k + 1, ObsAge::Since(1))?;
    let excess = ric.p(player, k) - spec.q_state(player);
    Ok(open_next.value(player)
        - closed_next.value(player)
        - trace_product(&excess, &open_next.m_pred))
}

/// Open-branch over closed-branch cost for `player`.
pub fn cost_ratio(
    k: usize,
    age: ObsAge,
    tables: &ValueTables,
    player: Player,
) -> Result<f64, DpError> {
    let node = tables.require(k, age)?;
    let b = node.branches.ok_or(DpError::TerminalSwitch(k))?;
    Ok(b.open[player.index()] / b.closed[player.index()])
}

/// Expected total cost of each player under the equilibrium, starting from
/// the zero-mean prior.
pub fn expected_total_cost(tables: &ValueTables) -> (f64, f64) {
    let root = &tables.nodes[0][ObsAge::Init.slot()];
    (root.v1, root.v2)
}

/// Expected cost of each player along a fixed schedule (`k = 0..=T`),
/// summed forward over the deterministic covariance sequence.
pub fn evaluate_schedule(
    spec: &GameSpec,
    ric: &RiccatiSolution,
    schedule: &[bool],
) -> Result<[f64; 2], DpError> {
    if schedule.len() != spec.horizon + 1 {
        return Err(DpError::ScheduleLength {
            expected: spec.horizon + 1,
            got: schedule.len(),
        });
    }
    let mut m_pred = spec.sigma0.clone();
    let mut total = [0.0; 2];
    for (t, &delta) in schedule.iter().enumerate() {
        for p in Player::BOTH {
            total[p.index()] += stage_cost(&m_pred, delta, t, p, ric, spec)?;
        }
        m_pred = predict_cov(&update_cov(&m_pred, delta), spec);
    }
    Ok(total)
}
