//! Linearized branch-flow model of a radial feeder.
//!
//! Node 0 is the slack bus. Branch `i` is the line feeding node `i` from its
//! parent, so branch quantities are indexed by their downstream node. The
//! model ignores losses: the active flow on a branch is the sum of the net
//! loads in the subtree below it, and voltage drops are linear in flows.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ProsumerState, SlotDecision};

/// Tolerance used when reporting limit violations, per unit.
pub const LIMIT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r_pu: f64,
    pub x_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkLimits {
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub v_min: Vec<f64>,
    pub v_max: Vec<f64>,
}

impl NetworkLimits {
    pub fn uniform(nodes: usize, flow: f64, v_min: f64, v_max: f64) -> Self {
        Self {
            p_min: -flow,
            p_max: flow,
            q_min: -flow,
            q_max: flow,
            v_min: vec![v_min; nodes],
            v_max: vec![v_max; nodes],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    /// `parent[i]` for `i > 0`; `parent[0] = 0`.
    pub parent: Vec<usize>,
    /// Resistance of branch `i`, per unit. `r[0] = 0`.
    pub r: Vec<f64>,
    pub x: Vec<f64>,
    /// Nodes ordered so that every parent precedes its children.
    pub order: Vec<usize>,
    pub base_power_mva: f64,
    pub base_voltage_kv: f64,
    pub slack_voltage: f64,
    /// kW, indexed `[slot][node]`.
    pub inflexible_p: Vec<Vec<f64>>,
    /// kvar, indexed `[slot][node]`.
    pub inflexible_q: Vec<Vec<f64>>,
    pub limits: NetworkLimits,
    pub community_nodes: Vec<usize>,
}

/// Nodal net loads in kW and kvar, indexed `[slot][node]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetLoads {
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

/// Per-unit network state, indexed `[slot][node]`.
///
/// `p_flow[t][0]` and `q_flow[t][0]` hold the feeder-head injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub p_flow: Vec<Vec<f64>>,
    pub q_flow: Vec<Vec<f64>>,
    pub voltage: Vec<Vec<f64>>,
    pub slack_voltage: f64,
}

impl FlowState {
    pub fn head_flow(&self, slot: usize) -> f64 {
        self.p_flow[slot][0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    ActiveFlow,
    ReactiveFlow,
    Voltage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitViolation {
    pub quantity: Quantity,
    /// Node, or downstream node of the branch.
    pub element: usize,
    pub slot: usize,
    pub value: f64,
    pub bound: f64,
}

impl NetworkTopology {
    /// Builds a radial feeder from an undirected branch list. Loads start at
    /// zero for `slots` slots.
    pub fn radial(
        branches: &[Branch],
        base_power_mva: f64,
        base_voltage_kv: f64,
        slots: usize,
    ) -> Result<Self> {
        let n = branches
            .iter()
            .map(|b| b.from.max(b.to) + 1)
            .max()
            .unwrap_or(1);
        if branches.len() != n - 1 {
            return Err(Error::NotRadial(format!(
                "{} nodes need {} branches, found {}",
                n,
                n - 1,
                branches.len()
            )));
        }
        if !(base_power_mva > 0.0 && base_voltage_kv > 0.0) {
            return Err(Error::InvalidParameter("base power and voltage must be positive".into()));
        }
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (k, b) in branches.iter().enumerate() {
            if b.from == b.to {
                return Err(Error::NotRadial(format!("self loop at node {}", b.from)));
            }
            if !(b.r_pu >= 0.0 && b.x_pu >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "branch {}-{} has negative impedance",
                    b.from, b.to
                )));
            }
            adj[b.from].push((b.to, k));
            adj[b.to].push((b.from, k));
        }
        let mut parent = vec![usize::MAX; n];
        let mut r = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut order = Vec::with_capacity(n);
        parent[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(v, k) in &adj[u] {
                if v == parent[u] && u != 0 {
                    continue;
                }
                if parent[v] != usize::MAX {
                    return Err(Error::NotRadial(format!("cycle through node {v}")));
                }
                parent[v] = u;
                r[v] = branches[k].r_pu;
                x[v] = branches[k].x_pu;
                queue.push_back(v);
            }
        }
        if let Some(i) = parent.iter().position(|&p| p == usize::MAX) {
            return Err(Error::NotRadial(format!("node {i} is not connected to the slack")));
        }
        Ok(Self {
            parent,
            r,
            x,
            order,
            base_power_mva,
            base_voltage_kv,
            slack_voltage: 1.0,
            inflexible_p: vec![vec![0.0; n]; slots],
            inflexible_q: vec![vec![0.0; n]; slots],
            limits: NetworkLimits::uniform(n, 1.0, 0.95, 1.05),
            community_nodes: Vec::new(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn num_slots(&self) -> usize {
        self.inflexible_p.len()
    }

    pub fn base_kw(&self) -> f64 {
        self.base_power_mva * 1000.0
    }

    /// Sets every slot's inflexible load to `profile[t]` times the base
    /// nodal load.
    pub fn set_inflexible(&mut self, p_kw: &[f64], q_kvar: &[f64], profile: &[f64]) -> Result<()> {
        let n = self.num_nodes();
        if p_kw.len() != n || q_kvar.len() != n {
            return Err(Error::Dimension("nodal loads must cover every node"));
        }
        self.inflexible_p = profile
            .iter()
            .map(|&m| p_kw.iter().map(|p| p * m).collect())
            .collect();
        self.inflexible_q = profile
            .iter()
            .map(|&m| q_kvar.iter().map(|q| q * m).collect())
            .collect();
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        if self.r.len() != n || self.x.len() != n || self.order.len() != n {
            return Err(Error::Dimension("topology arrays disagree on node count"));
        }
        if self.limits.v_min.len() != n || self.limits.v_max.len() != n {
            return Err(Error::Dimension("voltage limits must cover every node"));
        }
        if self
            .limits
            .v_min
            .iter()
            .zip(&self.limits.v_max)
            .any(|(lo, hi)| !(lo < hi))
        {
            return Err(Error::InvalidParameter("V_min must be below V_max".into()));
        }
        if self.inflexible_q.len() != self.inflexible_p.len()
            || self
                .inflexible_p
                .iter()
                .chain(&self.inflexible_q)
                .any(|row| row.len() != n)
        {
            return Err(Error::Dimension("inflexible loads must be [slot][node]"));
        }
        for &c in &self.community_nodes {
            if c >= n {
                return Err(Error::UnknownNode(c));
            }
        }
        Ok(())
    }

    /// Nodes on the path from `node` up to (excluding) the slack.
    pub fn path_to_root(&self, mut node: usize) -> Vec<usize> {
        let mut path = Vec::new();
        while node != 0 {
            path.push(node);
            node = self.parent[node];
        }
        path
    }

    /// Resistance and reactance shared by the root paths of `a` and `b`.
    pub fn shared_impedance(&self, a: usize, b: usize) -> (f64, f64) {
        let pa = self.path_to_root(a);
        let pb = self.path_to_root(b);
        let (mut r, mut x) = (0.0, 0.0);
        for i in pa {
            if pb.contains(&i) {
                r += self.r[i];
                x += self.x[i];
            }
        }
        (r, x)
    }
}

/// Net active load at `node` in `slot`: inflexible load plus the net draw of
/// the prosumers attached there.
pub fn node_net_load(
    topology: &NetworkTopology,
    prosumers: &[ProsumerState],
    decisions: &[Vec<SlotDecision>],
    node: usize,
    slot: usize,
) -> Result<f64> {
    if node >= topology.num_nodes() {
        return Err(Error::UnknownNode(node));
    }
    if decisions.len() != prosumers.len() {
        return Err(Error::Dimension("one decision trace per prosumer"));
    }
    let base = topology
        .inflexible_p
        .get(slot)
        .map(|row| row[node])
        .ok_or(Error::Dimension("slot outside the inflexible load horizon"))?;
    let mut total = base;
    for (u, d) in prosumers.iter().zip(decisions) {
        if u.node == node {
            let s = d.get(slot).ok_or(Error::Dimension("decision trace too short"))?;
            total += s.net_draw();
        }
    }
    Ok(total)
}

/// Net loads for every node and slot.
pub fn net_loads(
    topology: &NetworkTopology,
    prosumers: &[ProsumerState],
    decisions: &[Vec<SlotDecision>],
) -> Result<NetLoads> {
    let mut p = topology.inflexible_p.clone();
    for (u, d) in prosumers.iter().zip(decisions) {
        if u.node >= topology.num_nodes() {
            return Err(Error::UnknownNode(u.node));
        }
        for (t, row) in p.iter_mut().enumerate() {
            if let Some(s) = d.get(t) {
                row[u.node] += s.net_draw();
            }
        }
    }
    Ok(NetLoads {
        p,
        q: topology.inflexible_q.clone(),
    })
}

/// Flows and voltages for the given nodal loads.
pub fn propagate(topology: &NetworkTopology, loads: &NetLoads) -> Result<FlowState> {
    let n = topology.num_nodes();
    if loads.p.len() != loads.q.len() {
        return Err(Error::Dimension("active and reactive loads cover different slots"));
    }
    let base = topology.base_kw();
    let v0 = topology.slack_voltage;
    let mut p_flow = Vec::with_capacity(loads.p.len());
    let mut q_flow = Vec::with_capacity(loads.p.len());
    let mut voltage = Vec::with_capacity(loads.p.len());
    for (pl, ql) in loads.p.iter().zip(&loads.q) {
        if pl.len() != n || ql.len() != n {
            return Err(Error::Dimension("nodal loads must cover every node"));
        }
        let mut p: Vec<f64> = pl.iter().map(|v| v / base).collect();
        let mut q: Vec<f64> = ql.iter().map(|v| v / base).collect();
        for &i in topology.order.iter().skip(1).rev() {
            let up = topology.parent[i];
            p[up] += p[i];
            q[up] += q[i];
        }
        let mut v = vec![v0; n];
        for &i in topology.order.iter().skip(1) {
            v[i] = v[topology.parent[i]] - (topology.r[i] * p[i] + topology.x[i] * q[i]) / v0;
        }
        p_flow.push(p);
        q_flow.push(q);
        voltage.push(v);
    }
    Ok(FlowState {
        p_flow,
        q_flow,
        voltage,
        slack_voltage: v0,
    })
}

/// Every bound violated by `flow`; empty when the network is feasible.
pub fn check_limits(flow: &FlowState, topology: &NetworkTopology) -> Vec<LimitViolation> {
    let lim = &topology.limits;
    let mut out = Vec::new();
    let mut check = |quantity, element, slot, value: f64, lo: f64, hi: f64| {
        if value < lo - LIMIT_TOL {
            out.push(LimitViolation {
                quantity,
                element,
                slot,
                value,
                bound: lo,
            });
        } else if value > hi + LIMIT_TOL {
            out.push(LimitViolation {
                quantity,
                element,
                slot,
                value,
                bound: hi,
            });
        }
    };
    for t in 0..flow.voltage.len() {
        for i in 0..topology.num_nodes() {
            if i > 0 {
                check(Quantity::ActiveFlow, i, t, flow.p_flow[t][i], lim.p_min, lim.p_max);
                check(Quantity::ReactiveFlow, i, t, flow.q_flow[t][i], lim.q_min, lim.q_max);
            }
            check(Quantity::Voltage, i, t, flow.voltage[t][i], lim.v_min[i], lim.v_max[i]);
        }
    }
    out
}

/// Baran-Wu 33-bus feeder: (from bus, to bus, R Ω, X Ω, P kW, Q kvar) with
/// the load at the receiving bus. Buses are numbered from 1.
pub const IEEE33_DATA: [(usize, usize, f64, f64, f64, f64); 32] = [
    (1, 2, 0.0922, 0.0470, 100.0, 60.0),
    (2, 3, 0.4930, 0.2511, 90.0, 40.0),
    (3, 4, 0.3660, 0.1864, 120.0, 80.0),
    (4, 5, 0.3811, 0.1941, 60.0, 30.0),
    (5, 6, 0.8190, 0.7070, 60.0, 20.0),
    (6, 7, 0.1872, 0.6188, 200.0, 100.0),
    (7, 8, 0.7114, 0.2351, 200.0, 100.0),
    (8, 9, 1.0300, 0.7400, 60.0, 20.0),
    (9, 10, 1.0440, 0.7400, 60.0, 20.0),
    (10, 11, 0.1966, 0.0650, 45.0, 30.0),
    (11, 12, 0.3744, 0.1238, 60.0, 35.0),
    (12, 13, 1.4680, 1.1550, 60.0, 35.0),
    (13, 14, 0.5416, 0.7129, 120.0, 80.0),
    (14, 15, 0.5910, 0.5260, 60.0, 10.0),
    (15, 16, 0.7463, 0.5450, 60.0, 20.0),
    (16, 17, 1.2890, 1.7210, 60.0, 20.0),
    (17, 18, 0.7320, 0.5740, 90.0, 40.0),
    (2, 19, 0.1640, 0.1565, 90.0, 40.0),
    (19, 20, 1.5042, 1.3554, 90.0, 40.0),
    (20, 21, 0.4095, 0.4784, 90.0, 40.0),
    (21, 22, 0.7089, 0.9373, 90.0, 40.0),
    (3, 23, 0.4512, 0.3083, 90.0, 50.0),
    (23, 24, 0.8980, 0.7091, 420.0, 200.0),
    (24, 25, 0.8960, 0.7011, 420.0, 200.0),
    (6, 26, 0.2030, 0.1034, 60.0, 25.0),
    (26, 27, 0.2842, 0.1447, 60.0, 25.0),
    (27, 28, 1.0590, 0.9337, 60.0, 20.0),
    (28, 29, 0.8042, 0.7006, 120.0, 70.0),
    (29, 30, 0.5075, 0.2585, 200.0, 600.0),
    (30, 31, 0.9744, 0.9630, 150.0, 70.0),
    (31, 32, 0.3105, 0.3619, 210.0, 100.0),
    (32, 33, 0.3410, 0.5302, 60.0, 40.0),
];

pub const IEEE33_BASE_MVA: f64 = 10.0;
pub const IEEE33_BASE_KV: f64 = 12.66;

/// Nodal loads of the 33-bus feeder in kW and kvar, indexed by node.
pub fn ieee33_nodal_loads() -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; 33];
    let mut q = vec![0.0; 33];
    for &(_, to, _, _, pk, qk) in &IEEE33_DATA {
        p[to - 1] = pk;
        q[to - 1] = qk;
    }
    (p, q)
}

/// The 33-bus feeder carrying its full nodal load in every slot. Node `k` is
/// bus `k + 1`.
pub fn ieee33(slots: usize) -> NetworkTopology {
    let z_base = IEEE33_BASE_KV * IEEE33_BASE_KV / IEEE33_BASE_MVA;
    let branches: Vec<Branch> = IEEE33_DATA
        .iter()
        .map(|&(f, t, r, x, _, _)| Branch {
            from: f - 1,
            to: t - 1,
            r_pu: r / z_base,
            x_pu: x / z_base,
        })
        .collect();
    let mut topo = NetworkTopology::radial(&branches, IEEE33_BASE_MVA, IEEE33_BASE_KV, slots)
        .expect("built-in feeder is radial");
    let (p, q) = ieee33_nodal_loads();
    topo.set_inflexible(&p, &q, &vec![1.0; slots])
        .expect("sizes match");
    topo.community_nodes = vec![4, 25, 32];
    topo
}
