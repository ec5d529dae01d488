//! Proof graphs with back-links, the global trace condition and full replay.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::kernel::{apply_rule, correspondence, KernelError, Rule, RuleApplication};
use crate::oracle::Oracle;
use crate::program::Instantiation;
use crate::sequent::{Occ, Sequent};
use crate::subst::{match_label, Subst};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Backlink {
    pub companion: NodeId,
    pub subst: Subst,
    /// Bud occurrence to the companion occurrence it instantiates.
    pub pairs: Vec<(Occ, Occ)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeState {
    Open,
    Rule(RuleApplication),
    Bud(Backlink),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub sequent: Sequent,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub state: NodeState,
}

impl Node {
    pub fn rule(&self) -> Option<&RuleApplication> {
        match &self.state {
            NodeState::Rule(a) => Some(a),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("no node {0}")]
    NoSuchNode(NodeId),
    #[error("node {0} is not open")]
    NotOpen(NodeId),
    #[error("node {companion} is not an ancestor of node {bud}")]
    NotAncestor { bud: NodeId, companion: NodeId },
    #[error("node {bud} is not an instance of node {companion}: {detail}")]
    SequentMismatch {
        bud: NodeId,
        companion: NodeId,
        detail: String,
    },
    #[error("at node {node}: {source}")]
    Kernel {
        node: NodeId,
        #[source]
        source: KernelError,
    },
}

/// A derivation tree whose open leaves may be closed by back-links to ancestors.
/// Node ids start at 1 and follow creation order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofGraph {
    pub inst: Instantiation,
    nodes: Vec<Node>,
}

impl ProofGraph {
    pub fn new(inst: Instantiation, root: Sequent) -> ProofGraph {
        ProofGraph {
            inst,
            nodes: vec![Node {
                id: 1,
                sequent: root,
                parent: None,
                children: Vec::new(),
                state: NodeState::Open,
            }],
        }
    }

    /// Rebuilds a graph from externally supplied nodes; ids must be `1..=n`,
    /// the root is node 1 and the child lists must form a tree.
    pub fn from_nodes(inst: Instantiation, mut nodes: Vec<Node>) -> Result<ProofGraph, String> {
        nodes.sort_by_key(|n| n.id);
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i + 1 {
                return Err(format!("node ids must be 1..{}, found {}", nodes.len(), n.id));
            }
        }
        if nodes.is_empty() {
            return Err("no nodes".into());
        }
        let mut parent: Vec<Option<NodeId>> = vec![None; nodes.len() + 1];
        for n in &nodes {
            for &c in &n.children {
                if c < 1 || c > nodes.len() || c == 1 {
                    return Err(format!("node {} lists invalid child {c}", n.id));
                }
                if parent[c].replace(n.id).is_some() {
                    return Err(format!("node {c} has two parents"));
                }
            }
        }
        for n in nodes.iter_mut() {
            n.parent = parent[n.id];
            if n.id != 1 && n.parent.is_none() {
                return Err(format!("node {} is unreachable", n.id));
            }
        }
        // every node must reach the root without repeating
        for n in &nodes {
            let mut cur = n.parent;
            let mut steps = 0;
            while let Some(p) = cur {
                steps += 1;
                if steps > nodes.len() {
                    return Err(format!("node {} lies on a cycle of tree edges", n.id));
                }
                cur = parent[p];
            }
        }
        Ok(ProofGraph { inst, nodes })
    }

    pub fn root(&self) -> NodeId {
        1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        id.checked_sub(1).and_then(|i| self.nodes.get(i))
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut Node> {
        id.checked_sub(1).and_then(|i| self.nodes.get_mut(i))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter()
    }

    fn get(&self, id: NodeId) -> Result<&Node, GraphError> {
        self.node(id).ok_or(GraphError::NoSuchNode(id))
    }

    /// Adds a fresh node below `parent` without touching the parent's state.
    pub fn push_child(&mut self, parent: NodeId, sequent: Sequent) -> NodeId {
        let id = self.nodes.len() + 1;
        self.nodes.push(Node {
            id,
            sequent,
            parent: Some(parent),
            children: Vec::new(),
            state: NodeState::Open,
        });
        self.nodes[parent - 1].children.push(id);
        id
    }

    /// Records an already computed application at an open node and creates its premises.
    pub fn attach(&mut self, id: NodeId, app: RuleApplication) -> Result<Vec<NodeId>, GraphError> {
        if !matches!(self.get(id)?.state, NodeState::Open) {
            return Err(GraphError::NotOpen(id));
        }
        let kids: Vec<NodeId> = app
            .premises
            .iter()
            .map(|p| p.sequent.clone())
            .collect::<Vec<_>>()
            .into_iter()
            .map(|s| self.push_child(id, s))
            .collect();
        self.nodes[id - 1].state = NodeState::Rule(app);
        Ok(kids)
    }

    pub fn apply(&mut self, oracle: &Oracle, id: NodeId, rule: &Rule) -> Result<Vec<NodeId>, GraphError> {
        let node = self.get(id)?;
        if !matches!(node.state, NodeState::Open) {
            return Err(GraphError::NotOpen(id));
        }
        let app = apply_rule(&self.inst, oracle, &node.sequent, rule).map_err(|source| GraphError::Kernel { node: id, source })?;
        self.attach(id, app)
    }

    /// Proper ancestors of `id`, nearest first.
    pub fn ancestors(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut cur = self.node(id).and_then(|n| n.parent);
        while let Some(p) = cur {
            out.push(p);
            cur = self.node(p).and_then(|n| n.parent);
        }
        out
    }

    /// Closes the open node `bud` by a back-link. Without `subst`, one is found by matching.
    pub fn add_backlink(&mut self, bud: NodeId, companion: NodeId, subst: Option<Subst>) -> Result<(), GraphError> {
        let b = self.get(bud)?;
        if !matches!(b.state, NodeState::Open) {
            return Err(GraphError::NotOpen(bud));
        }
        let link = self.check_backlink(bud, companion, subst)?;
        self.nodes[bud - 1].state = NodeState::Bud(link);
        Ok(())
    }

    fn check_backlink(&self, bud: NodeId, companion: NodeId, subst: Option<Subst>) -> Result<Backlink, GraphError> {
        if !self.ancestors(bud).contains(&companion) {
            return Err(GraphError::NotAncestor { bud, companion });
        }
        let target = &self.get(bud)?.sequent;
        let source = &self.get(companion)?.sequent;
        let mismatch = |detail: String| GraphError::SequentMismatch { bud, companion, detail };
        let subst = match subst {
            Some(s) => s,
            None => match_label(source, target).ok_or_else(|| mismatch("no substitution matches".into()))?,
        };
        let image = subst.apply_sequent(source);
        let pairs = correspondence(target, &image).ok_or_else(|| mismatch(format!("{subst} gives {image}")))?;
        Ok(Backlink {
            companion,
            subst,
            pairs,
        })
    }

    pub fn open_goals(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.state, NodeState::Open))
            .map(|n| n.id)
            .collect()
    }

    /// Open goals in depth-first, left-to-right order.
    pub fn open_goals_dfs(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![self.root()];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id - 1];
            if matches!(n.state, NodeState::Open) {
                out.push(id);
            }
            stack.extend(n.children.iter().rev());
        }
        out
    }

    pub fn backlinks(&self) -> Vec<(NodeId, &Backlink)> {
        self.nodes
            .iter()
            .filter_map(|n| match &n.state {
                NodeState::Bud(b) => Some((n.id, b)),
                _ => None,
            })
            .collect()
    }

    pub fn is_closed(&self) -> bool {
        self.open_goals().is_empty()
    }

    /// Removes every node below `id` and reopens it. Ids of later nodes shift down.
    pub fn reopen(&mut self, id: NodeId) {
        let mut doomed = BTreeSet::new();
        let mut stack: Vec<NodeId> = self.nodes[id - 1].children.clone();
        while let Some(k) = stack.pop() {
            doomed.insert(k);
            stack.extend(self.nodes[k - 1].children.iter().copied());
        }
        self.nodes[id - 1].children.clear();
        self.nodes[id - 1].state = NodeState::Open;
        if doomed.is_empty() {
            return;
        }
        let remap: BTreeMap<NodeId, NodeId> = self
            .nodes
            .iter()
            .map(|n| n.id)
            .filter(|k| !doomed.contains(k))
            .enumerate()
            .map(|(i, k)| (k, i + 1))
            .collect();
        let nodes = std::mem::take(&mut self.nodes);
        for mut n in nodes {
            let Some(&new) = remap.get(&n.id) else { continue };
            n.id = new;
            n.parent = n.parent.map(|p| remap[&p]);
            n.children = n.children.iter().map(|c| remap[c]).collect();
            if let NodeState::Bud(b) = &mut n.state {
                b.companion = remap[&b.companion];
            }
            self.nodes.push(n);
        }
    }
}

/// Per-node premise pairs, indexed by child position.
fn child_pairs(n: &Node) -> Vec<Vec<(Occ, Occ, bool)>> {
    match &n.state {
        NodeState::Rule(app) => app
            .premises
            .iter()
            .map(|p| p.pairs.iter().map(|c| (c.from, c.to, c.progressive)).collect())
            .collect(),
        _ => Vec::new(),
    }
}

/// A relation between occurrences at two nodes; the flag records a progressive step.
type Relation = BTreeMap<(Occ, Occ), bool>;

fn compose(a: &Relation, b: &Relation) -> Relation {
    let mut out = Relation::new();
    for (&(x, y), &p) in a {
        for (&(y2, z), &q) in b.range((y, Occ::left(0))..) {
            if y2 != y {
                break;
            }
            let e = out.entry((x, z)).or_insert(false);
            *e |= p || q;
        }
    }
    out
}

fn identity(s: &Sequent) -> Relation {
    s.occurrences().map(|(o, _)| ((o, o), false)).collect()
}

/// The relation along the tree path from `top` down to its descendant `bottom`.
fn path_relation(g: &ProofGraph, top: NodeId, bottom: NodeId) -> (Relation, Vec<NodeId>) {
    let mut path = vec![bottom];
    let mut cur = bottom;
    while cur != top {
        cur = g.node(cur).unwrap().parent.unwrap();
        path.push(cur);
    }
    path.reverse();
    let mut rel = identity(&g.node(top).unwrap().sequent);
    for w in path.windows(2) {
        let parent = g.node(w[0]).unwrap();
        let k = parent.children.iter().position(|&c| c == w[1]).unwrap();
        let step: Relation = child_pairs(parent)[k]
            .iter()
            .fold(Relation::new(), |mut m, &(a, b, p)| {
                *m.entry((a, b)).or_insert(false) |= p;
                m
            });
        rel = compose(&rel, &step);
    }
    (rel, path)
}

/// One returning trace around a back-link's cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleSummary {
    pub bud: NodeId,
    pub companion: NodeId,
    /// Tree path from the companion down to the bud.
    pub path: Vec<NodeId>,
    /// The companion occurrence the best returning trace starts and ends at.
    pub occurrence: Option<Occ>,
    pub progressive_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclicReport {
    pub cycles: Vec<CycleSummary>,
    /// Composite cycle patterns examined by the global check.
    pub patterns: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CyclicError {
    #[error("open goals remain: {0:?}")]
    OpenGoals(Vec<NodeId>),
    #[error("no progressing trace along the cycle through nodes {cycle:?}")]
    NoProgress { cycle: Vec<NodeId> },
    #[error("the trace condition needs more than {0} cycle patterns")]
    TooComplex(usize),
}

const PATTERN_LIMIT: usize = 200_000;

/// Counts progressive steps on the best returning trace of each back-link.
fn summarize(g: &ProofGraph, bud: NodeId, link: &Backlink) -> CycleSummary {
    let companion = link.companion;
    let mut path = vec![bud];
    let mut cur = bud;
    while cur != companion {
        cur = g.node(cur).unwrap().parent.unwrap();
        path.push(cur);
    }
    path.reverse();
    // count progressive edges per trace by dynamic programming over occurrences
    let start = &g.node(companion).unwrap().sequent;
    let mut best: BTreeMap<(Occ, Occ), usize> = start.occurrences().map(|(o, _)| ((o, o), 0)).collect();
    for w in path.windows(2) {
        let parent = g.node(w[0]).unwrap();
        let k = parent.children.iter().position(|&c| c == w[1]).unwrap();
        let mut next: BTreeMap<(Occ, Occ), usize> = BTreeMap::new();
        for (&(o, at), &n) in &best {
            for &(a, b, p) in &child_pairs(parent)[k] {
                if a == at {
                    let e = next.entry((o, b)).or_insert(0);
                    *e = (*e).max(n + usize::from(p));
                }
            }
        }
        best = next;
    }
    let mut top: Option<(Occ, usize)> = None;
    for (&(o, at), &n) in &best {
        if link.pairs.iter().any(|&(b, c)| b == at && c == o) && top.map_or(true, |(_, m)| n > m) {
            top = Some((o, n));
        }
    }
    CycleSummary {
        bud,
        companion,
        path,
        occurrence: top.map(|t| t.0),
        progressive_steps: top.map_or(0, |t| t.1),
    }
}

/// Global trace condition: every infinite path through the graph carries a
/// trace that progresses infinitely often. Decided by closing the per-segment
/// trace relations under composition and requiring a progressing self-trace
/// in every idempotent cycle pattern.
pub fn check_cyclic(g: &ProofGraph) -> Result<CyclicReport, CyclicError> {
    let open = g.open_goals();
    if !open.is_empty() {
        return Err(CyclicError::OpenGoals(open));
    }
    let links = g.backlinks();
    let cycles: Vec<CycleSummary> = links.iter().map(|(b, l)| summarize(g, *b, l)).collect();
    let companions: BTreeSet<NodeId> = links.iter().map(|(_, l)| l.companion).collect();

    // segments: from a companion down to a bud below it, then across the back-link
    type Pattern = (NodeId, NodeId, Relation);
    let mut seeds: Vec<(Pattern, Vec<NodeId>)> = Vec::new();
    for &c in &companions {
        for (b, link) in &links {
            if !g.ancestors(*b).contains(&c) {
                continue;
            }
            let (rel, path) = path_relation(g, c, *b);
            let jump: Relation = link.pairs.iter().map(|&(x, y)| ((x, y), false)).collect();
            seeds.push(((c, link.companion, compose(&rel, &jump)), path));
        }
    }
    let mut seen: HashSet<(NodeId, NodeId, Vec<((Occ, Occ), bool)>)> = HashSet::new();
    let key = |p: &Pattern| (p.0, p.1, p.2.iter().map(|(k, v)| (*k, *v)).collect::<Vec<_>>());
    let mut all: Vec<(Pattern, Vec<NodeId>)> = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    for s in seeds.iter().cloned() {
        if seen.insert(key(&s.0)) {
            all.push(s);
            queue.push_back(all.len() - 1);
        }
    }
    while let Some(i) = queue.pop_front() {
        for s in &seeds {
            if all[i].0 .1 != s.0 .0 {
                continue;
            }
            let rel = compose(&all[i].0 .2, &s.0 .2);
            let pat = (all[i].0 .0, s.0 .1, rel);
            if seen.insert(key(&pat)) {
                if all.len() >= PATTERN_LIMIT {
                    return Err(CyclicError::TooComplex(PATTERN_LIMIT));
                }
                let mut path = all[i].1.clone();
                path.extend(s.1.iter().copied());
                all.push((pat, path));
                queue.push_back(all.len() - 1);
            }
        }
    }
    for ((from, to, rel), path) in &all {
        if from != to || compose(rel, rel) != *rel {
            continue;
        }
        if !rel.iter().any(|(&(x, y), &p)| x == y && p) {
            return Err(CyclicError::NoProgress { cycle: path.clone() });
        }
    }
    Ok(CyclicReport {
        cycles,
        patterns: all.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ProofError {
    #[error("open goals remain: {0:?}")]
    OpenGoals(Vec<NodeId>),
    #[error("node {node}: {source}")]
    Rule {
        node: NodeId,
        #[source]
        source: KernelError,
    },
    #[error("node {node}: recorded {what} differs from the replayed rule")]
    Mismatch { node: NodeId, what: String },
    #[error("node {node}: {source}")]
    Backlink {
        node: NodeId,
        #[source]
        source: GraphError,
    },
    #[error("{0}")]
    Cyclic(CyclicError),
}

impl ProofError {
    pub fn node(&self) -> Option<NodeId> {
        match self {
            ProofError::Rule { node, .. } | ProofError::Mismatch { node, .. } | ProofError::Backlink { node, .. } => {
                Some(*node)
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofReport {
    pub nodes: usize,
    pub obligations: usize,
    pub termination_proofs: usize,
    pub cyclic: CyclicReport,
}

impl fmt::Display for ProofReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "accepted: {} nodes, {} back-links, {} oracle obligations, {} termination proofs",
            self.nodes,
            self.cyclic.cycles.len(),
            self.obligations,
            self.termination_proofs
        )
    }
}

/// Replays every rule application from its parameters, re-discharges every
/// obligation, re-checks every back-link and then the trace condition.
/// Nodes are replayed from the highest id down, so a defect is reported at the
/// node that carries it rather than at an ancestor whose premise now differs.
pub fn check_proof(g: &ProofGraph, oracle: &Oracle) -> Result<ProofReport, ProofError> {
    let open = g.open_goals();
    if !open.is_empty() {
        return Err(ProofError::OpenGoals(open));
    }
    let mut replayed = g.clone();
    let mut obligations = 0;
    let mut termination_proofs = 0;
    for n in g.nodes().collect::<Vec<_>>().into_iter().rev() {
        match &n.state {
            NodeState::Open => unreachable!(),
            NodeState::Bud(link) => {
                let fresh = g
                    .check_backlink(n.id, link.companion, Some(link.subst.clone()))
                    .map_err(|source| ProofError::Backlink { node: n.id, source })?;
                replayed.node_mut(n.id).unwrap().state = NodeState::Bud(fresh);
            }
            NodeState::Rule(recorded) => {
                let app = apply_rule(&g.inst, oracle, &n.sequent, &recorded.rule)
                    .map_err(|source| ProofError::Rule { node: n.id, source })?;
                let mismatch = |what: &str| ProofError::Mismatch {
                    node: n.id,
                    what: what.to_string(),
                };
                if app.premises.len() != n.children.len() {
                    return Err(mismatch("number of premises"));
                }
                for (p, &c) in app.premises.iter().zip(&n.children) {
                    if !p.sequent.same_layout(&g.node(c).unwrap().sequent) {
                        return Err(mismatch("premise sequent"));
                    }
                }
                let flags = |a: &RuleApplication| {
                    a.premises
                        .iter()
                        .flat_map(|p| p.pairs.iter().filter(|c| c.progressive).map(|c| (c.from, c.to)))
                        .collect::<BTreeSet<_>>()
                };
                if flags(&app) != flags(recorded) {
                    return Err(mismatch("progress flags"));
                }
                let sequents = |a: &RuleApplication| a.obligations.iter().map(|o| o.sequent.normalized()).collect::<Vec<_>>();
                if sequents(&app) != sequents(recorded) || recorded.obligations.iter().any(|o| !o.verdict.is_valid()) {
                    return Err(mismatch("obligations"));
                }
                obligations += app.obligations.len();
                termination_proofs += usize::from(app.termination.is_some());
                replayed.node_mut(n.id).unwrap().state = NodeState::Rule(app);
            }
        }
    }
    let cyclic = check_cyclic(&replayed).map_err(ProofError::Cyclic)?;
    Ok(ProofReport {
        nodes: g.len(),
        obligations,
        termination_proofs,
        cyclic,
    })
}
