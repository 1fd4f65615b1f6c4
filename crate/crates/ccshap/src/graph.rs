//! Directed acyclic causal graphs and the structural queries built on them:
//! path enumeration, blocking, d-separation, backdoor paths, graph surgery,
//! path/context classification and the collider-impact heuristic.
//!
//! Graphs are immutable after construction; every query is a pure function
//! and safe to call from multiple threads.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

/// Node identifier: a non-empty name, unique within a graph.
pub type NodeId = String;

/// Default cap on enumerated paths. Exceeding it raises [`Error::PathLimit`].
pub const DEFAULT_PATH_LIMIT: usize = 10_000;

/// A DAG over named nodes with one designated target variable.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    edges: BTreeSet<(usize, usize)>,
    target: usize,
}

/// Direction of one path step relative to the traversal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    /// Edge points along the traversal: `nodes[i] -> nodes[i+1]`.
    Forward,
    /// Edge points against the traversal: `nodes[i] <- nodes[i+1]`.
    Backward,
}

/// A simple undirected path through the graph, annotated with per-edge
/// direction. No node repeats; consecutive nodes are adjacent in the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    nodes: Vec<usize>,
    dirs: Vec<Dir>,
}

/// Row of the path/context classification table for a path between a feature
/// and the target, relative to a context node `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathContextRow {
    /// `-> k ->` or `<- k <-` occurs on the path.
    ChainThroughK,
    /// `<- k ->` occurs on the path.
    ForkAtK,
    /// `-> k <-` occurs on the path.
    ColliderAtK,
    /// Some collider `C` lies on the path, `k` does not, and `C` is an
    /// ancestor of `k`.
    ColliderAncestorOfK,
    /// None of the above: conditioning or intervening on `k` has no effect.
    Unaffected,
}

/// How the blocked status of a path changes under conditioning or
/// intervention on the context node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockTransition {
    /// Blocked or unblocked before, blocked after.
    BecomesBlocked,
    /// Blocked before; afterwards blocked or unblocked, depending on the
    /// rest of the conditioning set. Not resolved here because the
    /// classification abstracts the full conditioning set away.
    PotentiallyUnblocked,
    /// Blocked before and after.
    StaysBlocked,
    /// Status unchanged.
    NoEffect,
}

/// Classification of one (path, context node) pair: the first matching table
/// row, the blocked-status transition under conditioning and under
/// intervention, and every row whose condition holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathContextEffect {
    pub row: PathContextRow,
    pub conditioning: BlockTransition,
    pub intervention: BlockTransition,
    pub all_matches: Vec<PathContextRow>,
}

/// Whether a feature's connection to the target runs through colliders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuppressorStatus {
    /// No path to the target at all.
    Disconnected,
    /// Every path to the target contains a collider.
    Suppressor,
    /// Some but not all paths to the target contain a collider.
    PartialSuppressor,
    /// No path to the target contains a collider.
    NotSuppressor,
}

impl CausalGraph {
    /// Build a graph from node names, directed edges `(parent, child)` and a
    /// target node. Fails on duplicate/empty names, unknown edge endpoints,
    /// self loops, duplicate edges, an unknown target, or a cycle.
    pub fn new<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)], target: &str) -> Result<Self> {
        let mut names = Vec::with_capacity(nodes.len());
        let mut index = HashMap::new();
        for n in nodes {
            let n = n.as_ref();
            if n.is_empty() {
                return Err(Error::InvalidArgument("empty node name".into()));
            }
            if index.insert(n.to_string(), names.len()).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate node `{n}`")));
            }
            names.push(n.to_string());
        }
        let target = *index
            .get(target)
            .ok_or_else(|| Error::UnknownNode(target.to_string()))?;

        let mut g = CausalGraph {
            parents: vec![Vec::new(); names.len()],
            children: vec![Vec::new(); names.len()],
            edges: BTreeSet::new(),
            names,
            index,
            target,
        };
        for (p, c) in edges {
            let (p, c) = (p.as_ref(), c.as_ref());
            let pi = g.idx(p)?;
            let ci = g.idx(c)?;
            if pi == ci {
                return Err(Error::InvalidArgument(format!("self loop on `{p}`")));
            }
            if !g.edges.insert((pi, ci)) {
                return Err(Error::InvalidArgument(format!("duplicate edge {p} -> {c}")));
            }
            g.parents[ci].push(pi);
            g.children[pi].push(ci);
        }
        // Neighbor lists sorted by name for deterministic traversal order.
        for list in g.parents.iter_mut().chain(g.children.iter_mut()) {
            list.sort_by(|&a, &b| g.names[a].cmp(&g.names[b]));
        }
        g.check_acyclic()?;
        Ok(g)
    }

    fn check_acyclic(&self) -> Result<()> {
        // Kahn's algorithm; on failure, walk parents to surface one cycle.
        let mut indeg: Vec<usize> = self.parents.iter().map(|p| p.len()).collect();
        let mut queue: VecDeque<usize> = (0..self.len()).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop_front() {
            seen += 1;
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if seen == self.len() {
            return Ok(());
        }
        let start = (0..self.len()).find(|&i| indeg[i] > 0).unwrap();
        let mut cycle = vec![start];
        let mut cur = start;
        loop {
            cur = *self.parents[cur]
                .iter()
                .find(|&&p| indeg[p] > 0)
                .expect("node on a cycle has a parent on a cycle");
            if cur == start {
                cycle.push(start);
                break;
            }
            if cycle.contains(&cur) {
                let pos = cycle.iter().position(|&x| x == cur).unwrap();
                cycle.truncate(pos + 1);
                cycle.reverse();
                cycle.push(cur);
                break;
            }
            cycle.push(cur);
        }
        cycle.reverse();
        Err(Error::Cycle(
            cycle.into_iter().map(|i| self.names[i].clone()).collect(),
        ))
    }

    pub(crate) fn idx(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    fn idx_set<S: AsRef<str>>(&self, names: &[S]) -> Result<BTreeSet<usize>> {
        names.iter().map(|n| self.idx(n.as_ref())).collect()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn target(&self) -> &str {
        &self.names[self.target]
    }

    /// All nodes except the target, in declaration order.
    pub fn features(&self) -> Vec<&str> {
        self.names
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.target)
            .map(|(_, n)| n.as_str())
            .collect()
    }

    pub fn parents_of(&self, name: &str) -> Result<Vec<&str>> {
        Ok(self.parents[self.idx(name)?]
            .iter()
            .map(|&i| self.names[i].as_str())
            .collect())
    }

    pub fn children_of(&self, name: &str) -> Result<Vec<&str>> {
        Ok(self.children[self.idx(name)?]
            .iter()
            .map(|&i| self.names[i].as_str())
            .collect())
    }

    pub fn edge_list(&self) -> Vec<(&str, &str)> {
        self.edges
            .iter()
            .map(|&(p, c)| (self.names[p].as_str(), self.names[c].as_str()))
            .collect()
    }

    pub fn has_edge(&self, parent: &str, child: &str) -> Result<bool> {
        Ok(self.edges.contains(&(self.idx(parent)?, self.idx(child)?)))
    }

    /// Topological order of all nodes; ties broken by node name.
    pub fn topological_order(&self) -> Vec<&str> {
        let mut indeg: Vec<usize> = self.parents.iter().map(|p| p.len()).collect();
        let mut ready: BTreeSet<(&str, usize)> = (0..self.len())
            .filter(|&i| indeg[i] == 0)
            .map(|i| (self.names[i].as_str(), i))
            .collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(&(name, i)) = ready.iter().next() {
            ready.remove(&(name, i));
            order.push(name);
            for &c in &self.children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert((self.names[c].as_str(), c));
                }
            }
        }
        order
    }

    fn ancestors_ix(&self, seeds: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<usize> = seeds.iter().copied().collect();
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if out.insert(p) {
                    stack.push(p);
                }
            }
        }
        for s in seeds {
            out.remove(s);
        }
        out
    }

    fn descendants_ix(&self, seed: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = vec![seed];
        while let Some(v) = stack.pop() {
            for &c in &self.children[v] {
                if out.insert(c) {
                    stack.push(c);
                }
            }
        }
        out
    }

    /// All nodes with a directed path into some member of `s`, excluding `s`.
    pub fn ancestors<S: AsRef<str>>(&self, s: &[S]) -> Result<BTreeSet<NodeId>> {
        let seeds = self.idx_set(s)?;
        Ok(self
            .ancestors_ix(&seeds)
            .into_iter()
            .map(|i| self.names[i].clone())
            .collect())
    }

    /// All simple undirected paths between `a` and `b`, in lexicographic
    /// order of their node-name sequences, with the default path cap.
    pub fn enumerate_paths(&self, a: &str, b: &str) -> Result<Vec<Path>> {
        self.enumerate_paths_capped(a, b, DEFAULT_PATH_LIMIT)
    }

    /// As [`enumerate_paths`](Self::enumerate_paths) with an explicit cap.
    pub fn enumerate_paths_capped(&self, a: &str, b: &str, cap: usize) -> Result<Vec<Path>> {
        let ai = self.idx(a)?;
        let bi = self.idx(b)?;
        if ai == bi {
            return Err(Error::InvalidArgument(format!(
                "path endpoints must differ, got `{a}` twice"
            )));
        }
        let mut out = Vec::new();
        let mut on_path = vec![false; self.len()];
        let mut nodes = vec![ai];
        let mut dirs = Vec::new();
        on_path[ai] = true;
        self.dfs_paths(ai, bi, &mut on_path, &mut nodes, &mut dirs, &mut out, cap)?;
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs_paths(
        &self,
        cur: usize,
        goal: usize,
        on_path: &mut Vec<bool>,
        nodes: &mut Vec<usize>,
        dirs: &mut Vec<Dir>,
        out: &mut Vec<Path>,
        cap: usize,
    ) -> Result<()> {
        // Merge parent/children neighbor lists into name order so emitted
        // paths come out lexicographically sorted.
        let mut neighbors: Vec<(usize, Dir)> = self.children[cur]
            .iter()
            .map(|&c| (c, Dir::Forward))
            .chain(self.parents[cur].iter().map(|&p| (p, Dir::Backward)))
            .collect();
        neighbors.sort_by(|a, b| self.names[a.0].cmp(&self.names[b.0]));
        for (next, dir) in neighbors {
            if on_path[next] {
                continue;
            }
            nodes.push(next);
            dirs.push(dir);
            if next == goal {
                if out.len() >= cap {
                    return Err(Error::PathLimit { limit: cap });
                }
                out.push(Path {
                    nodes: nodes.clone(),
                    dirs: dirs.clone(),
                });
            } else {
                on_path[next] = true;
                self.dfs_paths(next, goal, on_path, nodes, dirs, out, cap)?;
                on_path[next] = false;
            }
            nodes.pop();
            dirs.pop();
        }
        Ok(())
    }

    fn validate_path(&self, p: &Path) -> Result<()> {
        if p.nodes.len() < 2 || p.dirs.len() != p.nodes.len() - 1 {
            return Err(Error::InvalidArgument("malformed path".into()));
        }
        let mut seen = BTreeSet::new();
        for w in p.nodes.windows(2) {
            if w[0] >= self.len() || w[1] >= self.len() {
                return Err(Error::InvalidArgument("path node outside graph".into()));
            }
        }
        for (i, w) in p.nodes.windows(2).enumerate() {
            let edge = match p.dirs[i] {
                Dir::Forward => (w[0], w[1]),
                Dir::Backward => (w[1], w[0]),
            };
            if !self.edges.contains(&edge) {
                return Err(Error::InvalidArgument(format!(
                    "path step {} is not an edge of the graph",
                    p.render(self)
                )));
            }
        }
        for &n in &p.nodes {
            if !seen.insert(n) {
                return Err(Error::InvalidArgument("path repeats a node".into()));
            }
        }
        Ok(())
    }

    /// True iff the path is blocked conditional on `z`: some non-endpoint
    /// chain or fork node lies in `z`, or some collider is neither in `z`
    /// nor an ancestor of `z`.
    pub fn is_blocked<S: AsRef<str>>(&self, p: &Path, z: &[S]) -> Result<bool> {
        self.validate_path(p)?;
        let z = self.idx_set(z)?;
        for e in [p.nodes[0], *p.nodes.last().unwrap()] {
            if z.contains(&e) {
                return Err(Error::InvalidArgument(format!(
                    "conditioning set contains path endpoint `{}`",
                    self.names[e]
                )));
            }
        }
        let mut z_closure = self.ancestors_ix(&z);
        z_closure.extend(z.iter().copied());
        for i in 1..p.nodes.len() - 1 {
            let n = p.nodes[i];
            if p.is_collider_at(i) {
                if !z_closure.contains(&n) {
                    return Ok(true);
                }
            } else if z.contains(&n) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// d-separation of `s1` and `s2` given `z`, via moralization of the
    /// ancestral graph. The path-enumeration route through
    /// [`enumerate_paths`](Self::enumerate_paths) + [`is_blocked`](Self::is_blocked)
    /// is kept algorithmically distinct so the two can cross-check each other.
    pub fn d_separated<S: AsRef<str>>(&self, s1: &[S], s2: &[S], z: &[S]) -> Result<bool> {
        let a = self.idx_set(s1)?;
        let b = self.idx_set(s2)?;
        let zs = self.idx_set(z)?;
        if !a.is_disjoint(&b) || !a.is_disjoint(&zs) || !b.is_disjoint(&zs) {
            return Err(Error::InvalidArgument(
                "d-separation sets must be pairwise disjoint".into(),
            ));
        }
        if a.is_empty() || b.is_empty() {
            return Ok(true);
        }
        // Ancestral closure of all involved nodes.
        let mut relevant: BTreeSet<usize> = a.union(&b).copied().collect();
        relevant.extend(zs.iter().copied());
        let closure = self.ancestors_ix(&relevant);
        relevant.extend(closure);

        // Moralize: undirected parent-child edges plus married co-parents.
        let n = self.len();
        let mut adj = vec![BTreeSet::new(); n];
        for &v in &relevant {
            let pa: Vec<usize> = self.parents[v]
                .iter()
                .copied()
                .filter(|p| relevant.contains(p))
                .collect();
            for &p in &pa {
                adj[v].insert(p);
                adj[p].insert(v);
            }
            for i in 0..pa.len() {
                for j in i + 1..pa.len() {
                    adj[pa[i]].insert(pa[j]);
                    adj[pa[j]].insert(pa[i]);
                }
            }
        }
        // BFS from s1 avoiding z.
        let mut visited = vec![false; n];
        let mut queue: VecDeque<usize> = a.iter().copied().collect();
        for &v in &a {
            visited[v] = true;
        }
        while let Some(v) = queue.pop_front() {
            if b.contains(&v) {
                return Ok(false);
            }
            for &w in &adj[v] {
                if !visited[w] && !zs.contains(&w) {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
        Ok(true)
    }

    /// All paths from a node of `s` to a node of `b` whose first edge points
    /// into the `s`-endpoint.
    pub fn backdoor_paths<S: AsRef<str>>(&self, s: &[S], b: &[S]) -> Result<Vec<Path>> {
        self.backdoor_paths_capped(s, b, DEFAULT_PATH_LIMIT)
    }

    pub fn backdoor_paths_capped<S: AsRef<str>>(
        &self,
        s: &[S],
        b: &[S],
        cap: usize,
    ) -> Result<Vec<Path>> {
        let si = self.idx_set(s)?;
        let bi = self.idx_set(b)?;
        if !si.is_disjoint(&bi) {
            return Err(Error::InvalidArgument(
                "backdoor_paths sets must be disjoint".into(),
            ));
        }
        let mut out = Vec::new();
        for &a in &si {
            for &t in &bi {
                let paths =
                    self.enumerate_paths_capped(&self.names[a], &self.names[t], cap)?;
                out.extend(
                    paths
                        .into_iter()
                        .filter(|p| p.dirs[0] == Dir::Backward),
                );
                if out.len() > cap {
                    return Err(Error::PathLimit { limit: cap });
                }
            }
        }
        Ok(out)
    }

    /// Copy of the graph with every edge into a member of `s` removed.
    pub fn do_surgery<S: AsRef<str>>(&self, s: &[S]) -> Result<CausalGraph> {
        let si = self.idx_set(s)?;
        if si.contains(&self.target) {
            return Err(Error::InvalidArgument(format!(
                "cannot intervene on the target `{}`",
                self.target()
            )));
        }
        let mut g = self.clone();
        g.edges.retain(|&(_, c)| !si.contains(&c));
        for &v in &si {
            for &p in &g.parents[v].clone() {
                g.children[p].retain(|&c| c != v);
            }
            g.parents[v].clear();
        }
        Ok(g)
    }

    /// Classify a (path, context-node) pair by the first matching table row
    /// and report the blocked-status transitions for conditioning vs.
    /// intervention. `all_matches` lists every row whose condition holds,
    /// with the ancestor-collider row relaxed to not require `k` off-path.
    pub fn classify_path_context(&self, p: &Path, k: &str) -> Result<PathContextEffect> {
        self.validate_path(p)?;
        let ki = self.idx(k)?;
        if p.nodes[0] == ki || *p.nodes.last().unwrap() == ki {
            return Err(Error::InvalidArgument(format!(
                "context node `{k}` is an endpoint of the path"
            )));
        }
        let k_interior = p.nodes[1..p.nodes.len() - 1]
            .iter()
            .position(|&n| n == ki)
            .map(|i| i + 1);
        let an_k = self.ancestors_ix(&BTreeSet::from([ki]));
        let collider_anc_of_k = (1..p.nodes.len() - 1)
            .any(|i| p.is_collider_at(i) && p.nodes[i] != ki && an_k.contains(&p.nodes[i]));

        let mut matches = Vec::new();
        if let Some(i) = k_interior {
            if p.is_collider_at(i) {
                matches.push(PathContextRow::ColliderAtK);
            } else if p.dirs[i - 1] == p.dirs[i] {
                matches.push(PathContextRow::ChainThroughK);
            } else {
                matches.push(PathContextRow::ForkAtK);
            }
        }
        if collider_anc_of_k {
            matches.push(PathContextRow::ColliderAncestorOfK);
        }

        // First matching row in table order, with the ancestor-collider row
        // requiring k off the path.
        let row = if matches.contains(&PathContextRow::ChainThroughK) {
            PathContextRow::ChainThroughK
        } else if matches.contains(&PathContextRow::ForkAtK) {
            PathContextRow::ForkAtK
        } else if matches.contains(&PathContextRow::ColliderAtK) {
            PathContextRow::ColliderAtK
        } else if k_interior.is_none() && collider_anc_of_k {
            PathContextRow::ColliderAncestorOfK
        } else {
            PathContextRow::Unaffected
        };

        let (conditioning, intervention) = match row {
            PathContextRow::ChainThroughK | PathContextRow::ForkAtK => {
                (BlockTransition::BecomesBlocked, BlockTransition::BecomesBlocked)
            }
            PathContextRow::ColliderAtK | PathContextRow::ColliderAncestorOfK => {
                (BlockTransition::PotentiallyUnblocked, BlockTransition::StaysBlocked)
            }
            PathContextRow::Unaffected => (BlockTransition::NoEffect, BlockTransition::NoEffect),
        };
        Ok(PathContextEffect {
            row,
            conditioning,
            intervention,
            all_matches: matches,
        })
    }

    /// Irrelevant-context test: no directed path from any node of `s` to the
    /// target or to `xj`.
    pub fn lemma1_applies<S: AsRef<str>>(&self, xj: &str, s: &[S]) -> Result<bool> {
        let xji = self.idx(xj)?;
        let si = self.idx_set(s)?;
        self.check_feature_context(xji, &si, xj)?;
        for &v in &si {
            let desc = self.descendants_ix(v);
            if desc.contains(&self.target) || desc.contains(&xji) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn check_feature_context(&self, xji: usize, si: &BTreeSet<usize>, xj: &str) -> Result<()> {
        if xji == self.target {
            return Err(Error::InvalidArgument(format!(
                "`{xj}` is the target, not a feature"
            )));
        }
        if si.contains(&xji) || si.contains(&self.target) {
            return Err(Error::InvalidArgument(
                "context set must exclude the feature and the target".into(),
            ));
        }
        Ok(())
    }

    /// Intervention-equals-observation test: either no unblocked (given the
    /// empty set) backdoor path from `s` to `xj` or the target, or a purely
    /// causal setup with no confounding into both (`xj` or `s`) and the target.
    pub fn lemma2_applies<S: AsRef<str>>(&self, xj: &str, s: &[S]) -> Result<bool> {
        let xji = self.idx(xj)?;
        let si = self.idx_set(s)?;
        self.check_feature_context(xji, &si, xj)?;
        if si.is_empty() {
            return Ok(true);
        }

        // Clause (a): no collider-free backdoor path from s to xj or target.
        let s_names: Vec<&str> = si.iter().map(|&i| self.names[i].as_str()).collect();
        let mut clause_a = true;
        'outer: for tgt in [xj, self.target()] {
            let bd = self.backdoor_paths(&s_names, &[tgt])?;
            for p in &bd {
                if !(1..p.nodes.len() - 1).any(|i| p.is_collider_at(i)) {
                    clause_a = false;
                    break 'outer;
                }
            }
        }
        if clause_a {
            return Ok(true);
        }

        // Clause (b): no directed path target -> xj or target -> s, and no
        // confounder H outside {target, xj} ∪ s into both (xj or s) and target.
        let tgt_desc = self.descendants_ix(self.target);
        if tgt_desc.contains(&xji) || si.iter().any(|v| tgt_desc.contains(v)) {
            return Ok(false);
        }
        let mut front: BTreeSet<usize> = BTreeSet::from([xji]);
        front.extend(si.iter().copied());
        let an_front = self.ancestors_ix(&front);
        let an_target = self.ancestors_ix(&BTreeSet::from([self.target]));
        for h in an_front.intersection(&an_target) {
            if *h != self.target && *h != xji && !si.contains(h) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Which features are connected to the target only through collider
    /// paths, the structural signature of a suppressor.
    pub fn suppressor_status(&self, xj: &str) -> Result<SuppressorStatus> {
        let xji = self.idx(xj)?;
        if xji == self.target {
            return Err(Error::InvalidArgument(format!(
                "`{xj}` is the target, not a feature"
            )));
        }
        let paths = self.enumerate_paths(xj, self.target())?;
        if paths.is_empty() {
            return Ok(SuppressorStatus::Disconnected);
        }
        let with_collider = paths
            .iter()
            .filter(|p| (1..p.nodes.len() - 1).any(|i| p.is_collider_at(i)))
            .count();
        Ok(if with_collider == paths.len() {
            SuppressorStatus::Suppressor
        } else if with_collider > 0 {
            SuppressorStatus::PartialSuppressor
        } else {
            SuppressorStatus::NotSuppressor
        })
    }

    /// Adjacency-list export: one `parent -> child` line per edge, in
    /// deterministic (name-sorted) order.
    pub fn to_adjacency_text(&self) -> String {
        let mut lines: Vec<String> = self
            .edges
            .iter()
            .map(|&(p, c)| format!("{} -> {}", self.names[p], self.names[c]))
            .collect();
        lines.sort();
        lines.join("\n")
    }
}

impl Path {
    /// Node names along the path.
    pub fn node_names<'g>(&self, g: &'g CausalGraph) -> Vec<&'g str> {
        self.nodes.iter().map(|&i| g.names[i].as_str()).collect()
    }

    pub fn directions(&self) -> &[Dir] {
        &self.dirs
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, g: &CausalGraph, name: &str) -> bool {
        g.index.get(name).is_some_and(|i| self.nodes.contains(i))
    }

    /// True iff the node at interior position `i` is a collider on this path.
    fn is_collider_at(&self, i: usize) -> bool {
        i > 0 && i < self.nodes.len() - 1 && self.dirs[i - 1] == Dir::Forward && self.dirs[i] == Dir::Backward
    }

    /// Names of all colliders on the path.
    pub fn colliders<'g>(&self, g: &'g CausalGraph) -> Vec<&'g str> {
        (1..self.nodes.len().saturating_sub(1))
            .filter(|&i| self.is_collider_at(i))
            .map(|i| g.names[self.nodes[i]].as_str())
            .collect()
    }

    /// Render like `C -> G <- Y`.
    pub fn render(&self, g: &CausalGraph) -> String {
        let mut s = g.names[self.nodes[0]].clone();
        for (i, d) in self.dirs.iter().enumerate() {
            let arrow = match d {
                Dir::Forward => "->",
                Dir::Backward => "<-",
            };
            s.push_str(&format!(" {arrow} {}", g.names[self.nodes[i + 1]]));
        }
        s
    }
}

impl fmt::Display for SuppressorStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SuppressorStatus::Disconnected => "disconnected from target",
            SuppressorStatus::Suppressor => "suppressor (all target paths pass a collider)",
            SuppressorStatus::PartialSuppressor => {
                "potential suppressor (some target paths pass a collider)"
            }
            SuppressorStatus::NotSuppressor => "not a suppressor",
        };
        f.write_str(s)
    }
}

/// A causal graph with one real coefficient per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    graph: CausalGraph,
    weights: HashMap<(usize, usize), f64>,
}

impl WeightedGraph {
    /// Weights must cover exactly the edges of `graph` and be finite.
    pub fn new<S: AsRef<str>>(graph: CausalGraph, weights: &[((S, S), f64)]) -> Result<Self> {
        let mut map = HashMap::new();
        for ((p, c), w) in weights {
            let key = (graph.idx(p.as_ref())?, graph.idx(c.as_ref())?);
            if !graph.edges.contains(&key) {
                return Err(Error::InvalidArgument(format!(
                    "weight given for non-edge {} -> {}",
                    p.as_ref(),
                    c.as_ref()
                )));
            }
            if !w.is_finite() {
                return Err(Error::InvalidArgument("non-finite edge weight".into()));
            }
            if map.insert(key, *w).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate weight for {} -> {}",
                    p.as_ref(),
                    c.as_ref()
                )));
            }
        }
        if map.len() != graph.edges.len() {
            return Err(Error::InvalidArgument(format!(
                "expected a weight for each of {} edges, got {}",
                graph.edges.len(),
                map.len()
            )));
        }
        Ok(WeightedGraph {
            graph,
            weights: map,
        })
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    /// All `(parent, child, weight)` triples, in deterministic edge order.
    pub fn edge_weights(&self) -> Vec<(&str, &str, f64)> {
        self.graph
            .edges
            .iter()
            .map(|&(p, c)| {
                (
                    self.graph.names[p].as_str(),
                    self.graph.names[c].as_str(),
                    self.weights[&(p, c)],
                )
            })
            .collect()
    }

    pub fn weight(&self, parent: &str, child: &str) -> Result<f64> {
        let key = (self.graph.idx(parent)?, self.graph.idx(child)?);
        self.weights
            .get(&key)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("no edge {parent} -> {child}")))
    }

    fn path_product(&self, p: &Path) -> f64 {
        let mut prod = 1.0;
        for (i, d) in p.dirs.iter().enumerate() {
            let key = match d {
                Dir::Forward => (p.nodes[i], p.nodes[i + 1]),
                Dir::Backward => (p.nodes[i + 1], p.nodes[i]),
            };
            prod *= self.weights[&key];
        }
        prod
    }

    /// Fraction of path weight between `x1` and `y` through `x2` that is
    /// carried by paths with `x2` as their only collider, versus paths
    /// through `x2` that are unblocked given the empty set:
    /// `|CP| / (|CP| + |UP|)`. Absolute values are applied to the two sums,
    /// not per path. `None` when both sums vanish.
    pub fn collider_impact(&self, x1: &str, x2: &str, y: &str) -> Result<Option<f64>> {
        self.collider_impact_capped(x1, x2, y, DEFAULT_PATH_LIMIT)
    }

    pub fn collider_impact_capped(
        &self,
        x1: &str,
        x2: &str,
        y: &str,
        cap: usize,
    ) -> Result<Option<f64>> {
        let x2i = self.graph.idx(x2)?;
        if x1 == x2 || x1 == y || x2 == y {
            return Err(Error::InvalidArgument(
                "collider_impact nodes must be distinct".into(),
            ));
        }
        let mut cp = 0.0;
        let mut up = 0.0;
        for p in self.graph.enumerate_paths_capped(x1, y, cap)? {
            if !p.nodes.contains(&x2i) {
                continue;
            }
            let colliders: Vec<usize> = (1..p.nodes.len() - 1)
                .filter(|&i| p.is_collider_at(i))
                .map(|i| p.nodes[i])
                .collect();
            if colliders == [x2i] {
                cp += self.path_product(&p);
            }
            if colliders.is_empty() {
                up += self.path_product(&p);
            }
        }
        let (cp, up) = (cp.abs(), up.abs());
        if cp + up == 0.0 {
            Ok(None)
        } else {
            Ok(Some(cp / (cp + up)))
        }
    }

    /// Adjacency export with weights: `parent -> child weight` per line.
    pub fn to_adjacency_text(&self) -> String {
        let mut lines: Vec<String> = self
            .graph
            .edges
            .iter()
            .map(|&(p, c)| {
                format!(
                    "{} -> {} {}",
                    self.graph.names[p], self.graph.names[c], self.weights[&(p, c)]
                )
            })
            .collect();
        lines.sort();
        lines.join("\n")
    }
}
