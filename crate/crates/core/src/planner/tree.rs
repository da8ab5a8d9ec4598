//! The planner tree: arena storage, branch pruning, parent selection and
//! rewiring.

use nalgebra::Vector2;

use super::PlanError;
use crate::geom::Grid2;
use crate::support::SupportEstimate;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub estimate: SupportEstimate,
    pub parent: Option<NodeId>,
    pub cost: f64,
    pub children: Vec<NodeId>,
}

impl TreeNode {
    pub fn pos(&self) -> Vector2<f64> {
        self.estimate.s_plane.xy()
    }

    pub fn tau(&self) -> f64 {
        self.estimate.tau
    }
}

/// Cost of reaching a node with traversability `tau` over 2D distance `d`.
pub fn edge_cost(from: &Vector2<f64>, to: &Vector2<f64>, tau: f64) -> f64 {
    (to - from).norm() / (1.0 - tau)
}

/// Tree rooted at node 0. Removed nodes leave a hole so ids stay stable.
#[derive(Debug, Clone)]
pub struct PlannerTree {
    nodes: Vec<Option<TreeNode>>,
    index: Grid2<NodeId>,
}

impl PlannerTree {
    pub fn new(root: SupportEstimate, cell: f64) -> Self {
        let node = TreeNode { estimate: root, parent: None, cost: 0.0, children: Vec::new() };
        let mut index = Grid2::new(cell);
        index.insert(node.pos(), 0);
        Self { nodes: vec![Some(node)], index }
    }

    pub const ROOT: NodeId = 0;

    pub fn get(&self, id: NodeId) -> Option<&TreeNode> {
        self.nodes.get(id).and_then(Option::as_ref)
    }

    fn node(&self, id: NodeId) -> &TreeNode {
        self.get(id).expect("live node id")
    }

    fn node_mut(&mut self, id: NodeId) -> &mut TreeNode {
        self.nodes[id].as_mut().expect("live node id")
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.get(id).is_some()
    }

    /// Live ids in increasing order.
    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| n.as_ref().map(|_| i))
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Number of ids ever issued.
    pub fn capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn nearest(&self, p: &Vector2<f64>) -> Option<NodeId> {
        self.index.nearest(p).map(|(id, _)| id)
    }

    /// Live nodes within `radius` of `p`, by increasing id.
    pub fn neighbors(&self, p: &Vector2<f64>, radius: f64) -> Vec<NodeId> {
        let mut ids = self.index.within(p, radius);
        ids.sort_unstable();
        ids
    }

    /// Adds a leaf under `parent` with the cost recursion applied.
    pub fn insert(&mut self, estimate: SupportEstimate, parent: NodeId) -> NodeId {
        let p = self.node(parent);
        let pos = estimate.s_plane.xy();
        let cost = p.cost + edge_cost(&p.pos(), &pos, estimate.tau);
        let id = self.nodes.len();
        self.nodes.push(Some(TreeNode { estimate, parent: Some(parent), cost, children: Vec::new() }));
        self.node_mut(parent).children.push(id);
        self.index.insert(pos, id);
        id
    }

    /// Cost `new` would have as a child of `parent`.
    pub fn cost_via(&self, parent: NodeId, pos: &Vector2<f64>, tau: f64) -> f64 {
        let p = self.node(parent);
        p.cost + edge_cost(&p.pos(), pos, tau)
    }

    /// Neighbor minimizing the resulting cost; ties go to the lower id.
    pub fn find_parent(&self, neighbors: &[NodeId], pos: &Vector2<f64>, tau: f64) -> Option<NodeId> {
        let mut best: Option<(NodeId, f64)> = None;
        for &id in neighbors {
            let c = self.cost_via(id, pos, tau);
            let better = match best {
                None => true,
                Some((bid, bc)) => c < bc || (c == bc && id < bid),
            };
            if better {
                best = Some((id, c));
            }
        }
        best.map(|(id, _)| id)
    }

    /// Ids of `id` and all its descendants, in depth-first order.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.node(n).children.iter().rev());
        }
        out
    }

    fn remove_subtree(&mut self, id: NodeId, removed: &mut Vec<NodeId>) {
        if !self.contains(id) {
            return;
        }
        if let Some(parent) = self.node(id).parent {
            self.node_mut(parent).children.retain(|c| *c != id);
        }
        for n in self.subtree(id) {
            let node = self.nodes[n].take().expect("live descendant");
            self.index.remove(&node.pos(), n);
            removed.push(n);
        }
    }

    /// Removes every node within `r` (inclusive) of `center` together with
    /// its descendants. Surviving costs are untouched.
    pub fn prune_branch(&mut self, center: &Vector2<f64>, r: f64) -> Result<Vec<NodeId>, PlanError> {
        let hit = self.neighbors(center, r);
        if hit.first() == Some(&Self::ROOT) {
            return Err(PlanError::RootPruned);
        }
        let mut removed = Vec::new();
        for id in hit {
            self.remove_subtree(id, &mut removed);
        }
        removed.sort_unstable();
        Ok(removed)
    }

    /// Removes the subtrees of nodes whose incoming edge fails `edge_ok`.
    pub fn prune_edges(&mut self, mut edge_ok: impl FnMut(&Vector2<f64>, &Vector2<f64>) -> bool) -> Vec<NodeId> {
        let bad: Vec<NodeId> = self
            .ids()
            .filter(|&id| {
                let n = self.node(id);
                n.parent.is_some_and(|p| !edge_ok(&self.node(p).pos(), &n.pos()))
            })
            .collect();
        let mut removed = Vec::new();
        for id in bad {
            self.remove_subtree(id, &mut removed);
        }
        removed.sort_unstable();
        removed
    }

    /// Re-parents each neighbor whose cost drops by going through `new`,
    /// provided `edge_ok(new, neighbor)`. Descendant costs follow. Returns the
    /// re-parented ids.
    pub fn rewire(
        &mut self,
        neighbors: &[NodeId],
        new: NodeId,
        mut edge_ok: impl FnMut(&Vector2<f64>, &Vector2<f64>) -> bool,
    ) -> Vec<NodeId> {
        let new_pos = self.node(new).pos();
        let mut changed = Vec::new();
        for &id in neighbors {
            if id == new || !self.contains(id) || self.node(new).parent == Some(id) {
                continue;
            }
            let n = self.node(id);
            let c = self.cost_via(new, &n.pos(), n.tau());
            if c < n.cost && edge_ok(&new_pos, &n.pos()) {
                let old_parent = n.parent.expect("only the root lacks a parent and it never improves");
                self.node_mut(old_parent).children.retain(|k| *k != id);
                self.node_mut(new).children.push(id);
                let node = self.node_mut(id);
                node.parent = Some(new);
                node.cost = c;
                self.propagate_costs(id);
                changed.push(id);
            }
        }
        changed
    }

    fn propagate_costs(&mut self, id: NodeId) {
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            let (pos, cost, children) = {
                let node = self.node(n);
                (node.pos(), node.cost, node.children.clone())
            };
            for c in children {
                let child = self.node_mut(c);
                child.cost = cost + edge_cost(&pos, &child.estimate.s_plane.xy(), child.estimate.tau);
                stack.push(c);
            }
        }
    }

    /// Node ids from the root to `id`.
    pub fn path_to(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.node(cur).parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Checks single-rooted acyclic structure, parent/child symmetry and the
    /// cost recursion within `tol`.
    pub fn validate(&self, tol: f64) -> Result<(), String> {
        let root = self.get(Self::ROOT).ok_or("root missing")?;
        if root.parent.is_some() || root.cost != 0.0 {
            return Err("root must have no parent and zero cost".into());
        }
        for id in self.ids() {
            let n = self.node(id);
            if let Some(p) = n.parent {
                let pn = self.get(p).ok_or(format!("node {id} has dead parent {p}"))?;
                if !pn.children.contains(&id) {
                    return Err(format!("node {id} missing from children of {p}"));
                }
                let expect = pn.cost + edge_cost(&pn.pos(), &n.pos(), n.tau());
                if (n.cost - expect).abs() > tol * expect.max(1.0) {
                    return Err(format!("cost recursion broken at {id}: {} vs {expect}", n.cost));
                }
            } else if id != Self::ROOT {
                return Err(format!("second root {id}"));
            }
            for c in &n.children {
                if self.get(*c).and_then(|k| k.parent) != Some(id) {
                    return Err(format!("child link {id} -> {c} not mirrored"));
                }
            }
        }
        // Reachability from the root covers every live node exactly once.
        let reached = self.subtree(Self::ROOT);
        if reached.len() != self.len() {
            return Err(format!("{} nodes reachable, {} live", reached.len(), self.len()));
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geom::PlaneEstimate;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    pub(crate) fn est(x: f64, y: f64, tau: f64) -> SupportEstimate {
        let p = PlaneEstimate { x, y, ..Default::default() };
        SupportEstimate {
            s_plane: p,
            surf_plane: p,
            pro_plane: None,
            ep_plane: None,
            veg_height: 0.0,
            tau,
            is_obstacle: false,
        }
    }

    fn chain() -> PlannerTree {
        let mut t = PlannerTree::new(est(0.0, 0.0, 0.0), 0.5);
        let a = t.insert(est(1.0, 0.0, 0.0), 0);
        let b = t.insert(est(2.0, 0.0, 0.0), a);
        t.insert(est(3.0, 0.0, 0.0), b);
        t
    }

    #[test]
    fn prune_removes_subtree() {
        let mut t = chain();
        assert!(t.prune_branch(&Vector2::new(5.0, 5.0), 0.25).unwrap().is_empty());
        assert_eq!(t.len(), 4);
        let removed = t.prune_branch(&Vector2::new(2.1, 0.0), 0.25).unwrap();
        assert_eq!(removed, vec![2, 3]);
        assert_eq!(t.ids().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(t.get(1).unwrap().cost, 1.0);
        t.validate(1e-12).unwrap();
        assert!(matches!(t.prune_branch(&Vector2::new(0.1, 0.0), 0.25), Err(PlanError::RootPruned)));
    }

    #[test]
    fn find_parent_ties_to_lower_id() {
        let mut t = PlannerTree::new(est(0.0, 0.0, 0.0), 0.5);
        let a = t.insert(est(0.0, 1.0, 0.0), 0);
        let b = t.insert(est(0.0, -1.0, 0.0), 0);
        let p = Vector2::new(1.0, 0.0);
        assert_eq!(t.find_parent(&[b, a], &p, 0.0), Some(a));
        assert_eq!(t.find_parent(&[b], &p, 0.0), Some(b));
        assert_eq!(t.find_parent(&[], &p, 0.0), None);
    }

    #[test]
    fn hand_built_rewire() {
        // root (0,0); a at (1,1) through the root; b at (2,0) reached via a
        // detour; c under b. A new node n at (1,0) offers b a shorter route.
        let mut t = PlannerTree::new(est(0.0, 0.0, 0.0), 0.5);
        let a = t.insert(est(1.0, 1.0, 0.5), 0);
        let b = t.insert(est(2.0, 0.0, 0.0), a);
        let c = t.insert(est(3.0, 0.0, 0.0), b);
        let s2 = 2f64.sqrt();
        assert_abs_diff_eq!(t.get(b).unwrap().cost, 2.0 * s2 + s2, epsilon = 1e-12);
        let n = t.insert(est(1.0, 0.0, 0.0), 0);
        let changed = t.rewire(&[a, b, c], n, |_, _| true);
        assert_eq!(changed, vec![b]);
        assert_abs_diff_eq!(t.get(b).unwrap().cost, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.get(c).unwrap().cost, 3.0, epsilon = 1e-12);
        assert_eq!(t.get(a).unwrap().cost, 2.0 * s2);
        t.validate(1e-12).unwrap();
        // Nothing left to improve.
        assert!(t.rewire(&[a, b, c], n, |_, _| true).is_empty());
    }

    #[test]
    fn rewire_respects_edge_filter() {
        let mut t = PlannerTree::new(est(0.0, 0.0, 0.0), 0.5);
        let a = t.insert(est(1.0, 1.0, 0.5), 0);
        let b = t.insert(est(2.0, 0.0, 0.0), a);
        let n = t.insert(est(1.0, 0.0, 0.0), 0);
        assert!(t.rewire(&[b], n, |_, _| false).is_empty());
    }

    fn random_tree(spec: &[(f64, f64, f64, usize)]) -> PlannerTree {
        let mut t = PlannerTree::new(est(0.0, 0.0, 0.0), 0.5);
        for (i, (x, y, tau, p)) in spec.iter().enumerate() {
            t.insert(est(*x, *y, *tau), p % (i + 1));
        }
        t
    }

    fn tree_spec() -> impl Strategy<Value = Vec<(f64, f64, f64, usize)>> {
        proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.0f64..0.9, 0usize..1000), 1..120)
    }

    proptest! {
        #[test]
        fn prune_matches_reachability_oracle(spec in tree_spec(), cx in -5.0f64..5.0, cy in -5.0f64..5.0, r in 0.0f64..2.0) {
            let mut t = random_tree(&spec);
            let c = Vector2::new(cx, cy);
            prop_assume!(t.get(0).unwrap().pos().metric_distance(&c) > r);
            let before: Vec<(NodeId, Option<NodeId>, f64)> =
                t.ids().map(|i| (i, t.get(i).unwrap().parent, t.get(i).unwrap().cost)).collect();
            // Oracle: drop nodes in the disk, keep what the root still reaches.
            let inside = |i: NodeId| before.iter().find(|b| b.0 == i).map(|b| {
                let n = t.get(b.0).unwrap();
                n.pos().metric_distance(&c) <= r
            }).unwrap();
            let mut alive = vec![false; t.capacity()];
            for (i, p, _) in &before {
                alive[*i] = !inside(*i) && p.is_none_or(|p| alive[p]);
            }
            t.prune_branch(&c, r).unwrap();
            let got: Vec<NodeId> = t.ids().collect();
            let want: Vec<NodeId> = (0..alive.len()).filter(|i| alive[*i]).collect();
            prop_assert_eq!(got, want);
            for (i, _, cost) in &before {
                if let Some(n) = t.get(*i) {
                    prop_assert_eq!(n.cost, *cost);
                }
            }
            prop_assert!(t.validate(1e-12).is_ok());
        }

        #[test]
        fn find_parent_is_exhaustive_minimum(spec in tree_spec(), x in -5.0f64..5.0, y in -5.0f64..5.0, tau in 0.0f64..0.9) {
            let t = random_tree(&spec);
            let p = Vector2::new(x, y);
            let nb: Vec<NodeId> = t.ids().filter(|i| i % 2 == 0).collect();
            let got = t.find_parent(&nb, &p, tau).unwrap();
            let min = nb.iter().map(|i| t.cost_via(*i, &p, tau)).fold(f64::INFINITY, f64::min);
            let first = *nb.iter().find(|i| t.cost_via(**i, &p, tau) == min).unwrap();
            prop_assert_eq!(got, first);
        }

        #[test]
        fn rewire_never_raises_costs(spec in tree_spec(), x in -5.0f64..5.0, y in -5.0f64..5.0, tau in 0.0f64..0.9, radius in 0.5f64..4.0) {
            let mut t = random_tree(&spec);
            let p = Vector2::new(x, y);
            let nb = t.neighbors(&p, radius);
            prop_assume!(!nb.is_empty());
            let parent = t.find_parent(&nb, &p, tau).unwrap();
            let new = t.insert(est(x, y, tau), parent);
            let before: Vec<(NodeId, f64)> = t.ids().map(|i| (i, t.get(i).unwrap().cost)).collect();
            t.rewire(&nb, new, |_, _| true);
            for (i, c) in before {
                prop_assert!(t.get(i).unwrap().cost <= c + 1e-12);
            }
            prop_assert!(t.validate(1e-9).is_ok());
        }
    }
}
