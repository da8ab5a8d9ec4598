//! Informed RRT* over per-node support-plane estimates, with an inflation
//! radius around obstacles discovered while sampling.

mod sampling;
mod tree;

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use sampling::{inflation_check, steer, InformedSampler, ObstacleSet};
pub use tree::{edge_cost, NodeId, PlannerTree, TreeNode};

use crate::support::{SupportError, SupportEstimate, SupportEstimator};
use crate::world::Bounds;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("no path to the goal after {iterations} iterations")]
    NoPath { iterations: usize },
    #[error("the start node fell inside an obstacle's inflation radius")]
    RootPruned,
    #[error("cannot plan from the start: {0}")]
    InvalidStart(String),
    #[error("invalid planner config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Steer length (m).
    pub step: f64,
    /// Rewiring radius (m); `1.5 * step` when unset.
    pub neighbor_radius: Option<f64>,
    pub inflation_r: f64,
    pub goal_radius: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { step: 0.5, neighbor_radius: None, inflation_r: 0.25, goal_radius: 0.5, max_iters: 3000, seed: 0 }
    }
}

impl PlannerConfig {
    pub fn neighbor_radius(&self) -> f64 {
        self.neighbor_radius.unwrap_or(1.5 * self.step)
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let ok = self.step > 0.0
            && self.step.is_finite()
            && self.inflation_r >= 0.0
            && self.goal_radius > 0.0
            && self.neighbor_radius() > 0.0;
        if ok {
            Ok(())
        } else {
            Err(PlanError::Config(format!("{self:?}")))
        }
    }
}

/// Source of per-node support estimates.
pub trait SupportOracle {
    fn estimate(&self, q: &Vector2<f64>) -> Result<SupportEstimate, SupportError>;

    /// Radius of the patch behind each estimate. Edges longer than twice this
    /// get their midpoint checked as well.
    fn footprint(&self) -> f64 {
        f64::INFINITY
    }
}

impl SupportOracle for SupportEstimator<'_> {
    fn estimate(&self, q: &Vector2<f64>) -> Result<SupportEstimate, SupportError> {
        SupportEstimator::estimate(self, q)
    }

    fn footprint(&self) -> f64 {
        self.cfg.surf.radius
    }
}

impl<F: Fn(&Vector2<f64>) -> Result<SupportEstimate, SupportError>> SupportOracle for F {
    fn estimate(&self, q: &Vector2<f64>) -> Result<SupportEstimate, SupportError> {
        self(q)
    }
}

/// One iteration's bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    /// Best traversability-weighted cost so far, infinite before a solution.
    pub best_cost: f64,
    pub tree_size: usize,
    pub obstacles: usize,
    /// Nodes removed by pruning during this iteration.
    pub pruned: usize,
}

/// What happened to the sample of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Inserted(NodeId),
    Obstacle,
    Inflated,
    /// Estimation failed, the edge was blocked or no neighbor could connect.
    Discarded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathNode {
    pub estimate: SupportEstimate,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub path: Vec<PathNode>,
    pub cost: f64,
    /// 2D polyline length (m).
    pub length: f64,
    /// 2D distance from the last path node to the goal point (m).
    pub goal_gap: f64,
    pub trace: Vec<TraceEntry>,
    pub obstacles: Vec<Vector2<f64>>,
    pub tree_size: usize,
}

/// Incremental planner; `plan` runs it to completion.
pub struct Planner<'a, O: SupportOracle + ?Sized> {
    oracle: &'a O,
    cfg: PlannerConfig,
    sampler: InformedSampler,
    rng: ChaCha8Rng,
    tree: PlannerTree,
    obstacles: ObstacleSet,
    goal_nodes: Vec<NodeId>,
    best: Option<(NodeId, f64)>,
    goal_blocked: bool,
    trace: Vec<TraceEntry>,
    iter: usize,
}

impl<'a, O: SupportOracle + ?Sized> Planner<'a, O> {
    pub fn new(
        oracle: &'a O,
        bounds: Bounds,
        start: Vector2<f64>,
        goal: Vector2<f64>,
        cfg: PlannerConfig,
    ) -> Result<Self, PlanError> {
        cfg.validate()?;
        for p in [&start, &goal] {
            if !bounds.contains(p.x, p.y) {
                return Err(PlanError::InvalidStart(format!("({}, {}) is outside the bounds", p.x, p.y)));
            }
        }
        if start == goal {
            return Err(PlanError::InvalidStart("start and goal coincide".into()));
        }
        let root = oracle.estimate(&start).map_err(|e| PlanError::InvalidStart(e.to_string()))?;
        if root.is_obstacle {
            return Err(PlanError::InvalidStart("the start is an obstacle".into()));
        }
        let mut obstacles = ObstacleSet::new();
        // A goal standing on an obstacle can never be reached.
        if oracle.estimate(&goal).is_ok_and(|e| e.is_obstacle) {
            obstacles.insert(goal);
        }
        Ok(Self {
            oracle,
            cfg,
            sampler: InformedSampler::new(bounds, start, goal),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            tree: PlannerTree::new(root, cfg.step.max(0.05)),
            goal_blocked: !inflation_check(&goal, &obstacles, cfg.inflation_r),
            obstacles,
            goal_nodes: Vec::new(),
            best: None,
            trace: Vec::new(),
            iter: 0,
        })
    }

    pub fn tree(&self) -> &PlannerTree {
        &self.tree
    }

    pub fn obstacles(&self) -> &ObstacleSet {
        &self.obstacles
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn iterations(&self) -> usize {
        self.iter
    }

    /// Best goal node and its cost.
    pub fn best(&self) -> Option<(NodeId, f64)> {
        self.best
    }

    /// Major axis of the informed ellipse. The incumbent ends anywhere in the
    /// goal disk, so any better path through `s` satisfies
    /// `|s - start| + |s - goal| <= length + goal_radius`.
    fn informed_bound(&self) -> Option<f64> {
        self.best.map(|(id, _)| self.polyline_length(&self.tree.path_to(id)) + self.cfg.goal_radius)
    }

    fn polyline_length(&self, ids: &[NodeId]) -> f64 {
        ids.windows(2).map(|w| (self.tree.get(w[1]).unwrap().pos() - self.tree.get(w[0]).unwrap().pos()).norm()).sum()
    }

    fn edge_clear(&self, a: &Vector2<f64>, b: &Vector2<f64>) -> bool {
        self.obstacles.segment_clear(a, b, self.cfg.inflation_r)
    }

    /// Registers an obstacle at `p` and prunes everything it invalidates.
    fn add_obstacle(&mut self, p: Vector2<f64>) -> Result<usize, PlanError> {
        self.obstacles.insert(p);
        let r = self.cfg.inflation_r;
        let mut removed = self.tree.prune_branch(&p, r)?.len();
        let obstacles = &self.obstacles;
        removed += self.tree.prune_edges(|a, b| obstacles.segment_clear(a, b, r)).len();
        if (p - self.sampler.goal).norm() <= r {
            self.goal_blocked = true;
        }
        Ok(removed)
    }

    /// Checks the midpoint of a long edge; a detected obstacle is registered.
    fn midpoint_ok(&mut self, a: &Vector2<f64>, b: &Vector2<f64>, pruned: &mut usize) -> Result<bool, PlanError> {
        if (b - a).norm() <= 2.0 * self.oracle.footprint() {
            return Ok(true);
        }
        let mid = 0.5 * (a + b);
        match self.oracle.estimate(&mid) {
            Ok(e) if e.is_obstacle => {
                *pruned += self.add_obstacle(mid)?;
                Ok(false)
            }
            Ok(_) => Ok(true),
            Err(_) => Ok(false),
        }
    }

    fn refresh_best(&mut self) {
        self.goal_nodes.retain(|id| self.tree.contains(*id));
        self.best = if self.goal_blocked {
            None
        } else {
            self.goal_nodes
                .iter()
                .map(|id| (*id, self.tree.get(*id).unwrap().cost))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        };
    }

    /// Runs one sample-estimate-insert-rewire iteration.
    pub fn step(&mut self) -> Result<StepOutcome, PlanError> {
        self.iter += 1;
        let mut pruned = 0;
        let outcome = self.extend(&mut pruned)?;
        self.refresh_best();
        self.trace.push(TraceEntry {
            iter: self.iter,
            best_cost: self.best.map_or(f64::INFINITY, |b| b.1),
            tree_size: self.tree.len(),
            obstacles: self.obstacles.len(),
            pruned,
        });
        Ok(outcome)
    }

    fn extend(&mut self, pruned: &mut usize) -> Result<StepOutcome, PlanError> {
        let r = self.cfg.inflation_r;
        let bound = self.informed_bound();
        let x_rand = self.sampler.sample(&mut self.rng, bound);
        let nearest = self.tree.nearest(&x_rand).expect("tree keeps its root");
        let x_near = self.tree.get(nearest).unwrap().pos();
        if x_rand == x_near {
            return Ok(StepOutcome::Discarded);
        }
        let x_new = steer(&x_near, &x_rand, self.cfg.step);
        let Ok(est) = self.oracle.estimate(&x_new) else {
            return Ok(StepOutcome::Discarded);
        };
        if est.is_obstacle {
            *pruned += self.add_obstacle(x_new)?;
            return Ok(StepOutcome::Obstacle);
        }
        if !inflation_check(&x_new, &self.obstacles, r) {
            return Ok(StepOutcome::Inflated);
        }

        let mut candidates = self.tree.neighbors(&x_new, self.cfg.neighbor_radius());
        // Best parent whose edge midpoint is clear.
        let parent = loop {
            candidates
                .retain(|id| self.tree.get(*id).is_some_and(|n| self.obstacles.segment_clear(&n.pos(), &x_new, r)));
            let Some(id) = self.tree.find_parent(&candidates, &x_new, est.tau) else {
                return Ok(StepOutcome::Discarded);
            };
            let p = self.tree.get(id).unwrap().pos();
            if self.midpoint_ok(&p, &x_new, pruned)? {
                break id;
            }
            // A midpoint detection may have fenced off the new node itself.
            if !inflation_check(&x_new, &self.obstacles, r) {
                return Ok(StepOutcome::Inflated);
            }
            candidates.retain(|c| *c != id);
        };
        let new = self.tree.insert(est, parent);

        // Rewire, screening each improving edge first.
        let neighbors: Vec<NodeId> = self.tree.neighbors(&x_new, self.cfg.neighbor_radius());
        let mut allowed = Vec::new();
        for id in neighbors {
            if id == new || !self.tree.contains(id) || !self.tree.contains(new) {
                continue;
            }
            let n = self.tree.get(id).unwrap();
            let (pos, tau, cost) = (n.pos(), n.tau(), n.cost);
            if self.tree.cost_via(new, &pos, tau) < cost
                && self.edge_clear(&x_new, &pos)
                && self.midpoint_ok(&x_new, &pos, pruned)?
            {
                allowed.push(id);
            }
        }
        if !self.tree.contains(new) {
            return Ok(StepOutcome::Discarded);
        }
        self.tree.rewire(&allowed, new, |_, _| true);

        if (x_new - self.sampler.goal).norm() <= self.cfg.goal_radius {
            self.goal_nodes.push(new);
        }
        Ok(StepOutcome::Inserted(new))
    }

    /// Extracts the current best path.
    pub fn result(&self) -> Result<PlanResult, PlanError> {
        let (goal, cost) = self.best.ok_or(PlanError::NoPath { iterations: self.iter })?;
        let ids = self.tree.path_to(goal);
        let path = ids
            .iter()
            .map(|id| {
                let n = self.tree.get(*id).unwrap();
                PathNode { estimate: n.estimate, cost: n.cost }
            })
            .collect();
        Ok(PlanResult {
            path,
            cost,
            length: self.polyline_length(&ids),
            goal_gap: (self.tree.get(goal).unwrap().pos() - self.sampler.goal).norm(),
            trace: self.trace.clone(),
            obstacles: self.obstacles.centers().to_vec(),
            tree_size: self.tree.len(),
        })
    }
}

/// Plans from `start` to `goal` for `cfg.max_iters` iterations.
pub fn plan<O: SupportOracle + ?Sized>(
    oracle: &O,
    bounds: Bounds,
    start: Vector2<f64>,
    goal: Vector2<f64>,
    cfg: PlannerConfig,
) -> Result<PlanResult, PlanError> {
    let mut planner = Planner::new(oracle, bounds, start, goal, cfg)?;
    for _ in 0..cfg.max_iters {
        planner.step()?;
    }
    planner.result()
}
