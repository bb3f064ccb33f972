//! Primal network simplex for min-cost circulations.
//!
//! The tree is kept strongly feasible (flow can always be pushed from any node
//! towards the root), which together with block-search pricing and the
//! leaving-arc tie rule guarantees termination without cycling.

use crate::error::{Error, Result};

const STATE_UPPER: i8 = -1;
const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const NONE: usize = usize::MAX;

pub struct NetworkSimplex {
    n: usize,
    root: usize,
    source: Vec<usize>,
    target: Vec<usize>,
    cap: Vec<f64>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    state: Vec<i8>,
    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// `+1` when the tree arc into a node points towards its parent.
    pred_dir: Vec<i8>,
    depth: Vec<usize>,
    first_child: Vec<usize>,
    next_sib: Vec<usize>,
    prev_sib: Vec<usize>,
    stack: Vec<(usize, usize)>,
}

pub struct Solution {
    pub cost: f64,
    pub flow: Vec<f64>,
    pub potential: Vec<f64>,
    pub pivots: usize,
}

impl NetworkSimplex {
    pub fn new(n: usize, root: usize) -> Self {
        Self {
            n,
            root,
            source: Vec::new(),
            target: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
            flow: Vec::new(),
            state: Vec::new(),
            pi: vec![0.0; n],
            parent: vec![NONE; n],
            pred: vec![NONE; n],
            pred_dir: vec![0; n],
            depth: vec![0; n],
            first_child: vec![NONE; n],
            next_sib: vec![NONE; n],
            prev_sib: vec![NONE; n],
            stack: Vec::new(),
        }
    }

    pub fn add_arc(&mut self, s: usize, t: usize, cap: f64, cost: f64) -> usize {
        debug_assert!(s < self.n && t < self.n && cap >= 0.0);
        self.source.push(s);
        self.target.push(t);
        self.cap.push(cap);
        self.cost.push(cost);
        self.flow.push(0.0);
        self.state.push(STATE_LOWER);
        self.source.len() - 1
    }

    /// `tree[u]` must be an arc from `u` to the root for every non-root node;
    /// all flows start at zero so the initial tree is strongly feasible.
    pub fn solve(mut self, tree: &[usize], max_pivots: usize) -> Result<Solution> {
        for u in 0..self.n {
            if u == self.root {
                continue;
            }
            let a = tree[u];
            assert!(
                self.source[a] == u && self.target[a] == self.root && self.cap[a] > 0.0,
                "initial tree arc must run from node to root with positive capacity"
            );
            self.state[a] = STATE_TREE;
            self.parent[u] = self.root;
            self.pred[u] = a;
            self.pred_dir[u] = 1;
            self.depth[u] = 1;
            self.pi[u] = -self.cost[a];
            self.link_child(self.root, u);
        }
        let m = self.source.len();
        let eps = 1e-12 * self.cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let block = ((m as f64).sqrt().ceil() as usize).max(10).min(m.max(1));
        let mut next_arc = 0;
        let mut pivots = 0;
        while let Some(in_arc) = self.find_entering(&mut next_arc, block, eps) {
            if pivots >= max_pivots {
                return Err(Error::NonConvergence {
                    solver: "network simplex",
                    iterations: pivots,
                });
            }
            pivots += 1;
            self.pivot(in_arc);
        }
        let cost = self
            .flow
            .iter()
            .zip(&self.cost)
            .map(|(f, c)| f * c)
            .sum();
        Ok(Solution {
            cost,
            flow: self.flow,
            potential: self.pi,
            pivots,
        })
    }

    fn link_child(&mut self, p: usize, c: usize) {
        let head = self.first_child[p];
        self.next_sib[c] = head;
        self.prev_sib[c] = NONE;
        if head != NONE {
            self.prev_sib[head] = c;
        }
        self.first_child[p] = c;
    }

    fn unlink_child(&mut self, p: usize, c: usize) {
        let (prev, next) = (self.prev_sib[c], self.next_sib[c]);
        if prev != NONE {
            self.next_sib[prev] = next;
        } else {
            self.first_child[p] = next;
        }
        if next != NONE {
            self.prev_sib[next] = prev;
        }
        self.prev_sib[c] = NONE;
        self.next_sib[c] = NONE;
    }

    #[inline]
    fn violation(&self, e: usize) -> f64 {
        self.state[e] as f64 * (self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]])
    }

    /// Block search: scans arcs cyclically and returns the most violating arc
    /// of the first block that contains any violation.
    fn find_entering(&self, next_arc: &mut usize, block: usize, eps: f64) -> Option<usize> {
        let m = self.source.len();
        let mut best = -eps;
        let mut best_arc = None;
        let mut cnt = block;
        let start = *next_arc;
        for k in 0..m {
            let e = (start + k) % m;
            let c = self.violation(e);
            if c < best {
                best = c;
                best_arc = Some(e);
            }
            cnt -= 1;
            if cnt == 0 {
                if best_arc.is_some() {
                    *next_arc = (e + 1) % m;
                    return best_arc;
                }
                cnt = block;
            }
        }
        if best_arc.is_some() {
            *next_arc = start;
        }
        best_arc
    }

    fn residual_down(&self, u: usize) -> f64 {
        // flow travels from parent to u along pred[u]
        let e = self.pred[u];
        if self.pred_dir[u] == 1 {
            self.flow[e]
        } else {
            self.cap[e] - self.flow[e]
        }
        .max(0.0)
    }

    fn residual_up(&self, u: usize) -> f64 {
        let e = self.pred[u];
        if self.pred_dir[u] == 1 {
            self.cap[e] - self.flow[e]
        } else {
            self.flow[e]
        }
        .max(0.0)
    }

    fn pivot(&mut self, in_arc: usize) {
        let (s, t) = (self.source[in_arc], self.target[in_arc]);
        let join = {
            let (mut u, mut v) = (s, t);
            while u != v {
                if self.depth[u] >= self.depth[v] {
                    u = self.parent[u];
                } else {
                    v = self.parent[v];
                }
            }
            u
        };
        let (first, second) = if self.state[in_arc] == STATE_LOWER {
            (s, t)
        } else {
            (t, s)
        };
        // flow runs first -> second over in_arc, up to join, and down to first
        let mut delta = self.cap[in_arc];
        let mut u_out = NONE;
        let mut side = 0;
        let mut u = first;
        while u != join {
            let d = self.residual_down(u);
            if d < delta {
                delta = d;
                u_out = u;
                side = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            let d = self.residual_up(u);
            if d <= delta {
                delta = d;
                u_out = u;
                side = 2;
            }
            u = self.parent[u];
        }
        assert!(delta.is_finite(), "unbounded circulation");
        if delta > 0.0 {
            let val = self.state[in_arc] as f64 * delta;
            self.flow[in_arc] += val;
            let mut u = s;
            while u != join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
            let mut u = t;
            while u != join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
        }
        if side == 0 {
            // the entering arc itself saturated
            self.state[in_arc] = -self.state[in_arc];
            self.flow[in_arc] = if self.state[in_arc] == STATE_UPPER {
                self.cap[in_arc]
            } else {
                0.0
            };
            return;
        }
        let (u_in, v_in) = if side == 1 { (first, second) } else { (second, first) };
        let out_arc = self.pred[u_out];
        self.state[in_arc] = STATE_TREE;
        let at_lower = self.flow[out_arc] <= 0.5 * self.cap[out_arc];
        self.state[out_arc] = if at_lower { STATE_LOWER } else { STATE_UPPER };
        self.flow[out_arc] = if at_lower { 0.0 } else { self.cap[out_arc] };

        // detach the subtree of u_out and re-hang it from v_in, rooted at u_in
        self.unlink_child(self.parent[u_out], u_out);
        let mut w = u_in;
        let mut new_parent = v_in;
        let mut new_pred = in_arc;
        let mut new_dir: i8 = if s == u_in { 1 } else { -1 };
        loop {
            let (old_parent, old_pred, old_dir) = (self.parent[w], self.pred[w], self.pred_dir[w]);
            if w != u_out {
                self.unlink_child(old_parent, w);
            }
            self.parent[w] = new_parent;
            self.pred[w] = new_pred;
            self.pred_dir[w] = new_dir;
            self.link_child(new_parent, w);
            if w == u_out {
                break;
            }
            new_parent = w;
            new_pred = old_pred;
            new_dir = -old_dir;
            w = old_parent;
        }
        let sigma = self.pi[v_in] - self.pi[u_in] - self.pred_dir[u_in] as f64 * self.cost[in_arc];
        let base = self.depth[v_in] + 1;
        let mut stack = std::mem::take(&mut self.stack);
        stack.push((u_in, base));
        while let Some((v, d)) = stack.pop() {
            self.depth[v] = d;
            self.pi[v] += sigma;
            let mut c = self.first_child[v];
            while c != NONE {
                stack.push((c, d + 1));
                c = self.next_sib[c];
            }
        }
        self.stack = stack;
    }
}
