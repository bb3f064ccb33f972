//! Diagonally preconditioned primal-dual iteration on the flat-norm saddle
//! problem `min_t max_{|y| ≤ ℓ} ⟨y, x - ∂t⟩ + Σ w |t|`.
//!
//! Every iterate `y` is rescaled into the dual feasible set, so the reported
//! value is always a valid lower bound on the flat norm.

use super::{check_inputs, DualForm, DualSolution, DualSolver};
use crate::chain::{Chain, SimplicialComplex2};
use crate::error::{Error, Result};
use crate::registry::Named;

pub struct Pdhg {
    pub max_iters: usize,
    /// Gap is evaluated every this many iterations.
    pub check_every: usize,
}

impl Default for Pdhg {
    fn default() -> Self {
        Self {
            max_iters: 200_000,
            check_every: 50,
        }
    }
}

impl Named for Pdhg {
    fn name(&self) -> &'static str {
        "pdhg"
    }
}

struct Operator<'a> {
    k: &'a SimplicialComplex2,
}

impl Operator<'_> {
    /// `∂t` on edges.
    fn apply(&self, t: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (tri, &c) in self.k.triangle_edges().iter().zip(t) {
            for &(e, s) in tri {
                out[e] += s * c;
            }
        }
    }

    /// `∂ᵀy` on triangles.
    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        for (o, tri) in out.iter_mut().zip(self.k.triangle_edges()) {
            *o = tri.iter().map(|&(e, s)| s * y[e]).sum();
        }
    }
}

impl DualSolver for Pdhg {
    fn solve(&self, x: &Chain, k: &SimplicialComplex2, scale: f64, tol: f64) -> Result<DualSolution> {
        check_inputs(x, k, scale)?;
        let (ne, nt) = (k.num_edges(), k.num_triangles());
        let len = k.edge_lengths();
        let w: Vec<f64> = k.triangle_areas().iter().map(|a| a / scale).collect();
        let op = Operator { k };
        if x.is_zero() {
            return Ok(DualSolution {
                value: 0.0,
                form: DualForm { phi: vec![0.0; ne] },
                primal_bound: Some(0.0),
                iterations: 0,
            });
        }
        // step sizes from row and column absolute sums of ∂
        let tau = 1.0 / 3.0;
        let sigma: Vec<f64> = k
            .edge_triangles()
            .iter()
            .map(|inc| 1.0 / inc.len() as f64)
            .collect();
        let mut t = vec![0.0; nt];
        let mut t_bar = vec![0.0; nt];
        let mut y = vec![0.0; ne];
        let mut kt = vec![0.0; ne];
        let mut kty = vec![0.0; nt];
        let mut best_primal = k.mass(x);
        let mut best_dual = 0.0;
        let mut best_phi = vec![0.0; ne];
        for it in 1..=self.max_iters {
            op.apply(&t_bar, &mut kt);
            for e in 0..ne {
                y[e] = (y[e] + sigma[e] * (x.coeffs[e] - kt[e])).clamp(-len[e], len[e]);
            }
            op.adjoint(&y, &mut kty);
            for i in 0..nt {
                let v = t[i] + tau * kty[i];
                let thr = tau * w[i];
                let new = v.signum() * (v.abs() - thr).max(0.0);
                t_bar[i] = 2.0 * new - t[i];
                t[i] = new;
            }
            if it % self.check_every == 0 || it == self.max_iters {
                op.apply(&t, &mut kt);
                let primal: f64 = (0..ne).map(|e| len[e] * (x.coeffs[e] - kt[e]).abs()).sum::<f64>()
                    + (0..nt).map(|i| w[i] * t[i].abs()).sum::<f64>();
                best_primal = best_primal.min(primal);
                op.adjoint(&y, &mut kty);
                let alpha = (0..nt)
                    .filter(|&i| kty[i] != 0.0)
                    .map(|i| w[i] / kty[i].abs())
                    .fold(1.0f64, f64::min);
                let dual = alpha * x.coeffs.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
                if dual > best_dual {
                    best_dual = dual;
                    best_phi = y.iter().map(|v| alpha * v).collect();
                }
                if best_primal - best_dual <= tol * best_primal {
                    return Ok(DualSolution {
                        value: best_dual,
                        form: DualForm { phi: best_phi },
                        primal_bound: Some(best_primal),
                        iterations: it,
                    });
                }
            }
        }
        Err(Error::NonConvergence {
            solver: "pdhg",
            iterations: self.max_iters,
        })
    }
}
