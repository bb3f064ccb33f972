//! The flat norm of 1-chains on a planar complex.
//!
//! For an input chain `x` and scale `s` the flat norm is
//! `min Σ_e ℓ_e |r_e| + Σ_t (A_t / s) |T_t|` over decompositions `x = r + ∂T`.
//! Its dual is `max ⟨x, φ⟩` over edge cochains with `|φ_e| ≤ ℓ_e` and
//! `|(∂ᵀφ)_t| ≤ A_t / s`.

mod network;
mod pdhg;
mod simplex;

use serde::Serialize;

use crate::chain::{Chain, SimplicialComplex2};
use crate::error::{Error, Result};
use crate::registry::{Named, Registry};

pub use network::NetworkSimplex;
pub use pdhg::Pdhg;
pub use simplex::simplex_min;

/// Optimal (or feasible) split `x = r + ∂t`.
///
/// `mass_t` is the area cost `Σ A |t| / scale`, so `value = mass_r + mass_t`.
#[derive(Debug, Clone, Serialize)]
pub struct FlatNormDecomposition {
    pub value: f64,
    pub r_chain: Chain,
    pub t_chain: Chain,
    pub mass_r: f64,
    pub mass_t: f64,
}

impl FlatNormDecomposition {
    /// Evaluates the objective of a 2-chain `t` as a decomposition of `x`.
    pub fn from_t(x: &Chain, t: Chain, k: &SimplicialComplex2, scale: f64) -> Result<Self> {
        let r_chain = x.sub(&k.boundary(&t)?)?;
        let mass_r = k.mass(&r_chain);
        let mass_t = k.mass(&t) / scale;
        Ok(Self {
            value: mass_r + mass_t,
            r_chain,
            t_chain: t,
            mass_r,
            mass_t,
        })
    }

    /// Fraction of the value carried by the 1-dimensional remainder.
    pub fn remainder_fraction(&self) -> f64 {
        if self.value > 0.0 {
            self.mass_r / self.value
        } else {
            0.0
        }
    }
}

fn check_inputs(x: &Chain, k: &SimplicialComplex2, scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::validation(format!("scale must be positive, got {scale}")));
    }
    if x.dim != 1 {
        return Err(Error::Dimension(format!("flat norm expects a 1-chain, got dimension {}", x.dim)));
    }
    k.check_chain(x)
}

pub trait FlatNormSolver: Named + Send + Sync {
    fn solve(&self, x: &Chain, k: &SimplicialComplex2, scale: f64) -> Result<FlatNormDecomposition>;
}

/// Exact solver: the flat-norm LP is the dual of a min-cost circulation on
/// the triangle adjacency graph plus one node for the outer face.
pub struct NetworkFlatNorm;

impl Named for NetworkFlatNorm {
    fn name(&self) -> &'static str {
        "network"
    }
}

impl FlatNormSolver for NetworkFlatNorm {
    fn solve(&self, x: &Chain, k: &SimplicialComplex2, scale: f64) -> Result<FlatNormDecomposition> {
        check_inputs(x, k, scale)?;
        let nt = k.num_triangles();
        if x.is_zero() {
            return FlatNormDecomposition::from_t(x, k.zero_chain(2), k, scale);
        }
        let ground = nt;
        let mut ns = NetworkSimplex::new(nt + 1, ground);
        for (e, inc) in k.edge_triangles().iter().enumerate() {
            // (∂t)_e = t_plus - t_minus with the outer face pinned at zero
            let mut plus = ground;
            let mut minus = ground;
            for &(t, s) in inc {
                if s > 0.0 {
                    plus = t;
                } else {
                    minus = t;
                }
            }
            let (len, xe) = (k.edge_lengths()[e], x.coeffs[e]);
            ns.add_arc(plus, minus, len, -xe);
            ns.add_arc(minus, plus, len, xe);
        }
        let mut tree = vec![usize::MAX; nt + 1];
        for (t, &area) in k.triangle_areas().iter().enumerate() {
            let w = area / scale;
            tree[t] = ns.add_arc(t, ground, w, 0.0);
            ns.add_arc(ground, t, w, 0.0);
        }
        let max_pivots = 50 * (nt + 10) * (nt + 10).ilog2() as usize + 10_000;
        let sol = ns.solve(&tree, max_pivots)?;
        let pg = sol.potential[ground];
        let t = Chain {
            dim: 2,
            coeffs: sol.potential[..nt].iter().map(|p| p - pg).collect(),
        };
        let d = FlatNormDecomposition::from_t(x, t, k, scale)?;
        debug_assert!(
            (d.value + sol.cost).abs() <= 1e-7 * (1.0 + d.value),
            "primal {} and circulation cost {} disagree",
            d.value,
            sol.cost
        );
        Ok(d)
    }
}

/// Dense simplex on the split primal LP; practical only for small complexes.
pub struct SimplexFlatNorm;

impl Named for SimplexFlatNorm {
    fn name(&self) -> &'static str {
        "simplex"
    }
}

impl FlatNormSolver for SimplexFlatNorm {
    fn solve(&self, x: &Chain, k: &SimplicialComplex2, scale: f64) -> Result<FlatNormDecomposition> {
        check_inputs(x, k, scale)?;
        let (ne, nt) = (k.num_edges(), k.num_triangles());
        // columns: r+ (ne), r- (ne), t+ (nt), t- (nt)
        let n = 2 * ne + 2 * nt;
        let mut a = vec![vec![0.0; n]; ne];
        let mut b = vec![0.0; ne];
        let mut basis = vec![0; ne];
        for e in 0..ne {
            let flip = if x.coeffs[e] < 0.0 { -1.0 } else { 1.0 };
            a[e][e] = flip;
            a[e][ne + e] = -flip;
            for &(t, s) in &k.edge_triangles()[e] {
                a[e][2 * ne + t] = flip * s;
                a[e][2 * ne + nt + t] = -flip * s;
            }
            b[e] = flip * x.coeffs[e];
            basis[e] = if flip > 0.0 { e } else { ne + e };
        }
        let mut c = Vec::with_capacity(n);
        c.extend_from_slice(k.edge_lengths());
        c.extend_from_slice(k.edge_lengths());
        let w: Vec<f64> = k.triangle_areas().iter().map(|a| a / scale).collect();
        c.extend_from_slice(&w);
        c.extend_from_slice(&w);
        let (z, _) = simplex_min(&a, &b, &c, &basis, 100 * n + 1000)?;
        let t = Chain {
            dim: 2,
            coeffs: (0..nt).map(|i| z[2 * ne + i] - z[2 * ne + nt + i]).collect(),
        };
        FlatNormDecomposition::from_t(x, t, k, scale)
    }
}

pub fn primal_solvers() -> Registry<dyn FlatNormSolver> {
    Registry::<dyn FlatNormSolver>::new("flat norm solver")
        .with(Box::new(NetworkFlatNorm))
        .with(Box::new(SimplexFlatNorm))
}

/// Exact primal flat norm with its witness decomposition.
pub fn flat_norm_primal(x: &Chain, k: &SimplicialComplex2, scale: f64) -> Result<FlatNormDecomposition> {
    NetworkFlatNorm.solve(x, k, scale)
}

/// An edge cochain; `phi[e]` pairs with the coefficient of edge `e`.
#[derive(Debug, Clone, Serialize)]
pub struct DualForm {
    pub phi: Vec<f64>,
}

impl DualForm {
    pub fn evaluate(&self, x: &Chain) -> f64 {
        self.phi.iter().zip(&x.coeffs).map(|(p, c)| p * c).sum()
    }

    /// Largest relative violation of `|φ_e| ≤ ℓ_e` and `|(∂ᵀφ)_t| ≤ A_t / s`.
    pub fn violation(&self, k: &SimplicialComplex2, scale: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for (p, l) in self.phi.iter().zip(k.edge_lengths()) {
            worst = worst.max(p.abs() / l - 1.0);
        }
        for (tri, a) in k.triangle_edges().iter().zip(k.triangle_areas()) {
            let d: f64 = tri.iter().map(|&(e, s)| s * self.phi[e]).sum();
            worst = worst.max(d.abs() / (a / scale) - 1.0);
        }
        worst.max(0.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DualSolution {
    /// `⟨x, φ⟩` for a feasible `φ`; a lower bound on the flat norm.
    pub value: f64,
    pub form: DualForm,
    /// Best primal value seen, when the method tracks one.
    pub primal_bound: Option<f64>,
    pub iterations: usize,
}

pub trait DualSolver: Named + Send + Sync {
    /// `tol` is the target relative gap for iterative methods.
    fn solve(&self, x: &Chain, k: &SimplicialComplex2, scale: f64, tol: f64) -> Result<DualSolution>;
}

/// Dense simplex on the dual LP with slack basis.
pub struct SimplexDual;

impl Named for SimplexDual {
    fn name(&self) -> &'static str {
        "simplex"
    }
}

impl DualSolver for SimplexDual {
    fn solve(&self, x: &Chain, k: &SimplicialComplex2, scale: f64, _tol: f64) -> Result<DualSolution> {
        check_inputs(x, k, scale)?;
        let (ne, nt) = (k.num_edges(), k.num_triangles());
        // columns: φ+ (ne), φ- (ne), then one slack per row
        let rows = 2 * ne + 2 * nt;
        let n = 2 * ne + rows;
        let mut a = vec![vec![0.0; n]; rows];
        let mut b = vec![0.0; rows];
        for e in 0..ne {
            let l = k.edge_lengths()[e];
            a[2 * e][e] = 1.0;
            a[2 * e][ne + e] = -1.0;
            a[2 * e + 1][e] = -1.0;
            a[2 * e + 1][ne + e] = 1.0;
            b[2 * e] = l;
            b[2 * e + 1] = l;
        }
        for (t, tri) in k.triangle_edges().iter().enumerate() {
            let (r0, r1) = (2 * ne + 2 * t, 2 * ne + 2 * t + 1);
            for &(e, s) in tri {
                a[r0][e] += s;
                a[r0][ne + e] -= s;
                a[r1][e] -= s;
                a[r1][ne + e] += s;
            }
            let w = k.triangle_areas()[t] / scale;
            b[r0] = w;
            b[r1] = w;
        }
        for (r, row) in a.iter_mut().enumerate() {
            row[2 * ne + r] = 1.0;
        }
        let mut c = vec![0.0; n];
        for e in 0..ne {
            c[e] = -x.coeffs[e];
            c[ne + e] = x.coeffs[e];
        }
        let basis: Vec<usize> = (0..rows).map(|r| 2 * ne + r).collect();
        let (z, v) = simplex_min(&a, &b, &c, &basis, 100 * n + 1000)?;
        let form = DualForm {
            phi: (0..ne).map(|e| z[e] - z[ne + e]).collect(),
        };
        Ok(DualSolution {
            value: -v,
            form,
            primal_bound: None,
            iterations: 0,
        })
    }
}

pub fn dual_solvers() -> Registry<dyn DualSolver> {
    Registry::<dyn DualSolver>::new("dual solver")
        .with(Box::new(Pdhg::default()))
        .with(Box::new(SimplexDual))
}

/// Dual lower bound by the first-order primal-dual method at relative gap `1e-6`.
pub fn flat_norm_dual(x: &Chain, k: &SimplicialComplex2, scale: f64) -> Result<f64> {
    Ok(Pdhg::default().solve(x, k, scale, 1e-6)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{GridPattern, PolylineCurrent, regular_polygon, rasterize_to_chain};

    fn single_triangle() -> SimplicialComplex2 {
        SimplicialComplex2::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn zero_chain_has_zero_norm() {
        let k = SimplicialComplex2::grid([0.0, 0.0], 3, 3, 1.0, GridPattern::Crossed).unwrap();
        let x = k.zero_chain(1);
        for s in primal_solvers().iter() {
            let d = s.solve(&x, &k, 1.0).unwrap();
            assert_eq!(d.value, 0.0);
            assert!(d.r_chain.is_zero() && d.t_chain.is_zero());
        }
        for s in dual_solvers().iter() {
            assert_eq!(s.solve(&x, &k, 1.0, 1e-8).unwrap().value, 0.0);
        }
    }

    #[test]
    fn triangle_boundary_fills_or_keeps() {
        let k = single_triangle();
        let mut t = k.zero_chain(2);
        t.coeffs[0] = 1.0;
        let x = k.boundary(&t).unwrap();
        let perimeter = 2.0 + 2f64.sqrt();
        for scale in [0.01, 0.1, 1.0, 10.0] {
            let expect = perimeter.min(0.5 / scale);
            for s in primal_solvers().iter() {
                let d = s.solve(&x, &k, scale).unwrap();
                assert!((d.value - expect).abs() < 1e-12, "{} {scale}: {}", s.name(), d.value);
                assert!((d.value - d.mass_r - d.mass_t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn solvers_agree_and_witnesses_reconstruct_input() {
        let k = SimplicialComplex2::grid([0.0, 0.0], 4, 4, 0.25, GridPattern::Crossed).unwrap();
        let c = PolylineCurrent::single(regular_polygon([0.5, 0.5], 0.3, 12, 1.3));
        let x = rasterize_to_chain(&c, &k).unwrap();
        for scale in [0.05, 0.2, 1.0] {
            let a = flat_norm_primal(&x, &k, scale).unwrap();
            let b = SimplexFlatNorm.solve(&x, &k, scale).unwrap();
            assert!((a.value - b.value).abs() < 1e-9, "{} {}", a.value, b.value);
            let back = a.r_chain.add(&k.boundary(&a.t_chain).unwrap()).unwrap();
            assert!(back.max_abs_diff(&x) < 1e-12);
            let dual = SimplexDual.solve(&x, &k, scale, 1e-9).unwrap();
            assert!(dual.form.violation(&k, scale) < 1e-9);
            assert!((dual.value - a.value).abs() < 1e-9);
            let p = Pdhg::default().solve(&x, &k, scale, 1e-6).unwrap();
            assert!(p.value <= a.value + 1e-9 && p.value >= a.value * (1.0 - 1e-5));
        }
    }

    #[test]
    fn rejects_bad_scale_and_dimension() {
        let k = single_triangle();
        assert!(flat_norm_primal(&k.zero_chain(1), &k, 0.0).is_err());
        assert!(flat_norm_primal(&k.zero_chain(2), &k, 1.0).is_err());
        assert!(flat_norm_primal(&Chain::zeros(1, 7), &k, 1.0).is_err());
    }

    #[test]
    fn registry_lists_solvers() {
        assert_eq!(primal_solvers().names(), vec!["network", "simplex"]);
        assert_eq!(dual_solvers().names(), vec!["pdhg", "simplex"]);
    }
}
