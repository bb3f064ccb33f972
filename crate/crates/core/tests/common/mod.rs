//! Helpers shared by the integration tests: small random complexes, random
//! currents, and an exhaustive integer flat-norm oracle.

#![allow(dead_code)]

use currents_core::chain::{Chain, GridPattern, Point, Polyline, PolylineCurrent, SimplicialComplex2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A jittered grid complex with at most `max_triangles` triangles.
pub fn random_small_complex(seed: u64, max_triangles: usize) -> SimplicialComplex2 {
    let mut r = rng(seed);
    loop {
        let pattern = [GridPattern::Diagonal, GridPattern::AntiDiagonal, GridPattern::Crossed][r.gen_range(0..3)];
        let per_cell = if pattern == GridPattern::Crossed { 4 } else { 2 };
        let nx = r.gen_range(1..=4);
        let ny = r.gen_range(1..=3);
        if nx * ny * per_cell > max_triangles {
            continue;
        }
        let spacing = r.gen_range(0.5..2.0);
        let grid = SimplicialComplex2::grid([0.0, 0.0], nx, ny, spacing, pattern).expect("valid grid");
        let verts: Vec<Point> = grid
            .vertices()
            .iter()
            .map(|v| {
                [
                    v[0] + spacing * r.gen_range(-0.2..0.2),
                    v[1] + spacing * r.gen_range(-0.2..0.2),
                ]
            })
            .collect();
        if let Ok(k) = SimplicialComplex2::from_triangles(verts, grid.triangles().to_vec()) {
            return k;
        }
    }
}

/// Integer 1-chain with coefficients in `-c..=c`.
pub fn random_integer_chain(k: &SimplicialComplex2, seed: u64, c: i32) -> Chain {
    let mut r = rng(seed);
    Chain {
        dim: 1,
        coeffs: (0..k.num_edges()).map(|_| r.gen_range(-c..=c) as f64).collect(),
    }
}

struct Factor {
    scope: Vec<usize>,
    table: Vec<f64>,
}

/// `min_t Σ_e ℓ_e |x_e − (∂t)_e| + Σ_t (A_t / scale) |t|` over integer
/// 2-chains with every coefficient in `−range..=range`, by bucket elimination
/// over triangles in index order. The minimum is exact over that box.
pub fn brute_force_flat_norm(x: &Chain, k: &SimplicialComplex2, scale: f64, range: i32) -> f64 {
    let d = (2 * range + 1) as usize;
    let value = |i: usize| i as f64 - range as f64;
    let mut factors: Vec<Factor> = Vec::new();
    for (t, &a) in k.triangle_areas().iter().enumerate() {
        factors.push(Factor {
            scope: vec![t],
            table: (0..d).map(|i| a / scale * value(i).abs()).collect(),
        });
    }
    for (e, tris) in k.edge_triangles().iter().enumerate() {
        let l = k.edge_lengths()[e];
        let xe = x.coeffs[e];
        let mut scope: Vec<(usize, f64)> = tris.clone();
        scope.sort_by_key(|p| p.0);
        let vars: Vec<usize> = scope.iter().map(|p| p.0).collect();
        let size = d.pow(vars.len() as u32);
        let table = (0..size)
            .map(|mut idx| {
                let mut bd = 0.0;
                for &(_, s) in scope.iter().rev() {
                    bd += s * value(idx % d);
                    idx /= d;
                }
                l * (xe - bd).abs()
            })
            .collect();
        factors.push(Factor { scope: vars, table });
    }
    let index = |f: &Factor, assign: &[usize]| f.scope.iter().fold(0, |acc, &v| acc * d + assign[v]);
    let mut assign = vec![0usize; k.num_triangles()];
    for v in 0..k.num_triangles() {
        let (bucket, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.scope.contains(&v));
        factors = rest;
        let mut scope: Vec<usize> = bucket.iter().flat_map(|f| f.scope.iter().copied()).filter(|&u| u != v).collect();
        scope.sort_unstable();
        scope.dedup();
        let size = d.pow(scope.len() as u32);
        let mut table = vec![f64::INFINITY; size];
        for (idx, slot) in table.iter_mut().enumerate() {
            let mut rem = idx;
            for &u in scope.iter().rev() {
                assign[u] = rem % d;
                rem /= d;
            }
            for i in 0..d {
                assign[v] = i;
                let s: f64 = bucket.iter().map(|f| f.table[index(f, &assign)]).sum();
                if s < *slot {
                    *slot = s;
                }
            }
        }
        factors.push(Factor { scope, table });
    }
    factors.iter().map(|f| f.table[0]).sum()
}

/// Plain enumeration of every integer 2-chain in the box; for tiny complexes only.
pub fn enumerate_flat_norm(x: &Chain, k: &SimplicialComplex2, scale: f64, range: i32) -> f64 {
    let nt = k.num_triangles();
    let d = (2 * range + 1) as usize;
    let mut best = f64::INFINITY;
    for mut idx in 0..d.pow(nt as u32) {
        let mut t = Chain::zeros(2, nt);
        for c in t.coeffs.iter_mut() {
            *c = (idx % d) as f64 - range as f64;
            idx /= d;
        }
        let r = x.sub(&k.boundary(&t).unwrap()).unwrap();
        best = best.min(k.mass(&r) + k.mass(&t) / scale);
    }
    best
}

/// A closed polygon in the unit square with `m` vertices, star-shaped about its centre.
pub fn random_closed_polyline(seed: u64, m: usize, multiplicity: f64) -> Polyline {
    let mut r = rng(seed);
    let c = [r.gen_range(0.35..0.65), r.gen_range(0.35..0.65)];
    let verts: Vec<Point> = (0..m)
        .map(|k| {
            let t = std::f64::consts::TAU * (k as f64 + r.gen_range(-0.3..0.3)) / m as f64;
            let rad = r.gen_range(0.08..0.3);
            [c[0] + rad * t.cos(), c[1] + rad * t.sin()]
        })
        .collect();
    Polyline::uniform(verts, true, multiplicity).expect("valid polygon")
}

pub fn random_closed_current(seed: u64) -> PolylineCurrent {
    let mut r = rng(seed);
    let count = r.gen_range(1..=2);
    let polys = (0..count)
        .map(|i| {
            let m = r.gen_range(3..=8);
            let mult = if r.gen_bool(0.5) { 1.0 } else { -1.0 } * r.gen_range(1..=2) as f64;
            random_closed_polyline(seed.wrapping_mul(31).wrapping_add(i), m, mult)
        })
        .collect();
    PolylineCurrent::new(polys).expect("valid current")
}

/// Fraction of disc pixels that end nearer the background than the disc value
/// after flattening-only descent on `disc_pack` with the given `n`, resolution
/// and flat-norm scale. Regularity is priced by R2 against the F2 fidelity.
pub fn disc_removal_fraction(n: u32, res: usize, scale: f64) -> f64 {
    use currents_core::energy::{EnergyConfig, EnergyWeights};
    use currents_core::optimizer::{descend, DescentParams};
    use currents_core::scenes::{generate, DiscPack, SceneSpec};

    let spec = SceneSpec {
        n,
        res,
        contrast: 0.6,
        background: 0.2,
        oracle: false,
        ..SceneSpec::new("disc_pack")
    };
    let s = generate(&spec).expect("valid scene");
    let weights = EnergyWeights::from_array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.5]);
    let config = EnergyConfig {
        scale,
        ..EnergyConfig::default()
    };
    let cell_px = res / (2 * n as usize);
    let params = DescentParams {
        max_iters: 3,
        region_size: 2 * cell_px + 4,
        proposals: vec!["flatten".into()],
        ..DescentParams::default()
    };
    let out = descend(&s.image, &s.image, &weights, &config, &params).expect("descent runs");
    let (r, centers) = (DiscPack::radius(n), DiscPack::centers(n));
    let mid = spec.background + 0.5 * spec.contrast;
    let (mut inside, mut removed) = (0usize, 0usize);
    for j in 0..res {
        for i in 0..res {
            let p = out.field.center(i, j);
            if centers.iter().any(|c| (p.0 - c[0]).hypot(p.1 - c[1]) < r) {
                inside += 1;
                if out.field.get(i, j) < mid {
                    removed += 1;
                }
            }
        }
    }
    removed as f64 / inside as f64
}
