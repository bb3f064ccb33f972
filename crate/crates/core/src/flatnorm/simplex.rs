//! Dense tableau simplex with Bland's rule, for small linear programs.

use crate::error::{Error, Result};

/// Minimises `c·z` subject to `A z = b`, `z ≥ 0`, starting from `basis`, which
/// must index an identity submatrix of `A` with `b ≥ 0`. Returns `z` and the
/// optimal value.
pub fn simplex_min(
    a: &[Vec<f64>],
    b: &[f64],
    c: &[f64],
    basis: &[usize],
    max_pivots: usize,
) -> Result<(Vec<f64>, f64)> {
    let m = a.len();
    let n = c.len();
    let w = n + 1;
    // row-major tableau with the right-hand side in the last column
    let mut tab = vec![0.0; m * w];
    for i in 0..m {
        tab[i * w..i * w + n].copy_from_slice(&a[i]);
        tab[i * w + n] = b[i];
    }
    let mut basis = basis.to_vec();
    let scale = c.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let eps = 1e-11 * scale;
    let mut pivots = 0;
    loop {
        // reduced costs d_j = c_j - c_B B^{-1} A_j
        let mut entering = None;
        for j in 0..n {
            let mut d = c[j];
            for (i, &bi) in basis.iter().enumerate() {
                d -= c[bi] * tab[i * w + j];
            }
            if d < -eps {
                entering = Some(j);
                break;
            }
        }
        let Some(j) = entering else { break };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let aij = tab[i * w + j];
            if aij > 1e-12 {
                let ratio = tab[i * w + n] / aij;
                let better = match leave {
                    None => true,
                    Some((r, bestratio)) => {
                        ratio < bestratio - 1e-14
                            || (ratio <= bestratio + 1e-14 && basis[i] < basis[r])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((r, _)) = leave else {
            return Err(Error::validation("linear program is unbounded"));
        };
        if pivots >= max_pivots {
            return Err(Error::NonConvergence {
                solver: "dense simplex",
                iterations: pivots,
            });
        }
        pivots += 1;
        let p = tab[r * w + j];
        for k in 0..w {
            tab[r * w + k] /= p;
        }
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = tab[i * w + j];
            if f != 0.0 {
                for k in 0..w {
                    tab[i * w + k] -= f * tab[r * w + k];
                }
            }
        }
        basis[r] = j;
    }
    let mut z = vec![0.0; n];
    for (i, &bi) in basis.iter().enumerate() {
        z[bi] = tab[i * w + n].max(0.0);
    }
    let value = z.iter().zip(c).map(|(x, y)| x * y).sum();
    Ok((z, value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // min -x - y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
        let a = vec![vec![1.0, 2.0, 1.0, 0.0], vec![3.0, 1.0, 0.0, 1.0]];
        let (z, v) = simplex_min(&a, &[4.0, 6.0], &[-1.0, -1.0, 0.0, 0.0], &[2, 3], 100).unwrap();
        assert!((v + 2.8).abs() < 1e-12, "{v}");
        assert!((z[0] - 1.6).abs() < 1e-12 && (z[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn unbounded_is_reported() {
        let a = vec![vec![1.0, -1.0]];
        assert!(simplex_min(&a, &[1.0], &[0.0, -1.0], &[0], 100).is_err());
    }
}
