//! Closed-form side games: the density game `φ(α, β, γ)` and the
//! per-clique score `(1-α)^k α`.

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetagameError {
    #[error("{name} = {value} is outside [0, 1]")]
    Domain { name: &'static str, value: f64 },
    #[error("grid step {0} must lie in (0, 0.01]")]
    GridStep(f64),
    #[error("refinement tolerance {0} must lie in (0, 1e-9]")]
    Tolerance(f64),
}

fn unit(name: &'static str, value: f64) -> Result<f64, MetagameError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(MetagameError::Domain { name, value })
    }
}

/// `(1-α)(α - α²β) + α((γ - γ²β) - γ(1-β))`.
pub fn phi(alpha: f64, beta: f64, gamma: f64) -> Result<f64, MetagameError> {
    let (a, b, c) = (unit("alpha", alpha)?, unit("beta", beta)?, unit("gamma", gamma)?);
    Ok(phi_raw(a, b, c))
}

fn phi_raw(a: f64, b: f64, c: f64) -> f64 {
    (1.0 - a) * (a - a * a * b) + a * ((c - c * c * b) - c * (1.0 - b))
}

/// `(1-α)(α - α²β) + αβ(γ - γ²)`, algebraically equal to [`phi`].
pub fn phi_simplified(alpha: f64, beta: f64, gamma: f64) -> Result<f64, MetagameError> {
    let (a, b, c) = (unit("alpha", alpha)?, unit("beta", beta)?, unit("gamma", gamma)?);
    Ok((1.0 - a) * (a - a * a * b) + a * b * (c - c * c))
}

/// Per-vertex score of the two-phase play in the density game: the first
/// phase keeps `(1-α)(α - α²β)`, the second adds `α(γ - γ²β) - αγ(1-β)`.
pub fn mbeta_strategy_score(alpha: f64, beta: f64, gamma: f64) -> Result<f64, MetagameError> {
    let (a, b, c) = (unit("alpha", alpha)?, unit("beta", beta)?, unit("gamma", gamma)?);
    let first = (1.0 - a) * (a - a * a * b);
    let second = a * ((c - c * c * b) - c * (1.0 - b));
    Ok(first + second)
}

/// `(1-α)^k α`.
pub fn mt_score(alpha: f64, k: u32) -> Result<f64, MetagameError> {
    let a = unit("alpha", alpha)?;
    Ok((1.0 - a).powi(k as i32) * a)
}

/// `k^k / (k+1)^(k+1)`.
pub fn mt_optimum(k: u32) -> f64 {
    let k = f64::from(k);
    (k / (k + 1.0)).powf(k) / (k + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiMaximum {
    pub max_value: f64,
    /// Representative `(α, β, γ)` points whose value is within
    /// [`MAXIMIZER_TOLERANCE`] of the maximum.
    pub maximizers: Vec<[f64; 3]>,
}

pub const MAXIMIZER_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_GRID_STEP: f64 = 0.01;
pub const DEFAULT_REFINE_TOL: f64 = 1e-10;
pub const REPRESENTATIVE_SPACING: f64 = 0.1;

fn grid(step: f64) -> Vec<f64> {
    let count = (1.0 / step).round() as usize;
    (0..=count).map(|i| (i as f64 * step).min(1.0)).collect()
}

/// Pattern search inside the unit cube from `start`, halving the step
/// until it drops below `tol`. Coordinates in `fixed` are held.
fn refine(start: [f64; 3], step: f64, tol: f64, fixed: [bool; 3]) -> ([f64; 3], f64) {
    let mut x = start;
    let mut best = phi_raw(x[0], x[1], x[2]);
    let mut h = step;
    while h >= tol {
        let mut moved = false;
        for axis in 0..3 {
            if fixed[axis] {
                continue;
            }
            for dir in [-1.0, 1.0] {
                let mut y = x;
                y[axis] = (y[axis] + dir * h).clamp(0.0, 1.0);
                let v = phi_raw(y[0], y[1], y[2]);
                if v > best {
                    best = v;
                    x = y;
                    moved = true;
                }
            }
        }
        if !moved {
            h /= 2.0;
        }
    }
    (x, best)
}

fn maximize(grid_step: f64, refine_tol: f64, beta: Option<f64>) -> Result<PhiMaximum, MetagameError> {
    if !(grid_step > 0.0 && grid_step <= 0.01) {
        return Err(MetagameError::GridStep(grid_step));
    }
    if !(refine_tol > 0.0 && refine_tol <= 1e-9) {
        return Err(MetagameError::Tolerance(refine_tol));
    }
    let axis = grid(grid_step);
    let betas = match beta {
        Some(b) => vec![unit("beta", b)?],
        None => axis.clone(),
    };
    let values: Vec<f64> = (0..axis.len() * betas.len() * axis.len())
        .into_par_iter()
        .map(|idx| {
            let (i, rest) = (idx / (betas.len() * axis.len()), idx % (betas.len() * axis.len()));
            let (j, l) = (rest / axis.len(), rest % axis.len());
            phi_raw(axis[i], betas[j], axis[l])
        })
        .collect();
    let dims = [axis.len(), betas.len(), axis.len()];
    let at = |i: usize, j: usize, l: usize| values[(i * dims[1] + j) * dims[2] + l];
    let grid_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    // grid-local maxima near the top are refined; the others cannot reach it
    let mut candidates = Vec::new();
    for i in 0..dims[0] {
        for (j, &b) in betas.iter().enumerate() {
            for l in 0..dims[2] {
                let v = at(i, j, l);
                if v < grid_max - 1e-3 {
                    continue;
                }
                let mut local = true;
                for (di, dj, dl) in [(1, 0, 0), (0, 1, 0), (0, 0, 1)] {
                    for sign in [-1isize, 1] {
                        let ni = i as isize + sign * di;
                        let nj = j as isize + sign * dj;
                        let nl = l as isize + sign * dl;
                        if ni < 0 || nj < 0 || nl < 0 || ni >= dims[0] as isize || nj >= dims[1] as isize || nl >= dims[2] as isize {
                            continue;
                        }
                        if at(ni as usize, nj as usize, nl as usize) > v {
                            local = false;
                        }
                    }
                }
                if local {
                    candidates.push([axis[i], b, axis[l]]);
                }
            }
        }
    }
    let fixed = [false, beta.is_some(), false];
    let refined: Vec<([f64; 3], f64)> =
        candidates.par_iter().map(|&c| refine(c, grid_step, refine_tol, fixed)).collect();
    let max_value = refined.iter().map(|r| r.1).fold(grid_max, f64::max);
    let mut maximizers: Vec<[f64; 3]> =
        refined.into_iter().filter(|r| r.1 >= max_value - MAXIMIZER_TOLERANCE).map(|r| r.0).collect();
    maximizers.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    // maximizers form curves; keep representatives at least REPRESENTATIVE_SPACING apart
    let mut kept: Vec<[f64; 3]> = Vec::new();
    for p in maximizers {
        let far = |q: &[f64; 3]| p.iter().zip(q).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) >= REPRESENTATIVE_SPACING;
        if kept.iter().all(far) {
            kept.push(p);
        }
    }
    let maximizers = kept;
    Ok(PhiMaximum { max_value, maximizers })
}

/// Grid scan of `φ` over the unit cube followed by local refinement of the
/// grid-local maxima.
pub fn maximize_phi(grid_step: f64, refine_tol: f64) -> Result<PhiMaximum, MetagameError> {
    maximize(grid_step, refine_tol, None)
}

/// As [`maximize_phi`], with `β` held fixed.
pub fn maximize_phi_at_beta(beta: f64, grid_step: f64, refine_tol: f64) -> Result<PhiMaximum, MetagameError> {
    maximize(grid_step, refine_tol, Some(beta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtMaximum {
    pub k: u32,
    pub argmax: f64,
    pub value: f64,
    /// Best point of the initial grid.
    pub grid_argmax: f64,
}

/// Maximizes `(1-α)^k α` over `[0, 1]`: grid scan, then golden-section
/// search on the bracketing cell.
pub fn mt_argmax(k: u32, grid_step: f64) -> Result<MtMaximum, MetagameError> {
    if !(grid_step > 0.0 && grid_step <= 0.01) {
        return Err(MetagameError::GridStep(grid_step));
    }
    let f = |a: f64| (1.0 - a).powi(k as i32) * a;
    let axis = grid(grid_step);
    let (best, _) = axis
        .iter()
        .enumerate()
        .map(|(i, &a)| (i, f(a)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let grid_argmax = axis[best];
    let (mut lo, mut hi) = (axis[best.saturating_sub(1)], axis[(best + 1).min(axis.len() - 1)]);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    while hi - lo > 1e-12 {
        if f(c) >= f(d) {
            hi = d;
        } else {
            lo = c;
        }
        c = hi - ratio * (hi - lo);
        d = lo + ratio * (hi - lo);
    }
    let argmax = (lo + hi) / 2.0;
    Ok(MtMaximum { k, argmax, value: f(argmax).max(f(grid_argmax)), grid_argmax })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_examples() {
        for beta in [0.0, 1.0 / 3.0, 1.0] {
            assert!((phi(0.5, beta, 0.5).unwrap() - 0.25).abs() < 1e-15);
        }
        assert_eq!(phi(0.0, 0.7, 0.3).unwrap(), 0.0);
        assert!((phi(1.0, 1.0, 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!(phi(1.1, 0.0, 0.0).is_err());
        assert!(phi(0.5, -0.1, 0.0).is_err());
        assert!(phi(0.5, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn simplified_and_strategy_forms_agree() {
        let axis = grid(0.02);
        for &a in &axis {
            for &b in &axis {
                for &c in &axis {
                    let p = phi(a, b, c).unwrap();
                    assert!((p - phi_simplified(a, b, c).unwrap()).abs() < 1e-15);
                    assert_eq!(p, mbeta_strategy_score(a, b, c).unwrap());
                }
            }
        }
        let (a, b) = (0.4, 0.6);
        assert_eq!(mbeta_strategy_score(a, b, 0.0).unwrap(), (1.0 - a) * (a - a * a * b));
    }

    #[test]
    fn grid_never_exceeds_quarter() {
        let axis = grid(0.01);
        let worst = axis
            .par_iter()
            .map(|&a| {
                let mut m = f64::NEG_INFINITY;
                for &b in &axis {
                    for &c in &axis {
                        m = m.max(mbeta_strategy_score(a, b, c).unwrap());
                    }
                }
                m
            })
            .reduce(|| f64::NEG_INFINITY, f64::max);
        assert!(worst <= 0.25 + 1e-12);
    }

    #[test]
    fn maximum_and_maximizers() {
        let m = maximize_phi(DEFAULT_GRID_STEP, DEFAULT_REFINE_TOL).unwrap();
        assert!((m.max_value - 0.25).abs() < 1e-9);
        let near = |p: &[f64; 3], a: Option<f64>, b: Option<f64>, c: Option<f64>| {
            [a, b, c].iter().zip(p.iter()).all(|(want, got)| want.is_none_or(|w| (w - got).abs() < 1e-6))
        };
        assert!(m.maximizers.iter().any(|p| near(p, Some(0.5), None, Some(0.5))));
        assert!(m.maximizers.iter().any(|p| near(p, Some(0.5), Some(0.0), None) && (p[2] - 0.5).abs() > 0.1));
        assert!(m.maximizers.iter().any(|p| near(p, Some(1.0), Some(1.0), Some(0.5))));
        for p in &m.maximizers {
            assert!(phi(p[0], p[1], p[2]).unwrap() >= 0.25 - MAXIMIZER_TOLERANCE);
        }
        let line = maximize_phi_at_beta(0.0, DEFAULT_GRID_STEP, DEFAULT_REFINE_TOL).unwrap();
        assert!((line.max_value - 0.25).abs() < 1e-9);
        assert!(line.maximizers.iter().all(|p| (p[0] - 0.5).abs() < 1e-6 && p[1] == 0.0));
        assert!(maximize_phi(0.1, DEFAULT_REFINE_TOL).is_err());
        assert!(maximize_phi(0.01, 1e-3).is_err());
    }

    #[test]
    fn mt_examples() {
        assert!((mt_score(1.0 / 3.0, 2).unwrap() - 4.0 / 27.0).abs() < 1e-15);
        assert_eq!(mt_score(0.5, 1).unwrap(), 0.25);
        assert_eq!(mt_score(0.3, 0).unwrap(), 0.3);
        for k in 1..=10 {
            let m = mt_argmax(k, 0.01).unwrap();
            let want = 1.0 / f64::from(k + 1);
            assert!((m.grid_argmax - want).abs() <= 0.01);
            assert!((m.argmax - want).abs() < 1e-6);
            assert!((m.value - mt_optimum(k)).abs() < 1e-12);
        }
        assert!((mt_optimum(3) - 27.0 / 256.0).abs() < 1e-15);
    }
}
