use serde::Serialize;

use super::PathEnsemble;
use crate::drift::SingularSet;
use crate::spectral::TorusGrid;
use crate::stats::{loglog_fit, LineFit, MeanEstimate, Proportion};

/// First entry of `(t, X_t)` into the closed `δ`-neighborhood of `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StopRecord {
    /// Index into the recorded times; `None` means `τ = ∞`.
    pub tau_index: Option<usize>,
    pub tau: f64,
    /// Largest single-step displacement before `τ`: bounds the distance the
    /// continuous path may have travelled into the neighborhood unseen.
    pub overshoot_bound: f64,
}

fn point(path: &[f64], dim: usize, k: usize, grid: &TorusGrid) -> [f64; 3] {
    let mut x = [0.0; 3];
    for a in 0..dim {
        x[a] = grid.wrap(path[k * dim + a]);
    }
    x
}

/// Discrete first-entry time of one path (unwrapped positions, uniform time
/// spacing `dt`).
pub fn first_entry(path: &[f64], dt: f64, grid: &TorusGrid, k: &SingularSet, delta: f64) -> StopRecord {
    let d = grid.dim();
    let n = path.len() / d;
    let mut overshoot: f64 = 0.0;
    for i in 0..n {
        let x = point(path, d, i, grid);
        if k.distance(grid, i as f64 * dt, &x[..d]) <= delta {
            return StopRecord {
                tau_index: Some(i),
                tau: i as f64 * dt,
                overshoot_bound: overshoot,
            };
        }
        if i + 1 < n {
            let step: f64 = (0..d)
                .map(|a| (path[(i + 1) * d + a] - path[i * d + a]).powi(2))
                .sum::<f64>()
                .sqrt();
            overshoot = overshoot.max(step);
        }
    }
    StopRecord {
        tau_index: None,
        tau: f64::INFINITY,
        overshoot_bound: overshoot,
    }
}

/// Stopping records of every path of an ensemble.
pub fn stopping_time(ens: &PathEnsemble, grid: &TorusGrid, k: &SingularSet, delta: f64) -> Vec<StopRecord> {
    (0..ens.paths())
        .map(|i| first_entry(ens.path(i), ens.record_dt(), grid, k, delta))
        .collect()
}

/// `P(τ^δ < T)` with a Wilson interval.
pub fn hitting_probability(records: &[StopRecord]) -> Proportion {
    Proportion::new(records.iter().filter(|r| r.tau_index.is_some()).count(), records.len())
}

/// Largest Hölder quotient `|X_t − X_s|/|t − s|^α` over consecutive pairs at
/// every dyadic subsampling level and the endpoint pair.
pub fn holder_norm(path: &[f64], dim: usize, dt: f64, alpha: f64) -> f64 {
    let n = path.len() / dim;
    if n < 2 {
        return 0.0;
    }
    let dist = |i: usize, j: usize| -> f64 {
        (0..dim)
            .map(|a| (path[j * dim + a] - path[i * dim + a]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut best = dist(0, n - 1) / ((n - 1) as f64 * dt).powf(alpha);
    let mut stride = 1;
    while stride < n {
        let denom = (stride as f64 * dt).powf(alpha);
        let mut i = 0;
        while i + stride < n {
            best = best.max(dist(i, i + stride) / denom);
            i += stride;
        }
        stride *= 2;
    }
    best
}

/// Constant `C` with `|X_t − X_s| ≤ C·H·|t − s|^α` for all grid pairs, where
/// `H` is the dyadic quotient of [`holder_norm`].
pub fn chaining_constant(alpha: f64) -> f64 {
    2.0 / (1.0 - 2f64.powf(-alpha))
}

/// Tail table `L ↦ P(‖X‖_{C^α} > L)` with a fitted tail exponent.
#[derive(Debug, Clone, Serialize)]
pub struct HolderTail {
    pub levels: Vec<f64>,
    pub tail: Vec<Proportion>,
    /// Log-log fit over the levels with nonzero tail.
    pub fit: Option<LineFit>,
}

pub fn holder_tail(norms: &[f64], levels: &[f64]) -> HolderTail {
    let tail: Vec<Proportion> = levels
        .iter()
        .map(|&l| Proportion::new(norms.iter().filter(|&&h| h > l).count(), norms.len()))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = levels
        .iter()
        .zip(&tail)
        .filter(|(_, p)| p.p > 0.0)
        .map(|(l, p)| (*l, p.p))
        .unzip();
    let fit = if xs.len() >= 2 { loglog_fit(&xs, &ys) } else { None };
    HolderTail {
        levels: levels.to_vec(),
        tail,
        fit,
    }
}

/// Moment regression of `E|X_{t+ℓ} − X_t|^p` against the lag `ℓ`.
#[derive(Debug, Clone, Serialize)]
pub struct MomentRegression {
    pub lags: Vec<f64>,
    pub moments: Vec<MeanEstimate>,
    pub fit: LineFit,
}

/// Uses lags `2^j` record steps, `j = 0..levels`, averaging over all
/// non-overlapping windows of each path.
pub fn moment_regression(ens: &PathEnsemble, p: f64, levels: usize) -> Option<MomentRegression> {
    let d = ens.dim;
    let n = ens.times.len();
    let mut lags = Vec::new();
    let mut moments = Vec::new();
    for j in 0..levels {
        let lag = 1usize << j;
        if lag >= n {
            break;
        }
        let per_path: Vec<f64> = (0..ens.paths())
            .map(|i| {
                let path = ens.path(i);
                let mut acc = 0.0;
                let mut count = 0;
                let mut s = 0;
                while s + lag < n {
                    let r2: f64 = (0..d)
                        .map(|a| (path[(s + lag) * d + a] - path[s * d + a]).powi(2))
                        .sum();
                    acc += r2.powf(p / 2.0);
                    count += 1;
                    s += lag;
                }
                acc / count as f64
            })
            .collect();
        lags.push(lag as f64 * ens.record_dt());
        moments.push(MeanEstimate::from_samples(&per_path));
    }
    let ys: Vec<f64> = moments.iter().map(|m| m.mean).collect();
    let fit = loglog_fit(&lags, &ys)?;
    Some(MomentRegression { lags, moments, fit })
}

/// `dt·#{k : (t_k, X_k) ∈ B_ε(K)}` over the samples `k = 0..n−1`.
pub fn occupation_time(path: &[f64], dt: f64, grid: &TorusGrid, k: &SingularSet, eps: f64) -> f64 {
    let d = grid.dim();
    let n = path.len() / d;
    let count = (0..n.saturating_sub(1))
        .filter(|&i| {
            let x = point(path, d, i, grid);
            k.distance(grid, i as f64 * dt, &x[..d]) <= eps
        })
        .count();
    count as f64 * dt
}

/// Guaranteed occupation of `B_ε(K)` for a path that enters `B_δ(K)` and has
/// Hölder constant `holder` (already including the chaining constant):
/// the window `r = min{((ε−δ)/(√2·H))^{1/α}, (ε−δ)/√2}` around the entry
/// time stays in `B_ε(K)`, clipped to the horizon.
pub fn occupation_lower_bound(eps: f64, delta: f64, holder: f64, alpha: f64, horizon: f64) -> f64 {
    let gap = (eps - delta).max(0.0) / 2f64.sqrt();
    let r_space = if holder > 0.0 {
        (gap / holder).powf(1.0 / alpha)
    } else {
        f64::INFINITY
    };
    r_space.min(gap).min(horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_path_has_zero_holder_norm() {
        let path = vec![0.3; 2 * 33];
        assert_eq!(holder_norm(&path, 2, 0.01, 0.4), 0.0);
    }

    #[test]
    fn linear_path_quotient_at_endpoints() {
        let n = 65;
        let dt = 1.0 / 64.0;
        let v = 1.5;
        let path: Vec<f64> = (0..n).flat_map(|k| [v * k as f64 * dt, 0.0]).collect();
        let h = holder_norm(&path, 2, dt, 0.5);
        assert!((h - v * 1.0f64.powf(0.5)).abs() < 1e-12);
        let h1 = holder_norm(&path, 2, dt, 1.0);
        assert!((h1 - v).abs() < 1e-12);
    }

    #[test]
    fn chaining_bounds_all_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let n = 200;
        let dt = 0.01;
        let mut path = vec![0.0; 2 * n];
        for k in 1..n {
            for a in 0..2 {
                path[k * 2 + a] = path[(k - 1) * 2 + a] + rng.random_range(-0.1..0.1);
            }
        }
        let alpha = 0.4;
        let h = holder_norm(&path, 2, dt, alpha) * chaining_constant(alpha);
        for i in 0..n {
            for j in i + 1..n {
                let d = ((path[j * 2] - path[i * 2]).powi(2) + (path[j * 2 + 1] - path[i * 2 + 1]).powi(2)).sqrt();
                assert!(d <= h * ((j - i) as f64 * dt).powf(alpha) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn stopping_trivial_cases() {
        let g = TorusGrid::new(2, 32, 1.0).unwrap();
        let path = vec![0.5, 0.5, 0.6, 0.5, 0.7, 0.5];
        let r = first_entry(&path, 0.1, &g, &SingularSet::empty(), 0.1);
        assert_eq!(r.tau_index, None);
        let r = first_entry(&path, 0.1, &g, &SingularSet::point(&[0.5, 0.5]), 0.05);
        assert_eq!(r.tau_index, Some(0));
        let r = first_entry(&path, 0.1, &g, &SingularSet::point(&[0.7, 0.5]), 0.01);
        assert_eq!(r.tau_index, Some(2));
        assert!((r.overshoot_bound - 0.1).abs() < 1e-12);
    }

    #[test]
    fn occupation_trivial_cases() {
        let g = TorusGrid::new(2, 32, 1.0).unwrap();
        let far: Vec<f64> = (0..11).flat_map(|_| [0.1, 0.1]).collect();
        assert_eq!(occupation_time(&far, 0.1, &g, &SingularSet::point(&[0.6, 0.6]), 0.1), 0.0);
        // rest at a point of K for the whole horizon
        let k = SingularSet::point(&[0.1, 0.1]);
        for eps in [1e-6, 0.01, 0.3] {
            assert!((occupation_time(&far, 0.1, &g, &k, eps) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lower_bound_window() {
        let r = occupation_lower_bound(0.2, 0.0, 1.0, 0.5, 10.0);
        let gap = 0.2 / 2f64.sqrt();
        assert!((r - (gap * gap).min(gap)).abs() < 1e-15);
        assert_eq!(occupation_lower_bound(0.2, 0.0, 0.0, 0.5, 0.05), 0.05);
    }

    #[test]
    fn tail_table() {
        let norms: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let t = holder_tail(&norms, &[10.0, 50.0, 200.0]);
        assert_eq!(t.tail[0].p, 0.9);
        assert_eq!(t.tail[2].p, 0.0);
        assert!(t.fit.is_some());
    }
}
