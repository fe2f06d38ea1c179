use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::Vec3;

/// Optimal one-to-one assignment of `tracks` to `truth` minimising total
/// distance among pairs closer than `gate`; the number of pairs is
/// maximised first. Returns `(track, truth)` index pairs sorted by track.
pub fn match_to_ground_truth(tracks: &[Vec3], truth: &[Vec3], gate: f64) -> Vec<(usize, usize)> {
    if tracks.is_empty() || truth.is_empty() {
        return Vec::new();
    }
    const MISS: i64 = 1_000_000_000;
    // integer micrometres keep the assignment exact
    let cost = |a: &Vec3, b: &Vec3| {
        let d = (a - b).norm();
        if d < gate {
            -((d * 1e6).round() as i64)
        } else {
            -MISS
        }
    };
    let transpose = tracks.len() > truth.len();
    let (rows, cols) = if transpose { (truth, tracks) } else { (tracks, truth) };
    let w = Matrix::from_fn(rows.len(), cols.len(), |(r, c)| cost(&rows[r], &cols[c]));
    let (_, assign) = kuhn_munkres(&w);
    let mut pairs: Vec<(usize, usize)> = assign
        .into_iter()
        .enumerate()
        .filter(|&(r, c)| (rows[r] - cols[c]).norm() < gate)
        .map(|(r, c)| if transpose { (c, r) } else { (r, c) })
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Sizing accuracy over matched fruitlets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n_ground_truth: usize,
    pub n_matched: usize,
    /// Percent of ground-truth fruitlets matched.
    pub mp: f64,
    pub mae_mm: Option<f64>,
    pub mape: Option<f64>,
    pub r2: Option<f64>,
}

/// `1 - SS_res / SS_tot` of measurements against ground truth; `None`
/// with fewer than two samples or constant ground truth.
pub fn r_squared(measured: &[f64], truth: &[f64]) -> Option<f64> {
    if measured.len() < 2 || measured.len() != truth.len() {
        return None;
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return None;
    }
    let ss_res: f64 = measured.iter().zip(truth).map(|(m, t)| (m - t).powi(2)).sum();
    Some(1.0 - ss_res / ss_tot)
}

/// Metrics from `(measured, ground truth)` sizes in metres over
/// `n_ground_truth` fruitlets.
pub fn compute_metrics(pairs: &[(f64, f64)], n_ground_truth: usize) -> Metrics {
    let n = pairs.len();
    let mp = if n_ground_truth == 0 {
        0.0
    } else {
        100.0 * n as f64 / n_ground_truth as f64
    };
    let (mae_mm, mape) = if n == 0 {
        (None, None)
    } else {
        let mae = pairs.iter().map(|(m, g)| (m - g).abs()).sum::<f64>() / n as f64;
        let mape = pairs.iter().map(|(m, g)| ((m - g) / g).abs()).sum::<f64>() / n as f64;
        (Some(mae * 1e3), Some(mape * 100.0))
    };
    let (m, g): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    Metrics {
        n_ground_truth,
        n_matched: n,
        mp,
        mae_mm,
        mape,
        r2: r_squared(&m, &g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_sizes() {
        let pairs = [(0.01, 0.01), (0.012, 0.012), (0.008, 0.008)];
        let m = compute_metrics(&pairs, 4);
        assert_eq!(m.mae_mm, Some(0.0));
        assert_eq!(m.mape, Some(0.0));
        assert_eq!(m.r2, Some(1.0));
        assert_eq!(m.mp, 75.0);
    }

    #[test]
    fn known_errors() {
        let m = compute_metrics(&[(0.011, 0.010), (0.009, 0.010)], 2);
        assert!((m.mae_mm.unwrap() - 1.0).abs() < 1e-9);
        assert!((m.mape.unwrap() - 10.0).abs() < 1e-9);
        // constant ground truth leaves R² undefined
        assert_eq!(m.r2, None);
        assert_eq!(compute_metrics(&[], 3).mape, None);
    }

    #[test]
    fn r_squared_matches_direct_formula() {
        let t = [0.008, 0.010, 0.013, 0.009];
        let m = [0.0085, 0.0098, 0.0121, 0.0093];
        let mean = t.iter().sum::<f64>() / 4.0;
        let mut res = 0.0;
        let mut tot = 0.0;
        for i in 0..4 {
            res += (m[i] - t[i]) * (m[i] - t[i]);
            tot += (t[i] - mean) * (t[i] - mean);
        }
        assert!((r_squared(&m, &t).unwrap() - (1.0 - res / tot)).abs() < 1e-12);
    }

    #[test]
    fn matching_prefers_more_pairs_then_distance() {
        let truth = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.012, 0.0, 0.0)];
        // track 0 sits between both; greedy nearest would strand track 1
        let tracks = [Vec3::new(0.007, 0.0, 0.0), Vec3::new(0.016, 0.0, 0.0)];
        assert_eq!(match_to_ground_truth(&tracks, &truth, 0.01), vec![(0, 0), (1, 1)]);
        let far = [Vec3::new(0.5, 0.0, 0.0)];
        assert!(match_to_ground_truth(&far, &truth, 0.01).is_empty());
        let many = [Vec3::new(0.001, 0.0, 0.0), Vec3::new(0.0, 0.002, 0.0), Vec3::new(0.011, 0.0, 0.0)];
        assert_eq!(match_to_ground_truth(&many, &truth, 0.01), vec![(0, 0), (2, 1)]);
    }
}
