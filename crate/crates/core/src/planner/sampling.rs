use rand::Rng;

use super::{PlannerConfig, Viewpoint};
use crate::attention::WorkspaceSpec;
use crate::geometry::orthonormal_basis;
use crate::map::{DualMap, VoxelKey};
use crate::Vec3;

fn golden_angle() -> f64 {
    std::f64::consts::PI * (3.0 - 5f64.sqrt())
}

/// `n` near-uniform unit vectors over the whole sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let ga = golden_angle();
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = i as f64 * ga;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// `n` near-uniform unit vectors over the hemisphere around `pole`.
pub fn fibonacci_hemisphere(n: usize, pole: &Vec3) -> Vec<Vec3> {
    let pole = pole.normalize();
    let (u, v) = orthonormal_basis(&pole);
    let ga = golden_angle();
    (0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = i as f64 * ga;
            u * (r * phi.cos()) + v * (r * phi.sin()) + pole * z
        })
        .collect()
}

/// Uniformly random unit vector on the hemisphere around `pole`.
pub fn random_hemisphere_direction<R: Rng>(rng: &mut R, pole: &Vec3) -> Vec3 {
    let pole = pole.normalize();
    let (u, v) = orthonormal_basis(&pole);
    let z: f64 = rng.gen_range(0.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    u * (r * phi.cos()) + v * (r * phi.sin()) + pole * z
}

/// Direction from `target` toward the workspace, `None` when the workspace
/// has no centre (the full sphere is used then).
pub fn workspace_pole(target: &Vec3, ws: &WorkspaceSpec) -> Option<Vec3> {
    let c = ws.centroid()?;
    let d = c - target;
    (d.norm() > 1e-12).then(|| d.normalize())
}

/// Centres of the frontier voxels nearest the attention centre, at most
/// `max_targets`, nearest first with key order breaking ties.
pub fn select_targets(map: &DualMap, frontiers: &[VoxelKey], max_targets: usize) -> Vec<Vec3> {
    let res = map.attention_map().resolution();
    let centre = map.attention().center;
    let mut ranked: Vec<(f64, VoxelKey)> = frontiers
        .iter()
        .map(|k| ((k.center(res) - centre).norm_squared(), *k))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked.truncate(max_targets);
    ranked.into_iter().map(|(_, k)| k.center(res)).collect()
}

/// Candidate viewpoints on a partial Fibonacci sphere of radius
/// `sensor_distance` around each target, looking at it. Candidates outside
/// the workspace are dropped; indices follow generation order.
pub fn sample_viewpoints(targets: &[Vec3], cfg: &PlannerConfig, ws: &WorkspaceSpec) -> Vec<Viewpoint> {
    let mut out = Vec::new();
    let mut index = 0;
    for target in targets {
        let dirs = match workspace_pole(target, ws) {
            Some(pole) => fibonacci_hemisphere(cfg.fib_points, &pole),
            None => fibonacci_sphere(cfg.fib_points),
        };
        for d in dirs {
            let position = target + d * cfg.sensor_distance;
            if ws.contains(&position) {
                out.push(Viewpoint::new(index, position, *target));
            }
            index += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn angle(a: &Vec3, b: &Vec3) -> f64 {
        a.dot(b).clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn sphere_points_are_unit_and_spread() {
        let n = 100;
        let pts = fibonacci_sphere(n);
        assert!(pts.iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
        // hexagonal packing: each point owns 4pi/n of area
        let expected = (8.0 * std::f64::consts::PI / (3f64.sqrt() * n as f64)).sqrt();
        let mut min_sep = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                min_sep = min_sep.min(angle(&pts[i], &pts[j]));
            }
        }
        assert!((min_sep - expected).abs() / expected < 0.2, "{min_sep} vs {expected}");
    }

    #[test]
    fn hemisphere_points_face_pole() {
        let pole = Vec3::new(0.0, -1.0, 0.2);
        let pts = fibonacci_hemisphere(64, &pole);
        assert_eq!(pts.len(), 64);
        assert!(pts.iter().all(|p| p.dot(&pole) > 0.0));
    }

    #[test]
    fn candidates_at_sensor_distance() {
        let cfg = PlannerConfig::default();
        let t = Vec3::new(0.01, 0.02, -0.03);
        let vps = sample_viewpoints(&[t], &cfg, &WorkspaceSpec::Unrestricted);
        assert_eq!(vps.len(), cfg.fib_points);
        for v in &vps {
            assert!(((v.position - t).norm() - cfg.sensor_distance).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_workspace_yields_nothing() {
        let ws = WorkspaceSpec::VoxelSet(crate::attention::VoxelSetWorkspace::from_keys(0.05, vec![]));
        assert!(sample_viewpoints(&[Vec3::zeros()], &PlannerConfig::default(), &ws).is_empty());
        assert!(sample_viewpoints(&[], &PlannerConfig::default(), &WorkspaceSpec::Unrestricted).is_empty());
    }

    #[test]
    fn shell_candidates_lie_inside() {
        let t = Vec3::zeros();
        let ws = WorkspaceSpec::default_shell(&t);
        let vps = sample_viewpoints(&[t], &PlannerConfig::default(), &ws);
        assert!(!vps.is_empty());
        assert!(vps.iter().all(|v| ws.contains(&v.position) && v.position.y < 0.0));
    }
}
