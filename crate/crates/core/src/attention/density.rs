use std::collections::VecDeque;

use crate::{Error, Result, Vec3};

/// Sum of isotropic Gaussians sampled on a regular grid.
#[derive(Clone, Debug)]
pub struct DensityMap {
    pub origin: Vec3,
    pub dims: [usize; 3],
    pub grid_res: f64,
    pub sigma: f64,
    values: Vec<f64>,
}

/// One density peak and the centroids assigned to it.
#[derive(Clone, Debug, PartialEq)]
pub struct CentroidCluster {
    pub center: Vec3,
    pub members: Vec<usize>,
}

const PAD_SIGMAS: f64 = 4.0;
const KERNEL_SIGMAS: f64 = 5.0;
const RELATIVE_PEAK_FLOOR: f64 = 1e-6;

pub fn build_density_map(centroids: &[Vec3], grid_res: f64, sigma: f64) -> Result<DensityMap> {
    if centroids.is_empty() {
        return Err(Error::NoFruitletsDetected);
    }
    if !(grid_res > 0.0 && sigma > 0.0) {
        return Err(Error::InvalidParams("density grid_res and sigma must be positive".into()));
    }
    let mut lo = centroids[0];
    let mut hi = centroids[0];
    for c in centroids {
        lo = lo.inf(c);
        hi = hi.sup(c);
    }
    let pad = PAD_SIGMAS * sigma;
    let origin = lo - Vec3::repeat(pad);
    let extent = hi + Vec3::repeat(pad) - origin;
    let dims = [0, 1, 2].map(|a| (extent[a] / grid_res).ceil() as usize + 1);
    let mut values = vec![0.0; dims[0] * dims[1] * dims[2]];

    let norm = 1.0 / ((2.0 * std::f64::consts::PI).powf(1.5) * sigma.powi(3));
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    let reach = KERNEL_SIGMAS * sigma;
    for c in centroids {
        let rel = c - origin;
        let range = |a: usize| {
            let lo = ((rel[a] - reach) / grid_res).floor().max(0.0) as usize;
            let hi = (((rel[a] + reach) / grid_res).ceil() as usize).min(dims[a] - 1);
            lo..=hi
        };
        for i in range(0) {
            let dx = i as f64 * grid_res - rel.x;
            for j in range(1) {
                let dy = j as f64 * grid_res - rel.y;
                let row = (i * dims[1] + j) * dims[2];
                for k in range(2) {
                    let dz = k as f64 * grid_res - rel.z;
                    values[row + k] += norm * (-(dx * dx + dy * dy + dz * dz) * inv_two_var).exp();
                }
            }
        }
    }
    Ok(DensityMap {
        origin,
        dims,
        grid_res,
        sigma,
        values,
    })
}

impl DensityMap {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        let i = idx / (self.dims[1] * self.dims[2]);
        [i, j, k]
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_position(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.coords(idx);
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.grid_res
    }

    /// Riemann sum of the density over the grid volume.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid_res.powi(3)
    }

    fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let [i, j, k] = self.coords(idx);
        let d = self.dims;
        (-1i64..=1)
            .flat_map(|a| (-1i64..=1).flat_map(move |b| (-1i64..=1).map(move |c| (a, b, c))))
            .filter(|&off| off != (0, 0, 0))
            .filter_map(move |(a, b, c)| {
                let (ni, nj, nk) = (i as i64 + a, j as i64 + b, k as i64 + c);
                let inside = |v: i64, n: usize| v >= 0 && (v as usize) < n;
                (inside(ni, d[0]) && inside(nj, d[1]) && inside(nk, d[2]))
                    .then(|| self.index(ni as usize, nj as usize, nk as usize))
            })
    }

    /// Grid indices of local maxima over 26-neighbourhoods, ascending.
    ///
    /// A node is a maximum when no neighbour exceeds it. Equal-valued
    /// connected plateaus count once, represented by their smallest index,
    /// and only if no plateau node has a strictly greater neighbour.
    pub fn local_maxima(&self) -> Vec<usize> {
        let peak = self.values.iter().cloned().fold(0.0, f64::max);
        let floor = peak * RELATIVE_PEAK_FLOOR;
        let mut visited = vec![false; self.values.len()];
        let mut maxima = Vec::new();
        for idx in 0..self.values.len() {
            if visited[idx] {
                continue;
            }
            let v = self.values[idx];
            if v <= floor {
                continue;
            }
            let mut has_equal = false;
            let mut dominated = false;
            for n in self.neighbors(idx) {
                let nv = self.values[n];
                if nv > v {
                    dominated = true;
                    break;
                }
                if nv == v {
                    has_equal = true;
                }
            }
            if dominated {
                continue;
            }
            if !has_equal {
                maxima.push(idx);
                continue;
            }
            // plateau flood fill
            let mut queue = VecDeque::from([idx]);
            visited[idx] = true;
            let mut plateau_is_max = true;
            let mut smallest = idx;
            while let Some(cur) = queue.pop_front() {
                smallest = smallest.min(cur);
                for n in self.neighbors(cur) {
                    let nv = self.values[n];
                    if nv > v {
                        plateau_is_max = false;
                    } else if nv == v && !visited[n] {
                        visited[n] = true;
                        queue.push_back(n);
                    }
                }
            }
            if plateau_is_max {
                maxima.push(smallest);
            }
        }
        maxima.sort_unstable();
        maxima
    }
}

/// Clusters centroids around density maxima.
///
/// Every centroid joins its Euclidean-nearest maximum (ties go to the lower
/// maximum index). Maxima that attract no centroid are dropped.
pub fn extract_clusters(density: &DensityMap, centroids: &[Vec3]) -> Vec<CentroidCluster> {
    let centers: Vec<Vec3> = density
        .local_maxima()
        .into_iter()
        .map(|idx| density.node_position(idx))
        .collect();
    assign_to_nearest(centers, centroids)
}

fn assign_to_nearest(centers: Vec<Vec3>, centroids: &[Vec3]) -> Vec<CentroidCluster> {
    let mut members = vec![Vec::new(); centers.len()];
    for (ci, c) in centroids.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (mi, m) in centers.iter().enumerate() {
            let d = (c - m).norm_squared();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((mi, d));
            }
        }
        if let Some((mi, _)) = best {
            members[mi].push(ci);
        }
    }
    centers
        .into_iter()
        .zip(members)
        .filter(|(_, m)| !m.is_empty())
        .map(|(center, members)| CentroidCluster { center, members })
        .collect()
}

/// Index of the cluster whose peak is nearest the anchor, lower index on ties.
pub fn select_target(clusters: &[CentroidCluster], anchor: &Vec3) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in clusters.iter().enumerate() {
        let d = (c.center - anchor).norm_squared();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::NoFruitletsDetected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_centroid_peak_at_nearest_node() {
        let c = Vec3::new(0.0123, -0.0071, 0.0302);
        let d = build_density_map(&[c], 0.005, 0.015).unwrap();
        let maxima = d.local_maxima();
        assert_eq!(maxima.len(), 1);
        let best = (0..d.len())
            .min_by(|&a, &b| {
                (d.node_position(a) - c)
                    .norm()
                    .partial_cmp(&(d.node_position(b) - c).norm())
                    .unwrap()
            })
            .unwrap();
        assert_eq!(maxima[0], best);
    }

    #[test]
    fn integral_matches_centroid_count() {
        let cs = [Vec3::zeros(), Vec3::new(0.2, 0.0, 0.0), Vec3::new(0.0, 0.1, 0.05)];
        let d = build_density_map(&cs, 0.004, 0.015).unwrap();
        assert!((d.integral() - 3.0).abs() < 1e-3, "{}", d.integral());
        assert!(d.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn well_separated_pair_gives_two_maxima() {
        let sigma = 0.015;
        let cs = [Vec3::zeros(), Vec3::new(10.0 * sigma, 0.0, 0.0)];
        let d = build_density_map(&cs, 0.005, sigma).unwrap();
        assert_eq!(d.local_maxima().len(), 2);
    }

    #[test]
    fn close_pair_gives_one_maximum_between() {
        let sigma = 0.015;
        let cs = [Vec3::zeros(), Vec3::new(0.5 * sigma, 0.0, 0.0)];
        // dense 1D scan of the two-Gaussian sum along the joining axis
        let f = |x: f64| (-(x * x) / (2.0 * sigma * sigma)).exp() + (-((x - 0.5 * sigma).powi(2)) / (2.0 * sigma * sigma)).exp();
        let samples: Vec<f64> = (0..=20_000).map(|i| -0.1 + i as f64 * 1e-5).map(f).collect();
        let peaks = (1..samples.len() - 1)
            .filter(|&i| samples[i] > samples[i - 1] && samples[i] >= samples[i + 1])
            .count();
        assert_eq!(peaks, 1);

        let d = build_density_map(&cs, 0.005, sigma).unwrap();
        let m = d.local_maxima();
        assert_eq!(m.len(), 1);
        let p = d.node_position(m[0]);
        assert!(p.x > -0.0051 && p.x < 0.5 * sigma + 0.0051);
    }

    #[test]
    fn plateau_reports_smallest_index() {
        let mut d = build_density_map(&[Vec3::zeros()], 1.0, 0.1).unwrap();
        d.values.iter_mut().for_each(|v| *v = 1.0);
        let m = d.local_maxima();
        assert_eq!(m, vec![0]);
    }

    #[test]
    fn equidistant_assignment_prefers_lower_maximum() {
        let centers = vec![Vec3::new(-0.1, 0.0, 0.0), Vec3::new(0.1, 0.0, 0.0)];
        let cs = [Vec3::new(-0.1, 0.0, 0.0), Vec3::new(0.1, 0.0, 0.0), Vec3::zeros()];
        let clusters = assign_to_nearest(centers, &cs);
        assert_eq!(clusters[0].members, vec![0, 2]);
        assert_eq!(clusters[1].members, vec![1]);
    }

    #[test]
    fn select_target_nearest_and_empty() {
        let clusters = vec![
            CentroidCluster { center: Vec3::new(0.2, 0.0, 0.0), members: vec![0] },
            CentroidCluster { center: Vec3::new(0.05, 0.0, 0.0), members: vec![1] },
        ];
        assert_eq!(select_target(&clusters, &Vec3::zeros()).unwrap(), 1);
        assert_eq!(select_target(&clusters[..1], &Vec3::zeros()).unwrap(), 0);
        assert!(matches!(select_target(&[], &Vec3::zeros()), Err(Error::NoFruitletsDetected)));
    }
}
