use serde::{Deserialize, Serialize};

/// Run-length encoded pixel set over a row-major image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelMask {
    pub width: usize,
    pub height: usize,
    /// `[start, length]` runs of consecutive row-major indices, ascending.
    pub runs: Vec<[u32; 2]>,
}

impl PixelMask {
    /// Builds from ascending, distinct pixel indices.
    pub fn from_indices(width: usize, height: usize, sorted: &[u32]) -> Self {
        let mut runs: Vec<[u32; 2]> = Vec::new();
        for &i in sorted {
            match runs.last_mut() {
                Some(r) if r[0] + r[1] == i => r[1] += 1,
                _ => runs.push([i, 1]),
            }
        }
        Self { width, height, runs }
    }

    pub fn len(&self) -> usize {
        self.runs.iter().map(|r| r[1] as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.runs.iter().flat_map(|r| r[0]..r[0] + r[1])
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.indices().map(move |i| (i as usize % w, i as usize / w))
    }

    pub fn contains_index(&self, i: u32) -> bool {
        let pos = self.runs.partition_point(|r| r[0] <= i);
        pos > 0 && i < self.runs[pos - 1][0] + self.runs[pos - 1][1]
    }

    pub fn contains(&self, u: isize, v: isize) -> bool {
        if u < 0 || v < 0 || u >= self.width as isize || v >= self.height as isize {
            return false;
        }
        self.contains_index((v as usize * self.width + u as usize) as u32)
    }

    /// Inclusive bounding box `(u0, v0, u1, v1)`.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut it = self.pixels();
        let first = it.next()?;
        Some(it.fold((first.0, first.1, first.0, first.1), |b, (u, v)| {
            (b.0.min(u), b.1.min(v), b.2.max(u), b.3.max(v))
        }))
    }

    /// Adds background pixels with at least three 4-neighbours in the mask.
    pub fn fill_pinholes(&self) -> Self {
        let Some((u0, v0, u1, v1)) = self.bbox() else {
            return self.clone();
        };
        let mut idx: Vec<u32> = self.indices().collect();
        for v in v0..=v1 {
            for u in u0..=u1 {
                let (iu, iv) = (u as isize, v as isize);
                if self.contains(iu, iv) {
                    continue;
                }
                let n = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .filter(|(du, dv)| self.contains(iu + du, iv + dv))
                    .count();
                if n >= 3 {
                    idx.push((v * self.width + u) as u32);
                }
            }
        }
        idx.sort_unstable();
        Self::from_indices(self.width, self.height, &idx)
    }
}

/// Pixel edge between a mask pixel and a non-mask pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub inside: (usize, usize),
    /// `None` when the edge lies on the image border.
    pub outside: Option<(usize, usize)>,
    /// Edge midpoint in pixel-centre coordinates.
    pub point: (f64, f64),
}

pub fn boundary_edges(mask: &PixelMask) -> Vec<BoundaryEdge> {
    let (w, h) = (mask.width as isize, mask.height as isize);
    let mut out = Vec::new();
    for (u, v) in mask.pixels() {
        let (iu, iv) = (u as isize, v as isize);
        for (du, dv) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
            let (nu, nv) = (iu + du, iv + dv);
            if mask.contains(nu, nv) {
                continue;
            }
            let outside = (nu >= 0 && nv >= 0 && nu < w && nv < h).then_some((nu as usize, nv as usize));
            out.push(BoundaryEdge {
                inside: (u, v),
                outside,
                point: (u as f64 + du as f64 * 0.5, v as f64 + dv as f64 * 0.5),
            });
        }
    }
    out
}

/// Midpoints of all mask boundary edges.
pub fn boundary_points(mask: &PixelMask) -> Vec<(f64, f64)> {
    boundary_edges(mask).into_iter().map(|e| e.point).collect()
}
