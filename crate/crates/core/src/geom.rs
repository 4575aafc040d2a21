//! Small vector helpers on `&[f64]` points.

use serde::{Deserialize, Serialize};

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn lerp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
}

/// Parameter in `[0, 1]` of the point of segment `ab` closest to `p`, and the distance.
pub fn project_on_segment(p: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let len2: f64 = ab.iter().map(|x| x * x).sum();
    let s = if len2 == 0.0 {
        0.0
    } else {
        let dot: f64 = p.iter().zip(a).zip(&ab).map(|((p, a), d)| (p - a) * d).sum();
        (dot / len2).clamp(0.0, 1.0)
    };
    (s, dist(p, &lerp(a, b, s)))
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BBox {
    pub fn dimension(&self) -> usize {
        self.min.len()
    }

    pub fn diameter(&self) -> f64 {
        dist(&self.min, &self.max)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    /// Regular lattice with `n` points per axis, walls included, in
    /// lexicographic order (last axis fastest).
    pub fn lattice(&self, n: usize) -> Vec<Vec<f64>> {
        let d = self.dimension();
        let n = n.max(2);
        let total = n.pow(d as u32);
        (0..total)
            .map(|mut k| {
                let mut p = vec![0.0; d];
                for axis in (0..d).rev() {
                    let i = k % n;
                    k /= n;
                    p[axis] = self.min[axis]
                        + (self.max[axis] - self.min[axis]) * i as f64 / (n - 1) as f64;
                }
                p
            })
            .collect()
    }

    /// True when lattice index `k` (as produced by [`BBox::lattice`]) lies on a wall.
    pub fn lattice_on_wall(&self, n: usize, mut k: usize) -> bool {
        let n = n.max(2);
        for _ in 0..self.dimension() {
            let i = k % n;
            k /= n;
            if i == 0 || i == n - 1 {
                return true;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_covers_walls() {
        let b = BBox {
            min: vec![-1.0, 0.0],
            max: vec![1.0, 2.0],
        };
        let pts = b.lattice(3);
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], vec![-1.0, 0.0]);
        assert_eq!(pts[4], vec![0.0, 1.0]);
        assert_eq!(pts[8], vec![1.0, 2.0]);
        assert!(!b.lattice_on_wall(3, 4));
        assert!(b.lattice_on_wall(3, 5));
    }

    #[test]
    fn segment_projection() {
        let (s, d) = project_on_segment(&[0.5, 1.0], &[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(s, 0.5);
        assert_eq!(d, 1.0);
        let (s, _) = project_on_segment(&[-3.0, 0.0], &[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(s, 0.0);
    }
}
