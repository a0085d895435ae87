use serde::{Deserialize, Serialize};

use super::FunctionalError;
use crate::occupation::{OccupationMeasure, PathRef};
use crate::scalar::Real;

/// Support of a sausage: either the atom set of a measure or a family of
/// polylines (each a flat list of `d`-dimensional vertices).
#[derive(Clone, Copy, Debug)]
pub enum Support<'a, S: Real> {
    Atoms(&'a OccupationMeasure<S>),
    Polylines { dim: usize, lines: &'a [Vec<S>] },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate<S> {
    pub value: S,
    /// number of cells classified inside
    pub cells: usize,
    pub grid_h: S,
}

/// One polyline per particle, through the grid positions of `path`.
pub fn particle_polylines<S: Real>(path: &PathRef<'_, S>, n_particles: usize) -> Vec<Vec<S>> {
    (0..n_particles)
        .map(|k| (0..path.len()).flat_map(|i| path.particle(i, k).iter().copied()).collect())
        .collect()
}

/// Lebesgue volume of `{y : dist(y, support) <= radius}` by counting cells of
/// the lattice `grid_h (Z^d + 1/2)` whose centre is within `radius`.
pub fn sausage_volume<S: Real>(
    support: Support<'_, S>,
    radius: S,
    grid_h: S,
) -> Result<VolumeEstimate<S>, FunctionalError> {
    if !(grid_h > S::zero()) || !grid_h.is_finite() {
        return Err(FunctionalError::InvalidParameter("grid step must be positive"));
    }
    if !(radius > S::zero()) {
        return Err(FunctionalError::InvalidParameter("sausage radius must be positive"));
    }
    let (dim, pts): (usize, Vec<&[S]>) = match support {
        Support::Atoms(m) => (m.dim(), m.points().chunks_exact(m.dim()).collect()),
        Support::Polylines { dim, lines } => {
            (dim, lines.iter().flat_map(|l| l.chunks_exact(dim)).collect())
        }
    };
    if pts.is_empty() {
        return Ok(VolumeEstimate {
            value: S::zero(),
            cells: 0,
            grid_h,
        });
    }
    let mut lo = pts[0].to_vec();
    let mut hi = lo.clone();
    for p in &pts {
        for a in 0..dim {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let grid = Grid::new(&lo, &hi, radius, grid_h);
    let mut inside = vec![false; grid.len()];
    let r2 = radius * radius;
    match support {
        Support::Atoms(_) => {
            for p in &pts {
                grid.mark(&mut inside, p, p, radius, |u| point_dist2(u, p) <= r2);
            }
        }
        Support::Polylines { lines, .. } => {
            for line in lines {
                let verts: Vec<&[S]> = line.chunks_exact(dim).collect();
                if verts.len() == 1 {
                    let p = verts[0];
                    grid.mark(&mut inside, p, p, radius, |u| point_dist2(u, p) <= r2);
                }
                for seg in verts.windows(2) {
                    let (a, b) = (seg[0], seg[1]);
                    let slo: Vec<S> = a.iter().zip(b).map(|(&x, &y)| x.min(y)).collect();
                    let shi: Vec<S> = a.iter().zip(b).map(|(&x, &y)| x.max(y)).collect();
                    grid.mark(&mut inside, &slo, &shi, radius, |u| segment_dist2(u, a, b) <= r2);
                }
            }
        }
    }
    let cells = inside.iter().filter(|&&b| b).count();
    Ok(VolumeEstimate {
        value: S::from_usize_lossy(cells) * grid_h.powi(dim as i32),
        cells,
        grid_h,
    })
}

fn point_dist2<S: Real>(u: &[S], p: &[S]) -> S {
    crate::scalar::dist2(u, p)
}

fn segment_dist2<S: Real>(u: &[S], a: &[S], b: &[S]) -> S {
    let mut ab2 = S::zero();
    let mut dot = S::zero();
    for i in 0..u.len() {
        let e = b[i] - a[i];
        ab2 = ab2 + e * e;
        dot = dot + (u[i] - a[i]) * e;
    }
    let t = if ab2 > S::zero() {
        (dot / ab2).max(S::zero()).min(S::one())
    } else {
        S::zero()
    };
    let mut d2 = S::zero();
    for i in 0..u.len() {
        let q = a[i] + t * (b[i] - a[i]) - u[i];
        d2 = d2 + q * q;
    }
    d2
}

struct Grid<S> {
    h: S,
    lo: Vec<i64>,
    shape: Vec<usize>,
}

impl<S: Real> Grid<S> {
    fn new(lo: &[S], hi: &[S], pad: S, h: S) -> Self {
        let half = S::lit(0.5);
        let mut first = Vec::new();
        let mut shape = Vec::new();
        for (&l, &u) in lo.iter().zip(hi) {
            let a = ((l - pad) / h - half).floor().to_i64().unwrap_or(0);
            let b = ((u + pad) / h - half).ceil().to_i64().unwrap_or(0);
            first.push(a);
            shape.push((b - a + 1) as usize);
        }
        Self { h, lo: first, shape }
    }

    fn len(&self) -> usize {
        self.shape.iter().product()
    }

    /// Runs `test` on every cell centre in the `pad`-neighbourhood of the box
    /// `[lo, hi]` and marks the cells where it holds.
    fn mark<F: Fn(&[S]) -> bool>(&self, inside: &mut [bool], lo: &[S], hi: &[S], pad: S, test: F) {
        let d = self.shape.len();
        let half = S::lit(0.5);
        let mut from = vec![0i64; d];
        let mut to = vec![0i64; d];
        for a in 0..d {
            from[a] = ((lo[a] - pad) / self.h - half).floor().to_i64().unwrap_or(0).max(self.lo[a]);
            to[a] = ((hi[a] + pad) / self.h - half)
                .ceil()
                .to_i64()
                .unwrap_or(0)
                .min(self.lo[a] + self.shape[a] as i64 - 1);
            if from[a] > to[a] {
                return;
            }
        }
        let mut idx = from.clone();
        let mut u = vec![S::zero(); d];
        loop {
            let mut flat = 0usize;
            for a in 0..d {
                u[a] = self.h * (S::lit(idx[a] as f64) + half);
                flat = flat * self.shape[a] + (idx[a] - self.lo[a]) as usize;
            }
            if !inside[flat] && test(&u) {
                inside[flat] = true;
            }
            let mut a = d;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] <= to[a] {
                    break;
                }
                idx[a] = from[a];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_disk_area() {
        let m = OccupationMeasure::dirac(&[0.0f64, 0.0], 1.0).unwrap();
        let v = sausage_volume(Support::Atoms(&m), 1.0, 0.005).unwrap();
        assert!((v.value - PI).abs() < 0.01, "{}", v.value);
    }

    #[test]
    fn stadium_area() {
        let lines = vec![vec![0.0f64, 0.0, 2.0, 0.0]];
        let v = sausage_volume(Support::Polylines { dim: 2, lines: &lines }, 1.0, 0.005).unwrap();
        assert!((v.value - (PI + 4.0)).abs() < 0.02, "{}", v.value);
    }

    #[test]
    fn rejects_nonpositive_grid() {
        let m = OccupationMeasure::dirac(&[0.0f64], 1.0).unwrap();
        assert!(sausage_volume(Support::Atoms(&m), 1.0, 0.0).is_err());
        assert!(sausage_volume(Support::Atoms(&m), 1.0, -0.1).is_err());
    }

    #[test]
    fn empty_support_has_zero_volume() {
        let m = OccupationMeasure::<f64>::empty(3);
        assert_eq!(sausage_volume(Support::Atoms(&m), 1.0, 0.1).unwrap().value, 0.0);
    }
}
