use std::collections::HashMap;

use super::OccupationMeasure;
use crate::scalar::Scalar;

/// Uniform-cell spatial hash over the atoms of a measure.
///
/// The cell size is normally the kernel support radius, so a ball query of
/// that radius touches at most `3^d` cells.
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    dim: usize,
    cell: f64,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl SpatialIndex {
    pub fn build<S: Scalar>(measure: &OccupationMeasure<S>, cell: f64) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let dim = measure.dim();
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for i in 0..measure.len() {
            let key = Self::key_of(measure.point(i), cell);
            cells.entry(key).or_default().push(i);
        }
        Self { dim, cell, cells }
    }

    fn key_of<S: Scalar>(p: &[S], cell: f64) -> Vec<i64> {
        p.iter()
            .map(|x| (x.to_f64().unwrap_or(0.0) / cell).floor() as i64)
            .collect()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Indices of atoms within Euclidean distance `radius` of `y` (closed ball),
    /// in ascending order.
    pub fn within<S: Scalar>(
        &self,
        measure: &OccupationMeasure<S>,
        y: &[S],
        radius: f64,
    ) -> Vec<usize> {
        let yf: Vec<f64> = y.iter().map(|v| v.to_f64().unwrap_or(0.0)).collect();
        let r2 = radius * radius;
        let lo: Vec<i64> = yf.iter().map(|v| ((v - radius) / self.cell).floor() as i64).collect();
        let hi: Vec<i64> = yf.iter().map(|v| ((v + radius) / self.cell).floor() as i64).collect();
        let mut out = Vec::new();
        let mut key = lo.clone();
        loop {
            if let Some(ids) = self.cells.get(&key) {
                for &i in ids {
                    let d2: f64 = measure
                        .point(i)
                        .iter()
                        .zip(&yf)
                        .map(|(p, q)| {
                            let d = p.to_f64().unwrap_or(0.0) - q;
                            d * d
                        })
                        .sum();
                    if d2 <= r2 {
                        out.push(i);
                    }
                }
            }
            // odometer over the key box
            let mut a = 0;
            loop {
                if a == self.dim {
                    out.sort_unstable();
                    return out;
                }
                key[a] += 1;
                if key[a] <= hi[a] {
                    break;
                }
                key[a] = lo[a];
                a += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_query_matches_brute_force() {
        let mut m = OccupationMeasure::<f64>::empty(2);
        for i in 0..40 {
            let t = i as f64 * 0.37;
            m.push_atom(&[t.sin() * 3.0, (1.3 * t).cos() * 2.0], 1.0).unwrap();
        }
        let idx = SpatialIndex::build(&m, 2.0);
        for y in [[0.0, 0.0], [1.5, -1.0], [-2.9, 1.9]] {
            let got = idx.within(&m, &y, 2.0);
            let want: Vec<usize> = (0..m.len())
                .filter(|&i| crate::scalar::dist2(m.point(i), &y) <= 4.0)
                .collect();
            assert_eq!(got, want);
        }
    }
}
