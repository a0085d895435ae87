use serde::{Deserialize, Serialize};

use super::lattice::{CellBox, KernelBlock};
use super::{FunctionalError, MollifierFamily};
use crate::occupation::{OccupationMeasure, SpatialIndex};
use crate::scalar::{dist2, Real};
use crate::stats::pairwise_sum;

/// The smooth sausage functional
/// `g_l(nu) = -int (1 - exp(-<nu, f_l(|u - .|^2)>)) du`
/// discretised by the midpoint rule on the lattice `h (Z^d + 1/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SausageFunctional<S> {
    pub mollifier: MollifierFamily<S>,
    pub quad_step: S,
}

/// Sup-norm certificates for the derivatives of `g_l` in a given dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SausageBounds<S> {
    /// bound on `|delta_mu g_l|`
    pub delta: S,
    /// bound on `|grad_y delta_mu g_l|`
    pub grad_delta: S,
    /// bound on `|delta^2_mumu g_l|`
    pub delta2: S,
}

/// Base measure folded onto the lattice once, so that many extensions
/// `base + extra` can be evaluated touching only the cells near `extra`.
#[derive(Clone, Debug)]
pub struct PreparedBase<S> {
    cells: CellBox,
    expneg: Vec<S>,
    value: S,
    dim: usize,
}

impl<S: Real> PreparedBase<S> {
    /// `g_l(base)`.
    pub fn value(&self) -> S {
        self.value
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Reusable buffers for [`SausageFunctional::extend`].
#[derive(Clone, Debug, Default)]
pub struct SausageScratch<S> {
    theta: Vec<S>,
    field: Vec<S>,
    expneg: Vec<S>,
    terms: Vec<S>,
    block: Option<KernelBlock<S>>,
    grad: Vec<S>,
}

impl<S: Real> SausageScratch<S> {
    pub fn new() -> Self {
        Self {
            theta: Vec::new(),
            field: Vec::new(),
            expneg: Vec::new(),
            terms: Vec::new(),
            block: None,
            grad: Vec::new(),
        }
    }

    fn block(&mut self, dim: usize) -> KernelBlock<S> {
        match self.block.take() {
            Some(b) => b,
            None => KernelBlock::new(dim),
        }
    }

    /// Per-particle gradient sums written by the last
    /// [`SausageFunctional::extend`] call (flat `n * d`).
    pub fn gradients(&self) -> &[S] {
        &self.grad
    }
}

impl<S: Real> SausageFunctional<S> {
    pub fn new(mollifier: MollifierFamily<S>, quad_step: S) -> Result<Self, FunctionalError> {
        if !(quad_step > S::zero()) || !quad_step.is_finite() {
            return Err(FunctionalError::InvalidParameter("quadrature step must be positive"));
        }
        Ok(Self {
            mollifier,
            quad_step,
        })
    }

    /// Default quadrature step: 0.05 in d <= 2, 0.1 in d = 3.
    pub fn default_step(dim: usize) -> S {
        if dim <= 2 {
            S::lit(0.05)
        } else {
            S::lit(0.1)
        }
    }

    #[inline]
    fn cell_volume(&self, dim: usize) -> S {
        self.quad_step.powi(dim as i32)
    }

    fn padded_box(&self, lo: &[S], hi: &[S]) -> CellBox {
        CellBox::covering(lo, hi, self.mollifier.support_radius(), self.quad_step)
    }

    /// Folds `base` onto the lattice.
    pub fn prepare(&self, base: &OccupationMeasure<S>) -> PreparedBase<S> {
        let dim = base.dim();
        let Some((lo, hi)) = base.bounding_box() else {
            return PreparedBase {
                cells: CellBox::empty(dim),
                expneg: Vec::new(),
                value: S::zero(),
                dim,
            };
        };
        let cells = self.padded_box(&lo, &hi);
        let mut theta = vec![S::zero(); cells.len()];
        let mut block = KernelBlock::new(dim);
        for (p, w) in base.atoms() {
            if block.prepare(p, &cells, &self.mollifier, self.quad_step) {
                block.scatter(&mut theta, &cells, w, &self.mollifier, self.quad_step);
            }
        }
        let terms: Vec<S> = theta.iter().map(|&t| (-t).exp_m1()).collect();
        let value = pairwise_sum(&terms) * self.cell_volume(dim);
        let expneg = terms.iter().map(|&e| e + S::one()).collect();
        PreparedBase {
            cells,
            expneg,
            value,
            dim,
        }
    }

    /// `g_l(nu)`; exactly zero for the zero measure.
    pub fn g_ell(&self, nu: &OccupationMeasure<S>) -> S {
        self.prepare(nu).value
    }

    /// `g_l(base + sum_j w_j delta_{p_j})` where `extra` holds the points `p_j`
    /// (flat) and `weights` their masses.
    ///
    /// With `groups = n > 0` the atoms are taken to cycle through `n`
    /// particles (atom `j` belongs to particle `j % n`), and
    /// [`SausageScratch::gradients`] receives, for every particle `k`,
    /// `sum_{j % n = k} w_j grad_y delta_mu g_l(base + extra)(p_j)`.
    pub fn extend(
        &self,
        base: &PreparedBase<S>,
        extra: &[S],
        weights: &[S],
        groups: usize,
        scratch: &mut SausageScratch<S>,
    ) -> S {
        let dim = base.dim;
        let m = weights.len();
        debug_assert_eq!(extra.len(), m * dim);
        scratch.grad.clear();
        scratch.grad.resize(groups * dim, S::zero());
        if m == 0 {
            return base.value;
        }
        let mut lo = extra[..dim].to_vec();
        let mut hi = lo.clone();
        for p in extra.chunks_exact(dim).skip(1) {
            for a in 0..dim {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let cells = self.padded_box(&lo, &hi);
        let n_cells = cells.len();
        let mut block = scratch.block(dim);
        let h = self.quad_step;

        scratch.theta.clear();
        scratch.theta.resize(n_cells, S::zero());
        scratch.field.clear();
        scratch.field.resize(groups * dim * n_cells, S::zero());
        for (j, (p, &w)) in extra.chunks_exact(dim).zip(weights).enumerate() {
            if !block.prepare(p, &cells, &self.mollifier, h) {
                continue;
            }
            if groups == 0 {
                block.scatter(&mut scratch.theta, &cells, w, &self.mollifier, h);
            } else {
                let k = j % groups;
                let fields = &mut scratch.field[k * dim * n_cells..(k + 1) * dim * n_cells];
                block.scatter_with_gradient(&mut scratch.theta, fields, &cells, w, &self.mollifier, h);
            }
        }

        scratch.terms.clear();
        scratch.terms.resize(n_cells, S::zero());
        scratch.expneg.clear();
        scratch.expneg.resize(n_cells, S::one());
        cells.gather(&mut scratch.expneg, &base.cells, &base.expneg, S::one());
        for ((e, term), &t) in scratch.expneg.iter_mut().zip(scratch.terms.iter_mut()).zip(&scratch.theta) {
            if t == S::zero() {
                *term = S::zero();
                continue;
            }
            let en = (-t).exp();
            *term = *e * en - *e;
            *e = *e * en;
        }
        let value = base.value + pairwise_sum(&scratch.terms) * self.cell_volume(dim);

        let scale = S::lit(2.0) * self.cell_volume(dim);
        for (g, field) in scratch.grad.iter_mut().zip(scratch.field.chunks_exact(n_cells)) {
            let acc = field
                .iter()
                .zip(&scratch.expneg)
                .fold(S::zero(), |acc, (&v, &e)| acc + v * e);
            *g = acc * scale;
        }
        scratch.block = Some(block);
        value
    }

    /// `exp(-<nu, f^u>)` on the cells within the kernel support of `y`,
    /// using only atoms that can reach those cells.
    fn local_field(&self, nu: &OccupationMeasure<S>, index: &SpatialIndex, y: &[S]) -> (CellBox, Vec<S>) {
        let r = self.mollifier.support_radius();
        let cells = self.padded_box(y, y);
        let mut theta = vec![S::zero(); cells.len()];
        let mut block = KernelBlock::new(nu.dim());
        // cells sit within r of y and atoms act within r of a cell
        let reach = (r + r + self.quad_step).as_f64();
        for i in index.within(nu, y, reach) {
            if block.prepare(nu.point(i), &cells, &self.mollifier, self.quad_step) {
                block.scatter(&mut theta, &cells, nu.weight(i), &self.mollifier, self.quad_step);
            }
        }
        for t in theta.iter_mut() {
            *t = (-*t).exp();
        }
        (cells, theta)
    }

    fn index(&self, nu: &OccupationMeasure<S>) -> SpatialIndex {
        SpatialIndex::build(nu, self.mollifier.support_radius().as_f64())
    }

    /// `delta_mu g_l(nu)(y) = -int exp(-<nu, f^u>) f_l(|u - y|^2) du`.
    pub fn delta_mu_g(&self, nu: &OccupationMeasure<S>, y: &[S]) -> S {
        let index = self.index(nu);
        self.delta_mu_g_indexed(nu, &index, y)
    }

    pub fn delta_mu_g_indexed(&self, nu: &OccupationMeasure<S>, index: &SpatialIndex, y: &[S]) -> S {
        let (cells, field) = self.local_field(nu, index, y);
        let mut block = KernelBlock::new(nu.dim());
        if !block.prepare(y, &cells, &self.mollifier, self.quad_step) {
            return S::zero();
        }
        -block.weighted_value(&field, &cells, &self.mollifier) * self.cell_volume(nu.dim())
    }

    /// `grad_y delta_mu g_l(nu)(y) = -2 int (y - u) exp(-<nu, f^u>) f_l'(|y - u|^2) du`.
    pub fn grad_delta_mu_g(&self, nu: &OccupationMeasure<S>, y: &[S]) -> Vec<S> {
        let index = self.index(nu);
        self.grad_delta_mu_g_indexed(nu, &index, y)
    }

    pub fn grad_delta_mu_g_indexed(
        &self,
        nu: &OccupationMeasure<S>,
        index: &SpatialIndex,
        y: &[S],
    ) -> Vec<S> {
        let dim = nu.dim();
        let (cells, field) = self.local_field(nu, index, y);
        let mut out = vec![S::zero(); dim];
        let mut block = KernelBlock::new(dim);
        if block.prepare(y, &cells, &self.mollifier, self.quad_step) {
            block.weighted_gradient(&field, &cells, &self.mollifier, &mut out);
        }
        let scale = S::lit(2.0) * self.cell_volume(dim);
        out.iter_mut().for_each(|v| *v = *v * scale);
        out
    }

    /// `delta^2_mumu g_l(nu)(y, y') = int exp(-<nu, f^u>) f_l(|u - y|^2) f_l(|u - y'|^2) du`.
    ///
    /// Exactly symmetric in `(y, y')`.
    pub fn delta2_mu_g(&self, nu: &OccupationMeasure<S>, y: &[S], y2: &[S]) -> S {
        let r = self.mollifier.support_radius();
        if dist2(y, y2) >= S::lit(4.0) * r * r {
            return S::zero();
        }
        // canonical argument order makes the result bitwise symmetric
        let (a, b) = if lexi_le(y, y2) { (y, y2) } else { (y2, y) };
        let index = self.index(nu);
        let (cells, mut field) = self.local_field(nu, &index, a);
        let dim = nu.dim();
        let mut fa = vec![S::zero(); cells.len()];
        let mut block = KernelBlock::new(dim);
        if !block.prepare(a, &cells, &self.mollifier, self.quad_step) {
            return S::zero();
        }
        block.scatter(&mut fa, &cells, S::one(), &self.mollifier, self.quad_step);
        for (e, &v) in field.iter_mut().zip(&fa) {
            *e = *e * v;
        }
        if !block.prepare(b, &cells, &self.mollifier, self.quad_step) {
            return S::zero();
        }
        block.weighted_value(&field, &cells, &self.mollifier) * self.cell_volume(dim)
    }

    /// Sup bounds of the three derivatives in dimension `dim`.
    ///
    /// Each bound is the larger of the continuum integral and the lattice sum
    /// of the same integrand over a grid of sub-cell offsets.
    pub fn bounds(&self, dim: usize) -> SausageBounds<S> {
        let moll = &self.mollifier;
        let mut delta = moll.mass(dim);
        let mut grad = moll.gradient_mass(dim);
        let mut delta2 = moll.mass_squared(dim);
        let probes = 4usize;
        let n_off = probes.pow(dim as u32);
        let vol = self.cell_volume(dim);
        let mut block = KernelBlock::new(dim);
        for k in 0..n_off {
            let mut y = vec![S::zero(); dim];
            let mut rem = k;
            for v in y.iter_mut() {
                *v = self.quad_step * S::from_usize_lossy(rem % probes) / S::from_usize_lossy(probes);
                rem /= probes;
            }
            let cells = self.padded_box(&y, &y);
            if !block.prepare(&y, &cells, moll, self.quad_step) {
                continue;
            }
            let mut fy = vec![S::zero(); cells.len()];
            block.scatter(&mut fy, &cells, S::one(), moll, self.quad_step);
            let s1 = pairwise_sum(&fy) * vol;
            let sq: Vec<S> = fy.iter().map(|&v| v * v).collect();
            let s2 = pairwise_sum(&sq) * vol;
            // |grad| <= 2 sum |u - y| |f'|: evaluate via a radial weight
            let mut g = S::zero();
            for (c, _) in fy.iter().enumerate() {
                let mut rem = c;
                let mut r2 = S::zero();
                for a in (0..dim).rev() {
                    let i = cells.lo[a] + (rem % cells.shape[a]) as i64;
                    rem /= cells.shape[a];
                    let u = self.quad_step * (S::lit(i as f64) + S::lit(0.5));
                    r2 = r2 + (u - y[a]) * (u - y[a]);
                }
                g = g + r2.sqrt() * moll.eval(r2).first.abs();
            }
            g = S::lit(2.0) * g * vol;
            delta = delta.max(s1);
            delta2 = delta2.max(s2);
            grad = grad.max(g);
        }
        SausageBounds {
            delta,
            grad_delta: grad,
            delta2,
        }
    }
}

fn lexi_le<S: Real>(a: &[S], b: &[S]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    true
}
