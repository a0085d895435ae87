//! Midpoint quadrature on the lattice of cell centres `h (i + 1/2)`.
//!
//! The lattice is anchored at the origin rather than at the data, so the
//! discretised functional is one fixed smooth function of the atoms and the
//! derivative formulas below are its exact derivatives.

use super::MollifierFamily;
use crate::scalar::Real;

/// Axis-aligned block of lattice cells, last axis contiguous.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct CellBox {
    pub lo: Vec<i64>,
    pub shape: Vec<usize>,
    pub strides: Vec<usize>,
}

impl CellBox {
    pub fn empty(dim: usize) -> Self {
        Self::new(vec![0; dim], vec![0; dim])
    }

    pub fn new(lo: Vec<i64>, shape: Vec<usize>) -> Self {
        let d = shape.len();
        let mut strides = vec![1; d];
        for a in (0..d.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        Self { lo, shape, strides }
    }

    /// Cells whose centre lies in `[lo - pad, hi + pad]`.
    pub fn covering<S: Real>(lo: &[S], hi: &[S], pad: S, h: S) -> Self {
        let half = S::lit(0.5);
        let mut first = Vec::with_capacity(lo.len());
        let mut shape = Vec::with_capacity(lo.len());
        for (&l, &u) in lo.iter().zip(hi) {
            let a = ((l - pad) / h - half).ceil().to_i64().unwrap_or(0);
            let b = ((u + pad) / h - half).floor().to_i64().unwrap_or(-1);
            first.push(a);
            shape.push((b - a + 1).max(0) as usize);
        }
        Self::new(first, shape)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Absolute index range `[a, b]` on axis `ax`.
    #[inline]
    fn span(&self, ax: usize) -> (i64, i64) {
        (self.lo[ax], self.lo[ax] + self.shape[ax] as i64 - 1)
    }

    /// Copies values of `src` (defined on box `from`) into `dst` (on `self`),
    /// filling cells outside `from` with `fill`.
    pub fn gather<S: Real>(&self, dst: &mut [S], from: &CellBox, src: &[S], fill: S) {
        dst.iter_mut().for_each(|v| *v = fill);
        if from.is_empty() || self.is_empty() {
            return;
        }
        let d = self.dim();
        let mut lo = vec![0i64; d];
        let mut hi = vec![0i64; d];
        for a in 0..d {
            let (s0, s1) = self.span(a);
            let (f0, f1) = from.span(a);
            lo[a] = s0.max(f0);
            hi[a] = s1.min(f1);
            if lo[a] > hi[a] {
                return;
            }
        }
        let last = d - 1;
        let run = (hi[last] - lo[last] + 1) as usize;
        let mut idx = lo.clone();
        loop {
            let mut so = 0usize;
            let mut fo = 0usize;
            for a in 0..d {
                so += (idx[a] - self.lo[a]) as usize * self.strides[a];
                fo += (idx[a] - from.lo[a]) as usize * from.strides[a];
            }
            dst[so..so + run].copy_from_slice(&src[fo..fo + run]);
            let mut a = last;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] <= hi[a] {
                    break;
                }
                idx[a] = lo[a];
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
struct AxisTable<S> {
    /// Offset of the first cell inside the enclosing box.
    offset: usize,
    dx: Vec<S>,
    dx2: Vec<S>,
    gauss: Vec<S>,
}

/// Per-atom tables `dx = u - p`, `dx^2`, `exp(-l dx^2)` on every axis of the
/// atom's kernel block, clipped to an enclosing box.
#[derive(Clone, Debug, Default)]
pub(crate) struct KernelBlock<S> {
    axes: Vec<AxisTable<S>>,
    acc: Vec<S>,
    prefix: Vec<usize>,
    row: Vec<S>,
    /// `(l, h, exp(-2 l h^2))` of the last prepared atom
    decay: (S, S, S),
}

#[inline(always)]
fn floor_i64<S: Real>(x: S) -> i64 {
    let t = x.to_i64().unwrap_or(0);
    if S::lit(t as f64) > x {
        t - 1
    } else {
        t
    }
}

#[inline(always)]
fn ceil_i64<S: Real>(x: S) -> i64 {
    let t = x.to_i64().unwrap_or(0);
    if S::lit(t as f64) < x {
        t + 1
    } else {
        t
    }
}

/// Quintic smoothstep cutoff `chi(s)`, given the inner cutoff and `1 / (R - R1)`.
#[inline(always)]
fn cutoff<S: Real>(s: S, r1: S, iw: S) -> S {
    let t = ((s - r1) * iw).max(S::zero()).min(S::one());
    S::one() - t * t * t * (S::lit(10.0) + t * (S::lit(-15.0) + S::lit(6.0) * t))
}

/// `(chi(s), chi'(s))`.
#[inline(always)]
fn cutoff_with_slope<S: Real>(s: S, r1: S, iw: S) -> (S, S) {
    let t = ((s - r1) * iw).max(S::zero()).min(S::one());
    let t2 = t * t;
    let u = S::one() - t;
    (
        S::one() - t2 * t * (S::lit(10.0) + t * (S::lit(-15.0) + S::lit(6.0) * t)),
        S::lit(-30.0) * t2 * u * u * iw,
    )
}

impl<S: Real> KernelBlock<S> {
    pub fn new(dim: usize) -> Self {
        Self {
            axes: vec![AxisTable::default(); dim],
            acc: vec![S::zero(); dim],
            prefix: vec![0; dim],
            row: Vec::new(),
            decay: (S::zero(), S::zero(), S::one()),
        }
    }

    /// Sets up the block of cells within the kernel support of `p`.
    /// Returns `false` when it misses `within` entirely.
    pub fn prepare(
        &mut self,
        p: &[S],
        within: &CellBox,
        moll: &MollifierFamily<S>,
        h: S,
    ) -> bool {
        let half = S::lit(0.5);
        let r = moll.support_radius();
        let l = moll.ell();
        if self.decay.0 != l || self.decay.1 != h {
            self.decay = (l, h, (S::lit(-2.0) * l * h * h).exp());
        }
        let c = self.decay.2;
        let inv_h = S::one() / h;
        for (a, axis) in self.axes.iter_mut().enumerate() {
            let a0 = ceil_i64((p[a] - r) * inv_h - half);
            let a1 = floor_i64((p[a] + r) * inv_h - half);
            let (b0, b1) = within.span(a);
            let i0 = a0.max(b0);
            let i1 = a1.min(b1);
            if i0 > i1 {
                return false;
            }
            axis.offset = (i0 - b0) as usize;
            let n = (i1 - i0 + 1) as usize;
            axis.dx.resize(n, S::zero());
            axis.dx2.resize(n, S::zero());
            axis.gauss.resize(n, S::zero());
            // exp(-l dx^2) along the axis by the recurrence
            // g_{j+1} = g_j r_j, r_{j+1} = r_j exp(-2 l h^2)
            let dx0 = h * (S::lit(i0 as f64) + half) - p[a];
            let mut g = (-l * dx0 * dx0).exp();
            let mut ratio = (-l * h * (S::lit(2.0) * dx0 + h)).exp();
            let rows = axis.dx.iter_mut().zip(axis.dx2.iter_mut()).zip(axis.gauss.iter_mut());
            for (i, ((dx, dx2), gauss)) in (i0..).zip(rows) {
                let u = h * (S::lit(i as f64) + half);
                *dx = u - p[a];
                *dx2 = *dx * *dx;
                *gauss = g;
                g = g * ratio;
                ratio = ratio * c;
            }
        }
        true
    }

    /// Calls `row(flat_start, s_prefix, gauss_prefix, prefix_index)` for every
    /// row of the block along the last axis.
    #[inline]
    fn for_each_row<F: FnMut(&Self, usize, S, S)>(&mut self, within: &CellBox, mut row: F) {
        let d = self.axes.len();
        let last = d - 1;
        for v in self.prefix.iter_mut() {
            *v = 0;
        }
        loop {
            let mut flat = self.axes[last].offset;
            let mut s = S::zero();
            let mut g = S::one();
            for a in 0..last {
                let j = self.prefix[a];
                let ax = &self.axes[a];
                flat += (ax.offset + j) * within.strides[a];
                s = s + ax.dx2[j];
                g = g * ax.gauss[j];
            }
            row(self, flat, s, g);
            let mut a = last;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                self.prefix[a] += 1;
                if self.prefix[a] < self.axes[a].dx.len() {
                    break;
                }
                self.prefix[a] = 0;
            }
        }
    }

    /// Splits the last-axis row with leading squared offset `sp` into
    /// `(lo, inner_lo, inner_hi, hi)`: cells outside `lo..hi` have `s >= R`
    /// and vanish; cells in `inner_lo..inner_hi` have `s <= R1` where the
    /// cutoff is exactly 1. Both estimates keep a safety margin of a cell.
    #[inline]
    fn row_ranges(&self, sp: S, outer: S, inner: S, inv_h: S) -> (usize, usize, usize, usize) {
        let ax = &self.axes[self.axes.len() - 1];
        let n = ax.dx.len() as i64;
        let tau = outer - sp;
        if !(tau > S::zero()) || n == 0 {
            return (0, 0, 0, 0);
        }
        let dx0 = ax.dx[0];
        // truncation is within one of floor and ceil, hence the margins
        let index = |x: S| ((x - dx0) * inv_h).to_i64().unwrap_or(0);
        let clamp = |i: i64| i.max(0).min(n) as usize;
        let r = tau.sqrt();
        let lo = clamp(index(-r) - 1);
        let hi = clamp(index(r) + 2);
        let tau1 = inner - sp;
        if !(tau1 > S::zero()) {
            return (lo, lo, lo, hi);
        }
        let r1 = tau1.sqrt();
        let ilo = clamp(index(-r1) + 2).max(lo);
        let ihi = clamp(index(r1) - 1).min(hi);
        if ilo >= ihi {
            (lo, lo, lo, hi)
        } else {
            (lo, ilo, ihi, hi)
        }
    }

    /// `field[c] += weight * f_l(|u_c - p|^2)` over the block.
    pub fn scatter(&mut self, field: &mut [S], within: &CellBox, weight: S, moll: &MollifierFamily<S>, h: S) {
        if self.axes.len() == 2 {
            plane_scatter::<S, false>(self, within, field, &mut [], Consts::new(weight, moll));
            return;
        }
        let w = weight * moll.ell().exp();
        let inv_h = S::one() / h;
        let r1 = moll.cutoff_inner;
        let iw = moll.inv_width();
        let last = self.axes.len() - 1;
        self.for_each_row(within, |blk, flat, sp, gp| {
            let (lo, ilo, ihi, hi) = blk.row_ranges(sp, moll.cutoff_outer, moll.cutoff_inner, inv_h);
            let ax = &blk.axes[last];
            let wg = w * gp;
            let out = &mut field[flat..flat + ax.dx2.len()];
            for (lo, hi) in [(lo, ilo), (ihi, hi)] {
                for ((o, &q), &gg) in out[lo..hi].iter_mut().zip(&ax.dx2[lo..hi]).zip(&ax.gauss[lo..hi]) {
                    *o = *o + wg * gg * cutoff(sp + q, r1, iw);
                }
            }
            for (o, &gg) in out[ilo..ihi].iter_mut().zip(&ax.gauss[ilo..ihi]) {
                *o = *o + wg * gg;
            }
        });
    }

    /// Like [`scatter`](Self::scatter), and also adds
    /// `weight * (u_c - p) * f_l'(|u_c - p|^2)` to the `d` gradient fields
    /// stored axis-major in `grad` (each of length `within.len()`).
    pub fn scatter_with_gradient(
        &mut self,
        theta: &mut [S],
        grad: &mut [S],
        within: &CellBox,
        weight: S,
        moll: &MollifierFamily<S>,
        h: S,
    ) {
        if self.axes.len() == 2 {
            plane_scatter::<S, true>(self, within, theta, grad, Consts::new(weight, moll));
            return;
        }
        let w = weight * moll.ell().exp();
        let inv_h = S::one() / h;
        let l = moll.ell();
        let r1 = moll.cutoff_inner;
        let iw = moll.inv_width();
        let d = self.axes.len();
        let last = d - 1;
        let n_cells = within.len();
        let mut dv = std::mem::take(&mut self.row);
        self.for_each_row(within, |blk, flat, sp, gp| {
            let (lo, ilo, ihi, hi) = blk.row_ranges(sp, moll.cutoff_outer, moll.cutoff_inner, inv_h);
            if lo >= hi {
                return;
            }
            let ax = &blk.axes[last];
            let wg = w * gp;
            dv.clear();
            dv.resize(hi - lo, S::zero());
            let th = &mut theta[flat..flat + ax.dx2.len()];
            for (x0, x1) in [(lo, ilo), (ihi, hi)] {
                let cells = th[x0..x1]
                    .iter_mut()
                    .zip(&mut dv[x0 - lo..x1 - lo])
                    .zip(&ax.dx2[x0..x1])
                    .zip(&ax.gauss[x0..x1]);
                for (((t, g), &q), &gg) in cells {
                    let e = wg * gg;
                    let (chi, dchi) = cutoff_with_slope(sp + q, r1, iw);
                    *t = *t + e * chi;
                    *g = e * (dchi - l * chi);
                }
            }
            let cells = th[ilo..ihi].iter_mut().zip(&mut dv[ilo - lo..ihi - lo]).zip(&ax.gauss[ilo..ihi]);
            for ((t, g), &gg) in cells {
                let e = wg * gg;
                *t = *t + e;
                *g = -l * e;
            }
            for a in 0..last {
                let c = blk.axes[a].dx[blk.prefix[a]];
                let off = a * n_cells + flat;
                for (o, &v) in grad[off + lo..off + hi].iter_mut().zip(&dv) {
                    *o = *o + c * v;
                }
            }
            let off = last * n_cells + flat;
            for ((o, &v), &x) in grad[off + lo..off + hi].iter_mut().zip(&dv).zip(&ax.dx[lo..hi]) {
                *o = *o + x * v;
            }
        });
        self.row = dv;
    }

    /// `sum_c weights[c] * f_l(|u_c - p|^2)` over the block.
    pub fn weighted_value(&mut self, weights: &[S], within: &CellBox, moll: &MollifierFamily<S>) -> S {
        let r1 = moll.cutoff_inner;
        let iw = moll.inv_width();
        let (zero, one) = (S::zero(), S::one());
        let (c10, c15, c6) = (S::lit(10.0), S::lit(-15.0), S::lit(6.0));
        let last = self.axes.len() - 1;
        let mut total = S::zero();
        self.for_each_row(within, |blk, flat, sp, gp| {
            let ax = &blk.axes[last];
            let wts = &weights[flat..flat + ax.dx2.len()];
            let mut row = S::zero();
            for ((&e, &q), &gg) in wts.iter().zip(&ax.dx2).zip(&ax.gauss) {
                let t = ((sp + q - r1) * iw).max(zero).min(one);
                let chi = one - t * t * t * (c10 + t * (c15 + c6 * t));
                row = row + e * gg * chi;
            }
            total = total + gp * row;
        });
        total * moll.ell().exp()
    }

    /// `out = sum_c weights[c] * (u_c - p) * f_l'(|u_c - p|^2)` over the block.
    pub fn weighted_gradient(
        &mut self,
        weights: &[S],
        within: &CellBox,
        moll: &MollifierFamily<S>,
        out: &mut [S],
    ) {
        let l = moll.ell();
        let r1 = moll.cutoff_inner;
        let iw = moll.inv_width();
        let (zero, one) = (S::zero(), S::one());
        let (c10, c15, c6, c30) = (S::lit(10.0), S::lit(-15.0), S::lit(6.0), S::lit(-30.0));
        let d = self.axes.len();
        let last = d - 1;
        let mut acc = std::mem::take(&mut self.acc);
        acc.iter_mut().for_each(|v| *v = zero);
        self.for_each_row(within, |blk, flat, sp, gp| {
            let ax = &blk.axes[last];
            let wts = &weights[flat..flat + ax.dx2.len()];
            let mut row = zero;
            let mut row_last = zero;
            for (((&e, &q), &gg), &dx) in wts.iter().zip(&ax.dx2).zip(&ax.gauss).zip(&ax.dx) {
                let t = ((sp + q - r1) * iw).max(zero).min(one);
                let t2 = t * t;
                let u = one - t;
                let chi = one - t2 * t * (c10 + t * (c15 + c6 * t));
                let dchi = c30 * t2 * u * u * iw;
                let v = e * gg * (dchi - l * chi);
                row = row + v;
                row_last = row_last + v * dx;
            }
            for a in 0..last {
                acc[a] = acc[a] + gp * row * blk.axes[a].dx[blk.prefix[a]];
            }
            acc[last] = acc[last] + gp * row_last;
        });
        let scale = l.exp();
        for (o, &a) in out.iter_mut().zip(acc.iter()) {
            *o = a * scale;
        }
        self.acc = acc;
    }
}

/// Constants of one scatter call.
#[derive(Clone, Copy)]
struct Consts<S> {
    /// `weight * exp(l)`
    w: S,
    l: S,
    r1: S,
    iw: S,
}

impl<S: Real> Consts<S> {
    fn new(weight: S, moll: &MollifierFamily<S>) -> Self {
        Self {
            w: weight * moll.ell().exp(),
            l: moll.ell(),
            r1: moll.cutoff_inner,
            iw: moll.inv_width(),
        }
    }
}

/// Branch-free clamp to `[0, 1]`, vectorisable without NaN handling.
#[inline(always)]
fn unit_clamp<S: Real>(t: S) -> S {
    let t = if t < S::zero() { S::zero() } else { t };
    if t > S::one() {
        S::one()
    } else {
        t
    }
}

/// Full-row scatter in two dimensions. Rows entirely outside the kernel
/// support are skipped; within a row every cell runs the same arithmetic so
/// the loop vectorises.
#[inline(always)]
fn plane_rows<S: Real, const GRAD: bool>(
    blk: &KernelBlock<S>,
    within: &CellBox,
    theta: &mut [S],
    grad: &mut [S],
    k: Consts<S>,
) {
    let (ax0, ax1) = (&blk.axes[0], &blk.axes[1]);
    let n1 = ax1.dx.len();
    let n_cells = within.len();
    let one = S::one();
    let (c10, c15, c6, c30) = (S::lit(10.0), S::lit(-15.0), S::lit(6.0), S::lit(-30.0));
    let (gx_all, gy_all) = grad.split_at_mut(if GRAD { n_cells } else { 0 });
    for i in 0..ax0.dx.len() {
        let sp = ax0.dx2[i];
        if (sp - k.r1) * k.iw >= one {
            continue;
        }
        let ex = k.w * ax0.gauss[i];
        let flat = (ax0.offset + i) * within.strides[0] + ax1.offset;
        let th = &mut theta[flat..flat + n1];
        if GRAD {
            let dxi = ax0.dx[i];
            let gx = &mut gx_all[flat..flat + n1];
            let gy = &mut gy_all[flat..flat + n1];
            let cells = th
                .iter_mut()
                .zip(gx.iter_mut())
                .zip(gy.iter_mut())
                .zip(&ax1.dx2)
                .zip(&ax1.gauss)
                .zip(&ax1.dx);
            for (((((t, gx), gy), &q), &gg), &dy) in cells {
                let s = unit_clamp((sp + q - k.r1) * k.iw);
                let s2 = s * s;
                let u = one - s;
                let chi = one - s2 * s * (c10 + s * (c15 + c6 * s));
                let dchi = c30 * s2 * u * u * k.iw;
                let e = ex * gg;
                let dv = e * (dchi - k.l * chi);
                *t = *t + e * chi;
                *gx = *gx + dxi * dv;
                *gy = *gy + dy * dv;
            }
        } else {
            for ((t, &q), &gg) in th.iter_mut().zip(&ax1.dx2).zip(&ax1.gauss) {
                let s = unit_clamp((sp + q - k.r1) * k.iw);
                let chi = one - s * s * s * (c10 + s * (c15 + c6 * s));
                *t = *t + ex * gg * chi;
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn plane_rows_avx2<S: Real, const GRAD: bool>(
    blk: &KernelBlock<S>,
    within: &CellBox,
    theta: &mut [S],
    grad: &mut [S],
    k: Consts<S>,
) {
    plane_rows::<S, GRAD>(blk, within, theta, grad, k)
}

/// Runs [`plane_rows`], compiled for AVX2 when the CPU has it. Without
/// fused multiply-add contraction both versions round identically.
fn plane_scatter<S: Real, const GRAD: bool>(
    blk: &KernelBlock<S>,
    within: &CellBox,
    theta: &mut [S],
    grad: &mut [S],
    k: Consts<S>,
) {
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx2") {
        // SAFETY: the required CPU feature was detected at runtime.
        unsafe { plane_rows_avx2::<S, GRAD>(blk, within, theta, grad, k) };
        return;
    }
    plane_rows::<S, GRAD>(blk, within, theta, grad, k)
}
