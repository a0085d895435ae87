use serde::{Deserialize, Serialize};

use super::FunctionalError;
use crate::scalar::Real;

/// `f_l(s) = exp(l (1 - s)) * chi(s)`, with `chi` the C2 quintic smoothstep
/// falling from 1 at `cutoff_inner` to 0 at `cutoff_outer`.
///
/// `s` is a squared distance, so kernels built from it are supported in the
/// ball of radius `sqrt(cutoff_outer)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierFamily<S> {
    pub level: u32,
    pub cutoff_inner: S,
    pub cutoff_outer: S,
}

/// Value and first two derivatives of `f_l` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierValue<S> {
    pub value: S,
    pub first: S,
    pub second: S,
}

impl<S: Real> MollifierFamily<S> {
    pub fn new(level: u32, cutoff_inner: S, cutoff_outer: S) -> Result<Self, FunctionalError> {
        if level == 0 {
            return Err(FunctionalError::InvalidParameter("mollifier level must be positive"));
        }
        if !(cutoff_inner > S::one() && cutoff_outer > cutoff_inner && cutoff_outer.is_finite()) {
            return Err(FunctionalError::InvalidParameter(
                "mollifier cutoffs must satisfy 1 < inner < outer",
            ));
        }
        Ok(Self {
            level,
            cutoff_inner,
            cutoff_outer,
        })
    }

    /// The default family: inner cutoff 2, outer cutoff 4 (support radius 2).
    pub fn standard(level: u32) -> Self {
        Self::new(level, S::lit(2.0), S::lit(4.0)).expect("valid defaults")
    }

    #[inline]
    pub fn ell(&self) -> S {
        S::lit(self.level as f64)
    }

    /// Radius of the support of `u -> f_l(|u - y|^2)`.
    #[inline]
    pub fn support_radius(&self) -> S {
        self.cutoff_outer.sqrt()
    }

    #[inline]
    pub(crate) fn inv_width(&self) -> S {
        S::one() / (self.cutoff_outer - self.cutoff_inner)
    }

    /// Cutoff `chi(s)` and its first two derivatives.
    #[inline]
    pub fn cutoff(&self, s: S) -> (S, S, S) {
        let iw = self.inv_width();
        let t = ((s - self.cutoff_inner) * iw).max(S::zero()).min(S::one());
        let one = S::one();
        let chi = one - t * t * t * (S::lit(10.0) + t * (S::lit(-15.0) + S::lit(6.0) * t));
        let u = one - t;
        let d1 = S::lit(-30.0) * t * t * u * u * iw;
        let d2 = S::lit(-60.0) * t * u * (one - S::lit(2.0) * t) * iw * iw;
        (chi, d1, d2)
    }

    pub fn eval(&self, s: S) -> MollifierValue<S> {
        if s >= self.cutoff_outer {
            return MollifierValue {
                value: S::zero(),
                first: S::zero(),
                second: S::zero(),
            };
        }
        let l = self.ell();
        let e = (l * (S::one() - s)).exp();
        let (chi, d1, d2) = self.cutoff(s);
        MollifierValue {
            value: e * chi,
            first: e * (d1 - l * chi),
            second: e * (d2 - S::lit(2.0) * l * d1 + l * l * chi),
        }
    }

    #[inline]
    pub fn value(&self, s: S) -> S {
        self.eval(s).value
    }

    /// `int_{R^d} F(|z|) dz` for a radial integrand supported in the kernel ball.
    pub fn radial_integral<F: Fn(S) -> S>(&self, dim: usize, integrand: F) -> S {
        // composite Simpson in r; the integrand is C2 so 2^14 panels is plenty
        let panels = 1usize << 14;
        let r_max = self.support_radius();
        let h = r_max / S::from_usize_lossy(panels);
        let shell = |r: S| integrand(r) * r.powi(dim as i32 - 1);
        let mut acc = shell(S::zero()) + shell(r_max);
        for i in 1..panels {
            let w = if i % 2 == 1 { S::lit(4.0) } else { S::lit(2.0) };
            acc = acc + w * shell(h * S::from_usize_lossy(i));
        }
        unit_sphere_area::<S>(dim) * acc * h / S::lit(3.0)
    }

    /// `int f_l(|z|^2) dz`, the sup bound of `|delta_mu g_l|`.
    pub fn mass(&self, dim: usize) -> S {
        self.radial_integral(dim, |r| self.value(r * r))
    }

    /// `int f_l(|z|^2)^2 dz`, the sup bound of `|delta^2_mumu g_l|`.
    pub fn mass_squared(&self, dim: usize) -> S {
        self.radial_integral(dim, |r| {
            let v = self.value(r * r);
            v * v
        })
    }

    /// `2 int |z| |f_l'(|z|^2)| dz`, the sup bound of `|grad_y delta_mu g_l|`.
    pub fn gradient_mass(&self, dim: usize) -> S {
        S::lit(2.0) * self.radial_integral(dim, |r| r * self.eval(r * r).first.abs())
    }
}

/// Surface area of the unit sphere in `R^d`.
pub fn unit_sphere_area<S: Real>(dim: usize) -> S {
    // 2 pi^{d/2} / Gamma(d/2), by the recursion A_{d+2} = 2 pi A_d / d
    let pi = S::PI();
    let (mut area, mut d) = if dim % 2 == 1 {
        (S::lit(2.0), 1usize)
    } else {
        (S::lit(2.0) * pi, 2usize)
    };
    while d < dim {
        area = area * S::lit(2.0) * pi / S::from_usize_lossy(d);
        d += 2;
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_value_at_one_and_zero_at_outer_cutoff() {
        for l in [1, 2, 4, 8, 16, 32] {
            let m = MollifierFamily::<f64>::standard(l);
            assert!((m.value(1.0) - 1.0).abs() < 1e-15);
            let v = m.eval(4.0);
            assert_eq!((v.value, v.first, v.second), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn closed_form_inside_inner_cutoff() {
        let m = MollifierFamily::<f64>::standard(4);
        assert!((m.value(0.5) - 2.0f64.exp()).abs() < 1e-12);
        assert!((m.value(0.5) - 7.389056).abs() < 1e-6);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let m = MollifierFamily::<f64>::standard(4);
        let h = 1e-6;
        for &s in &[0.2, 1.0, 1.9, 2.3, 3.0, 3.7] {
            let v = m.eval(s);
            let fd1 = (m.value(s + h) - m.value(s - h)) / (2.0 * h);
            let fd2 = (m.eval(s + h).first - m.eval(s - h).first) / (2.0 * h);
            assert!((v.first - fd1).abs() < 1e-6 * (1.0 + fd1.abs()), "s={s}");
            assert!((v.second - fd2).abs() < 1e-5 * (1.0 + fd2.abs()), "s={s}");
        }
    }

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area::<f64>(1) - 2.0).abs() < 1e-15);
        assert!((unit_sphere_area::<f64>(2) - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_sphere_area::<f64>(3) - 4.0 * std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_cutoffs() {
        assert!(MollifierFamily::<f64>::new(4, 0.9, 4.0).is_err());
        assert!(MollifierFamily::<f64>::new(4, 2.0, 2.0).is_err());
        assert!(MollifierFamily::<f64>::new(0, 2.0, 4.0).is_err());
    }
}
