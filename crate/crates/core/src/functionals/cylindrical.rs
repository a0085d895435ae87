use std::fmt::Debug;
use std::sync::Arc;

use super::FlatFunctional;
use crate::occupation::OccupationMeasure;
use crate::scalar::{dist2, Real};

/// A smooth, compactly supported scalar field on `R^d`.
pub trait TestFunction<S: Real>: Send + Sync + Debug {
    fn value(&self, y: &[S]) -> S;
    fn gradient(&self, y: &[S], out: &mut [S]);
    /// An upper bound on `|grad phi|`.
    fn sup_gradient(&self) -> S;
}

/// Outer function `h: R^m -> R` of a cylindrical functional.
pub trait OuterFunction<S: Real>: Send + Sync + Debug {
    fn arity(&self) -> usize;
    fn value(&self, a: &[S]) -> S;
    fn gradient(&self, a: &[S], out: &mut [S]);
    /// Global bounds on `|d_k h|`, when `h` is Lipschitz.
    fn lipschitz(&self) -> Option<Vec<S>> {
        None
    }
}

/// `amplitude` on the ball of radius `inner` around `center`, decaying to 0
/// at radius `outer` through a C2 quintic in `|y - c|^2`. With `inner = 0`
/// this is a plain bump.
#[derive(Clone, Debug, PartialEq)]
pub struct Plateau<S> {
    pub center: Vec<S>,
    pub inner: S,
    pub outer: S,
    pub amplitude: S,
}

impl<S: Real> Plateau<S> {
    pub fn new(center: Vec<S>, inner: S, outer: S, amplitude: S) -> Self {
        assert!(inner >= S::zero() && outer > inner, "plateau radii must satisfy 0 <= inner < outer");
        Self {
            center,
            inner,
            outer,
            amplitude,
        }
    }

    fn width(&self) -> S {
        self.outer * self.outer - self.inner * self.inner
    }

    fn t(&self, y: &[S]) -> S {
        let s = dist2(y, &self.center);
        ((s - self.inner * self.inner) / self.width())
            .max(S::zero())
            .min(S::one())
    }
}

impl<S: Real> TestFunction<S> for Plateau<S> {
    fn value(&self, y: &[S]) -> S {
        let t = self.t(y);
        let step = t * t * t * (S::lit(10.0) + t * (S::lit(-15.0) + S::lit(6.0) * t));
        self.amplitude * (S::one() - step)
    }

    fn gradient(&self, y: &[S], out: &mut [S]) {
        let t = self.t(y);
        let u = S::one() - t;
        // d/ds of the value, times ds/dy = 2 (y - c)
        let dv = -self.amplitude * S::lit(30.0) * t * t * u * u / self.width();
        for ((o, &yi), &ci) in out.iter_mut().zip(y).zip(&self.center) {
            *o = dv * S::lit(2.0) * (yi - ci);
        }
    }

    fn sup_gradient(&self) -> S {
        // |grad| = |A| 60 t^2 (1-t)^2 r / w with r = sqrt(inner^2 + t w)
        let n = 2048;
        let w = self.width();
        let mut best = S::zero();
        for i in 0..=n {
            let t = S::from_usize_lossy(i) / S::from_usize_lossy(n);
            let r = (self.inner * self.inner + t * w).sqrt();
            let u = S::one() - t;
            best = best.max(S::lit(60.0) * t * t * u * u * r / w);
        }
        // sampled maximum of a smooth function; pad for the grid spacing
        best * self.amplitude.abs() * S::lit(1.01)
    }
}

/// `h(a) = offset + sum_k c_k a_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine<S> {
    pub coeffs: Vec<S>,
    pub offset: S,
}

impl<S: Real> OuterFunction<S> for Affine<S> {
    fn arity(&self) -> usize {
        self.coeffs.len()
    }

    fn value(&self, a: &[S]) -> S {
        self.coeffs
            .iter()
            .zip(a)
            .fold(self.offset, |acc, (&c, &x)| acc + c * x)
    }

    fn gradient(&self, _a: &[S], out: &mut [S]) {
        out.copy_from_slice(&self.coeffs);
    }

    fn lipschitz(&self) -> Option<Vec<S>> {
        Some(self.coeffs.iter().map(|c| c.abs()).collect())
    }
}

/// `h(a, b) = a b`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Product;

impl<S: Real> OuterFunction<S> for Product {
    fn arity(&self) -> usize {
        2
    }

    fn value(&self, a: &[S]) -> S {
        a[0] * a[1]
    }

    fn gradient(&self, a: &[S], out: &mut [S]) {
        out[0] = a[1];
        out[1] = a[0];
    }
}

/// `h(a) = scale * a^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Square<S> {
    pub scale: S,
}

impl<S: Real> OuterFunction<S> for Square<S> {
    fn arity(&self) -> usize {
        1
    }

    fn value(&self, a: &[S]) -> S {
        self.scale * a[0] * a[0]
    }

    fn gradient(&self, a: &[S], out: &mut [S]) {
        out[0] = S::lit(2.0) * self.scale * a[0];
    }
}

/// `u(mu) = h(<mu, phi_1>, ..., <mu, phi_m>)`.
#[derive(Clone, Debug)]
pub struct CylindricalFunctional<S: Real> {
    pub tests: Vec<Arc<dyn TestFunction<S>>>,
    pub outer: Arc<dyn OuterFunction<S>>,
}

/// The flat derivative `y -> sum_k d_k h(<mu, phi>) phi_k(y)` at a fixed measure.
#[derive(Clone, Debug)]
pub struct DerivativeField<S: Real> {
    pub coeffs: Vec<S>,
    tests: Vec<Arc<dyn TestFunction<S>>>,
}

impl<S: Real> DerivativeField<S> {
    pub fn at(&self, y: &[S]) -> S {
        self.coeffs
            .iter()
            .zip(&self.tests)
            .fold(S::zero(), |acc, (&c, phi)| acc + c * phi.value(y))
    }

    pub fn gradient_at(&self, y: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); y.len()];
        let mut g = vec![S::zero(); y.len()];
        for (&c, phi) in self.coeffs.iter().zip(&self.tests) {
            phi.gradient(y, &mut g);
            for (o, &v) in out.iter_mut().zip(&g) {
                *o = *o + c * v;
            }
        }
        out
    }
}

impl<S: Real> CylindricalFunctional<S> {
    pub fn new(tests: Vec<Arc<dyn TestFunction<S>>>, outer: Arc<dyn OuterFunction<S>>) -> Self {
        assert_eq!(tests.len(), outer.arity(), "one test function per outer argument");
        Self { tests, outer }
    }

    /// `u(mu) = <mu, phi>`.
    pub fn linear(phi: Arc<dyn TestFunction<S>>) -> Self {
        Self::new(
            vec![phi],
            Arc::new(Affine {
                coeffs: vec![S::one()],
                offset: S::zero(),
            }),
        )
    }

    /// `u(mu) = c`.
    pub fn constant(c: S) -> Self {
        Self::new(
            Vec::new(),
            Arc::new(Affine {
                coeffs: Vec::new(),
                offset: c,
            }),
        )
    }

    pub fn pairings(&self, mu: &OccupationMeasure<S>) -> Vec<S> {
        self.tests.iter().map(|phi| mu.pair(|y| phi.value(y))).collect()
    }

    pub fn value(&self, mu: &OccupationMeasure<S>) -> S {
        self.outer.value(&self.pairings(mu))
    }

    /// Bound on `|grad_y delta_mu u|`, if the outer function is Lipschitz.
    pub fn sup_gradient_derivative(&self) -> Option<S> {
        let lip = self.outer.lipschitz()?;
        Some(
            lip.iter()
                .zip(&self.tests)
                .fold(S::zero(), |acc, (&l, phi)| acc + l * phi.sup_gradient()),
        )
    }

    pub fn derivative(&self, mu: &OccupationMeasure<S>) -> DerivativeField<S> {
        self.eval_and_derivative(mu).1
    }

    /// `(u(mu), delta_mu u(mu)(.))`.
    pub fn eval_and_derivative(&self, mu: &OccupationMeasure<S>) -> (S, DerivativeField<S>) {
        let a = self.pairings(mu);
        let mut coeffs = vec![S::zero(); a.len()];
        self.outer.gradient(&a, &mut coeffs);
        (
            self.outer.value(&a),
            DerivativeField {
                coeffs,
                tests: self.tests.clone(),
            },
        )
    }
}

impl<S: Real> FlatFunctional<S> for CylindricalFunctional<S> {
    fn value(&self, mu: &OccupationMeasure<S>) -> S {
        CylindricalFunctional::value(self, mu)
    }

    fn delta(&self, mu: &OccupationMeasure<S>, y: &[S]) -> S {
        self.derivative(mu).at(y)
    }
}
