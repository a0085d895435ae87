use super::FeynmanKacError;
use crate::functionals::{
    particle_polylines, sausage_volume, CylindricalFunctional, PreparedBase, SausageFunctional,
    SausageScratch, Support,
};
use crate::occupation::{OccupationMeasure, PathRef};
use crate::scalar::Real;

/// Terminal cost `g(mu_T, X_T)`.
#[derive(Clone, Debug)]
pub enum Terminal<S: Real> {
    Constant(S),
    /// `g(mu, x) = lambda . x`, with `lambda` flat `n * d`.
    Linear(Vec<S>),
    /// `g(mu, x) = h(<mu, phi_1>, ..)`.
    Cylindrical(CylindricalFunctional<S>),
    /// `g = g_l`.
    Sausage(SausageFunctional<S>),
    /// `g = -m(S)`, the exact sausage volume of the particle polylines and
    /// the base atoms. Not differentiable.
    ExactSausage { radius: S, grid_h: S },
}

/// Running cost `f(mu_s, X_s)`.
#[derive(Clone, Debug)]
pub enum Running<S: Real> {
    Zero,
    Constant(S),
    /// `f(mu, x) = lambda . x`.
    Linear(Vec<S>),
    Cylindrical(CylindricalFunctional<S>),
}

/// Which family the terminal cost belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalKind {
    Constant,
    Linear,
    Cylindrical,
    Sausage,
    ExactSausage,
}

/// An upper bound on `-g` (or `-f`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Certificate<S> {
    /// holds for every state
    Uniform(S),
    /// checked per sample against a bound computed from the sample itself
    Pathwise,
}

/// The pair `(f, g)` of a control problem.
#[derive(Clone, Debug)]
pub struct CostPair<S: Real> {
    pub running: Running<S>,
    pub terminal: Terminal<S>,
}

/// Sup-norm bounds used by the drift certificate.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct DerivativeBounds<S> {
    /// `sup |grad_x g|` per particle
    pub grad_x: S,
    /// `sup |grad_y delta_mu g|`
    pub grad_delta: S,
}

impl<S: Real> CostPair<S> {
    pub fn new(running: Running<S>, terminal: Terminal<S>) -> Self {
        Self { running, terminal }
    }

    /// `f = 0, g = 0`.
    pub fn zero() -> Self {
        Self::new(Running::Zero, Terminal::Constant(S::zero()))
    }

    pub fn terminal_only(terminal: Terminal<S>) -> Self {
        Self::new(Running::Zero, terminal)
    }

    pub fn f_is_zero(&self) -> bool {
        matches!(self.running, Running::Zero)
    }

    pub fn g_kind(&self) -> TerminalKind {
        match self.terminal {
            Terminal::Constant(_) => TerminalKind::Constant,
            Terminal::Linear(_) => TerminalKind::Linear,
            Terminal::Cylindrical(_) => TerminalKind::Cylindrical,
            Terminal::Sausage(_) => TerminalKind::Sausage,
            Terminal::ExactSausage { .. } => TerminalKind::ExactSausage,
        }
    }

    /// Upper bound on `-g`.
    pub fn terminal_certificate(&self) -> Certificate<S> {
        match &self.terminal {
            Terminal::Constant(c) => Certificate::Uniform(-*c),
            _ => Certificate::Pathwise,
        }
    }

    /// Upper bound on `-f`.
    pub fn running_certificate(&self) -> Certificate<S> {
        match &self.running {
            Running::Zero => Certificate::Uniform(S::zero()),
            Running::Constant(c) => Certificate::Uniform(-*c),
            _ => Certificate::Pathwise,
        }
    }

    /// Derivative bounds of `g`, or `None` when `g` has none.
    pub fn terminal_bounds(&self, dim: usize) -> Option<DerivativeBounds<S>> {
        match &self.terminal {
            Terminal::Constant(_) => Some(DerivativeBounds::default()),
            Terminal::Linear(l) => Some(DerivativeBounds {
                grad_x: max_block_norm(l, dim),
                grad_delta: S::zero(),
            }),
            Terminal::Cylindrical(cf) => Some(DerivativeBounds {
                grad_x: S::zero(),
                grad_delta: cf.sup_gradient_derivative()?,
            }),
            Terminal::Sausage(sf) => Some(DerivativeBounds {
                grad_x: S::zero(),
                grad_delta: sf.bounds(dim).grad_delta,
            }),
            Terminal::ExactSausage { .. } => None,
        }
    }

    /// Derivative bounds of `f`.
    pub fn running_bounds(&self, dim: usize) -> Option<DerivativeBounds<S>> {
        match &self.running {
            Running::Zero | Running::Constant(_) => Some(DerivativeBounds::default()),
            Running::Linear(l) => Some(DerivativeBounds {
                grad_x: max_block_norm(l, dim),
                grad_delta: S::zero(),
            }),
            Running::Cylindrical(cf) => Some(DerivativeBounds {
                grad_x: S::zero(),
                grad_delta: cf.sup_gradient_derivative()?,
            }),
        }
    }

    /// Folds the base measure into the costs once, for many path evaluations.
    pub fn prepare(&self, base: &OccupationMeasure<S>) -> PreparedCosts<'_, S> {
        let terminal_base = match &self.terminal {
            Terminal::Sausage(sf) => BaseData::Sausage(sf.prepare(base)),
            Terminal::Cylindrical(cf) => BaseData::Pairings(cf.pairings(base)),
            _ => BaseData::None,
        };
        let running_base = match &self.running {
            Running::Cylindrical(cf) => cf.pairings(base),
            _ => Vec::new(),
        };
        PreparedCosts {
            costs: self,
            base: base.clone(),
            terminal_base,
            running_base,
        }
    }
}

fn max_block_norm<S: Real>(v: &[S], dim: usize) -> S {
    v.chunks(dim.max(1))
        .map(crate::scalar::norm)
        .fold(S::zero(), S::max)
}

#[derive(Clone, Debug)]
enum BaseData<S> {
    None,
    Sausage(PreparedBase<S>),
    Pairings(Vec<S>),
}

/// A [`CostPair`] with its base measure folded in.
#[derive(Clone, Debug)]
pub struct PreparedCosts<'a, S: Real> {
    costs: &'a CostPair<S>,
    base: OccupationMeasure<S>,
    terminal_base: BaseData<S>,
    running_base: Vec<S>,
}

/// Costs of one sampled path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathCost<S> {
    /// `int_0^t f ds` by the left-endpoint rule
    pub running: S,
    /// `g(mu_t, X_t)`
    pub terminal: S,
}

impl<S: Real> PathCost<S> {
    /// `-int f - g`.
    pub fn log_weight(&self) -> S {
        -self.running - self.terminal
    }
}

/// Per-worker buffers for path evaluation.
#[derive(Clone, Debug, Default)]
pub struct Workspace<S> {
    sausage: SausageScratch<S>,
    weights: Vec<S>,
    pairs: Vec<S>,
    outer: Vec<S>,
    grad: Vec<S>,
    sums: Vec<S>,
    tmp: Vec<S>,
}

impl<S: Real> Workspace<S> {
    pub fn new() -> Self {
        Self {
            sausage: SausageScratch::new(),
            weights: Vec::new(),
            pairs: Vec::new(),
            outer: Vec::new(),
            grad: Vec::new(),
            sums: Vec::new(),
            tmp: Vec::new(),
        }
    }

    /// `G` per particle (flat `n * d`) from the last call to
    /// [`PreparedCosts::evaluate`] with gradients on.
    pub fn gradient(&self) -> &[S] {
        &self.grad
    }
}

impl<'a, S: Real> PreparedCosts<'a, S> {
    pub fn costs(&self) -> &CostPair<S> {
        self.costs
    }

    pub fn base(&self) -> &OccupationMeasure<S> {
        &self.base
    }

    /// Running and terminal cost of `path` (steps of length `dt`, occupation
    /// accumulated from the base by left-endpoint atoms).
    ///
    /// With `gradient` set, [`Workspace::gradient`] receives for every
    /// particle `k` the pathwise derivative in the starting point `x^k`:
    /// `grad_x g + sum_j dt grad_y delta_mu g(mu_t)(X_j^k) + sum_i dt grad_x f
    /// + sum_i dt sum_{j < i} dt grad_y delta_mu f(mu_i)(X_j^k)`.
    pub fn evaluate(
        &self,
        path: &PathRef<'_, S>,
        n: usize,
        dt: S,
        gradient: bool,
        ws: &mut Workspace<S>,
    ) -> Result<PathCost<S>, FeynmanKacError> {
        let dim = self.base.dim();
        let steps = path.len() - 1;
        ws.grad.clear();
        ws.grad.resize(if gradient { n * dim } else { 0 }, S::zero());
        let running = self.running(path, n, dt, gradient, ws);
        let terminal = self.terminal(path, n, dt, gradient, ws, steps)?;
        Ok(PathCost { running, terminal })
    }

    fn terminal(
        &self,
        path: &PathRef<'_, S>,
        n: usize,
        dt: S,
        gradient: bool,
        ws: &mut Workspace<S>,
        steps: usize,
    ) -> Result<S, FeynmanKacError> {
        let dim = self.base.dim();
        let end = path.terminal();
        Ok(match (&self.costs.terminal, &self.terminal_base) {
            (Terminal::Constant(c), _) => *c,
            (Terminal::Linear(l), _) => {
                if gradient {
                    add_into(&mut ws.grad, l);
                }
                l.iter().zip(end).fold(S::zero(), |a, (&c, &x)| a + c * x)
            }
            (Terminal::Cylindrical(cf), BaseData::Pairings(base)) => {
                let m = cf.tests.len();
                ws.pairs.clear();
                ws.pairs.extend_from_slice(base);
                for i in 0..steps {
                    for (a, phi) in ws.pairs.iter_mut().zip(&cf.tests) {
                        let s = path.at(i).chunks_exact(dim).fold(S::zero(), |s, y| s + phi.value(y));
                        *a = *a + dt * s;
                    }
                }
                let value = cf.outer.value(&ws.pairs);
                if gradient {
                    ws.outer.clear();
                    ws.outer.resize(m, S::zero());
                    cf.outer.gradient(&ws.pairs, &mut ws.outer);
                    ws.tmp.resize(dim, S::zero());
                    for i in 0..steps {
                        for k in 0..n {
                            let y = path.particle(i, k);
                            for (c, phi) in ws.outer.iter().zip(&cf.tests) {
                                phi.gradient(y, &mut ws.tmp);
                                for (g, &v) in ws.grad[k * dim..(k + 1) * dim].iter_mut().zip(&ws.tmp) {
                                    *g = *g + dt * *c * v;
                                }
                            }
                        }
                    }
                }
                value
            }
            (Terminal::Sausage(sf), BaseData::Sausage(prepared)) => {
                let atoms = path.atoms_before(steps);
                ws.weights.clear();
                ws.weights.resize(steps * n, dt);
                let groups = if gradient { n } else { 0 };
                let value = sf.extend(prepared, atoms, &ws.weights, groups, &mut ws.sausage);
                if gradient {
                    add_into(&mut ws.grad, ws.sausage.gradients());
                }
                value
            }
            (Terminal::ExactSausage { radius, grid_h }, _) => {
                if gradient {
                    return Err(FeynmanKacError::NotDifferentiable);
                }
                let mut lines = particle_polylines(path, n);
                lines.extend(self.base.points().chunks_exact(dim).map(|p| p.to_vec()));
                let v = sausage_volume(Support::Polylines { dim, lines: &lines }, *radius, *grid_h)?;
                -v.value
            }
            _ => unreachable!("prepared data matches the terminal cost"),
        })
    }

    fn running(&self, path: &PathRef<'_, S>, n: usize, dt: S, gradient: bool, ws: &mut Workspace<S>) -> S {
        let dim = self.base.dim();
        let steps = path.len() - 1;
        let t = dt * S::from_usize_lossy(steps);
        match &self.costs.running {
            Running::Zero => S::zero(),
            Running::Constant(c) => {
                // same left-endpoint sum as the general case
                let mut acc = S::zero();
                for _ in 0..steps {
                    acc = acc + dt * *c;
                }
                acc
            }
            Running::Linear(l) => {
                let mut acc = S::zero();
                for i in 0..steps {
                    let f = l.iter().zip(path.at(i)).fold(S::zero(), |a, (&c, &x)| a + c * x);
                    acc = acc + dt * f;
                }
                if gradient {
                    for (g, &c) in ws.grad.iter_mut().zip(l) {
                        *g = *g + t * c;
                    }
                }
                acc
            }
            Running::Cylindrical(cf) => {
                let m = cf.tests.len();
                ws.pairs.clear();
                ws.pairs.extend_from_slice(&self.running_base);
                ws.outer.clear();
                ws.outer.resize(m, S::zero());
                // sums[(k * m + q) * dim ..] = sum_{j < i} dt grad phi_q(X_j^k)
                ws.sums.clear();
                ws.sums.resize(if gradient { n * m * dim } else { 0 }, S::zero());
                ws.tmp.resize(dim, S::zero());
                let mut acc = S::zero();
                for i in 0..steps {
                    acc = acc + dt * cf.outer.value(&ws.pairs);
                    if gradient {
                        cf.outer.gradient(&ws.pairs, &mut ws.outer);
                        for k in 0..n {
                            for (q, &c) in ws.outer.iter().enumerate() {
                                let s = &ws.sums[(k * m + q) * dim..(k * m + q + 1) * dim];
                                for (g, &v) in ws.grad[k * dim..(k + 1) * dim].iter_mut().zip(s) {
                                    *g = *g + dt * c * v;
                                }
                            }
                        }
                    }
                    for (q, phi) in cf.tests.iter().enumerate() {
                        let mut s = S::zero();
                        for k in 0..n {
                            let y = path.particle(i, k);
                            s = s + phi.value(y);
                            if gradient {
                                phi.gradient(y, &mut ws.tmp);
                                let acc = &mut ws.sums[(k * m + q) * dim..(k * m + q + 1) * dim];
                                for (a, &v) in acc.iter_mut().zip(&ws.tmp) {
                                    *a = *a + dt * v;
                                }
                            }
                        }
                        ws.pairs[q] = ws.pairs[q] + dt * s;
                    }
                }
                acc
            }
        }
    }

    /// Pathwise upper bound on the log-weight `-int f - g` of `path`, if one
    /// is known; `None` means only finiteness is checked.
    pub fn log_weight_bound(&self, path: &PathRef<'_, S>, dt: S) -> Option<S> {
        let steps = path.len() - 1;
        let t = dt * S::from_usize_lossy(steps);
        let running = match self.costs.running_certificate() {
            Certificate::Uniform(b) => b * t,
            Certificate::Pathwise => return None,
        };
        let terminal = match (self.costs.terminal_certificate(), &self.costs.terminal) {
            (Certificate::Uniform(b), _) => b,
            (_, Terminal::Sausage(sf)) => {
                // the integrand is in [0, 1] on the padded bounding box
                let pad = sf.mollifier.support_radius() + sf.quad_step;
                self.support_box_volume(path, pad)
            }
            (_, Terminal::ExactSausage { radius, grid_h }) => {
                let pad = *radius + *grid_h;
                self.support_box_volume(path, pad)
            }
            _ => return None,
        };
        Some(running + terminal)
    }

    fn support_box_volume(&self, path: &PathRef<'_, S>, pad: S) -> S {
        let dim = self.base.dim();
        let steps = path.len();
        let mut lo = path.at(0)[..dim].to_vec();
        let mut hi = lo.clone();
        let pts = path
            .atoms_before(steps)
            .chunks_exact(dim)
            .chain(self.base.points().chunks_exact(dim));
        for p in pts {
            for a in 0..dim {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        lo.iter()
            .zip(&hi)
            .fold(S::one(), |v, (&l, &h)| v * (h - l + pad + pad))
    }
}

fn add_into<S: Real>(acc: &mut [S], v: &[S]) {
    for (a, &b) in acc.iter_mut().zip(v) {
        *a = *a + b;
    }
}

