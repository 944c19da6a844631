//! Conformally Hamiltonian systems and the mechanical models that reduce to
//! them.
//!
//! A conformally Hamiltonian system is a pair `(H, N)` with `N > 0`; its
//! vector field is `dq = N dH/dp`, `dp = -N dH/dq`. Restricted to the level
//! set `H = E` it coincides with the Hamiltonian vector field of the altered
//! Hamiltonian `K_E = N (H - E)`, which is what the symplectic integrators in
//! [`crate::variational`] discretize.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jet::Scalar;
use crate::state::{PhaseState, Tangent};

pub type StateFn = Arc<dyn Fn(&PhaseState) -> f64 + Send + Sync>;
pub type StateGradFn = Arc<dyn Fn(&PhaseState) -> Vec<f64> + Send + Sync>;
pub type ConfigFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type ConfigGradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type MetricFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type MetricGradFn = Arc<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>;

/// Hamiltonian `H`, conformal factor `N` and their gradients.
///
/// Gradients are laid out as `(d/dq, d/dp)`, length `2n`.
#[derive(Clone)]
pub struct ConformalSystem {
    n: usize,
    hamiltonian: StateFn,
    grad_h: StateGradFn,
    conformal_factor: StateFn,
    grad_n: StateGradFn,
    label: String,
}

impl fmt::Debug for ConformalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConformalSystem")
            .field("n", &self.n)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl ConformalSystem {
    pub fn new(
        n: usize,
        hamiltonian: StateFn,
        grad_h: StateGradFn,
        conformal_factor: StateFn,
        grad_n: StateGradFn,
        label: impl Into<String>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("system dimension must be >= 1".into()));
        }
        Ok(Self {
            n,
            hamiltonian,
            grad_h,
            conformal_factor,
            grad_n,
            label: label.into(),
        })
    }

    pub fn dof(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn check(&self, state: &PhaseState) -> Result<()> {
        if state.dof() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: state.dof(),
            });
        }
        Ok(())
    }

    pub fn hamiltonian(&self, state: &PhaseState) -> Result<f64> {
        self.check(state)?;
        finite((self.hamiltonian)(state), "hamiltonian")
    }

    /// `N(state)`; errors if it is not strictly positive.
    pub fn conformal_factor(&self, state: &PhaseState) -> Result<f64> {
        self.check(state)?;
        let n = (self.conformal_factor)(state);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ModelDomain(format!(
                "conformal factor must be positive, got {n} at {:?}",
                state.coords()
            )));
        }
        Ok(n)
    }

    pub fn grad_hamiltonian(&self, state: &PhaseState) -> Result<Vec<f64>> {
        self.check(state)?;
        finite_vec((self.grad_h)(state), "hamiltonian gradient")
    }

    pub fn grad_conformal_factor(&self, state: &PhaseState) -> Result<Vec<f64>> {
        self.check(state)?;
        finite_vec((self.grad_n)(state), "conformal factor gradient")
    }

    /// `dq = N dH/dp`, `dp = -N dH/dq`.
    pub fn vector_field(&self, state: &PhaseState) -> Result<Tangent> {
        let n = self.conformal_factor(state)?;
        let grad: Vec<f64> = self
            .grad_hamiltonian(state)?
            .into_iter()
            .map(|g| n * g)
            .collect();
        Ok(Tangent::hamiltonian(&grad))
    }

    /// `K_E = N (H - E)`.
    pub fn altered_hamiltonian(&self, state: &PhaseState, energy: f64) -> Result<f64> {
        Ok(self.conformal_factor(state)? * (self.hamiltonian(state)? - energy))
    }

    /// `grad K_E = (H - E) grad N + N grad H`.
    pub fn grad_altered_hamiltonian(&self, state: &PhaseState, energy: f64) -> Result<Vec<f64>> {
        let n = self.conformal_factor(state)?;
        let gap = self.hamiltonian(state)? - energy;
        let gh = self.grad_hamiltonian(state)?;
        let gn = self.grad_conformal_factor(state)?;
        Ok(gh.iter().zip(&gn).map(|(h, c)| gap * c + n * h).collect())
    }

    /// Hamiltonian vector field of `K_E`. Equals [`Self::vector_field`] on the
    /// level set `H = E`.
    pub fn altered_vector_field(&self, state: &PhaseState, energy: f64) -> Result<Tangent> {
        Ok(Tangent::hamiltonian(
            &self.grad_altered_hamiltonian(state, energy)?,
        ))
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::ModelDomain(format!("{what} is not finite")))
    }
}

fn finite_vec(v: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::ModelDomain(format!("{what} is not finite")))
    }
}

/// Mechanical Lagrangian `L = 1/2 q'^T G(q) q' - U(q)` together with the
/// function `phi` of a phi-simple gyroscopic force.
#[derive(Clone)]
pub struct MechanicalModel {
    pub n: usize,
    pub mass_metric: MetricFn,
    /// `dG/dq_k` for `k = 0..n`.
    pub mass_metric_grad: MetricGradFn,
    pub potential: ConfigFn,
    pub potential_grad: ConfigGradFn,
    pub phi: ConfigFn,
    pub phi_grad: ConfigGradFn,
    pub label: String,
}

/// Momentum-rescaled reduction of a phi-simple mechanical system:
/// `H(q, p) = 1/2 e^{-2 phi} p^T G^{-1} p + U`, `N(q) = e^{phi}`.
///
/// The metric is validated (symmetric positive definite) at `q = 0`; at other
/// points a singular metric surfaces as a non-finite value and is reported as
/// a domain error by the evaluating [`ConformalSystem`] method.
pub fn phi_simple_to_conformal(model: &MechanicalModel) -> Result<ConformalSystem> {
    let n = model.n;
    let origin = vec![0.0; n];
    let g0 = (model.mass_metric)(&origin);
    if g0.nrows() != n || g0.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: g0.nrows(),
        });
    }
    if (&g0 - g0.transpose()).amax() > 1e-12 * g0.amax().max(1.0) || g0.clone().cholesky().is_none()
    {
        return Err(Error::SingularMetric { q: origin });
    }

    // G^{-1} p, or NaNs when G(q) is not positive definite.
    let metric = model.mass_metric.clone();
    let inv_metric_p = move |q: &[f64], p: &[f64]| -> DVector<f64> {
        let p = DVector::from_column_slice(p);
        match metric(q).cholesky() {
            Some(ch) => ch.solve(&p),
            None => DVector::from_element(p.len(), f64::NAN),
        }
    };
    let inv_metric_p = Arc::new(inv_metric_p);

    let hamiltonian: StateFn = {
        let (phi, pot, solve) = (model.phi.clone(), model.potential.clone(), inv_metric_p.clone());
        Arc::new(move |s: &PhaseState| {
            let q = s.q();
            let gp = solve(q, s.p());
            let kinetic: f64 = gp.iter().zip(s.p()).map(|(a, b)| a * b).sum();
            0.5 * (-2.0 * phi(q)).exp() * kinetic + pot(q)
        })
    };

    let grad_h: StateGradFn = {
        let (phi, phi_grad, pot_grad, dmetric, solve) = (
            model.phi.clone(),
            model.phi_grad.clone(),
            model.potential_grad.clone(),
            model.mass_metric_grad.clone(),
            inv_metric_p,
        );
        Arc::new(move |s: &PhaseState| {
            let q = s.q();
            let gp = solve(q, s.p());
            let scale = (-2.0 * phi(q)).exp();
            let kinetic: f64 = gp.iter().zip(s.p()).map(|(a, b)| a * b).sum();
            let dphi = phi_grad(q);
            let du = pot_grad(q);
            let dg = dmetric(q);
            let mut grad = Vec::with_capacity(2 * n);
            for k in 0..n {
                // d/dq_k (p^T G^{-1} p) = -(G^{-1}p)^T (dG/dq_k) (G^{-1}p)
                let quad = gp.dot(&(&dg[k] * &gp));
                grad.push(-dphi[k] * scale * kinetic - 0.5 * scale * quad + du[k]);
            }
            grad.extend(gp.iter().map(|v| scale * v));
            grad
        })
    };

    let conformal_factor: StateFn = {
        let phi = model.phi.clone();
        Arc::new(move |s: &PhaseState| phi(s.q()).exp())
    };

    let grad_n: StateGradFn = {
        let (phi, phi_grad) = (model.phi.clone(), model.phi_grad.clone());
        Arc::new(move |s: &PhaseState| {
            let q = s.q();
            let e = phi(q).exp();
            let mut g: Vec<f64> = phi_grad(q).into_iter().map(|d| e * d).collect();
            g.resize(2 * n, 0.0);
            g
        })
    };

    ConformalSystem::new(
        n,
        hamiltonian,
        grad_h,
        conformal_factor,
        grad_n,
        model.label.clone(),
    )
}

/// Potential energy `U(x, y)` of the planar particle with analytic
/// derivatives up to second order.
pub trait Potential: Send + Sync {
    fn value(&self, x: f64, y: f64) -> f64;
    fn gradient(&self, x: f64, y: f64) -> [f64; 2];
    fn hessian(&self, x: f64, y: f64) -> [[f64; 2]; 2];
}

type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Grad2 = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;
type Hess2 = Arc<dyn Fn(f64, f64) -> [[f64; 2]; 2] + Send + Sync>;

/// A potential assembled from closures. Without an explicit Hessian the
/// implicit solvers fall back on central differences of the gradient.
#[derive(Clone)]
pub struct FnPotential {
    value: Fn2,
    gradient: Grad2,
    hessian: Option<Hess2>,
}

impl FnPotential {
    pub fn new(value: Fn2, gradient: Grad2) -> Self {
        Self {
            value,
            gradient,
            hessian: None,
        }
    }

    pub fn with_hessian(mut self, hessian: Hess2) -> Self {
        self.hessian = Some(hessian);
        self
    }
}

impl Potential for FnPotential {
    fn value(&self, x: f64, y: f64) -> f64 {
        (self.value)(x, y)
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        (self.gradient)(x, y)
    }

    fn hessian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        if let Some(h) = &self.hessian {
            return h(x, y);
        }
        let e = 1e-6;
        let gx = [(self.gradient)(x + e, y), (self.gradient)(x - e, y)];
        let gy = [(self.gradient)(x, y + e), (self.gradient)(x, y - e)];
        let hxx = (gx[0][0] - gx[1][0]) / (2.0 * e);
        let hyy = (gy[0][1] - gy[1][1]) / (2.0 * e);
        let hxy = 0.25 * ((gx[0][1] - gx[1][1]) + (gy[0][0] - gy[1][0])) / e;
        [[hxx, hxy], [hxy, hyy]]
    }
}

/// Potentials for the nonholonomic particle.
#[derive(Clone)]
pub enum ParticlePotential {
    /// `U = (x^2 + y^2) / 2`
    Harmonic,
    /// `U = 0`
    Free,
    Custom(Arc<dyn Potential>),
}

impl fmt::Debug for ParticlePotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl ParticlePotential {
    pub fn name(&self) -> &'static str {
        match self {
            ParticlePotential::Harmonic => "harmonic",
            ParticlePotential::Free => "free",
            ParticlePotential::Custom(_) => "custom",
        }
    }

    pub fn is_x_invariant(&self) -> bool {
        matches!(self, ParticlePotential::Free)
    }
}

impl Potential for ParticlePotential {
    fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            ParticlePotential::Harmonic => 0.5 * (x * x + y * y),
            ParticlePotential::Free => 0.0,
            ParticlePotential::Custom(u) => u.value(x, y),
        }
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        match self {
            ParticlePotential::Harmonic => [x, y],
            ParticlePotential::Free => [0.0, 0.0],
            ParticlePotential::Custom(u) => u.gradient(x, y),
        }
    }

    fn hessian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        match self {
            ParticlePotential::Harmonic => [[1.0, 0.0], [0.0, 1.0]],
            ParticlePotential::Free => [[0.0; 2]; 2],
            ParticlePotential::Custom(u) => u.hessian(x, y),
        }
    }
}

/// The nonholonomic particle: reduced metric `diag(1 + y^2, 1)` and
/// `phi = -ln(1 + y^2) / 2`, so that `N = 1 / sqrt(1 + y^2)` and
/// `H = (p_x^2 + (1 + y^2) p_y^2) / 2 + U`.
///
/// The admissible domain is all of `R^4`.
pub fn particle_model(potential: ParticlePotential) -> MechanicalModel {
    let label = format!("particle-{}", potential.name());
    let pot = Arc::new(potential);
    let (pv, pg) = (pot.clone(), pot);
    MechanicalModel {
        n: 2,
        mass_metric: Arc::new(|q: &[f64]| {
            DMatrix::from_row_slice(2, 2, &[1.0 + q[1] * q[1], 0.0, 0.0, 1.0])
        }),
        mass_metric_grad: Arc::new(|q: &[f64]| {
            vec![
                DMatrix::zeros(2, 2),
                DMatrix::from_row_slice(2, 2, &[2.0 * q[1], 0.0, 0.0, 0.0]),
            ]
        }),
        potential: Arc::new(move |q: &[f64]| pv.value(q[0], q[1])),
        potential_grad: Arc::new(move |q: &[f64]| pg.gradient(q[0], q[1]).to_vec()),
        phi: Arc::new(|q: &[f64]| -0.5 * (1.0 + q[1] * q[1]).ln()),
        phi_grad: Arc::new(|q: &[f64]| vec![0.0, -q[1] / (1.0 + q[1] * q[1])]),
        label,
    }
}

/// Conformal system of the nonholonomic particle in the given potential.
pub fn build_particle(potential: ParticlePotential) -> ConformalSystem {
    phi_simple_to_conformal(&particle_model(potential)).expect("particle metric is positive definite")
}

/// The nonholonomic particle in a fixed potential, bundling its conformal
/// system with the pieces the discrete Lagrangians need.
#[derive(Clone, Debug)]
pub struct Particle {
    potential: ParticlePotential,
    system: ConformalSystem,
}

impl Particle {
    pub fn new(potential: ParticlePotential) -> Self {
        let system = build_particle(potential.clone());
        Self { potential, system }
    }

    pub fn harmonic() -> Self {
        Self::new(ParticlePotential::Harmonic)
    }

    pub fn free() -> Self {
        Self::new(ParticlePotential::Free)
    }

    pub fn potential(&self) -> &ParticlePotential {
        &self.potential
    }

    pub fn system(&self) -> &ConformalSystem {
        &self.system
    }

    /// `N(y)` lifted to any scalar type.
    pub fn conformal<T: Scalar>(&self, y: T) -> T {
        let (n, dn, d2n) = particle_conformal_factor(y.value());
        y.lift(n, dn, d2n)
    }

    /// Reduced Lagrangian `L = ((1 + y^2) x'^2 + y'^2) / 2 - U(x, y)`.
    pub fn lagrangian<T: Scalar>(&self, x: T, y: T, vx: T, vy: T) -> T {
        let (xv, yv) = (x.value(), y.value());
        let u = T::lift2(
            x,
            y,
            self.potential.value(xv, yv),
            self.potential.gradient(xv, yv),
            self.potential.hessian(xv, yv),
        );
        ((T::cst(1.0) + y.sq()) * vx.sq() + vy.sq()).scale(0.5) - u
    }
}

/// `N(y) = 1 / sqrt(1 + y^2)` and its first two derivatives.
pub(crate) fn particle_conformal_factor(y: f64) -> (f64, f64, f64) {
    let s = 1.0 + y * y;
    let n = 1.0 / s.sqrt();
    let n3 = n / s;
    (n, -y * n3, (2.0 * y * y - 1.0) * n3 / s)
}
