//! Variational integrators for the altered particle system and the
//! high-accuracy reference integrator.
//!
//! The discrete Lagrangians are midpoint/trapezoidal quadratures of the
//! altered Lagrangian `N(y) (L + E)`. Each one is symmetric under
//! `q0 <-> q1`, so the resulting maps are self-adjoint and their modified
//! Hamiltonians only have even powers of `h`.
//!
//! The quadratures are normalized per unit time (no factor `h`); the
//! generating function of the step is `h * Lambda`, so
//! `p0 = -h dLambda/dq0` and `p1 = h dLambda/dq1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ConformalSystem, Particle};
use crate::error::{Error, Result};
use crate::jet::{Jet, Scalar};
use crate::state::PhaseState;

/// Which quadrature is applied to the conformal factor (first letter) and to
/// the Lagrangian (second letter): `M`idpoint or `T`rapezoidal. `T` alone
/// applies the trapezoidal rule to the whole product `N (L + E)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LagrangianKind {
    M,
    MT,
    TM,
    TT,
    T,
}

impl LagrangianKind {
    pub const ALL: [LagrangianKind; 5] = [
        LagrangianKind::M,
        LagrangianKind::MT,
        LagrangianKind::TM,
        LagrangianKind::TT,
        LagrangianKind::T,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LagrangianKind::M => "M",
            LagrangianKind::MT => "MT",
            LagrangianKind::TM => "TM",
            LagrangianKind::TT => "TT",
            LagrangianKind::T => "T",
        }
    }
}

impl fmt::Display for LagrangianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LagrangianKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LagrangianKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown discrete lagrangian {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub h: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl StepperConfig {
    pub fn new(h: f64) -> Result<Self> {
        let cfg = Self {
            h,
            newton_tol: 1e-12,
            newton_max_iter: 50,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {}", self.h)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidArgument("newton tolerance must be positive".into()));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidArgument("newton_max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    /// RK4 steps per output interval.
    pub substeps: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { substeps: 1000 }
    }
}

/// The quadrature written in terms of the start point and the increment
/// `(dx, dy) = q1 - q0`, so that the velocity keeps full relative precision
/// when `h` is small.
fn lagrangian_quadrature<T: Scalar>(
    kind: LagrangianKind,
    particle: &Particle,
    [x0, y0, dx, dy]: [T; 4],
    h: f64,
    energy: f64,
) -> T {
    let inv_h = 1.0 / h;
    let vx = dx.scale(inv_h);
    let vy = dy.scale(inv_h);
    let (x1, y1) = (x0 + dx, y0 + dy);
    let e = T::cst(energy);
    let half = |a: T| a.scale(0.5);

    let mid = || {
        let (xm, ym) = (x0 + half(dx), y0 + half(dy));
        particle.lagrangian(xm, ym, vx, vy)
    };
    let ends = || {
        (
            particle.lagrangian(x0, y0, vx, vy),
            particle.lagrangian(x1, y1, vx, vy),
        )
    };
    let n_mid = || particle.conformal(y0 + half(dy));
    let n_trap = || half(particle.conformal(y0) + particle.conformal(y1));

    match kind {
        LagrangianKind::M => n_mid() * (mid() + e),
        LagrangianKind::MT => {
            let (l0, l1) = ends();
            n_mid() * (half(l0 + l1) + e)
        }
        LagrangianKind::TM => n_trap() * (mid() + e),
        LagrangianKind::TT => {
            let (l0, l1) = ends();
            n_trap() * (half(l0 + l1) + e)
        }
        LagrangianKind::T => {
            let (l0, l1) = ends();
            half(particle.conformal(y0) * (l0 + e) + particle.conformal(y1) * (l1 + e))
        }
    }
}

/// `Lambda_kind(x0, y0, x1, y1; E)`.
pub fn discrete_lagrangian(
    kind: LagrangianKind,
    particle: &Particle,
    q0: [f64; 2],
    q1: [f64; 2],
    h: f64,
    energy: f64,
) -> f64 {
    let d = [q1[0] - q0[0], q1[1] - q0[1]];
    lagrangian_quadrature(kind, particle, [q0[0], q0[1], d[0], d[1]], h, energy)
}

/// Value, gradient and Hessian of `Lambda` in `(x0, y0, x1, y1)`.
pub fn discrete_lagrangian_jet(
    kind: LagrangianKind,
    particle: &Particle,
    q0: [f64; 2],
    q1: [f64; 2],
    h: f64,
    energy: f64,
) -> Jet<4> {
    let [x0, y0, x1, y1] = Jet::vars([q0[0], q0[1], q1[0], q1[1]]);
    lagrangian_quadrature(kind, particle, [x0, y0, x1 - x0, y1 - y0], h, energy)
}

/// `(dLambda/dq0, dLambda/dq1)`.
pub fn grad_discrete_lagrangian(
    kind: LagrangianKind,
    particle: &Particle,
    q0: [f64; 2],
    q1: [f64; 2],
    h: f64,
    energy: f64,
) -> ([f64; 2], [f64; 2]) {
    let j = discrete_lagrangian_jet(kind, particle, q0, q1, h, energy);
    ([j.g[0], j.g[1]], [j.g[2], j.g[3]])
}

/// One step of the symplectic map `Psi_{h,E}`: solve `p0 = -h D1 Lambda(q0, q1)`
/// for `q1` by Newton, then `p1 = h D2 Lambda(q0, q1)`.
pub fn symplectic_step(
    kind: LagrangianKind,
    particle: &Particle,
    state: &PhaseState,
    cfg: &StepperConfig,
    energy: f64,
) -> Result<PhaseState> {
    newton_step(kind, particle, state, cfg, energy, 0)
}

/// As [`symplectic_step`], with `polish` extra Newton iterations after the
/// tolerance is met. Used where the step is differenced at tiny `h`.
pub(crate) fn newton_step(
    kind: LagrangianKind,
    particle: &Particle,
    state: &PhaseState,
    cfg: &StepperConfig,
    energy: f64,
    mut polish: usize,
) -> Result<PhaseState> {
    cfg.validate()?;
    if state.dof() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: state.dof(),
        });
    }
    let h = cfg.h;
    let [x0, y0, px0, py0] = state.as_planar();

    // Newton runs on the increment dq = q1 - q0. In these variables
    // dLambda/dq1 = dLambda/d(dq) and dLambda/dq0 = dLambda/dq0|_dq - dLambda/d(dq).
    let predictor = particle.system().altered_vector_field(state, energy)?;
    let mut dq = [h * predictor.dq[0], h * predictor.dq[1]];

    let mut residual = f64::INFINITY;
    for _ in 0..=cfg.newton_max_iter {
        let [qx, qy, dx, dy] = Jet::vars([x0, y0, dq[0], dq[1]]);
        let j = lagrangian_quadrature(kind, particle, [qx, qy, dx, dy], h, energy);
        let f = [px0 + h * (j.g[0] - j.g[2]), py0 + h * (j.g[1] - j.g[3])];
        residual = f[0].hypot(f[1]);
        if !residual.is_finite() {
            break;
        }
        if residual <= cfg.newton_tol && polish == 0 {
            return PhaseState::from_coords(vec![x0 + dq[0], y0 + dq[1], h * j.g[2], h * j.g[3]]);
        }
        let a = h * (j.h[0][2] - j.h[2][2]);
        let b = h * (j.h[0][3] - j.h[2][3]);
        let c = h * (j.h[1][2] - j.h[3][2]);
        let d = h * (j.h[1][3] - j.h[3][3]);
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        dq[0] -= (d * f[0] - b * f[1]) / det;
        dq[1] -= (a * f[1] - c * f[0]) / det;
        if residual <= cfg.newton_tol {
            polish -= 1;
        }
    }
    Err(Error::NewtonDivergence {
        iterations: cfg.newton_max_iter,
        residual,
    })
}

/// `steps + 1` states starting at `state0`, successive states related by
/// [`symplectic_step`].
pub fn trajectory(
    kind: LagrangianKind,
    particle: &Particle,
    state0: &PhaseState,
    cfg: &StepperConfig,
    energy: f64,
    steps: usize,
) -> Result<Vec<PhaseState>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state0.clone());
    for j in 0..steps {
        let next = symplectic_step(kind, particle, &out[j], cfg, energy).map_err(|e| e.at_step(j))?;
        out.push(next);
    }
    Ok(out)
}

fn rk4_step(system: &ConformalSystem, s: &PhaseState, dt: f64) -> Result<PhaseState> {
    let k1 = system.vector_field(s)?.to_vec();
    let k2 = system.vector_field(&s.displaced(&k1, 0.5 * dt)?)?.to_vec();
    let k3 = system.vector_field(&s.displaced(&k2, 0.5 * dt)?)?.to_vec();
    let k4 = system.vector_field(&s.displaced(&k3, dt)?)?.to_vec();
    let incr: Vec<f64> = (0..k1.len())
        .map(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0)
        .collect();
    s.displaced(&incr, dt)
}

/// Advances the conformal flow by `h_out` with `substeps` classical RK4 steps.
pub fn reference_step(
    system: &ConformalSystem,
    state: &PhaseState,
    h_out: f64,
    rcfg: &ReferenceConfig,
) -> Result<PhaseState> {
    if rcfg.substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be >= 1".into()));
    }
    let dt = h_out / rcfg.substeps as f64;
    let mut s = state.clone();
    for _ in 0..rcfg.substeps {
        s = rk4_step(system, &s, dt)?;
    }
    Ok(s)
}

/// Reference solution of the conformal vector field sampled every `h_out`.
pub fn reference_trajectory(
    system: &ConformalSystem,
    state0: &PhaseState,
    h_out: f64,
    steps: usize,
    rcfg: &ReferenceConfig,
) -> Result<Vec<PhaseState>> {
    if rcfg.substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be >= 1".into()));
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state0.clone());
    for j in 0..steps {
        let next = reference_step(system, &out[j], h_out, rcfg).map_err(|e| e.at_step(j))?;
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn parses_kind_names() {
        for k in LagrangianKind::ALL {
            assert_eq!(k.name().parse::<LagrangianKind>().unwrap(), k);
        }
        assert!("MM".parse::<LagrangianKind>().is_err());
    }

    #[test]
    fn lagrangian_examples() {
        let free = Particle::free();
        close(discrete_lagrangian(LagrangianKind::M, &free, [0.0; 2], [0.0; 2], 0.25, 1.0), 1.0, 1e-15);
        close(discrete_lagrangian(LagrangianKind::T, &free, [0.0; 2], [0.0; 2], 0.25, 1.0), 1.0, 1e-15);
        let harm = Particle::harmonic();
        close(
            discrete_lagrangian(LagrangianKind::M, &harm, [0.0, 0.0], [0.25, 0.0], 0.25, 0.0),
            0.4921875,
            1e-15,
        );
    }

    #[test]
    fn equilibrium_has_zero_gradient() {
        let free = Particle::free();
        for e in [0.0, 1.0, -2.5] {
            let (d1, d2) = grad_discrete_lagrangian(LagrangianKind::M, &free, [0.0; 2], [0.0; 2], 0.25, e);
            assert_eq!(d1, [0.0, 0.0]);
            assert_eq!(d2, [0.0, 0.0]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let harm = Particle::harmonic();
        let (q0, q1, h, e) = ([0.3, -0.4], [0.5, -0.1], 0.25, 0.8);
        for kind in LagrangianKind::ALL {
            let (d1, d2) = grad_discrete_lagrangian(kind, &harm, q0, q1, h, e);
            let analytic = [d1[0], d1[1], d2[0], d2[1]];
            let eps = 1e-5;
            for i in 0..4 {
                let mut zp = [q0[0], q0[1], q1[0], q1[1]];
                let mut zm = zp;
                zp[i] += eps;
                zm[i] -= eps;
                let lp = discrete_lagrangian(kind, &harm, [zp[0], zp[1]], [zp[2], zp[3]], h, e);
                let lm = discrete_lagrangian(kind, &harm, [zm[0], zm[1]], [zm[2], zm[3]], h, e);
                let fd = (lp - lm) / (2.0 * eps);
                assert!(
                    (fd - analytic[i]).abs() <= 1e-6 * analytic[i].abs().max(1.0),
                    "{kind} component {i}: {fd} vs {}",
                    analytic[i]
                );
            }
        }
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let free = Particle::free();
        let cfg = StepperConfig::new(0.25).unwrap();
        let s = PhaseState::planar(0.0, 0.0, 0.0, 0.0);
        for kind in LagrangianKind::ALL {
            for e in [0.0, 1.0] {
                assert_eq!(symplectic_step(kind, &free, &s, &cfg, e).unwrap(), s);
            }
        }
    }

    #[test]
    fn newton_failure_is_reported() {
        let harm = Particle::harmonic();
        let cfg = StepperConfig {
            h: 0.25,
            newton_tol: 1e-300,
            newton_max_iter: 1,
        };
        let err = symplectic_step(LagrangianKind::M, &harm, &PhaseState::planar(0.1, 0.2, 1.0, 1.0), &cfg, 1.0)
            .unwrap_err();
        assert!(matches!(err, Error::NewtonDivergence { iterations: 1, .. }));

        let err = trajectory(LagrangianKind::M, &harm, &PhaseState::planar(0.1, 0.2, 1.0, 1.0), &cfg, 1.0, 5)
            .unwrap_err();
        assert!(matches!(err, Error::StepFailed { step: 0, .. }));
    }

    #[test]
    fn invalid_config_is_rejected() {
        assert!(StepperConfig::new(0.0).is_err());
        assert!(StepperConfig::new(-0.1).is_err());
        let cfg = StepperConfig { newton_max_iter: 0, ..StepperConfig::new(0.1).unwrap() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_steps_returns_initial_state() {
        let harm = Particle::harmonic();
        let s = PhaseState::planar(0.0, 0.0, 1.0, 1.0);
        let cfg = StepperConfig::new(0.25).unwrap();
        assert_eq!(trajectory(LagrangianKind::TT, &harm, &s, &cfg, 1.0, 0).unwrap(), vec![s.clone()]);
        let r = reference_trajectory(harm.system(), &s, 0.25, 0, &ReferenceConfig::default()).unwrap();
        assert_eq!(r, vec![s]);
    }

    #[test]
    fn reference_rejects_zero_substeps() {
        let harm = Particle::harmonic();
        let s = PhaseState::planar(0.0, 0.0, 1.0, 1.0);
        assert!(reference_trajectory(harm.system(), &s, 0.25, 3, &ReferenceConfig { substeps: 0 }).is_err());
    }
}
