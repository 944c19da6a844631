//! Modified altered Hamiltonian, modified conformal Hamiltonian and modified
//! conformal factor, truncated after the `h^2` term, and the integrator that
//! freezes `E` at the modified energy of the initial point.
//!
//! For the five symmetric discretizations the series contain only even
//! powers of `h`:
//!
//! ```text
//! K_mod(q, p; h, E) = K_E + h^2 K_2(q, p; E) + O(h^4)
//! E_mod(q, p; h)    = H   + h^2 E_2(q, p)    + O(h^4),  K_mod(.; E_mod) = 0
//! N_mod(q, p; h)    = N   + h^2 N_2(q, p)    + O(h^4),  N_mod = -dK_mod/dE
//! ```
//!
//! so `E_2 = K_2(.; H) / N` and `N_2 = -dK_2/dE (.; H)`. The coefficient
//! functions below are closed forms for the nonholonomic particle in the
//! harmonic and free potentials; both identities are checked by the tests.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Particle, ParticlePotential};
use crate::error::{Error, Result};
use crate::jet::{Jet, Scalar};
use crate::state::PhaseState;
use crate::variational::{trajectory, LagrangianKind, StepperConfig};

/// Potentials for which closed-form series coefficients are tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesPotential {
    Harmonic,
    Free,
}

impl SeriesPotential {
    pub const ALL: [SeriesPotential; 2] = [SeriesPotential::Harmonic, SeriesPotential::Free];

    pub fn particle(self) -> Particle {
        match self {
            SeriesPotential::Harmonic => Particle::new(ParticlePotential::Harmonic),
            SeriesPotential::Free => Particle::new(ParticlePotential::Free),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SeriesPotential::Harmonic => "harmonic",
            SeriesPotential::Free => "free",
        }
    }
}

impl fmt::Display for SeriesPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SeriesPotential {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harmonic" => Ok(SeriesPotential::Harmonic),
            "free" => Ok(SeriesPotential::Free),
            _ => Err(Error::InvalidArgument(format!("no series table for potential {s:?}"))),
        }
    }
}

/// Truncation order `l` of the modified series. Odd orders alias the
/// preceding even order since all odd coefficients vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct TruncationOrder(u8);

impl TruncationOrder {
    pub const MAX: u8 = 3;

    pub fn new(ell: u8) -> Result<Self> {
        if ell > Self::MAX {
            return Err(Error::InvalidArgument(format!(
                "truncation order must be in 0..={}, got {ell}",
                Self::MAX
            )));
        }
        Ok(Self(ell))
    }

    pub fn ell(self) -> u8 {
        self.0
    }

    /// The even order actually evaluated: `2 floor(l / 2)`.
    pub fn even(self) -> u8 {
        self.0 & !1
    }

    fn includes_h2(self) -> bool {
        self.even() >= 2
    }
}

impl TryFrom<u8> for TruncationOrder {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TruncationOrder> for u8 {
    fn from(t: TruncationOrder) -> u8 {
        t.0
    }
}

/// Second-order coefficients `K_2`, `E_2`, `N_2` for one potential and one
/// discrete Lagrangian.
#[derive(Debug, Clone)]
pub struct SeriesTable {
    potential: SeriesPotential,
    kind: LagrangianKind,
    particle: Particle,
}

impl SeriesTable {
    pub fn new(potential: SeriesPotential, kind: LagrangianKind) -> Self {
        Self {
            potential,
            kind,
            particle: potential.particle(),
        }
    }

    /// All ten tabulated `(potential, kind)` combinations.
    pub fn all() -> impl Iterator<Item = SeriesTable> {
        SeriesPotential::ALL.into_iter().flat_map(|pot| {
            LagrangianKind::ALL
                .into_iter()
                .map(move |kind| SeriesTable::new(pot, kind))
        })
    }

    pub fn potential(&self) -> SeriesPotential {
        self.potential
    }

    pub fn kind(&self) -> LagrangianKind {
        self.kind
    }

    pub fn particle(&self) -> &Particle {
        &self.particle
    }

    /// `K_2(x, y, p_x, p_y; E)` on any scalar type.
    pub fn k2_generic<T: Scalar>(&self, s: [T; 4], e: T) -> T {
        match self.potential {
            SeriesPotential::Harmonic => harmonic::k2(self.kind, s, e),
            SeriesPotential::Free => free::k2(self.kind, s, e),
        }
    }

    pub fn e2_generic<T: Scalar>(&self, s: [T; 4]) -> T {
        match self.potential {
            SeriesPotential::Harmonic => harmonic::e2(self.kind, s),
            SeriesPotential::Free => free::e2(self.kind, s),
        }
    }

    pub fn n2_generic<T: Scalar>(&self, s: [T; 4]) -> T {
        match self.potential {
            SeriesPotential::Harmonic => harmonic::n2(self.kind, s),
            SeriesPotential::Free => free::n2(self.kind, s),
        }
    }

    pub fn k2(&self, state: &PhaseState, energy: f64) -> f64 {
        self.k2_generic(state.as_planar(), energy)
    }

    pub fn e2(&self, state: &PhaseState) -> f64 {
        self.e2_generic(state.as_planar())
    }

    pub fn n2(&self, state: &PhaseState) -> f64 {
        self.n2_generic(state.as_planar())
    }

    /// `dK_2/dE`, exact (K_2 is a polynomial in E).
    pub fn dk2_denergy(&self, state: &PhaseState, energy: f64) -> f64 {
        let s = state.as_planar().map(Jet::<1>::constant);
        self.k2_generic(s, Jet::var(energy, 0)).g[0]
    }

    /// Gradient of `K_2` in `(x, y, p_x, p_y)` at fixed `E`.
    pub fn grad_k2(&self, state: &PhaseState, energy: f64) -> [f64; 4] {
        let s = Jet::<4>::vars(state.as_planar());
        self.k2_generic(s, Jet::constant(energy)).g
    }

    /// Hamiltonian vector field `J grad K_2` as a flat `(dq, dp)` vector.
    pub fn k2_vector_field(&self, state: &PhaseState, energy: f64) -> [f64; 4] {
        let g = self.grad_k2(state, energy);
        [g[2], g[3], -g[0], -g[1]]
    }

    fn check(&self, state: &PhaseState) -> Result<()> {
        if state.dof() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: state.dof(),
            });
        }
        Ok(())
    }
}

/// `E^(l)(state; h)`: `H` for `l <= 1`, `H + h^2 E_2` for `l >= 2`.
pub fn modified_conformal_hamiltonian(
    table: &SeriesTable,
    ell: TruncationOrder,
    state: &PhaseState,
    h: f64,
) -> Result<f64> {
    table.check(state)?;
    let hamiltonian = table.particle.system().hamiltonian(state)?;
    Ok(if ell.includes_h2() {
        hamiltonian + h * h * table.e2(state)
    } else {
        hamiltonian
    })
}

/// `N_mod^(l)(state; h)`, required to be positive.
pub fn modified_conformal_factor(
    table: &SeriesTable,
    ell: TruncationOrder,
    state: &PhaseState,
    h: f64,
) -> Result<f64> {
    table.check(state)?;
    let n = table.particle.system().conformal_factor(state)?;
    let value = if ell.includes_h2() {
        n + h * h * table.n2(state)
    } else {
        n
    };
    if !(value > 0.0) {
        return Err(Error::NonPositiveConformalFactor { value });
    }
    Ok(value)
}

/// `K_mod^(l)(state; h, E)`.
pub fn modified_altered_hamiltonian(
    table: &SeriesTable,
    ell: TruncationOrder,
    state: &PhaseState,
    h: f64,
    energy: f64,
) -> Result<f64> {
    table.check(state)?;
    let k = table.particle.system().altered_hamiltonian(state, energy)?;
    Ok(if ell.includes_h2() {
        k + h * h * table.k2(state, energy)
    } else {
        k
    })
}

/// Root `E*` of `E -> K_mod^(l)(state; h, E)` by Newton from `E = H(state)`.
pub fn solve_energy(
    table: &SeriesTable,
    ell: TruncationOrder,
    state: &PhaseState,
    h: f64,
) -> Result<f64> {
    const TOL: f64 = 1e-13;
    const MAX_ITER: usize = 50;

    table.check(state)?;
    let n = table.particle.system().conformal_factor(state)?;
    let mut energy = table.particle.system().hamiltonian(state)?;
    let mut residual = f64::INFINITY;
    for _ in 0..=MAX_ITER {
        residual = modified_altered_hamiltonian(table, ell, state, h, energy)?;
        if residual.abs() <= TOL {
            return Ok(energy);
        }
        let mut slope = -n;
        if ell.includes_h2() {
            slope += h * h * table.dk2_denergy(state, energy);
        }
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        energy -= residual / slope;
    }
    Err(Error::NewtonDivergence {
        iterations: MAX_ITER,
        residual: residual.abs(),
    })
}

/// `Phi_h^(l)`: the symplectic map `Psi_{h,E}` of the table's discrete
/// Lagrangian with `E = E^(l)(state0; h)` computed once at the initial point.
pub fn proposed_integrator(
    table: &SeriesTable,
    ell: TruncationOrder,
    state0: &PhaseState,
    cfg: &StepperConfig,
    steps: usize,
) -> Result<Vec<PhaseState>> {
    let energy = modified_conformal_hamiltonian(table, ell, state0, cfg.h)?;
    trajectory(table.kind, &table.particle, state0, cfg, energy, steps)
}

/// Coefficients for `U = (x^2 + y^2) / 2`.
mod harmonic {
    use super::*;

    pub(super) fn k2<T: Scalar>(kind: LagrangianKind, [x, y, px, py]: [T; 4], e: T) -> T {
        let (x2, y2, px2, py2) = (x.sq(), y.sq(), px.sq(), py.sq());
        let (x4, y4, px4, py4, e2) = (x2.sq(), y2.sq(), px2.sq(), py2.sq(), e.sq());
        let y6 = y4 * y2;
        let pre = (y2 + 1.0).powf(-2.5) * (1.0 / 96.0);
        match kind {
            LagrangianKind::M => {
                pre * ((py4 * 3.0 + py2 * 2.0 - 1.0) * y6
                    + (py4 * 2.0 - (px2 * 3.0 - e * 6.0 - 4.0) * py2 - (py2 * 3.0 - 1.0) * x2 + px2
                        - e * 2.0
                        - 2.0)
                        * y4
                        * 2.0
                    - (px4 + py4 + x4 - e * px2 * 4.0
                        + (px2 * 2.0 - e * 4.0 - 1.0) * py2 * 2.0
                        + (px2 + py2 * 2.0 - e * 2.0) * x2 * 2.0
                        + e2 * 4.0
                        + e * 8.0
                        + 4.0)
                        * y2
                    - py4 * 2.0
                    + (px2 - e * 2.0 - 2.0) * py2 * 2.0
                    + (py2 - 2.0) * x2 * 2.0
                    - px2 * 4.0)
            }
            LagrangianKind::MT => {
                pre * ((py4 * 3.0 + py2 * 14.0 - 1.0) * y6
                    + (py4 * 2.0 - (px2 * 9.0 - e * 6.0 - 22.0) * py2 - (py2 * 3.0 - 1.0) * x2 + px2
                        - e * 2.0
                        - 2.0)
                        * y4
                        * 2.0
                    - (px4 + py4 + x4 - (e + 3.0) * px2 * 4.0
                        + (px2 * 14.0 - e * 4.0 - 19.0) * py2 * 2.0
                        + (px2 + py2 * 2.0 - e * 2.0) * x2 * 2.0
                        + e2 * 4.0
                        + e * 8.0
                        + 4.0)
                        * y2
                    - py4 * 2.0
                    - (px2 * 5.0 + e * 2.0 - 4.0) * py2 * 2.0
                    + (py2 - 2.0) * x2 * 2.0
                    + px2 * 8.0)
            }
            LagrangianKind::TM => {
                -pre * ((py4 * 9.0 - py2 * 14.0 + 1.0) * y6
                    + (py4 * 7.0 + (px2 * 9.0 + e * 6.0 - 7.0) * py2 - (py2 * 3.0 + 1.0) * x2 - px2
                        + e * 2.0
                        + 2.0)
                        * y4
                        * 2.0
                    + (px4 + py4 + x4 - e * px2 * 4.0
                        + (px2 * 5.0 + e * 2.0 + 2.0) * py2 * 2.0
                        + (px2 - py2 - e * 2.0) * x2 * 2.0
                        + e2 * 4.0
                        + e * 8.0
                        + 4.0)
                        * y2
                    - py4 * 4.0
                    - (px2 * 2.0 + e * 2.0 - 1.0) * py2 * 4.0
                    + (py2 + 1.0) * x2 * 4.0
                    + px2 * 4.0)
            }
            LagrangianKind::TT => {
                -pre * ((py4 * 9.0 - py2 * 26.0 + 1.0) * y6
                    + (py4 * 7.0 + (px2 * 15.0 + e * 6.0 - 25.0) * py2 - (py2 * 3.0 + 1.0) * x2 - px2
                        + e * 2.0
                        + 2.0)
                        * y4
                        * 2.0
                    + (px4 + py4 + x4 - (e + 3.0) * px2 * 4.0
                        + (px2 * 17.0 + e * 2.0 - 16.0) * py2 * 2.0
                        + (px2 - py2 - e * 2.0) * x2 * 2.0
                        + e2 * 4.0
                        + e * 8.0
                        + 4.0)
                        * y2
                    - py4 * 4.0
                    + (px2 - e * 2.0 - 2.0) * py2 * 4.0
                    + (py2 + 1.0) * x2 * 4.0
                    - px2 * 8.0)
            }
            LagrangianKind::T => {
                -pre * ((py4 * 9.0 - py2 * 2.0 + 1.0) * y6
                    + px * py * x * y2 * y * 24.0
                    + (py4 * 7.0 + (px2 * 3.0 + e * 6.0 - 1.0) * py2 - (py2 * 3.0 + 1.0) * x2 - px2
                        + e * 2.0
                        + 2.0)
                        * y4
                        * 2.0
                    + (px4 + py4 + x4 - (e + 3.0) * px2 * 4.0
                        + (px2 * 5.0 + e * 2.0 - 4.0) * py2 * 2.0
                        + (px2 - py2 - e * 2.0) * x2 * 2.0
                        + e2 * 4.0
                        + e * 8.0
                        + 4.0)
                        * y2
                    - py4 * 4.0
                    + px * py * x * y * 24.0
                    + (px2 - e * 2.0 - 2.0) * py2 * 4.0
                    + (py2 + 1.0) * x2 * 4.0
                    - px2 * 8.0)
            }
        }
    }

    pub(super) fn e2<T: Scalar>(kind: LagrangianKind, [x, y, px, py]: [T; 4]) -> T {
        let (x2, y2, px2, py2) = (x.sq(), y.sq(), px.sq(), py.sq());
        let (y4, py4) = (y2.sq(), py2.sq());
        let den = ((y2 + 1.0) * 24.0).recip();
        match kind {
            LagrangianKind::M => {
                den * (py4 * y4 * 2.0 + py4 * y2 + py2 * y4 - py4 - y4 - px2 - py2 - x2 - y2)
            }
            LagrangianKind::MT => {
                den * (py4 * y4 * 2.0 - px2 * py2 * y2 * 3.0 + py4 * y2 + py2 * y4 * 4.0
                    - px2 * py2 * 3.0
                    - py4
                    + py2 * y2 * 6.0
                    - y4
                    + px2 * 2.0
                    + py2 * 2.0
                    - x2
                    - y2)
            }
            LagrangianKind::TM => {
                -den * (py4 * y4 * 4.0 + px2 * py2 * y2 * 6.0 + py4 * y2 * 2.0 - py2 * y4
                    - px2 * py2 * 3.0
                    - py4 * 2.0
                    + y4
                    + px2
                    + py2
                    + x2
                    + y2)
            }
            LagrangianKind::TT => {
                -den * (py4 * y4 * 4.0 + px2 * py2 * y2 * 9.0 + py4 * y2 * 2.0
                    - py2 * y4 * 4.0
                    - py4 * 2.0
                    - py2 * y2 * 6.0
                    + y4
                    - px2 * 2.0
                    - py2 * 2.0
                    + x2
                    + y2)
            }
            LagrangianKind::T => {
                -den * (py4 * y4 * 4.0 + px2 * py2 * y2 * 3.0 + py4 * y2 * 2.0 + py2 * y4 * 2.0
                    - py4 * 2.0
                    + px * py * x * y * 6.0
                    + y4
                    - px2 * 2.0
                    - py2 * 2.0
                    + x2
                    + y2)
            }
        }
    }

    pub(super) fn n2<T: Scalar>(kind: LagrangianKind, [_x, y, _px, py]: [T; 4]) -> T {
        let (y2, py2) = (y.sq(), py.sq());
        let den = (y2 + 1.0).powf(-1.5);
        match kind {
            LagrangianKind::M | LagrangianKind::MT => {
                -den * ((py2 - 1.0) * y2 * 2.0 - py2) * (1.0 / 24.0)
            }
            LagrangianKind::TM | LagrangianKind::TT | LagrangianKind::T => {
                den * ((py2 * 2.0 + 1.0) * y2 - py2) * (1.0 / 12.0)
            }
        }
    }
}

/// Coefficients for `U = 0`.
mod free {
    use super::*;

    pub(super) fn k2<T: Scalar>(kind: LagrangianKind, [_x, y, px, py]: [T; 4], e: T) -> T {
        let (y2, px2, py2) = (y.sq(), px.sq(), py.sq());
        let (y4, px4, py4, e2) = (y2.sq(), px2.sq(), py2.sq(), e.sq());
        let y6 = y4 * y2;
        let pre = (y2 + 1.0).powf(-2.5) * (1.0 / 96.0);
        match kind {
            LagrangianKind::M => {
                pre * (py4 * y6 * 3.0
                    + (py4 * 2.0 - (px2 - e * 2.0) * py2 * 3.0) * y4 * 2.0
                    - py4 * 2.0
                    + (px2 - e * 2.0) * py2 * 2.0
                    - (px4 + py4 - e * px2 * 4.0 + (px2 - e * 2.0) * py2 * 4.0 + e2 * 4.0) * y2)
            }
            LagrangianKind::MT => {
                pre * (py4 * y6 * 3.0
                    + (py4 * 2.0 - (px2 * 3.0 - e * 2.0) * py2 * 3.0) * y4 * 2.0
                    - py4 * 2.0
                    - (px2 * 5.0 + e * 2.0) * py2 * 2.0
                    - (px4 + py4 - e * px2 * 4.0 + (px2 * 7.0 - e * 2.0) * py2 * 4.0 + e2 * 4.0)
                        * y2)
            }
            LagrangianKind::TM => {
                -pre * (py4 * y6 * 9.0
                    + (py4 * 7.0 + (px2 * 3.0 + e * 2.0) * py2 * 3.0) * y4 * 2.0
                    - py4 * 4.0
                    - (px2 + e) * py2 * 8.0
                    + (px4 + py4 - e * px2 * 4.0 + (px2 * 5.0 + e * 2.0) * py2 * 2.0 + e2 * 4.0)
                        * y2)
            }
            LagrangianKind::TT => {
                -pre * (py4 * y6 * 9.0
                    + (py4 * 7.0 + (px2 * 5.0 + e * 2.0) * py2 * 3.0) * y4 * 2.0
                    - py4 * 4.0
                    + (px2 - e * 2.0) * py2 * 4.0
                    + (px4 + py4 - e * px2 * 4.0 + (px2 * 17.0 + e * 2.0) * py2 * 2.0 + e2 * 4.0)
                        * y2)
            }
            LagrangianKind::T => {
                -pre * (py4 * y6 * 9.0
                    + (py4 * 7.0 + (px2 + e * 2.0) * py2 * 3.0) * y4 * 2.0
                    - py4 * 4.0
                    + (px2 - e * 2.0) * py2 * 4.0
                    + (px4 + py4 - e * px2 * 4.0 + (px2 * 5.0 + e * 2.0) * py2 * 2.0 + e2 * 4.0)
                        * y2)
            }
        }
    }

    pub(super) fn e2<T: Scalar>(kind: LagrangianKind, [_x, y, px, py]: [T; 4]) -> T {
        let (y2, px2, py2) = (y.sq(), px.sq(), py.sq());
        let (y4, py4) = (y2.sq(), py2.sq());
        let den = ((y2 + 1.0) * 24.0).recip();
        match kind {
            LagrangianKind::M => py4 * y2 * (1.0 / 12.0) - py4 * (1.0 / 24.0),
            LagrangianKind::MT => {
                py4 * y2 * (1.0 / 12.0) - px2 * py2 * (1.0 / 8.0) - py4 * (1.0 / 24.0)
            }
            LagrangianKind::TM => {
                -den * (py4 * y4 * 4.0 - px2 * py2 * 3.0 - py4 * 2.0
                    + (px2 * py2 * 3.0 + py4) * y2 * 2.0)
            }
            LagrangianKind::TT => {
                -den * (py4 * y4 * 4.0 - py4 * 2.0 + (px2 * py2 * 9.0 + py4 * 2.0) * y2)
            }
            LagrangianKind::T => {
                -den * (py4 * y4 * 4.0 - py4 * 2.0 + (px2 * py2 * 3.0 + py4 * 2.0) * y2)
            }
        }
    }

    pub(super) fn n2<T: Scalar>(kind: LagrangianKind, [_x, y, _px, py]: [T; 4]) -> T {
        let (y2, py2) = (y.sq(), py.sq());
        let den = (y2 + 1.0).powf(-1.5);
        match kind {
            LagrangianKind::M | LagrangianKind::MT => -den * (py2 * y2 * 2.0 - py2) * (1.0 / 24.0),
            LagrangianKind::TM | LagrangianKind::TT | LagrangianKind::T => {
                den * (py2 * y2 * 2.0 - py2) * (1.0 / 12.0)
            }
        }
    }
}
