//! Numerical backward error analysis of one-step maps.
//!
//! A one-step map expands as `Psi_h(x) = x + h d_1(x) + h^2 d_2(x) + ...`.
//! Its modified equation `x' = f_0 + h f_1 + h^2 f_2 + ...` is obtained by
//! matching against the Taylor series of the exact flow of the modified
//! field. Order by order:
//!
//! ```text
//! h^1:  d_1 = f_0
//! h^2:  d_2 = f_1 + 1/2 f_0' f_0
//! h^3:  d_3 = f_2 + 1/2 (f_0' f_1 + f_1' f_0) + 1/6 (f_0''(f_0, f_0) + f_0' f_0' f_0)
//! ```
//!
//! and `f_0''(f_0, f_0) + f_0' f_0' f_0 = (f_0' f_0)' f_0`, the derivative of
//! `g = f_0' f_0` along `f_0`. Every Jacobian appears contracted with a
//! vector, so only directional derivatives are needed.
//!
//! The coefficients `d_k` are fitted by least squares on a geometric ladder of
//! step sizes. All derivatives of extracted quantities are finite
//! differences, so the accuracy of this module is limited by step-size noise;
//! it is a cross-check for closed-form modified Hamiltonians, not a precision
//! instrument.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::dynamics::Particle;
use crate::error::{Error, Result};
use crate::state::PhaseState;
use crate::variational::{newton_step, LagrangianKind, StepperConfig};

type ApplyFn = Arc<dyn Fn(&PhaseState, f64) -> Result<PhaseState> + Send + Sync>;

/// A map `(x, h) -> Psi_h(x)` on a `dimension`-dimensional phase space.
#[derive(Clone)]
pub struct OneStepMap {
    apply: ApplyFn,
    dimension: usize,
}

impl OneStepMap {
    pub fn new(dimension: usize, apply: ApplyFn) -> Self {
        Self { apply, dimension }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// `Psi_h(state)`; `h = 0` is the identity.
    pub fn apply(&self, state: &PhaseState, h: f64) -> Result<PhaseState> {
        if state.coords().len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: state.coords().len(),
            });
        }
        if h == 0.0 {
            return Ok(state.clone());
        }
        (self.apply)(state, h)
    }

    /// `Psi_{h,E}` for one of the particle's discrete Lagrangians, with one
    /// Newton iteration past the tolerance so the map is resolved to
    /// roundoff.
    pub fn variational(kind: LagrangianKind, particle: Particle, energy: f64) -> Self {
        Self::new(
            4,
            Arc::new(move |s: &PhaseState, h: f64| {
                let cfg = StepperConfig {
                    h,
                    newton_tol: 1e-13,
                    newton_max_iter: 50,
                };
                newton_step(kind, &particle, s, &cfg, energy, 1)
            }),
        )
    }
}

/// Fitted coefficients `d_1..d_order` of `Psi_h(x) - x`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorData {
    pub d: Vec<Vec<f64>>,
    pub order: usize,
    pub base_h: f64,
    pub levels: usize,
}

/// Coefficients `f_0, f_1, f_2` of the modified vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedFieldData {
    pub f: Vec<Vec<f64>>,
}

const MAX_ORDER: usize = 3;
const MAX_CONDITION: f64 = 1e12;
/// Central-difference step for `f_0'` in `f_1`.
const JACOBIAN_STEP: f64 = 1e-5;
/// Step of the fourth-order stencils used in the `f_2` recursion, where
/// derivatives are nested two deep.
const NESTED_STEP: f64 = 1e-2;

/// Least-squares fit of `Psi_{h_i}(x) - x = sum_k h_i^k d_k` over
/// `h_i = base_h 2^{-i}`, `i = 0..levels`.
///
/// Two terms beyond `order` are carried in the fit so that the returned
/// coefficients are not biased by the truncated tail. The conditioning
/// estimate is that of the unscaled design matrix `h_i^k`, which bounds how
/// much roundoff in `Psi_h(x) - x` is amplified in the highest coefficient.
pub fn taylor_coefficients(
    map: &OneStepMap,
    state: &PhaseState,
    order: usize,
    base_h: f64,
    levels: usize,
) -> Result<TaylorData> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "extraction order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    if levels < order + 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least order + 2 = {} levels, got {levels}",
            order + 2
        )));
    }
    if !(base_h > 0.0) {
        return Err(Error::InvalidArgument("base_h must be positive".into()));
    }
    let degree = order + 2;
    let dim = state.coords().len();

    // Columns scaled to t_i = h_i / base_h in (0, 1].
    let mut design = DMatrix::zeros(levels, degree);
    let mut rhs = DMatrix::zeros(levels, dim);
    for i in 0..levels {
        let h = base_h * 0.5f64.powi(i as i32);
        let t = 0.5f64.powi(i as i32);
        for k in 0..degree {
            design[(i, k)] = t.powi(k as i32 + 1);
        }
        let next = map.apply(state, h)?;
        for (c, (a, b)) in next.coords().iter().zip(state.coords()).enumerate() {
            rhs[(i, c)] = a - b;
        }
    }

    let mut unscaled = design.clone();
    for k in 0..degree {
        let scale = base_h.powi(k as i32 + 1);
        unscaled.column_mut(k).scale_mut(scale);
    }
    let sv = unscaled.singular_values();
    let condition = sv.max() / sv.min();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::ExtractionUnreliable(format!(
            "design matrix condition estimate {condition:e} exceeds {MAX_CONDITION:e}"
        )));
    }

    let svd = design.svd(true, true);
    let coeffs = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::ExtractionUnreliable(e.to_string()))?;

    let d = (0..order)
        .map(|k| {
            let scale = base_h.powi(k as i32 + 1);
            (0..dim).map(|c| coeffs[(k, c)] / scale).collect()
        })
        .collect();
    Ok(TaylorData {
        d,
        order,
        base_h,
        levels,
    })
}

struct Extractor<'a> {
    map: &'a OneStepMap,
    base_h: f64,
    levels: usize,
}

impl Extractor<'_> {
    fn taylor(&self, x: &PhaseState) -> Result<TaylorData> {
        taylor_coefficients(self.map, x, MAX_ORDER, self.base_h, self.levels)
    }

    fn d1(&self, x: &PhaseState) -> Result<Vec<f64>> {
        Ok(self.taylor(x)?.d.swap_remove(0))
    }

    /// `g = d_1' d_1` by a fourth-order central stencil.
    fn d1_along_d1(&self, x: &PhaseState) -> Result<Vec<f64>> {
        let d1 = self.d1(x)?;
        directional(x, &d1, NESTED_STEP, |y| self.d1(y))
    }

    /// `f_1 = d_2 - 1/2 d_1' d_1` with a fourth-order stencil.
    fn f1_nested(&self, x: &PhaseState) -> Result<Vec<f64>> {
        let d2 = self.taylor(x)?.d.swap_remove(1);
        let g = self.d1_along_d1(x)?;
        Ok(axpy(&d2, -0.5, &g))
    }
}

/// Extracts `f_0 = d_1`, `f_1 = d_2 - 1/2 d_1' d_1` and
/// `f_2 = d_3 - 1/2 (d_1' f_1 + f_1' d_1) - 1/6 (d_1' d_1)' d_1`.
///
/// `f_1` uses a central difference with step `1e-5` for `d_1'`. The `f_2`
/// recursion differentiates extracted quantities twice and uses fourth-order
/// stencils with step `1e-2` instead.
pub fn modified_field_coefficients(
    map: &OneStepMap,
    state: &PhaseState,
    base_h: f64,
    levels: usize,
) -> Result<ModifiedFieldData> {
    let ex = Extractor {
        map,
        base_h,
        levels,
    };
    let base = ex.taylor(state)?;
    let (d1, d2, d3) = (&base.d[0], &base.d[1], &base.d[2]);

    let jd1 = central(state, d1, JACOBIAN_STEP, |y| ex.d1(y))?;
    let f1 = axpy(d2, -0.5, &jd1);

    let f1_nested = ex.f1_nested(state)?;
    let d1_along_f1 = directional(state, &f1_nested, NESTED_STEP, |y| ex.d1(y))?;
    let f1_along_d1 = directional(state, d1, NESTED_STEP, |y| ex.f1_nested(y))?;
    let g_along_d1 = directional(state, d1, NESTED_STEP, |y| ex.d1_along_d1(y))?;

    let f2: Vec<f64> = (0..d3.len())
        .map(|i| d3[i] - 0.5 * (d1_along_f1[i] + f1_along_d1[i]) - g_along_d1[i] / 6.0)
        .collect();

    Ok(ModifiedFieldData {
        f: vec![d1.clone(), f1, f2],
    })
}

fn axpy(a: &[f64], k: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + k * y).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `(g(x + eps v) - g(x - eps v)) / (2 eps)`.
fn central<G>(x: &PhaseState, v: &[f64], eps: f64, g: G) -> Result<Vec<f64>>
where
    G: Fn(&PhaseState) -> Result<Vec<f64>>,
{
    let plus = g(&x.displaced(v, eps)?)?;
    let minus = g(&x.displaced(v, -eps)?)?;
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| (p - m) / (2.0 * eps))
        .collect())
}

/// Directional derivative `g'(x) v` by the fourth-order five-point stencil,
/// taken along the unit vector `v / |v|` with step `eps` and rescaled.
pub(crate) fn directional<G>(x: &PhaseState, v: &[f64], eps: f64, g: G) -> Result<Vec<f64>>
where
    G: Fn(&PhaseState) -> Result<Vec<f64>>,
{
    let len = norm(v);
    if len == 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    let u: Vec<f64> = v.iter().map(|c| c / len).collect();
    let p1 = g(&x.displaced(&u, eps)?)?;
    let m1 = g(&x.displaced(&u, -eps)?)?;
    let p2 = g(&x.displaced(&u, 2.0 * eps)?)?;
    let m2 = g(&x.displaced(&u, -2.0 * eps)?)?;
    Ok((0..p1.len())
        .map(|i| len * (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * eps))
        .collect())
}
