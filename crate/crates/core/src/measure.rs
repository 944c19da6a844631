//! Point clouds and Monte Carlo volumes of their convex hulls with respect to
//! weighted measures on the four-dimensional phase space.
//!
//! Hull membership of a sample `x` is decided by Wolfe's minimum-norm-point
//! algorithm on `conv(v_i - x)`: `x` is a member iff the minimum squared
//! norm is at most `membership_tol`, measured in units of the cloud's squared
//! circumradius. Every sample index owns a fixed window of a ChaCha8 stream,
//! and partial sums are reduced in chunk order, so estimates are bit-identical
//! for any number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::ConformalSystem;
use crate::error::{Error, Result};
use crate::series::{modified_conformal_factor, SeriesTable, TruncationOrder};
use crate::state::PhaseState;

const DIM: usize = 4;
const CHUNK: u64 = 4096;
const LANES: usize = 4;
/// Leading samples used to learn membership shortcuts.
const PILOT: u64 = 2048;
/// ChaCha words consumed per sample: four `f64` of two words each.
const WORDS_PER_SAMPLE: u128 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<PhaseState>,
}

impl PointCloud {
    pub fn new(points: Vec<PhaseState>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("point cloud must be nonempty".into()));
        }
        for p in &points {
            if p.coords().len() != DIM {
                return Err(Error::DimensionMismatch {
                    expected: DIM,
                    actual: p.coords().len(),
                });
            }
        }
        Ok(Self { points })
    }

    pub fn from_arrays(points: &[[f64; DIM]]) -> Result<Self> {
        points
            .iter()
            .map(|p| PhaseState::from_coords(p.to_vec()))
            .collect::<Result<Vec<_>>>()
            .and_then(Self::new)
    }

    pub fn points(&self) -> &[PhaseState] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> [f64; DIM] {
        let mut c = [0.0; DIM];
        for p in &self.points {
            for (ci, v) in c.iter_mut().zip(p.coords()) {
                *ci += v;
            }
        }
        c.map(|v| v / self.points.len() as f64)
    }

    pub fn translated(&self, offset: [f64; DIM]) -> Result<Self> {
        self.points
            .iter()
            .map(|p| p.displaced(&offset, 1.0))
            .collect::<Result<Vec<_>>>()
            .map(|points| Self { points })
    }

    fn arrays(&self) -> Vec<[f64; DIM]> {
        self.points
            .iter()
            .map(|p| {
                let c = p.coords();
                [c[0], c[1], c[2], c[3]]
            })
            .collect()
    }

    /// Per-coordinate `(min, max)`.
    pub fn bounding_box(&self) -> ([f64; DIM], [f64; DIM]) {
        let mut lo = [f64::INFINITY; DIM];
        let mut hi = [f64::NEG_INFINITY; DIM];
        for p in &self.points {
            for (i, &v) in p.coords().iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        (lo, hi)
    }
}

const GOLDEN: f64 = 1.618_033_988_749_895;

/// The 120 vertices of the 600-cell with circumradius `radius` centered at
/// `center`: the 8 permutations of `(+-1, 0, 0, 0)`, the 16 points
/// `(+-1/2, +-1/2, +-1/2, +-1/2)` and the 96 even permutations of
/// `1/2 (+-phi, +-1, +-1/phi, 0)`, in that order.
pub fn cell600_vertices(center: [f64; DIM], radius: f64) -> Result<PointCloud> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let mut unit: Vec<[f64; DIM]> = Vec::with_capacity(120);
    for i in 0..DIM {
        for sign in [1.0, -1.0] {
            let mut v = [0.0; DIM];
            v[i] = sign;
            unit.push(v);
        }
    }
    for bits in 0..16u32 {
        unit.push(std::array::from_fn(|i| if bits >> i & 1 == 0 { 0.5 } else { -0.5 }));
    }
    let base = [GOLDEN / 2.0, 0.5, 0.5 / GOLDEN, 0.0];
    for perm in even_permutations() {
        for bits in 0..8u32 {
            let mut v = [0.0; DIM];
            for (slot, &from) in perm.iter().enumerate() {
                let sign = if from < 3 && bits >> from & 1 == 1 { -1.0 } else { 1.0 };
                v[slot] = sign * base[from];
            }
            unit.push(v);
        }
    }
    let points: Vec<[f64; DIM]> = unit
        .iter()
        .map(|u| std::array::from_fn(|i| center[i] + radius * u[i]))
        .collect();
    PointCloud::from_arrays(&points)
}

fn even_permutations() -> Vec<[usize; DIM]> {
    let mut out = Vec::with_capacity(12);
    for a in 0..DIM {
        for b in 0..DIM {
            for c in 0..DIM {
                for d in 0..DIM {
                    let p = [a, b, c, d];
                    let distinct = (0..DIM).all(|i| (i + 1..DIM).all(|j| p[i] != p[j]));
                    let inversions = (0..DIM)
                        .flat_map(|i| (i + 1..DIM).map(move |j| (i, j)))
                        .filter(|&(i, j)| p[i] > p[j])
                        .count();
                    if distinct && inversions % 2 == 0 {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// `count` deterministic low-discrepancy points on the 3-sphere of radius
/// `radius` about `center`: a Halton sequence in bases 2, 3, 5 pushed
/// through the measure-preserving map from the unit cube to `S^3`.
pub fn sphere_points(center: [f64; DIM], radius: f64, count: usize) -> Result<PointCloud> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    if count == 0 {
        return Err(Error::InvalidArgument("point count must be positive".into()));
    }
    let tau = std::f64::consts::TAU;
    let points: Vec<[f64; DIM]> = (1..=count as u64)
        .map(|k| {
            let (u1, u2, u3) = (radical_inverse(k, 2), radical_inverse(k, 3), radical_inverse(k, 5));
            let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
            let (s2, c2) = (tau * u2).sin_cos();
            let (s3, c3) = (tau * u3).sin_cos();
            let u = [a * s2, a * c2, b * s3, b * c3];
            std::array::from_fn(|i| center[i] + radius * u[i])
        })
        .collect();
    PointCloud::from_arrays(&points)
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

/// Density of the measure a hull volume is taken with respect to.
#[derive(Debug, Clone)]
pub enum DensityKind {
    Euclidean,
    /// `N^{-1}`, invariant under the conformal flow.
    Mu0(ConformalSystem),
    /// `(N_mod^(2))^{-1}` for the table's integrator at step size `h`.
    MuMod2 { table: SeriesTable, h: f64 },
}

impl DensityKind {
    pub fn density(&self, state: &PhaseState) -> Result<f64> {
        match self {
            DensityKind::Euclidean => Ok(1.0),
            DensityKind::Mu0(system) => Ok(1.0 / system.conformal_factor(state)?),
            DensityKind::MuMod2 { table, h } => {
                let ell = TruncationOrder::new(2)?;
                Ok(1.0 / modified_conformal_factor(table, ell, state, *h)?)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DensityKind::Euclidean => "euclidean",
            DensityKind::Mu0(_) => "mu0",
            DensityKind::MuMod2 { .. } => "mu_mod2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeConfig {
    pub samples: u64,
    pub seed: u64,
    pub membership_tol: f64,
    pub fw_max_iter: usize,
}

impl Default for VolumeConfig {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: 0,
            membership_tol: 1e-9,
            fw_max_iter: 2000,
        }
    }
}

impl VolumeConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 10_000 {
            return Err(Error::InvalidArgument(format!(
                "at least 10^4 samples are required, got {}",
                self.samples
            )));
        }
        if !(self.membership_tol > 0.0) {
            return Err(Error::InvalidArgument("membership_tol must be positive".into()));
        }
        if self.fw_max_iter == 0 {
            return Err(Error::InvalidArgument("fw_max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullVolume {
    pub value: f64,
    pub std_error: f64,
    /// Fewer than five affinely independent points: the hull has no volume.
    pub degenerate: bool,
}

impl HullVolume {
    const DEGENERATE: HullVolume = HullVolume {
        value: 0.0,
        std_error: 0.0,
        degenerate: true,
    };
}

/// Outcome of one membership query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Membership {
    Inside,
    Outside,
    /// Iteration cap reached with the squared distance within `10 * tol`.
    Ambiguous { iterations: usize, distance: f64 },
}

/// Convex hull of a point cloud, queried by Wolfe's minimum-norm-point
/// algorithm. Coordinates are centered on the vertex centroid and scaled by
/// the circumradius.
#[derive(Debug, Clone)]
pub struct Hull {
    vertices: Vec<[f64; DIM]>,
    /// Vertex coordinates by axis, padded to a multiple of `LANES` with
    /// copies of vertex 0.
    soa: [Vec<f64>; DIM],
    norms: Vec<f64>,
    center: [f64; DIM],
    scale: f64,
    tol: f64,
    max_iter: usize,
    planes: Vec<Plane>,
    simplices: Vec<Simplex>,
}

/// Supporting half-space `<normal, u> <= offset` of the scaled hull.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Plane {
    normal: [f64; DIM],
    offset: f64,
}

/// A full-dimensional simplex of hull vertices, stored as the map to its
/// barycentric coordinates `1..=DIM`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Simplex {
    origin: [f64; DIM],
    inverse: [[f64; DIM]; DIM],
}

impl Simplex {
    fn new(corners: &[[f64; DIM]; DIM + 1]) -> Option<Self> {
        let m = nalgebra::Matrix4::from_fn(|r, c| corners[c + 1][r] - corners[0][r]);
        let inv = m.try_inverse()?;
        Some(Self {
            origin: corners[0],
            inverse: std::array::from_fn(|r| std::array::from_fn(|c| inv[(r, c)])),
        })
    }

    fn contains(&self, y: &[f64; DIM]) -> bool {
        let d: [f64; DIM] = std::array::from_fn(|i| y[i] - self.origin[i]);
        let mut total = 0.0;
        for row in &self.inverse {
            let b = dot(row, &d);
            if b < 0.0 {
                return false;
            }
            total += b;
        }
        total <= 1.0
    }
}

/// What settled a query that reached Wolfe's algorithm.
enum Witness {
    None,
    Plane(Plane),
    Simplex([usize; DIM + 1]),
}

const MAX_PLANES: usize = 24;
const MAX_SIMPLICES: usize = 24;

impl Hull {
    pub fn new(cloud: &PointCloud, membership_tol: f64, max_iter: usize) -> Self {
        let pts = cloud.arrays();
        let center = cloud.centroid();
        let scale = pts
            .iter()
            .map(|p| dist2(p, &center))
            .fold(0.0, f64::max)
            .sqrt();
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let vertices: Vec<[f64; DIM]> = pts
            .iter()
            .map(|p| std::array::from_fn(|i| (p[i] - center[i]) / scale))
            .collect();
        let norms = vertices.iter().map(norm2).collect();
        let padded = vertices.len().div_ceil(LANES) * LANES;
        let soa = std::array::from_fn(|d| {
            (0..padded)
                .map(|i| vertices[if i < vertices.len() { i } else { 0 }][d])
                .collect()
        });
        Self {
            vertices,
            soa,
            norms,
            center,
            scale,
            tol: membership_tol,
            max_iter,
            planes: Vec::new(),
            simplices: Vec::new(),
        }
    }

    /// Runs Wolfe's algorithm on `pilot` points and keeps the separating
    /// half-spaces and enclosing simplices that settle the most of them.
    /// Later queries try these first. A half-space only rejects points
    /// farther than the tolerance and a simplex only accepts points inside
    /// it, so every answer agrees with the plain algorithm.
    pub fn learn(&mut self, pilot: &[[f64; DIM]]) {
        self.planes.clear();
        self.simplices.clear();
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        let mut planes = Vec::new();
        let mut simplices = Vec::new();
        for x in pilot {
            let y = self.scaled(x);
            if self.outside_circumsphere(&y) {
                continue;
            }
            let (m, witness) = self.min_norm(&y);
            match (m, witness) {
                (Membership::Inside, Witness::Simplex(idx)) => {
                    inside.push(y);
                    let corners = idx.map(|i| self.vertices[i]);
                    if let Some(s) = Simplex::new(&corners) {
                        simplices.push(s);
                    }
                }
                (Membership::Inside, _) => inside.push(y),
                (Membership::Outside, Witness::Plane(p)) => {
                    outside.push(y);
                    planes.push(p);
                }
                (Membership::Outside, _) => outside.push(y),
                _ => {}
            }
        }
        let margin = self.tol.sqrt();
        self.planes = greedy_cover(&planes, &outside, MAX_PLANES, |p, y| dot(&p.normal, y) > p.offset + margin);
        self.simplices = greedy_cover(&simplices, &inside, MAX_SIMPLICES, |s, y| s.contains(y));
    }

    fn scaled(&self, x: &[f64; DIM]) -> [f64; DIM] {
        std::array::from_fn(|i| (x[i] - self.center[i]) / self.scale)
    }

    /// The circumsphere has unit radius in scaled coordinates.
    fn outside_circumsphere(&self, y: &[f64; DIM]) -> bool {
        let r2 = norm2(y);
        r2 > 1.0 && (r2.sqrt() - 1.0).powi(2) > self.tol
    }

    /// Index and value of `min_i <a, u_i>`.
    fn min_dot(&self, a: &[f64; DIM]) -> (usize, f64) {
        let [x0, x1, x2, x3] = &self.soa;
        let mut m = [f64::INFINITY; LANES];
        let mut idx = [0usize; LANES];
        for (c, (((c0, c1), c2), c3)) in x0
            .chunks_exact(LANES)
            .zip(x1.chunks_exact(LANES))
            .zip(x2.chunks_exact(LANES))
            .zip(x3.chunks_exact(LANES))
            .enumerate()
        {
            for l in 0..LANES {
                let d = a[0] * c0[l] + a[1] * c1[l] + a[2] * c2[l] + a[3] * c3[l];
                if d < m[l] {
                    m[l] = d;
                    idx[l] = c * LANES + l;
                }
            }
        }
        let mut best = (idx[0], m[0]);
        for l in 1..LANES {
            if m[l] < best.1 {
                best = (idx[l], m[l]);
            }
        }
        if best.0 >= self.vertices.len() {
            best.0 = 0;
        }
        best
    }

    /// Index of the vertex nearest to `y`.
    fn nearest(&self, y: &[f64; DIM]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, (u, n)) in self.vertices.iter().zip(&self.norms).enumerate() {
            let d = n - 2.0 * dot(u, y);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    pub fn classify(&self, x: &[f64; DIM]) -> Membership {
        let y = self.scaled(x);
        if self.outside_circumsphere(&y) {
            return Membership::Outside;
        }
        let margin = self.tol.sqrt();
        if self.planes.iter().any(|p| dot(&p.normal, &y) > p.offset + margin) {
            return Membership::Outside;
        }
        if self.simplices.iter().any(|s| s.contains(&y)) {
            return Membership::Inside;
        }
        self.min_norm(&y).0
    }

    pub fn contains(&self, x: &[f64; DIM]) -> bool {
        matches!(self.classify(x), Membership::Inside)
    }

    /// Wolfe's algorithm on the shifted vertices `w_i = u_i - y`, with early
    /// exits once the current iterate or a separating hyperplane settles
    /// membership.
    fn min_norm(&self, y: &[f64; DIM]) -> (Membership, Witness) {
        const MAX_ACTIVE: usize = DIM + 2;
        let w = |i: usize| -> [f64; DIM] {
            let u = &self.vertices[i];
            std::array::from_fn(|d| u[d] - y[d])
        };
        // p is (numerically) optimal or the budget is spent
        let settle = |p: &[f64; DIM], pp: f64, iterations: usize| {
            if pp <= 10.0 * self.tol {
                let m = Membership::Ambiguous {
                    iterations,
                    distance: pp,
                };
                return (m, Witness::None);
            }
            let norm = pp.sqrt();
            let normal = p.map(|v| -v / norm);
            let offset = self.vertices.iter().map(|u| dot(&normal, u)).fold(f64::NEG_INFINITY, f64::max);
            (Membership::Outside, Witness::Plane(Plane { normal, offset }))
        };

        let start = self.nearest(y);
        let mut active = [0usize; MAX_ACTIVE];
        let mut pts = [[0.0; DIM]; MAX_ACTIVE];
        let mut lambda = [0.0; MAX_ACTIVE];
        let mut k = 1;
        active[0] = start;
        pts[0] = w(start);
        lambda[0] = 1.0;
        let mut p = pts[0];
        let mut iterations = 0;

        loop {
            let pp = norm2(&p);
            if pp <= self.tol {
                let witness = if k == DIM + 1 {
                    Witness::Simplex(std::array::from_fn(|i| active[i]))
                } else {
                    Witness::None
                };
                return (Membership::Inside, witness);
            }
            // min_i <p, w_i> = min_i <p, u_i> - <p, y> bounds the distance from below
            let (j, du) = self.min_dot(&p);
            let lower = du - dot(&p, y);
            if lower > 0.0 && lower * lower > self.tol * pp {
                let norm = pp.sqrt();
                let plane = Plane {
                    normal: p.map(|v| -v / norm),
                    offset: -du / norm,
                };
                return (Membership::Outside, Witness::Plane(plane));
            }
            let optimal = pp - lower <= 1e-13 * (1.0 + pp) || active[..k].contains(&j);
            if optimal || iterations >= self.max_iter || k == MAX_ACTIVE {
                return settle(&p, pp, iterations);
            }
            active[k] = j;
            pts[k] = w(j);
            lambda[k] = 0.0;
            k += 1;

            loop {
                iterations += 1;
                let Some(mu) = affine_min_norm(&pts[..k]) else {
                    // only happens when p is already optimal up to roundoff
                    return settle(&p, pp, iterations);
                };
                if mu[..k].iter().all(|&m| m > 0.0) {
                    lambda[..k].copy_from_slice(&mu[..k]);
                    break;
                }
                // move towards mu until the first weight vanishes, then drop it
                let theta = (0..k)
                    .filter(|&i| mu[i] <= 0.0)
                    .map(|i| lambda[i] / (lambda[i] - mu[i]))
                    .fold(1.0, f64::min);
                let mut kept = 0;
                for i in 0..k {
                    let l = (1.0 - theta) * lambda[i] + theta * mu[i];
                    if l > 1e-14 {
                        active[kept] = active[i];
                        pts[kept] = pts[i];
                        lambda[kept] = l;
                        kept += 1;
                    }
                }
                if kept == 0 {
                    return settle(&p, pp, iterations);
                }
                k = kept;
                let total: f64 = lambda[..k].iter().sum();
                lambda[..k].iter_mut().for_each(|l| *l /= total);
                if iterations >= self.max_iter {
                    break;
                }
            }
            p = [0.0; DIM];
            for i in 0..k {
                for d in 0..DIM {
                    p[d] += lambda[i] * pts[i][d];
                }
            }
        }
    }
}

/// Greedy set cover: repeatedly picks the candidate settling the most
/// still-unsettled points, up to `limit` picks.
fn greedy_cover<T: Copy>(
    candidates: &[T],
    points: &[[f64; DIM]],
    limit: usize,
    covers: impl Fn(&T, &[f64; DIM]) -> bool,
) -> Vec<T> {
    let sets: Vec<Vec<usize>> = candidates
        .iter()
        .map(|c| (0..points.len()).filter(|&i| covers(c, &points[i])).collect())
        .collect();
    let mut covered = vec![false; points.len()];
    let mut chosen = Vec::new();
    while chosen.len() < limit {
        let best = sets
            .iter()
            .enumerate()
            .map(|(c, set)| (c, set.iter().filter(|&&i| !covered[i]).count()))
            .max_by_key(|&(c, n)| (n, std::cmp::Reverse(c)));
        match best {
            Some((c, n)) if n > 0 => {
                sets[c].iter().for_each(|&i| covered[i] = true);
                chosen.push(candidates[c]);
            }
            _ => break,
        }
    }
    chosen
}

/// Weights `mu` with `sum mu = 1` minimizing `|sum mu_i a_i|`, or `None` if
/// the points are affinely dependent.
///
/// Writes `mu_0 = 1 - sum z` and solves the normal equations
/// `(B^T B) z = -B^T a_0` for `B = [a_i - a_0]` by Cholesky.
fn affine_min_norm(a: &[[f64; DIM]]) -> Option<[f64; DIM + 2]> {
    let k = a.len();
    let mut mu = [0.0; DIM + 2];
    if k == 1 {
        mu[0] = 1.0;
        return Some(mu);
    }
    let m = k - 1;
    let mut b = [[0.0; DIM]; DIM + 1];
    for i in 0..m {
        b[i] = std::array::from_fn(|d| a[i + 1][d] - a[0][d]);
    }
    let mut l = [[0.0; DIM + 1]; DIM + 1];
    let mut rhs = [0.0; DIM + 1];
    let mut trace = 0.0;
    for i in 0..m {
        for j in 0..=i {
            l[i][j] = dot(&b[i], &b[j]);
        }
        trace += l[i][i];
        rhs[i] = -dot(&b[i], &a[0]);
    }
    for j in 0..m {
        let mut diag = l[j][j];
        for c in 0..j {
            diag -= l[j][c] * l[j][c];
        }
        if diag <= 1e-13 * trace {
            return None;
        }
        let diag = diag.sqrt();
        l[j][j] = diag;
        for i in j + 1..m {
            let mut v = l[i][j];
            for c in 0..j {
                v -= l[i][c] * l[j][c];
            }
            l[i][j] = v / diag;
        }
    }
    let mut z = rhs;
    for i in 0..m {
        for c in 0..i {
            z[i] -= l[i][c] * z[c];
        }
        z[i] /= l[i][i];
    }
    for i in (0..m).rev() {
        for c in i + 1..m {
            z[i] -= l[c][i] * z[c];
        }
        z[i] /= l[i][i];
    }
    mu[0] = 1.0 - z[..m].iter().sum::<f64>();
    mu[1..k].copy_from_slice(&z[..m]);
    Some(mu)
}

fn dot(a: &[f64; DIM], b: &[f64; DIM]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

fn norm2(a: &[f64; DIM]) -> f64 {
    dot(a, a)
}

fn dist2(a: &[f64; DIM], b: &[f64; DIM]) -> f64 {
    (0..DIM).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// True if the cloud has at least five affinely independent points.
fn spans_volume(cloud: &PointCloud) -> bool {
    let c = cloud.centroid();
    let mut m = nalgebra::Matrix4::<f64>::zeros();
    for p in cloud.arrays() {
        let d = nalgebra::Vector4::from_fn(|i, _| p[i] - c[i]);
        m += d * d.transpose();
    }
    let ev = m.symmetric_eigenvalues();
    let max = ev.max();
    max > 0.0 && ev.min() > 1e-24 * max
}

/// Monte Carlo estimate of `int_{hull(cloud)} rho dx`.
pub fn weighted_hull_volume(cloud: &PointCloud, density: &DensityKind, cfg: &VolumeConfig) -> Result<HullVolume> {
    Ok(weighted_hull_volumes(cloud, std::slice::from_ref(density), cfg)?[0])
}

/// Estimates for several densities from a single membership pass. Estimates
/// share their samples, so their errors are strongly correlated.
pub fn weighted_hull_volumes(
    cloud: &PointCloud,
    densities: &[DensityKind],
    cfg: &VolumeConfig,
) -> Result<Vec<HullVolume>> {
    cfg.validate()?;
    if !spans_volume(cloud) {
        return Ok(vec![HullVolume::DEGENERATE; densities.len()]);
    }
    let (lo, hi) = cloud.bounding_box();
    let width: [f64; DIM] = std::array::from_fn(|i| hi[i] - lo[i]);
    let sample_point = |u: [f64; DIM]| -> [f64; DIM] { std::array::from_fn(|i| lo[i] + u[i] * width[i]) };

    let mut hull = Hull::new(cloud, cfg.membership_tol, cfg.fw_max_iter);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pilot: Vec<[f64; DIM]> = (0..PILOT.min(cfg.samples))
        .map(|_| sample_point(std::array::from_fn(|_| rng.gen::<f64>())))
        .collect();
    hull.learn(&pilot);
    let hull = hull;
    let box_volume: f64 = width.iter().product();
    let nd = densities.len();

    let chunks = cfg.samples.div_ceil(CHUNK);
    let partial: Vec<Result<Vec<(f64, f64)>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(cfg.samples);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_word_pos(start as u128 * WORDS_PER_SAMPLE);
            let mut acc = vec![(0.0, 0.0); nd];
            for sample in start..end {
                let x = sample_point(std::array::from_fn(|_| rng.gen::<f64>()));
                match hull.classify(&x) {
                    Membership::Outside => {}
                    Membership::Inside => {
                        let s = PhaseState::from_coords(x.to_vec())?;
                        for (a, d) in acc.iter_mut().zip(densities) {
                            let rho = d.density(&s)?;
                            a.0 += rho;
                            a.1 += rho * rho;
                        }
                    }
                    Membership::Ambiguous { iterations, distance } => {
                        return Err(Error::FrankWolfeStall {
                            sample,
                            iterations,
                            distance: distance.sqrt() * hull.scale,
                        })
                    }
                }
            }
            Ok(acc)
        })
        .collect();

    let mut sums = vec![(0.0, 0.0); nd];
    for chunk in partial {
        for (s, a) in sums.iter_mut().zip(chunk?) {
            s.0 += a.0;
            s.1 += a.1;
        }
    }
    let n = cfg.samples as f64;
    Ok(sums
        .into_iter()
        .map(|(sum, sumsq)| {
            let mean = sum / n;
            let var = ((sumsq - sum * mean) / (n - 1.0)).max(0.0);
            HullVolume {
                value: box_volume * mean,
                std_error: box_volume * (var / n).sqrt(),
                degenerate: false,
            }
        })
        .collect())
}

/// Applies `step(index, point)` to every point, preserving order.
pub fn evolve_cloud<F>(cloud: &PointCloud, step: F) -> Result<PointCloud>
where
    F: Fn(usize, &PhaseState) -> Result<PhaseState> + Sync,
{
    let points = cloud
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| step(i, p).map_err(|e| e.at_point(i)))
        .collect::<Result<Vec<_>>>()?;
    PointCloud::new(points)
}

/// One recorded point of a volume series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeRecord {
    pub step: usize,
    pub t: f64,
    pub volumes: Vec<HullVolume>,
}

/// Evolves `cloud0` for `n_steps` steps of length `dt` and records the hull
/// volumes for every density at steps `0, record_every, 2 record_every, ...`.
/// Every record uses the same seed, so consecutive estimates are paired.
pub fn volume_series_multi<F>(
    cloud0: &PointCloud,
    step: F,
    dt: f64,
    densities: &[DensityKind],
    n_steps: usize,
    record_every: usize,
    cfg: &VolumeConfig,
) -> Result<Vec<VolumeRecord>>
where
    F: Fn(usize, &PhaseState) -> Result<PhaseState> + Sync,
{
    if record_every == 0 {
        return Err(Error::InvalidArgument("record_every must be >= 1".into()));
    }
    cfg.validate()?;
    let mut cloud = cloud0.clone();
    let mut out = Vec::with_capacity(n_steps / record_every + 1);
    for j in 0..=n_steps {
        if j > 0 {
            cloud = evolve_cloud(&cloud, &step).map_err(|e| e.at_step(j - 1))?;
        }
        if j % record_every == 0 {
            out.push(VolumeRecord {
                step: j,
                t: j as f64 * dt,
                volumes: weighted_hull_volumes(&cloud, densities, cfg)?,
            });
        }
    }
    Ok(out)
}

/// Single-density series of `(t, value, std_error)`.
pub fn volume_series<F>(
    cloud0: &PointCloud,
    step: F,
    dt: f64,
    density: &DensityKind,
    n_steps: usize,
    record_every: usize,
    cfg: &VolumeConfig,
) -> Result<Vec<(f64, f64, f64)>>
where
    F: Fn(usize, &PhaseState) -> Result<PhaseState> + Sync,
{
    let records = volume_series_multi(
        cloud0,
        step,
        dt,
        std::slice::from_ref(density),
        n_steps,
        record_every,
        cfg,
    )?;
    Ok(records
        .into_iter()
        .map(|r| (r.t, r.volumes[0].value, r.volumes[0].std_error))
        .collect())
}
