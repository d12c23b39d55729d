//! Symplectic and contact primitives on ℂⁿ = ℝ²ⁿ and V = ℝ²ⁿ × S¹.
//!
//! Real coordinates are ordered `(p_1..p_n, q_1..q_n)` with `z = p + iq`,
//! `ω = dp ∧ dq` and Liouville form `α = ½(p dq − q dp)`. The Hamiltonian
//! vector field is `ṗ = −∂H/∂q`, `q̇ = ∂H/∂p`, so `π|z|²` generates
//! `e^{2πit} z`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::exec::{map_slice, Execution};
use crate::report::{BoundReport, Witness};

pub type C64 = Complex64;

/// A point of ℂⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub z: Vec<C64>,
}

impl PhasePoint {
    pub fn new(z: Vec<C64>) -> Self {
        Self { z }
    }

    pub fn zeros(n: usize) -> Self {
        Self { z: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn from_pq(p: &[f64], q: &[f64]) -> Self {
        assert_eq!(p.len(), q.len());
        Self { z: p.iter().zip(q).map(|(&a, &b)| C64::new(a, b)).collect() }
    }

    /// Inverse of [`PhasePoint::to_real`].
    pub fn from_real(x: &[f64]) -> Self {
        let n = x.len() / 2;
        Self::from_pq(&x[..n], &x[n..2 * n])
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn p(&self) -> Vec<f64> {
        self.z.iter().map(|c| c.re).collect()
    }

    pub fn q(&self) -> Vec<f64> {
        self.z.iter().map(|c| c.im).collect()
    }

    /// Real coordinates `(p, q)`.
    pub fn to_real(&self) -> Vec<f64> {
        let mut v = self.p();
        v.extend(self.q());
        v
    }

    pub fn norm_sqr(&self) -> f64 {
        self.z.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Multiplication by a real scalar as a vector of ℂⁿ.
    pub fn scaled(&self, k: f64) -> Self {
        Self { z: self.z.iter().map(|c| c * k).collect() }
    }

    pub fn dist(&self, other: &Self) -> f64 {
        self.z.iter().zip(&other.z).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    /// π|z|².
    pub fn rho(&self) -> f64 {
        PI * self.norm_sqr()
    }
}

/// Reduces a circle coordinate of the given period into `[0, period)`.
pub fn wrap_period(t: f64, period: f64) -> f64 {
    let r = t - period * (t / period).floor();
    if r >= period || r < 0.0 {
        0.0
    } else {
        r
    }
}

pub fn wrap_unit(t: f64) -> f64 {
    wrap_period(t, 1.0)
}

/// Signed difference of two circle coordinates, in `(−period/2, period/2]`.
pub fn circle_diff(a: f64, b: f64, period: f64) -> f64 {
    let d = wrap_period(a - b, period);
    if d > 0.5 * period {
        d - period
    } else {
        d
    }
}

/// A point of V = ℂⁿ × S¹ with `t ∈ [0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub z: PhasePoint,
    pub t: f64,
}

impl ContactPoint {
    pub fn new(z: PhasePoint, t: f64) -> Self {
        Self { z, t: wrap_unit(t) }
    }
}

/// A linear form on a tangent space, in real coordinates (with `dt` last on V).
#[derive(Clone, Debug, PartialEq)]
pub struct Covector {
    pub coeffs: Vec<f64>,
}

impl Covector {
    pub fn pair(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.coeffs.len(), "covector/vector dimension mismatch");
        self.coeffs.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// `α_z = ½(p dq − q dp)`.
pub fn liouville_form(z: &PhasePoint) -> Covector {
    let n = z.dim();
    let mut c = vec![0.0; 2 * n];
    for (j, w) in z.z.iter().enumerate() {
        c[j] = -0.5 * w.im;
        c[n + j] = 0.5 * w.re;
    }
    Covector { coeffs: c }
}

/// `α_z(v)` for a tangent vector `v` given as a complex vector.
pub fn liouville_pair(z: &[C64], v: &[C64]) -> f64 {
    z.iter().zip(v).map(|(a, b)| 0.5 * (a.re * b.im - a.im * b.re)).sum()
}

/// `dt − α` at a point of V.
pub fn contact_form(pt: &ContactPoint) -> Covector {
    let mut c: Vec<f64> = liouville_form(&pt.z).coeffs.iter().map(|a| -a).collect();
    c.push(1.0);
    Covector { coeffs: c }
}

/// `ω(u, v)` for real tangent vectors in `(p, q)` coordinates.
pub fn omega(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len() / 2;
    (0..n).map(|j| u[j] * v[n + j] - u[n + j] * v[j]).sum()
}

/// The matrix Ω with `ω(u, v) = uᵀ Ω v`.
pub fn omega_matrix(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        m[(j, n + j)] = 1.0;
        m[(n + j, j)] = -1.0;
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialInvariants {
    /// `ρ_j = π|z_j|²`.
    pub rho_j: Vec<f64>,
    /// `ϱ = ρ_2 + … + ρ_n`.
    pub varrho: f64,
    /// `ρ = ρ_1 + … + ρ_n`.
    pub rho: f64,
}

pub fn radial_invariants(z: &PhasePoint) -> RadialInvariants {
    let rho_j: Vec<f64> = z.z.iter().map(|c| PI * c.norm_sqr()).collect();
    let varrho = rho_j.iter().skip(1).sum();
    let rho = rho_j.iter().sum();
    RadialInvariants { rho_j, varrho, rho }
}

pub fn rho_j(z: &[C64], j: usize) -> f64 {
    PI * z[j].norm_sqr()
}

pub fn rho(z: &[C64]) -> f64 {
    PI * z.iter().map(|c| c.norm_sqr()).sum::<f64>()
}

pub fn varrho(z: &[C64]) -> f64 {
    PI * z.iter().skip(1).map(|c| c.norm_sqr()).sum::<f64>()
}

/// The ℝ₊-action `z ↦ √c z`.
pub fn rplus_action(c: f64, z: &PhasePoint) -> Result<PhasePoint> {
    if !(c > 0.0) || !c.is_finite() {
        return arg(format!("R+ action needs c > 0, got {c}"));
    }
    Ok(z.scaled(c.sqrt()))
}

/// Converts a gradient `(∂H/∂p, ∂H/∂q)` into the Hamiltonian vector field.
pub fn sgrad_from_gradient(grad: &[f64]) -> Vec<f64> {
    let n = grad.len() / 2;
    let mut v = vec![0.0; 2 * n];
    for j in 0..n {
        v[j] = -grad[n + j];
        v[n + j] = grad[j];
    }
    v
}

/// Finite-difference step used for a coordinate of magnitude `x`.
pub fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

/// Central-difference gradient of a real function of real coordinates.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|k| {
            let h = fd_step(x[k]);
            y[k] = x[k] + h;
            let fp = f(&y);
            y[k] = x[k] - h;
            let fm = f(&y);
            y[k] = x[k];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Jacobian of a map of real coordinates.
pub fn fd_jacobian_of(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> DMatrix<f64> {
    let mut y = x.to_vec();
    let cols: Vec<Vec<f64>> = (0..x.len())
        .map(|k| {
            let h = fd_step(x[k]);
            y[k] = x[k] + h;
            let fp = f(&y);
            y[k] = x[k] - h;
            let fm = f(&y);
            y[k] = x[k];
            fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect();
    DMatrix::from_fn(cols.first().map_or(0, Vec::len), x.len(), |r, c| cols[c][r])
}

type HamFn = dyn Fn(&[C64], f64) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[C64], f64) -> Vec<f64> + Send + Sync;

/// A time-dependent function on ℂⁿ, normally homogeneous of degree 1 under the
/// ℝ₊-action (degree 2 under real scaling of vectors).
#[derive(Clone)]
pub struct HamiltonianField {
    pub name: String,
    pub homogeneous: bool,
    f: Arc<HamFn>,
    grad: Option<Arc<GradFn>>,
}

impl std::fmt::Debug for HamiltonianField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianField").field("name", &self.name).field("homogeneous", &self.homogeneous).finish()
    }
}

impl HamiltonianField {
    pub fn new(name: impl Into<String>, f: impl Fn(&[C64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), homogeneous: true, f: Arc::new(f), grad: None }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[C64], f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn non_homogeneous(mut self) -> Self {
        self.homogeneous = false;
        self
    }

    pub fn eval(&self, z: &[C64], t: f64) -> f64 {
        (self.f)(z, t)
    }

    pub fn zero() -> Self {
        Self::new("0", |_, _| 0.0)
    }

    /// `π|z|²`, the generator of `e_t`.
    pub fn standard() -> Self {
        Self::new("pi|z|^2", |z, _| rho(z)).with_gradient(|z, _| {
            let n = z.len();
            let mut g = vec![0.0; 2 * n];
            for j in 0..n {
                g[j] = 2.0 * PI * z[j].re;
                g[n + j] = 2.0 * PI * z[j].im;
            }
            g
        })
    }

    /// Gradient in real coordinates, closed form when registered.
    pub fn gradient(&self, z: &[C64], t: f64) -> Vec<f64> {
        if let Some(g) = &self.grad {
            return g(z, t);
        }
        let x = PhasePoint::new(z.to_vec()).to_real();
        let f = |y: &[f64]| self.eval(&PhasePoint::from_real(y).z, t);
        fd_gradient(&f, &x)
    }

    pub fn scaled(&self, k: f64) -> Self {
        let f = self.f.clone();
        let g = self.grad.clone();
        let mut h = Self::new(format!("{k}*({})", self.name), move |z, t| k * f(z, t));
        h.homogeneous = self.homogeneous;
        if let Some(g) = g {
            h = h.with_gradient(move |z, t| g(z, t).into_iter().map(|v| k * v).collect());
        }
        h
    }
}

/// Hamiltonian vector field of `H` at `(z, t)`, as a complex vector `ṗ + iq̇`.
pub fn sgrad(h: &HamiltonianField, z: &PhasePoint, t: f64) -> PhasePoint {
    let v = sgrad_from_gradient(&h.gradient(&z.z, t));
    PhasePoint::from_real(&v)
}

/// Which contact form the target of a map carries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TargetForm {
    /// `dt − α` on ℂⁿ × ℝ/ℤ.
    Standard,
    /// `du − p dq` on ℂⁿ × ℝ/hℤ.
    Planck { period: f64 },
}

impl TargetForm {
    pub fn period(&self) -> f64 {
        match self {
            TargetForm::Standard => 1.0,
            TargetForm::Planck { period } => *period,
        }
    }

    /// Coefficients of the form at a target point `(z, t)`.
    pub fn covector(&self, z: &PhasePoint) -> Covector {
        let n = z.dim();
        match self {
            TargetForm::Standard => contact_form(&ContactPoint { z: z.clone(), t: 0.0 }),
            TargetForm::Planck { .. } => {
                let mut c = vec![0.0; 2 * n + 1];
                for j in 0..n {
                    c[n + j] = -z.z[j].re;
                }
                c[2 * n] = 1.0;
                Covector { coeffs: c }
            }
        }
    }
}

type EvalFn = dyn Fn(&ContactPoint) -> ContactPoint + Send + Sync;
type JacFn = dyn Fn(&ContactPoint) -> DMatrix<f64> + Send + Sync;
type GuardFn = dyn Fn(&ContactPoint) -> bool + Send + Sync;

/// A map of V (or of ℂⁿ, carrying `t` along) with Jacobian access.
///
/// Jacobians are `(2n+1) × (2n+1)` in coordinates `(p, q, t)`.
#[derive(Clone)]
pub struct SmoothMap {
    pub name: String,
    pub n: usize,
    pub target: TargetForm,
    eval: Arc<EvalFn>,
    jacobian: Option<Arc<JacFn>>,
    guard: Option<Arc<GuardFn>>,
}

impl std::fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothMap").field("name", &self.name).field("n", &self.n).finish()
    }
}

impl SmoothMap {
    pub fn new(name: impl Into<String>, n: usize, eval: impl Fn(&ContactPoint) -> ContactPoint + Send + Sync + 'static) -> Self {
        Self { name: name.into(), n, target: TargetForm::Standard, eval: Arc::new(eval), jacobian: None, guard: None }
    }

    pub fn with_jacobian(mut self, j: impl Fn(&ContactPoint) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(j));
        self
    }

    pub fn with_guard(mut self, g: impl Fn(&ContactPoint) -> bool + Send + Sync + 'static) -> Self {
        self.guard = Some(Arc::new(g));
        self
    }

    pub fn with_target(mut self, target: TargetForm) -> Self {
        self.target = target;
        self
    }

    pub fn identity(n: usize) -> Self {
        Self::new("identity", n, |x| x.clone()).with_jacobian(move |_| DMatrix::identity(2 * n + 1, 2 * n + 1))
    }

    pub fn in_domain(&self, x: &ContactPoint) -> bool {
        self.guard.as_ref().is_none_or(|g| g(x))
    }

    pub fn apply(&self, x: &ContactPoint) -> Option<ContactPoint> {
        if self.in_domain(x) {
            Some((self.eval)(x))
        } else {
            None
        }
    }

    pub fn has_closed_form_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Closed-form Jacobian if registered, else central differences.
    pub fn jacobian(&self, x: &ContactPoint) -> DMatrix<f64> {
        match &self.jacobian {
            Some(j) => j(x),
            None => self.fd_jacobian(x),
        }
    }

    /// Central-difference Jacobian with Richardson extrapolation; the circle
    /// output is unwrapped. The step shrinks while the estimates at `h` and
    /// `h/2` disagree, which happens near the boundary of the domain.
    pub fn fd_jacobian(&self, x: &ContactPoint) -> DMatrix<f64> {
        let n = self.n;
        let dim = 2 * n + 1;
        let mut base = x.z.to_real();
        base.push(x.t);
        let period = self.target.period();
        let eval = |y: &[f64]| {
            let pt = ContactPoint { z: PhasePoint::from_real(&y[..2 * n]), t: y[2 * n] };
            (self.eval)(&pt)
        };
        let column = |k: usize, h: f64| {
            let mut y = base.clone();
            y[k] = base[k] + h;
            let fp = eval(&y);
            y[k] = base[k] - h;
            let fm = eval(&y);
            let (rp, rm) = (fp.z.to_real(), fm.z.to_real());
            let mut col: Vec<f64> = (0..2 * n).map(|i| (rp[i] - rm[i]) / (2.0 * h)).collect();
            col.push(circle_diff(fp.t, fm.t, period) / (2.0 * h));
            col
        };
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut jac = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let mut h = fd_step(base[k]);
            let mut coarse = column(k, h);
            let mut best = coarse.clone();
            for _ in 0..FD_MAX_REFINE {
                let fine = column(k, h / 2.0);
                let rich: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect();
                let diff: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| f - c).collect();
                let agree = norm(&diff) <= FD_AGREEMENT * norm(&fine).max(f64::MIN_POSITIVE);
                if rich.iter().all(|v| v.is_finite()) {
                    best = rich;
                }
                if agree {
                    break;
                }
                h /= 8.0;
                coarse = column(k, h);
            }
            for (i, v) in best.into_iter().enumerate() {
                jac[(i, k)] = v;
            }
        }
        jac
    }
}

/// Step refinements allowed per Jacobian column.
const FD_MAX_REFINE: usize = 6;
/// Relative agreement of the `h` and `h/2` estimates that ends refinement.
const FD_AGREEMENT: f64 = 1e-7;

/// Sampling grid over radial shells, sphere directions, times and homotopy
/// parameters. Sphere points come from a shifted Halton sequence and are fully
/// determined by the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    pub shells: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub sphere_points: usize,
    pub time_samples: usize,
    pub homotopy_samples: usize,
    pub seed: u64,
}

impl Default for SamplingGrid {
    fn default() -> Self {
        Self { shells: 8, r_min: 0.25, r_max: 4.0, sphere_points: 512, time_samples: 64, homotopy_samples: 16, seed: 0x5eed }
    }
}

const PRIMES: [u32; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// Deterministic low-discrepancy points on the unit sphere of ℝᵈ (d even).
pub fn sphere_points(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(d >= 2 && d.is_multiple_of(2) && d <= PRIMES.len(), "sphere dimension must be even and at most {}", PRIMES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
    (0..count)
        .map(|k| {
            let idx = k as u64 + 1;
            let u: Vec<f64> = (0..d).map(|a| (radical_inverse(idx, PRIMES[a]) + shift[a]).fract()).collect();
            let mut x = vec![0.0; d];
            for a in (0..d).step_by(2) {
                let u1 = u[a].max(1e-300);
                let r = (-2.0 * u1.ln()).sqrt();
                let th = 2.0 * PI * u[a + 1];
                x[a] = r * th.cos();
                x[a + 1] = r * th.sin();
            }
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm == 0.0 {
                x[0] = 1.0;
                x
            } else {
                x.into_iter().map(|v| v / nrm).collect()
            }
        })
        .collect()
}

impl SamplingGrid {
    pub fn validate(&self) -> Result<()> {
        if self.shells == 0 || self.sphere_points == 0 || self.time_samples == 0 || self.homotopy_samples == 0 {
            return arg("grid counts must be >= 1");
        }
        if !(self.r_min > 0.0) || self.r_max < self.r_min {
            return arg("grid radii need 0 < r_min <= r_max");
        }
        Ok(())
    }

    /// Grid on the unit sphere only, useful for homogeneous quantities.
    pub fn unit_sphere(sphere_points: usize, time_samples: usize, homotopy_samples: usize, seed: u64) -> Self {
        Self { shells: 1, r_min: 1.0, r_max: 1.0, sphere_points, time_samples, homotopy_samples, seed }
    }

    pub fn radii(&self) -> Vec<f64> {
        if self.shells == 1 {
            return vec![self.r_min];
        }
        let ratio = self.r_max / self.r_min;
        (0..self.shells).map(|i| self.r_min * ratio.powf(i as f64 / (self.shells - 1) as f64)).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.time_samples).map(|k| k as f64 / self.time_samples as f64).collect()
    }

    /// Homotopy parameters spread over `[0, 1]` including both ends.
    pub fn homotopy_params(&self) -> Vec<f64> {
        if self.homotopy_samples == 1 {
            return vec![1.0];
        }
        (0..self.homotopy_samples).map(|k| k as f64 / (self.homotopy_samples - 1) as f64).collect()
    }

    pub fn directions(&self, n: usize) -> Vec<PhasePoint> {
        sphere_points(2 * n, self.sphere_points, self.seed).iter().map(|x| PhasePoint::from_real(x)).collect()
    }

    /// Shell-major list of points of ℂⁿ.
    pub fn phase_points(&self, n: usize) -> Vec<PhasePoint> {
        let dirs = self.directions(n);
        self.radii().iter().flat_map(|&r| dirs.iter().map(move |d| d.scaled(r))).collect()
    }

    /// Points of V: every phase point at every time sample.
    pub fn contact_points(&self, n: usize) -> Vec<ContactPoint> {
        let times = self.times();
        self.phase_points(n)
            .into_iter()
            .flat_map(|z| times.iter().map(move |&t| ContactPoint::new(z.clone(), t)).collect::<Vec<_>>())
            .collect()
    }

    pub fn point_count(&self) -> usize {
        self.shells * self.sphere_points
    }
}

/// Pulls back the target contact form through `map` at each point, fits the
/// best scalar `c` with `map*(λ') = c (dt − α)`, and reports the minimum `c`.
/// Passes iff every relative residual is below `tol` and every `c > 0`.
pub fn conformal_factor_check(
    map: &SmoothMap,
    points: &[ContactPoint],
    tol: f64,
    use_fd: bool,
    mode: Execution,
) -> BoundReport {
    let start = std::time::Instant::now();
    let results = map_slice(mode, points, |x| {
        if !map.in_domain(x) {
            return None;
        }
        let y = (map.eval)(x);
        let jac = if use_fd { map.fd_jacobian(x) } else { map.jacobian(x) };
        let target = map.target.covector(&y.z);
        let tc = nalgebra::DVector::from_vec(target.coeffs);
        let pulled = jac.transpose() * tc;
        let src = nalgebra::DVector::from_vec(contact_form(x).coeffs);
        let c = pulled.dot(&src) / src.dot(&src);
        let resid = (&pulled - &src * c).norm() / pulled.norm().max(f64::MIN_POSITIVE);
        Some((c, resid))
    });
    let mut rep = BoundReport::new(format!("conformal factor of {}", map.name), tol);
    let mut max_resid: f64 = 0.0;
    let mut max_c = f64::NEG_INFINITY;
    let mut ok = true;
    for (i, r) in results.iter().enumerate() {
        match r {
            None => rep.skipped += 1,
            Some((c, resid)) => {
                rep.evaluated += 1;
                rep.observe(*c, || Witness::from_contact(&points[i], None));
                max_resid = max_resid.max(*resid);
                max_c = max_c.max(*c);
                if !(*resid < tol) || !(*c > 0.0) || !c.is_finite() {
                    ok = false;
                }
            }
        }
    }
    rep.pass = ok && rep.evaluated > 0;
    rep.extras.insert("max_relative_residual".into(), max_resid);
    rep.extras.insert("max_factor".into(), max_c);
    rep.finish(start);
    rep
}

/// Checks `Jᵀ Ω J = Ω` for the `(p, q)` block of the Jacobian of a map of ℂⁿ.
/// Reports the maximum entrywise defect.
pub fn symplectic_defect(jac: &DMatrix<f64>, n: usize) -> f64 {
    let j = jac.view((0, 0), (2 * n, 2 * n)).into_owned();
    let om = omega_matrix(n);
    let d = j.transpose() * &om * &j - om;
    d.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn liouville_on_dq1() {
        let z = PhasePoint::from_pq(&[1.0, 0.0], &[0.0, 0.0]);
        let a = liouville_form(&z);
        assert_eq!(a.pair(&[0.0, 0.0, 1.0, 0.0]), 0.5);
    }

    #[test]
    fn liouville_kills_radial_field() {
        let z = PhasePoint::from_pq(&[0.3, -1.2], &[0.7, 2.0]);
        let l: Vec<f64> = z.to_real().iter().map(|v| 0.5 * v).collect();
        assert_eq!(liouville_form(&z).pair(&l), 0.0);
    }

    #[test]
    fn contact_form_values() {
        let pt = ContactPoint::new(PhasePoint::from_pq(&[1.0, 0.0], &[0.0, 0.0]), 0.0);
        let l = contact_form(&pt);
        assert_eq!(l.pair(&[0.0, 0.0, 0.0, 0.0, 1.0]), 1.0);
        assert_eq!(l.pair(&[0.0, 0.0, 1.0, 0.0, 0.0]), -0.5);
        let origin = ContactPoint::new(PhasePoint::zeros(2), 0.4);
        assert_eq!(contact_form(&origin).pair(&[0.0, 0.0, 0.0, 0.0, 1.0]), 1.0);
    }

    #[test]
    fn radial_values() {
        let r = radial_invariants(&PhasePoint::zeros(3));
        assert_eq!((r.varrho, r.rho), (0.0, 0.0));
        let z = PhasePoint::new(vec![c(1.0 / PI.sqrt(), 0.0), c(0.0, 0.0)]);
        let r = radial_invariants(&z);
        assert!((r.rho_j[0] - 1.0).abs() < 1e-15);
        assert_eq!(r.varrho, 0.0);
        assert!((r.rho - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rplus_examples() {
        let z = PhasePoint::from_pq(&[1.0, 0.0], &[0.0, 0.0]);
        assert_eq!(rplus_action(1.0, &z).unwrap(), z);
        assert_eq!(rplus_action(4.0, &z).unwrap(), PhasePoint::from_pq(&[2.0, 0.0], &[0.0, 0.0]));
        assert!(rplus_action(0.0, &z).is_err());
        assert!(rplus_action(-1.0, &z).is_err());
    }

    #[test]
    fn sgrad_calibration() {
        // π|z|² generates e^{2πit} z: velocity 2πi z.
        let z = PhasePoint::new(vec![c(1.0 / PI.sqrt(), 0.0), c(0.0, 0.0)]);
        let v = sgrad(&HamiltonianField::standard(), &z, 0.0);
        let expect = C64::new(0.0, 2.0 * PI) * z.z[0];
        assert!((v.z[0] - expect).norm() < 1e-12);
        assert!(v.z[1].norm() < 1e-12);
        let k = HamiltonianField::new("const", |_, _| 3.0);
        assert!(sgrad(&k, &z, 0.0).norm() < 1e-12);
    }

    #[test]
    fn euler_formula() {
        let h = HamiltonianField::standard();
        for d in sphere_points(4, 50, 3) {
            let z = PhasePoint::from_real(&d).scaled(1.7);
            let v = sgrad(&h, &z, 0.0);
            let a = liouville_pair(&z.z, &v.z);
            assert!((a - h.eval(&z.z, 0.0)).abs() < 1e-10 * h.eval(&z.z, 0.0));
        }
    }

    #[test]
    fn sphere_points_are_unit_and_deterministic() {
        let a = sphere_points(6, 100, 11);
        let b = sphere_points(6, 100, 11);
        assert_eq!(a, b);
        for x in &a {
            let n: f64 = x.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert_ne!(sphere_points(6, 10, 12), sphere_points(6, 10, 11));
    }

    #[test]
    fn wrap_behaviour() {
        assert_eq!(wrap_unit(1.25), 0.25);
        assert_eq!(wrap_unit(-0.25), 0.75);
        assert_eq!(wrap_unit(1.0), 0.0);
        assert!((circle_diff(0.01, 0.99, 1.0) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn identity_map_has_unit_factor() {
        let grid = SamplingGrid { shells: 2, sphere_points: 20, time_samples: 3, ..Default::default() };
        let pts = grid.contact_points(2);
        let rep = conformal_factor_check(&SmoothMap::identity(2), &pts, 1e-12, false, Execution::Sequential);
        assert!(rep.pass);
        assert_eq!(rep.extras["max_relative_residual"], 0.0);
        assert_eq!(rep.value, 1.0);
    }

    #[test]
    fn grid_shapes() {
        let g = SamplingGrid::default();
        g.validate().unwrap();
        let r = g.radii();
        assert_eq!(r.len(), 8);
        assert!((r[0] - 0.25).abs() < 1e-15 && (r[7] - 4.0).abs() < 1e-12);
        assert_eq!(g.homotopy_params().first(), Some(&0.0));
        assert_eq!(g.homotopy_params().last(), Some(&1.0));
        assert!(SamplingGrid { r_min: 0.0, ..g.clone() }.validate().is_err());
    }
}
