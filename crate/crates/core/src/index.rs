//! Conley–Zehnder and Maslov indices of symplectic paths, contact homology of
//! ellipsoids, action spectra, the period–action relation and the profile
//! transform `H ↦ H̄`.
//!
//! Index convention: `cz` is normalized so that a path generated by a small
//! nondegenerate quadratic Hamiltonian has index equal to its Morse index, and
//! `cz(γ₁ ♯ γ₂) = cz(γ₁) − maslov(γ₂)` for a loop `γ₂`. It differs from the
//! Robbin–Salamon index by `cz = n − cz_rs`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

/// Tolerance for the symplectic residual `‖AᵀΩA − Ω‖`.
pub const SYMPLECTIC_TOL: f64 = 1e-8;

/// `J₀ = [[0, −I], [I, 0]]` in `(p, q)` coordinates; `ẋ = J₀ S x` is the flow of `½xᵀSx`.
pub fn j0(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = -1.0;
        j[(n + k, k)] = 1.0;
    }
    j
}

fn symplectic_residual(a: &DMatrix<f64>, n: usize) -> f64 {
    let om = j0(n);
    (a.transpose() * &om * a - om).amax()
}

/// Samples `A(t_k)` of a path of symplectic matrices with `A(0) = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticPath {
    pub n: usize,
    pub times: Vec<f64>,
    pub samples: Vec<DMatrix<f64>>,
    pub residual: f64,
}

impl SymplecticPath {
    pub fn new(n: usize, times: Vec<f64>, samples: Vec<DMatrix<f64>>) -> Result<Self> {
        if samples.len() < 2 || samples.len() != times.len() {
            return arg("path needs at least two samples with matching times");
        }
        if samples.iter().any(|a| a.nrows() != 2 * n || a.ncols() != 2 * n) {
            return arg(format!("path samples must be {0}x{0}", 2 * n));
        }
        let residual = samples.iter().map(|a| symplectic_residual(a, n)).fold(0.0, f64::max);
        if !(residual < SYMPLECTIC_TOL) {
            return Err(Error::Numerical(format!("path is not symplectic: residual {residual:e}")));
        }
        if (&samples[0] - DMatrix::identity(2 * n, 2 * n)).amax() > SYMPLECTIC_TOL {
            return arg("path must start at the identity");
        }
        Ok(Self { n, times, samples, residual })
    }

    pub fn from_fn(n: usize, count: usize, f: impl Fn(f64) -> DMatrix<f64>) -> Result<Self> {
        let times: Vec<f64> = (0..count).map(|k| k as f64 / (count - 1) as f64).collect();
        let samples = times.iter().map(|&t| f(t)).collect();
        Self::new(n, times, samples)
    }

    /// `t ↦ exp(t J₀ S)`, the flow of `½ xᵀ S x`.
    pub fn quadratic(s: &DMatrix<f64>, count: usize) -> Result<Self> {
        let n = s.nrows() / 2;
        if s.nrows() != s.ncols() || !s.nrows().is_multiple_of(2) || (s - s.transpose()).amax() > 1e-12 {
            return arg("quadratic form must be a symmetric 2n x 2n matrix");
        }
        let gen = j0(n) * s;
        Self::from_fn(n, count, |t| (&gen * t).exp())
    }

    /// `t ↦ diag(e^{2πi θ_j t})`, the flow of `Σ θ_j π|z_j|²`.
    pub fn rotation(rates: &[f64], count: usize) -> Result<Self> {
        let n = rates.len();
        Self::from_fn(n, count, |t| rotation_matrix(rates, t))
    }

    pub fn endpoint(&self) -> &DMatrix<f64> {
        self.samples.last().expect("non-empty path")
    }

    pub fn is_loop(&self) -> bool {
        (self.endpoint() - DMatrix::identity(2 * self.n, 2 * self.n)).amax() < 1e-9
    }

    /// `t ↦ L(t) A(t)` for a loop `L` sampled at the same times.
    pub fn twisted_by(&self, lp: &SymplecticPath) -> Result<Self> {
        if lp.n != self.n || lp.times != self.times {
            return arg("twisting loop must share dimension and sample times");
        }
        if !lp.is_loop() {
            return arg("twisting path must be a loop");
        }
        Self::new(self.n, self.times.clone(), lp.samples.iter().zip(&self.samples).map(|(l, a)| l * a).collect())
    }

    /// `A ⊕ B` in `(p, q)` block ordering.
    pub fn direct_sum(&self, other: &SymplecticPath) -> Result<Self> {
        if other.times != self.times {
            return arg("direct sum needs equal sample times");
        }
        let (n1, n2) = (self.n, other.n);
        let n = n1 + n2;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| {
                let mut m = DMatrix::zeros(2 * n, 2 * n);
                let ia = |k: usize| if k < n1 { k } else { n + k - n1 };
                let ib = |k: usize| if k < n2 { n1 + k } else { n + n1 + k - n2 };
                for r in 0..2 * n1 {
                    for c in 0..2 * n1 {
                        m[(ia(r), ia(c))] = a[(r, c)];
                    }
                }
                for r in 0..2 * n2 {
                    for c in 0..2 * n2 {
                        m[(ib(r), ib(c))] = b[(r, c)];
                    }
                }
                m
            })
            .collect();
        Self::new(n, self.times.clone(), samples)
    }
}

/// `diag(e^{2πi θ_j t})` as a real `2n × 2n` matrix.
pub fn rotation_matrix(rates: &[f64], t: f64) -> DMatrix<f64> {
    let n = rates.len();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for (j, r) in rates.iter().enumerate() {
        let (s, c) = (2.0 * PI * r * t).sin_cos();
        m[(j, j)] = c;
        m[(j, n + j)] = -s;
        m[(n + j, j)] = s;
        m[(n + j, n + j)] = c;
    }
    m
}

fn unwrap_step(prev: f64, next: f64) -> f64 {
    let mut d = next - prev;
    while d > PI {
        d -= 2.0 * PI;
    }
    while d < -PI {
        d += 2.0 * PI;
    }
    d
}

fn round_index(x: f64, what: &str) -> Result<i64> {
    let k = x.round();
    if (x - k).abs() > 1e-6 {
        return Err(Error::Numerical(format!("{what} evaluated to non-integer {x}")));
    }
    Ok(k as i64)
}

/// Complex determinant of the unitary part of `A`, read as `a + ib` from `[[a, −b], [b, a]]`.
fn unitary_det(a: &DMatrix<f64>, n: usize) -> Complex64 {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("svd u") * svd.v_t.expect("svd v_t");
    let mut c = DMatrix::<Complex64>::zeros(n, n);
    for r in 0..n {
        for k in 0..n {
            c[(r, k)] = Complex64::new(u[(r, k)], u[(n + r, k)]);
        }
    }
    c.determinant()
}

/// Maslov index of a loop: twice the winding of `det_ℂ` of its unitary part.
pub fn maslov_index(lp: &SymplecticPath) -> Result<i64> {
    if !lp.is_loop() {
        return Err(Error::Argument("Maslov index needs a closed loop".into()));
    }
    let mut prev = unitary_det(&lp.samples[0], lp.n).arg();
    let mut total = 0.0;
    for a in &lp.samples[1..] {
        let cur = unitary_det(a, lp.n).arg();
        let d = unwrap_step(prev, cur);
        if d.abs() > PI / 2.0 {
            return Err(Error::Numerical("loop is undersampled for the winding count".into()));
        }
        total += d;
        prev = cur;
    }
    round_index(total / PI, "Maslov index")
}

/// `X + iY` frame of the graph of `A`, symplectically identified with a
/// Lagrangian of standard `ℝ^{4n}` by negating `q` in the first factor.
fn graph_frame(a: &DMatrix<f64>, n: usize) -> DMatrix<Complex64> {
    let m = 2 * n;
    let mut z = DMatrix::<Complex64>::zeros(m, m);
    for k in 0..m {
        if k < n {
            z[(k, k)] = Complex64::new(1.0, 0.0);
        } else {
            z[(k - n, k)] = Complex64::new(0.0, -1.0);
        }
        for r in 0..n {
            z[(n + r, k)] = Complex64::new(a[(r, k)], a[(n + r, k)]);
        }
    }
    z
}

fn frame_w(z: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let svd = z.clone().svd(true, true);
    let u = svd.u.expect("svd u") * svd.v_t.expect("svd v_t");
    &u * u.transpose()
}

/// Eigenvalues of a unitary matrix. A generic real combination of its
/// Hermitian and skew-Hermitian parts shares its eigenvectors; the eigenvalues
/// are read off as Rayleigh quotients.
fn unitary_eigenvalues(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    const MIX: f64 = 0.577_215_664_901_532_9;
    let ma = m.adjoint();
    let herm = (m + &ma).scale(0.5);
    let skew = (m - &ma) * Complex64::new(0.0, -0.5);
    let k = herm + skew.scale(MIX);
    let eig = k.symmetric_eigen();
    eig.eigenvectors
        .column_iter()
        .map(|v| {
            let v = v.into_owned();
            (v.adjoint() * m * &v)[(0, 0)]
        })
        .collect()
}

/// Robbin–Salamon index of a path with nondegenerate endpoint.
pub fn cz_robbin_salamon(path: &SymplecticPath) -> Result<i64> {
    let n = path.n;
    let mut prev = graph_frame(&path.samples[0], n).determinant().arg();
    let mut total = 0.0;
    for a in &path.samples[1..] {
        let cur = graph_frame(a, n).determinant().arg();
        let d = unwrap_step(prev, cur);
        if d.abs() > PI / 4.0 {
            return Err(Error::Numerical("path is undersampled for the index computation".into()));
        }
        total += d;
        prev = cur;
    }
    // arg det W = 2 arg det(X + iY).
    let dw = 2.0 * total;
    let w1 = frame_w(&graph_frame(path.endpoint(), n));
    let wd = frame_w(&graph_frame(&DMatrix::identity(2 * n, 2 * n), n));
    let m = w1 * wd.adjoint();
    let mut corr = 0.0;
    for e in unitary_eigenvalues(&m) {
        let mut phi = e.arg();
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        if !(1e-8..=2.0 * PI - 1e-8).contains(&phi) {
            return Err(Error::Degenerate("endpoint has eigenvalue 1".into()));
        }
        corr += 0.5 - phi / (2.0 * PI);
    }
    round_index(dw / (2.0 * PI) + corr, "Conley-Zehnder index")
}

/// Conley–Zehnder index in the convention of this crate, `n − cz_rs`.
pub fn cz_index(path: &SymplecticPath) -> Result<i64> {
    Ok(path.n as i64 - cz_robbin_salamon(path)?)
}

/// `N` positive integer, `R > 0`: the ellipsoid `{π|z₁|² + (π/N)Σ|z_i|² < R}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidSpec {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: u32,
    #[serde(rename = "R")]
    pub r: f64,
}

fn is_natural(x: f64) -> bool {
    x >= 1.0 - 1e-12 && (x - x.round()).abs() <= 1e-12 * x.max(1.0)
}

impl EllipsoidSpec {
    pub fn new(n: usize, big_n: u32, r: f64) -> Result<Self> {
        if n == 0 || big_n == 0 || !(r > 0.0) || !r.is_finite() {
            return arg("ellipsoid needs n >= 1, N >= 1 and R > 0");
        }
        Ok(Self { n, big_n, r })
    }

    /// Errors when `1/R ∈ ℕ` or `1/(NR) ∈ ℕ`.
    pub fn check_non_resonant(&self) -> Result<()> {
        if is_natural(1.0 / self.r) {
            return Err(Error::Resonant(format!("1/R = {} is a positive integer", 1.0 / self.r)));
        }
        if is_natural(1.0 / (self.big_n as f64 * self.r)) {
            return Err(Error::Resonant(format!("1/(NR) = {} is a positive integer", 1.0 / (self.big_n as f64 * self.r))));
        }
        Ok(())
    }

    /// Rotation rates `(1/R, 1/(NR), …)` of the linearized flow.
    pub fn rates(&self) -> Vec<f64> {
        let mut r = vec![1.0 / (self.big_n as f64 * self.r); self.n];
        r[0] = 1.0 / self.r;
        r
    }
}

/// `k(N, R) = −2[1/R] − 2(n−1)[1/(NR)]`.
pub fn ellipsoid_degree(spec: &EllipsoidSpec) -> Result<i64> {
    spec.check_non_resonant()?;
    let a = (1.0 / spec.r).floor() as i64;
    let b = (1.0 / (spec.big_n as f64 * spec.r)).floor() as i64;
    Ok(-2 * a - 2 * (spec.n as i64 - 1) * b)
}

/// `k(N, R)` computed as `cz` of the linearized model flow.
pub fn ellipsoid_degree_from_flow(spec: &EllipsoidSpec) -> Result<i64> {
    spec.check_non_resonant()?;
    let rates = spec.rates();
    let fastest = rates.iter().cloned().fold(0.0, f64::max);
    let count = ((fastest * 64.0).ceil() as usize).max(64) + 1;
    cz_index(&SymplecticPath::rotation(&rates, count)?)
}

/// Ranks over ℤ₂ by degree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradedGroup {
    pub ranks: BTreeMap<i64, u64>,
}

impl GradedGroup {
    pub fn rank(&self, degree: i64) -> u64 {
        self.ranks.get(&degree).copied().unwrap_or(0)
    }
}

/// `CH_*(Ê(N, R))`: one copy of ℤ₂ in degree `k(N, R)`.
pub fn ch_ellipsoid(spec: &EllipsoidSpec) -> Result<GradedGroup> {
    let k = ellipsoid_degree(spec)?;
    Ok(GradedGroup { ranks: BTreeMap::from([(k, 1)]) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InclusionCertificate {
    /// `1/k < R₁ ≤ R₂ < 1/(k−1)`.
    Window { k: u64 },
    /// An integer `m` with `1/R₂ < m < 1/R₁` separating the radii.
    Separator { m: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionIso {
    pub iso: bool,
    pub certificate: InclusionCertificate,
}

/// Whether `B̂(R₁) ⊂ B̂(R₂)` induces an isomorphism in contact homology.
pub fn ball_inclusion_iso(n: usize, r1: f64, r2: f64) -> Result<InclusionIso> {
    if !(r1 > 0.0) || r2 < r1 {
        return arg("need 0 < R1 <= R2");
    }
    EllipsoidSpec::new(n, 1, r1)?.check_non_resonant()?;
    EllipsoidSpec::new(n, 1, r2)?.check_non_resonant()?;
    let (f1, f2) = ((1.0 / r1).floor() as u64, (1.0 / r2).floor() as u64);
    if f1 == f2 {
        Ok(InclusionIso { iso: true, certificate: InclusionCertificate::Window { k: f1 + 1 } })
    } else {
        Ok(InclusionIso { iso: false, certificate: InclusionCertificate::Separator { m: f1 } })
    }
}

/// Actions `−mR` and `−mNR` of the simple coordinate-plane orbits and their multiples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSet {
    pub values: Vec<f64>,
    pub depth: usize,
    /// `−1 ∉ spec`.
    pub non_resonant: bool,
}

pub const DEFAULT_SPECTRUM_DEPTH: usize = 64;

/// Truncated action spectrum of `Ê(N, R)`, sorted from `0` downward.
pub fn action_spectrum(spec: &EllipsoidSpec, depth: usize) -> Result<SpectrumSet> {
    if depth == 0 {
        return arg("spectrum depth must be >= 1");
    }
    let nr = spec.big_n as f64 * spec.r;
    let mut values: Vec<f64> = (1..=depth).flat_map(|m| [-(m as f64) * spec.r, -(m as f64) * nr]).collect();
    if spec.n == 1 {
        values = (1..=depth).map(|m| -(m as f64) * spec.r).collect();
    }
    values.sort_by(|a, b| b.total_cmp(a));
    values.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    let non_resonant = !(is_natural(1.0 / spec.r) || (spec.n > 1 && is_natural(1.0 / nr)));
    Ok(SpectrumSet { values, depth, non_resonant })
}

/// Checks `T = μA + (P − μC)·w` to `1e−12`.
pub fn period_action_check(period: f64, action: f64, mu: f64, c: f64, p: f64, winding: i64) -> Result<bool> {
    if !(mu >= 0.0) || !(p > 0.0) {
        return arg("period-action relation needs mu >= 0 and P > 0");
    }
    let rhs = mu * action + (p - mu * c) * winding as f64;
    Ok((period - rhs).abs() <= 1e-12 * (1.0 + period.abs().max(rhs.abs())))
}

/// A profile `H(u)` on `(0, ∞)`.
#[derive(Clone)]
pub enum ProfileFunction {
    /// Constant before the first vertex, linear between vertices, constant after the last.
    PiecewiseLinear { vertices: Vec<(f64, f64)> },
    Smooth { name: String, f: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl std::fmt::Debug for ProfileFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::PiecewiseLinear { vertices } => f.debug_struct("PiecewiseLinear").field("vertices", vertices).finish(),
            Self::Smooth { name, .. } => f.debug_struct("Smooth").field("name", name).finish(),
        }
    }
}

impl ProfileFunction {
    pub fn piecewise_linear(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.is_empty() || vertices.windows(2).any(|w| !(w[0].0 < w[1].0)) || vertices.iter().any(|v| !(v.0 > 0.0) || !v.1.is_finite()) {
            return arg("profile vertices need strictly increasing positive abscissae");
        }
        Ok(Self::PiecewiseLinear { vertices })
    }

    /// `c` on `(0, a)`, `1` on `(b, ∞)`, linear on `[a, b]`.
    pub fn f_abc(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && a < b && c > 0.0) {
            return arg("F_{a,b,c} needs 0 < a < b and c > 0");
        }
        Self::piecewise_linear(vec![(a, c), (b, 1.0)])
    }

    /// `κ` on `(0, μ]`, `0` on `[ν, ∞)`, linear on `[μ, ν]`.
    pub fn g_mu_nu_kappa(mu: f64, nu: f64, kappa: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < nu && kappa < 0.0) {
            return arg("G_{mu,nu,kappa} needs 0 < mu < nu and kappa < 0");
        }
        Self::piecewise_linear(vec![(mu, kappa), (nu, 0.0)])
    }

    pub fn constant(c: f64) -> Self {
        Self::PiecewiseLinear { vertices: vec![(1.0, c)] }
    }

    pub fn smooth(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Smooth { name: name.into(), f: Arc::new(f) }
    }

    /// `(a, b, c)` if this is a two-vertex profile ending at height 1.
    pub fn as_f_abc(&self) -> Option<(f64, f64, f64)> {
        match self {
            Self::PiecewiseLinear { vertices } if vertices.len() == 2 && vertices[1].1 == 1.0 => Some((vertices[0].0, vertices[1].0, vertices[0].1)),
            _ => None,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Self::PiecewiseLinear { vertices } => {
                let first = vertices[0];
                let last = vertices[vertices.len() - 1];
                if u <= first.0 {
                    return first.1;
                }
                if u >= last.0 {
                    return last.1;
                }
                let k = vertices.partition_point(|v| v.0 <= u);
                let (a, b) = (vertices[k - 1], vertices[k]);
                a.1 + (b.1 - a.1) * (u - a.0) / (b.0 - a.0)
            }
            Self::Smooth { f, .. } => f(u),
        }
    }

    /// Checks positivity and `H − uH′ > 0` (on segments, or at sampled points).
    pub fn check_admissible(&self) -> Result<()> {
        match self {
            Self::PiecewiseLinear { vertices } => {
                if vertices.iter().any(|v| !(v.1 > 0.0)) {
                    return Err(Error::Admissibility("profile must be positive".into()));
                }
                for w in vertices.windows(2) {
                    let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                    if !(w[0].1 - w[0].0 * slope > 0.0) {
                        return Err(Error::Admissibility(format!("H - uH' <= 0 on [{}, {}]", w[0].0, w[1].0)));
                    }
                }
                Ok(())
            }
            Self::Smooth { .. } => {
                for k in 1..=2000 {
                    let u = 10f64.powf(-4.0 + 8.0 * k as f64 / 2000.0);
                    let h = self.eval(u);
                    let d = (self.eval(u * (1.0 + 1e-6)) - self.eval(u * (1.0 - 1e-6))) / (2e-6 * u);
                    if !(h > 0.0) || !(h - u * d > 0.0) {
                        return Err(Error::Admissibility(format!("H - uH' <= 0 or H <= 0 near u = {u}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// `φ_H(u) = u/H(u)`.
    pub fn phi(&self, u: f64) -> f64 {
        u / self.eval(u)
    }
}

/// `H̄` with `φ_{H̄} = φ_H^{-1}`: vertices `(u, H) ↦ (u/H, 1/H)` for piecewise
/// linear profiles, monotone inversion of `φ_H` otherwise.
pub fn profile_transform(h: &ProfileFunction) -> Result<ProfileFunction> {
    h.check_admissible()?;
    match h {
        ProfileFunction::PiecewiseLinear { vertices } => ProfileFunction::piecewise_linear(vertices.iter().map(|&(u, v)| (u / v, 1.0 / v)).collect()),
        ProfileFunction::Smooth { name, .. } => {
            let inner = h.clone();
            Ok(ProfileFunction::smooth(format!("bar({name})"), move |v| v / invert_phi(&inner, v)))
        }
    }
}

/// Solves `φ_H(u) = v` by bisection; `φ_H` is increasing for admissible `H`.
fn invert_phi(h: &ProfileFunction, v: f64) -> f64 {
    let (mut lo, mut hi) = (v * 1e-3, v * 1e3);
    while h.phi(lo) > v {
        lo *= 0.5;
    }
    while h.phi(hi) < v {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h.phi(mid) < v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
