//! Catalog of explicit maps, loops and homotopies, and the Hamiltonian
//! calculus for paths: composition, inversion, conjugation and extraction.
//!
//! Paths act on ℂⁿ and are evaluated at any real `t`; loops are 1-periodic.
//! A path `{f_t}` generated by `F` satisfies `∂_t f_t = sgrad F_t ∘ f_t`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{arg, Error, Result};
use crate::geometry::{liouville_pair, rho_j, ContactPoint, HamiltonianField, PhasePoint, SmoothMap, TargetForm, C64};

type PathEval = dyn Fn(f64, &[C64]) -> Vec<C64> + Send + Sync;

/// A one-parameter family of maps of ℂⁿ, `t ↦ f_t`.
#[derive(Clone)]
pub struct PathFamily {
    pub name: String,
    pub n: usize,
    pub is_loop: bool,
    pub is_equivariant: bool,
    eval: Arc<PathEval>,
    inverse: Option<Arc<PathEval>>,
    hamiltonian: Option<HamiltonianField>,
}

impl std::fmt::Debug for PathFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PathFamily").field("name", &self.name).field("n", &self.n).field("is_loop", &self.is_loop).finish()
    }
}

impl PathFamily {
    pub fn new(name: impl Into<String>, n: usize, eval: impl Fn(f64, &[C64]) -> Vec<C64> + Send + Sync + 'static) -> Self {
        Self { name: name.into(), n, is_loop: false, is_equivariant: true, eval: Arc::new(eval), inverse: None, hamiltonian: None }
    }

    pub fn with_inverse(mut self, inv: impl Fn(f64, &[C64]) -> Vec<C64> + Send + Sync + 'static) -> Self {
        self.inverse = Some(Arc::new(inv));
        self
    }

    pub fn with_hamiltonian(mut self, h: HamiltonianField) -> Self {
        self.hamiltonian = Some(h);
        self
    }

    pub fn as_loop(mut self) -> Self {
        self.is_loop = true;
        self
    }

    pub fn non_equivariant(mut self) -> Self {
        self.is_equivariant = false;
        self
    }

    pub fn identity(n: usize) -> Self {
        Self::new("identity", n, |_, z| z.to_vec())
            .with_inverse(|_, z| z.to_vec())
            .with_hamiltonian(HamiltonianField::zero())
            .as_loop()
    }

    pub fn apply(&self, t: f64, z: &[C64]) -> Vec<C64> {
        (self.eval)(t, z)
    }

    pub fn hamiltonian(&self) -> Option<&HamiltonianField> {
        self.hamiltonian.as_ref()
    }

    pub fn has_closed_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    /// `f_t^{-1}(z)`: closed form when registered, damped Newton otherwise.
    pub fn apply_inverse(&self, t: f64, z: &[C64]) -> Result<Vec<C64>> {
        match &self.inverse {
            Some(inv) => Ok(inv(t, z)),
            None => newton_invert(&|x: &[C64]| self.apply(t, x), z, z),
        }
    }

    /// The reparameterized path `t ↦ f_{kt}`, generated by `k F(z, kt)`.
    pub fn time_scaled(&self, k: f64) -> Self {
        let f = self.eval.clone();
        let mut p = Self::new(format!("{}[{}t]", self.name, k), self.n, move |t, z| f(k * t, z));
        if let Some(inv) = self.inverse.clone() {
            p = p.with_inverse(move |t, z| inv(k * t, z));
        }
        if let Some(h) = self.hamiltonian.clone() {
            p = p.with_hamiltonian(HamiltonianField::new(format!("{k}*{}[{k}t]", h.name), move |z, t| k * h.eval(z, k * t)));
        }
        p.is_loop = self.is_loop && (k.fract() == 0.0);
        p.is_equivariant = self.is_equivariant;
        p
    }

    /// The complex matrix of a linear path at time `t`.
    pub fn matrix(&self, t: f64) -> DMatrix<C64> {
        let n = self.n;
        let mut m = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        for k in 0..n {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[k] = C64::new(1.0, 0.0);
            let col = self.apply(t, &e);
            for i in 0..n {
                m[(i, k)] = col[i];
            }
        }
        m
    }
}

/// Real `2n × 2n` form of a complex `n × n` matrix acting on `(p, q)`.
pub fn realify(m: &DMatrix<C64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut r = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for k in 0..n {
            let a = m[(i, k)];
            r[(i, k)] = a.re;
            r[(i, n + k)] = -a.im;
            r[(n + i, k)] = a.im;
            r[(n + i, n + k)] = a.re;
        }
    }
    r
}

fn to_real(z: &[C64]) -> Vec<f64> {
    PhasePoint::new(z.to_vec()).to_real()
}

fn from_real(x: &[f64]) -> Vec<C64> {
    PhasePoint::from_real(x).z
}

/// Solves `f(x) = y` by damped Newton with a finite-difference Jacobian.
pub fn newton_invert(f: &dyn Fn(&[C64]) -> Vec<C64>, y: &[C64], seed: &[C64]) -> Result<Vec<C64>> {
    let target = to_real(y);
    let scale = target.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut x = to_real(seed);
    let d = x.len();
    let resid = |x: &[f64]| -> Vec<f64> { to_real(&f(&from_real(x))).iter().zip(&target).map(|(a, b)| a - b).collect() };
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut r = resid(&x);
    for _ in 0..60 {
        if norm(&r) <= 1e-13 * scale {
            return Ok(from_real(&x));
        }
        let mut jac = DMatrix::zeros(d, d);
        let mut y = x.clone();
        for k in 0..d {
            let h = crate::geometry::fd_step(x[k]);
            y[k] = x[k] + h;
            let rp = resid(&y);
            y[k] = x[k] - h;
            let rm = resid(&y);
            y[k] = x[k];
            for i in 0..d {
                jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let step = jac
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(&r))
            .ok_or_else(|| Error::Numerical("singular Jacobian in path inversion".into()))?;
        let mut lambda = 1.0;
        let r0 = norm(&r);
        loop {
            let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a - lambda * s).collect();
            let rc = resid(&cand);
            if norm(&rc) < r0 || lambda < 1e-6 {
                x = cand;
                r = rc;
                break;
            }
            lambda *= 0.5;
        }
    }
    if norm(&r) <= 1e-10 * scale {
        Ok(from_real(&x))
    } else {
        Err(Error::Numerical(format!("Newton inversion did not converge (residual {:e})", norm(&r))))
    }
}

/// Hamiltonian of `{f_t g_t}`: `F(z, t) + G(f_t^{-1} z, t)`.
pub fn compose_paths(f: &PathFamily, g: &PathFamily) -> Result<PathFamily> {
    if f.n != g.n {
        return arg("composed paths must share the dimension");
    }
    let (ff, gg) = (f.clone(), g.clone());
    let mut p = PathFamily::new(format!("{}.{}", f.name, g.name), f.n, move |t, z| ff.apply(t, &gg.apply(t, z)));
    if f.has_closed_inverse() && g.has_closed_inverse() {
        let (ff, gg) = (f.clone(), g.clone());
        p = p.with_inverse(move |t, z| gg.apply_inverse(t, &ff.apply_inverse(t, z).expect("closed inverse")).expect("closed inverse"));
    }
    let fh = f.hamiltonian.clone().ok_or_else(|| Error::Argument(format!("{} has no Hamiltonian", f.name)))?;
    let gh = g.hamiltonian.clone().ok_or_else(|| Error::Argument(format!("{} has no Hamiltonian", g.name)))?;
    let fi = f.clone();
    let h = HamiltonianField::new(format!("{}+{}", fh.name, gh.name), move |z, t| {
        let w = fi.apply_inverse(t, z).unwrap_or_else(|_| vec![C64::new(f64::NAN, f64::NAN); z.len()]);
        fh.eval(z, t) + gh.eval(&w, t)
    });
    p.is_loop = f.is_loop && g.is_loop;
    p.is_equivariant = f.is_equivariant && g.is_equivariant;
    Ok(p.with_hamiltonian(h))
}

/// Composes a list of paths left to right: `p_0 ∘ p_1 ∘ …`.
pub fn compose_all(paths: &[PathFamily]) -> Result<PathFamily> {
    let mut it = paths.iter().rev();
    let mut acc = it.next().ok_or_else(|| Error::Argument("empty composition".into()))?.clone();
    for p in it {
        acc = compose_paths(p, &acc)?;
    }
    Ok(acc)
}

/// The path `{g_t^{-1}}`, generated by `−G(g_t z, t)`.
pub fn invert_path(g: &PathFamily) -> Result<PathFamily> {
    let gh = g.hamiltonian.clone().ok_or_else(|| Error::Argument(format!("{} has no Hamiltonian", g.name)))?;
    let g1 = g.clone();
    let mut p = PathFamily::new(format!("({})^-1", g.name), g.n, move |t, z| {
        g1.apply_inverse(t, z).unwrap_or_else(|_| vec![C64::new(f64::NAN, f64::NAN); z.len()])
    });
    let g2 = g.clone();
    p = p.with_inverse(move |t, z| g2.apply(t, z));
    let g3 = g.clone();
    let h = HamiltonianField::new(format!("-{}(g z)", gh.name), move |z, t| -gh.eval(&g3.apply(t, z), t));
    p.is_loop = g.is_loop;
    p.is_equivariant = g.is_equivariant;
    Ok(p.with_hamiltonian(h))
}

type PointMap = Arc<dyn Fn(&[C64]) -> Vec<C64> + Send + Sync>;

/// A time-independent symplectomorphism of ℂⁿ given with its inverse.
#[derive(Clone)]
pub struct SymplecticMap {
    pub name: String,
    pub n: usize,
    fwd: PointMap,
    inv: PointMap,
}

impl SymplecticMap {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        fwd: impl Fn(&[C64]) -> Vec<C64> + Send + Sync + 'static,
        inv: impl Fn(&[C64]) -> Vec<C64> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), n, fwd: Arc::new(fwd), inv: Arc::new(inv) }
    }

    pub fn apply(&self, z: &[C64]) -> Vec<C64> {
        (self.fwd)(z)
    }

    pub fn apply_inverse(&self, z: &[C64]) -> Vec<C64> {
        (self.inv)(z)
    }
}

/// The path `{a g_t a^{-1}}`, generated by `G(a^{-1} z, t)`.
pub fn conjugate_path(a: &SymplecticMap, g: &PathFamily) -> Result<PathFamily> {
    let gh = g.hamiltonian.clone().ok_or_else(|| Error::Argument(format!("{} has no Hamiltonian", g.name)))?;
    let (a1, g1) = (a.clone(), g.clone());
    let mut p = PathFamily::new(format!("{} {} {}^-1", a.name, g.name, a.name), g.n, move |t, z| a1.apply(&g1.apply(t, &a1.apply_inverse(z))));
    if g.has_closed_inverse() {
        let (a2, g2) = (a.clone(), g.clone());
        p = p.with_inverse(move |t, z| a2.apply(&g2.apply_inverse(t, &a2.apply_inverse(z)).expect("closed inverse")));
    }
    let a3 = a.clone();
    let h = HamiltonianField::new(format!("{}(a^-1 z)", gh.name), move |z, t| gh.eval(&a3.apply_inverse(z), t));
    p.is_loop = g.is_loop;
    Ok(p.with_hamiltonian(h))
}

/// Time-derivative step for Hamiltonian extraction.
pub const EXTRACT_STEP: f64 = 1e-5;

/// `∂_t f_t(x)` by central differences.
pub fn path_velocity(f: &PathFamily, t: f64, x: &[C64]) -> Vec<C64> {
    let h = EXTRACT_STEP;
    let a = f.apply(t + h, x);
    let b = f.apply(t - h, x);
    a.iter().zip(&b).map(|(u, v)| (u - v) / (2.0 * h)).collect()
}

/// `H(f_t x, t)` without inverting the path: `α_{f_t x}(∂_t f_t(x))`.
pub fn hamiltonian_at_image(f: &PathFamily, t: f64, x: &[C64]) -> (Vec<C64>, f64) {
    let y = f.apply(t, x);
    let v = path_velocity(f, t, x);
    let h = liouville_pair(&y, &v);
    (y, h)
}

/// `H(z, t) = α_z(X_t(z))` with `X_t(z) = ∂_s f_s(f_t^{-1} z)|_{s=t}`.
pub fn extract_hamiltonian(f: &PathFamily) -> HamiltonianField {
    let f = f.clone();
    HamiltonianField::new(format!("extracted[{}]", f.name), move |z, t| match f.apply_inverse(t, z) {
        Ok(x) => liouville_pair(z, &path_velocity(&f, t, &x)),
        Err(_) => f64::NAN,
    })
}

/// Diagonal unitary loop `z_j ↦ e^{2πi r_j t} z_j`, generated by `Σ r_j ρ_j`.
pub fn diagonal_loop(name: impl Into<String>, rates: Vec<f64>) -> PathFamily {
    let n = rates.len();
    let r1 = rates.clone();
    let r2 = rates.clone();
    let r3 = rates.clone();
    let r4 = rates.clone();
    let name = name.into();
    PathFamily::new(name.clone(), n, move |t, z| rotate_diag(&r1, t, z))
        .with_inverse(move |t, z| rotate_diag(&r2, -t, z))
        .with_hamiltonian(
            HamiltonianField::new(format!("H[{name}]"), move |z, _| r3.iter().enumerate().map(|(j, r)| r * rho_j(z, j)).sum()).with_gradient(
                move |z, _| {
                    let n = z.len();
                    let mut g = vec![0.0; 2 * n];
                    for j in 0..n {
                        g[j] = 2.0 * PI * r4[j] * z[j].re;
                        g[n + j] = 2.0 * PI * r4[j] * z[j].im;
                    }
                    g
                },
            ),
        )
        .as_loop()
}

fn phase(turns: f64) -> C64 {
    let a = 2.0 * PI * crate::geometry::wrap_unit(turns);
    C64::new(a.cos(), a.sin())
}

fn rotate_diag(rates: &[f64], t: f64, z: &[C64]) -> Vec<C64> {
    z.iter().zip(rates).map(|(w, r)| w * phase(r * t)).collect()
}

/// `e_t(z) = e^{2πit} z`, generated by `π|z|²`.
pub fn e_loop(n: usize) -> PathFamily {
    diagonal_loop("e", vec![1.0; n])
}

/// `f_t = (e^{2πi(n−1)t} z_1, e^{−2πit} w)`, generated by `F = (n−1)ρ_1 − ϱ`.
pub fn f_loop(n: usize) -> PathFamily {
    let mut r = vec![-1.0; n];
    r[0] = (n - 1) as f64;
    diagonal_loop("f", r)
}

/// `g_t = (e^{2πit} z_1, e^{−2πit} z_2, z_3, …)`, generated by `G = ρ_1 − ρ_2`.
pub fn g_loop(n: usize) -> PathFamily {
    let mut r = vec![0.0; n];
    r[0] = 1.0;
    r[1] = -1.0;
    diagonal_loop("g", r)
}

/// `b_{j,t}`: rotation of the coordinate `z_j` (1-based) by `e^{2πit}`.
pub fn b_loop(n: usize, j: usize) -> Result<PathFamily> {
    if j == 0 || j > n {
        return arg(format!("coordinate index {j} outside 1..{n}"));
    }
    let mut r = vec![0.0; n];
    r[j - 1] = 1.0;
    Ok(diagonal_loop(format!("b{j}"), r))
}

/// The rotation `I^{(s)}_j` of the `(z_1, z_j)` plane by the angle `sπ/2`.
pub fn rotation_i(n: usize, j: usize, s: f64) -> Result<SymplecticMap> {
    if j < 2 || j > n {
        return arg(format!("rotation index {j} outside 2..{n}"));
    }
    let th = 0.5 * PI * s;
    let (c, sn) = (th.cos(), th.sin());
    let k = j - 1;
    let rot = move |z: &[C64], sgn: f64| {
        let mut w = z.to_vec();
        w[0] = c * z[0] - sgn * sn * z[k];
        w[k] = sgn * sn * z[0] + c * z[k];
        w
    };
    Ok(SymplecticMap::new(format!("I{j}({s})"), n, move |z| rot(z, 1.0), move |z| rot(z, -1.0)))
}

/// `h^{(s)}_{j,t} = I b_{j,t} I^{-1} b_{j,−t}` with Hamiltonian
/// `ρ_j(I^{-1} z) − ρ_j(I b_{j,−t} I^{-1} z)`.
pub fn h_loop(n: usize, j: usize, s: f64) -> Result<PathFamily> {
    let i = rotation_i(n, j, s)?;
    let k = j - 1;
    let rot = move |z: &[C64], t: f64| {
        let mut w = z.to_vec();
        w[k] *= phase(t);
        w
    };
    let i1 = i.clone();
    let eval = move |t: f64, z: &[C64]| i1.apply(&rot(&i1.apply_inverse(&rot(z, -t)), t));
    let i2 = i.clone();
    let inv = move |t: f64, z: &[C64]| rot(&i2.apply(&rot(&i2.apply_inverse(z), -t)), t);
    let i3 = i.clone();
    let ham = HamiltonianField::new(format!("H{j}({s})"), move |z, t| {
        let a = i3.apply_inverse(z);
        let b = i3.apply(&rot(&a, -t));
        rho_j(&a, k) - rho_j(&b, k)
    });
    Ok(PathFamily::new(format!("h{j}({s})"), n, eval).with_inverse(inv).with_hamiltonian(ham).as_loop())
}

/// `f^{(s)}_{m,t} = h^{(s)}_{2,t} ∘ … ∘ h^{(s)}_{m,t}`; equals `f_t` for `m = n`
/// at `s = 1` and the constant loop at `s = 0`.
pub fn f_homotopy(n: usize, m: usize, s: f64) -> Result<PathFamily> {
    if m < 2 || m > n {
        return arg(format!("m = {m} outside 2..{n}"));
    }
    let hs: Vec<PathFamily> = (2..=m).map(|j| h_loop(n, j, s)).collect::<Result<_>>()?;
    let mut p = compose_all(&hs)?;
    p.name = format!("f({s})_{m}");
    Ok(p)
}

/// Catalog of the unitary loops used throughout.
#[derive(Clone, Debug)]
pub struct UnitaryCatalog {
    pub e: PathFamily,
    pub f: PathFamily,
    pub g: PathFamily,
    pub b: Vec<PathFamily>,
}

pub fn make_unitary_generators(n: usize) -> Result<UnitaryCatalog> {
    if n < 2 {
        return arg("unitary generators need n >= 2");
    }
    Ok(UnitaryCatalog { e: e_loop(n), f: f_loop(n), g: g_loop(n), b: (1..=n).map(|j| b_loop(n, j)).collect::<Result<_>>()? })
}

/// The map `(z, t) ↦ (v(z) e^{2πi r_j t} z_j, t)` with `v = (1 + Σ k_j ρ_j)^{−1/2}`,
/// with its closed-form Jacobian. Domain: `1 + Σ k_j ρ_j > 0`.
pub fn diagonal_loop_embedding(name: impl Into<String>, rates: Vec<f64>, kcoef: Vec<f64>) -> SmoothMap {
    let n = rates.len();
    assert_eq!(kcoef.len(), n);
    let quad = {
        let k = kcoef.clone();
        move |z: &[C64]| 1.0 + k.iter().enumerate().map(|(j, c)| c * rho_j(z, j)).sum::<f64>()
    };
    let (r1, q1) = (rates.clone(), quad.clone());
    let eval = move |x: &ContactPoint| {
        let v = q1(&x.z.z).sqrt().recip();
        let w = rotate_diag(&r1, x.t, &x.z.z).into_iter().map(|c| c * v).collect();
        ContactPoint { z: PhasePoint::new(w), t: x.t }
    };
    let (r2, q2, k2) = (rates.clone(), quad.clone(), kcoef.clone());
    let jac = move |x: &ContactPoint| {
        let z = &x.z.z;
        let v = q2(z).sqrt().recip();
        let xr = x.z.to_real();
        // ∂v/∂x_a = −½ v³ ∂K/∂x_a, ∂K/∂x_a = 2π k_j x_a
        let dv: Vec<f64> = (0..2 * n).map(|a| -0.5 * v.powi(3) * 2.0 * PI * k2[a % n] * xr[a]).collect();
        let mut m = DMatrix::zeros(2 * n + 1, 2 * n + 1);
        for j in 0..n {
            let ph = phase(r2[j] * x.t);
            let (c, s) = (ph.re, ph.im);
            // inner = v·I + z dvᵀ, rows j (p) and n+j (q)
            for a in 0..2 * n {
                let ip = if a == j { v } else { 0.0 } + xr[j] * dv[a];
                let iq = if a == n + j { v } else { 0.0 } + xr[n + j] * dv[a];
                m[(j, a)] = c * ip - s * iq;
                m[(n + j, a)] = s * ip + c * iq;
            }
            let w = z[j] * ph * v;
            let dt = C64::new(0.0, 2.0 * PI * r2[j]) * w;
            m[(j, 2 * n)] = dt.re;
            m[(n + j, 2 * n)] = dt.im;
        }
        m[(2 * n, 2 * n)] = 1.0;
        m
    };
    let q3 = quad;
    SmoothMap::new(name, n, eval).with_jacobian(jac).with_guard(move |x| q3(&x.z.z) > 0.0)
}

/// The twist map `F_N(z, t) = (e^{2πiNt} z / √(1 + Nπ|z|²), t)`; conformal factor `1/(1 + Nπ|z|²)`.
pub fn make_twist(big_n: u32, n: usize) -> Result<SmoothMap> {
    if big_n == 0 || n == 0 {
        return arg("twist map needs N >= 1 and n >= 1");
    }
    let nn = big_n as f64;
    Ok(diagonal_loop_embedding(format!("twist N={big_n}"), vec![nn; n], vec![nn; n]))
}

/// `Ψ(z, t) = (h_t z / (1 + H(h_t z, t)), t)` with the division taken in the
/// ℝ₊-action sense. Domain guard `1 + H(h_t z, t) > 0`. Jacobian by finite
/// differences.
pub fn make_loop_embedding(h: &PathFamily, ham: &HamiltonianField) -> SmoothMap {
    let (h1, k1) = (h.clone(), ham.clone());
    let (h2, k2) = (h.clone(), ham.clone());
    SmoothMap::new(format!("loop embedding of {}", h.name), h.n, move |x| {
        let w = h1.apply(x.t, &x.z.z);
        let c = 1.0 + k1.eval(&w, x.t);
        ContactPoint { z: PhasePoint::new(w).scaled(c.sqrt().recip()), t: x.t }
    })
    .with_guard(move |x| {
        let w = h2.apply(x.t, &x.z.z);
        1.0 + k2.eval(&w, x.t) > 0.0
    })
}

/// The pair `Φ(z, t) = f_t z / √(1 + F)`, `Ψ(z, t) = g_t z / √(1 + G)`.
pub fn make_squeeze_pair(n: usize) -> Result<(SmoothMap, SmoothMap)> {
    if n < 2 {
        return arg("squeeze pair needs n >= 2");
    }
    let mut rf = vec![-1.0; n];
    rf[0] = (n - 1) as f64;
    let mut rg = vec![0.0; n];
    rg[0] = 1.0;
    rg[1] = -1.0;
    Ok((diagonal_loop_embedding("Phi", rf.clone(), rf), diagonal_loop_embedding("Psi", rg.clone(), rg)))
}

/// The shift `Y_c`: `z_1 ↦ z_1 + c`.
pub fn make_shift(c: f64, n: usize) -> SmoothMap {
    SmoothMap::new(format!("shift {c}"), n, move |x| {
        let mut z = x.z.clone();
        z.z[0] += c;
        ContactPoint { z, t: x.t }
    })
    .with_jacobian(move |_| DMatrix::identity(2 * n + 1, 2 * n + 1))
}

pub fn shift_point(c: f64, z: &[C64]) -> Vec<C64> {
    let mut w = z.to_vec();
    w[0] += c;
    w
}

/// `(p, q, t) ↦ (√h p, √h q, h(t + ½ p·q))` with `h = 2πħ`; the target carries
/// `du − p dq` with `u` of period `h`, and the conformal factor is `h`.
pub fn make_planck_map(hbar: f64, n: usize) -> Result<SmoothMap> {
    if !(hbar > 0.0) {
        return arg("Planck map needs hbar > 0");
    }
    let h = 2.0 * PI * hbar;
    let sh = h.sqrt();
    let eval = move |x: &ContactPoint| {
        let pq: f64 = x.z.z.iter().map(|c| c.re * c.im).sum();
        ContactPoint { z: x.z.scaled(sh), t: crate::geometry::wrap_period(h * (x.t + 0.5 * pq), h) }
    };
    let jac = move |x: &ContactPoint| {
        let mut m = DMatrix::zeros(2 * n + 1, 2 * n + 1);
        for a in 0..2 * n {
            m[(a, a)] = sh;
        }
        for j in 0..n {
            m[(2 * n, j)] = 0.5 * h * x.z.z[j].im;
            m[(2 * n, n + j)] = 0.5 * h * x.z.z[j].re;
        }
        m[(2 * n, 2 * n)] = h;
        m
    };
    Ok(SmoothMap::new(format!("Planck hbar={hbar}"), n, eval).with_jacobian(jac).with_target(TargetForm::Planck { period: h }))
}

/// The PU(2,1) element `b`, the Cayley transform and the dilation it becomes.
#[derive(Clone, Debug)]
pub struct Pu21 {
    pub alpha: f64,
    /// Dilation factor `s` of `cayley ∘ b ∘ cayley^{-1} = (s² w_1, s w_2)`.
    pub s: f64,
    /// Largest deviation from the diagonal form over the probe points.
    pub dilation_defect: f64,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

impl Pu21 {
    fn ch(&self) -> f64 {
        self.alpha.cosh()
    }

    pub fn b(&self, z: &[C64]) -> Result<Vec<C64>> {
        let (ch, sh) = (self.ch(), self.alpha.sinh());
        let d = z[0] + ch;
        if d.norm() < 1e-14 {
            return Err(Error::Domain("b pole z1 = -cosh(alpha)".into()));
        }
        Ok(vec![(ch * z[0] + 1.0) / d, sh * z[1] / d])
    }

    pub fn b_inv(&self, z: &[C64]) -> Result<Vec<C64>> {
        let (ch, sh) = (self.ch(), self.alpha.sinh());
        let d = ch - z[0];
        if d.norm() < 1e-14 {
            return Err(Error::Domain("b^-1 pole z1 = cosh(alpha)".into()));
        }
        Ok(vec![(ch * z[0] - 1.0) / d, sh * z[1] / d])
    }

    pub fn cayley(z: &[C64]) -> Result<Vec<C64>> {
        let d = c(1.0, 0.0) - z[0];
        if d.norm() < 1e-14 {
            return Err(Error::Domain("Cayley pole z1 = 1".into()));
        }
        let k = c(0.0, 1.0) / d;
        Ok(vec![k * (z[0] + 1.0), k * z[1]])
    }

    pub fn cayley_inv(w: &[C64]) -> Result<Vec<C64>> {
        let d = w[0] + c(0.0, 1.0);
        if d.norm() < 1e-14 {
            return Err(Error::Domain("inverse Cayley pole w1 = -i".into()));
        }
        Ok(vec![(w[0] - c(0.0, 1.0)) / d, 2.0 * w[1] / d])
    }

    /// `cayley ∘ b ∘ cayley^{-1}`.
    pub fn conjugated(&self, w: &[C64]) -> Result<Vec<C64>> {
        Self::cayley(&self.b(&Self::cayley_inv(w)?)?)
    }
}

/// Builds `b` for the given `α` and recovers the dilation factor numerically.
pub fn make_pu21(alpha: f64) -> Result<Pu21> {
    if !(alpha > 0.0) {
        return arg("alpha must be positive");
    }
    let mut p = Pu21 { alpha, s: f64::NAN, dilation_defect: 0.0 };
    let probe = [c(0.3, 1.1), c(0.2, -0.4)];
    let img = p.conjugated(&probe)?;
    let s = (img[1] / probe[1]).re;
    p.s = s;
    let probes = [[c(0.0, 1.0), c(0.5, 0.0)], [c(-1.0, 2.0), c(0.1, 0.3)], [c(2.0, 0.5), c(-0.7, 0.2)], [c(0.3, 1.1), c(0.2, -0.4)]];
    let mut defect: f64 = 0.0;
    for w in probes {
        let img = p.conjugated(&w)?;
        let e1 = (img[0] - w[0] * s * s).norm() / (w[0] * s * s).norm();
        let e2 = (img[1] - w[1] * s).norm() / (w[1] * s).norm();
        defect = defect.max(e1).max(e2);
    }
    p.dilation_defect = defect;
    Ok(p)
}

/// The loop `e_{−t} f_{3t} b e_t b^{-1}` on the unit sphere S³ ⊂ ℂ².
pub fn s3_loop(alpha: f64) -> Result<PathFamily> {
    let b = make_pu21(alpha)?;
    let b1 = b.clone();
    let nan = || vec![c(f64::NAN, f64::NAN); 2];
    let eval = move |t: f64, z: &[C64]| -> Vec<C64> {
        let w = match b1.b_inv(z) {
            Ok(w) => w,
            Err(_) => return nan(),
        };
        let w = rotate_diag(&[1.0, 1.0], t, &w);
        let w = match b1.b(&w) {
            Ok(w) => w,
            Err(_) => return nan(),
        };
        rotate_diag(&[2.0, -4.0], t, &w)
    };
    let b2 = b;
    let inv = move |t: f64, z: &[C64]| -> Vec<C64> {
        let w = rotate_diag(&[2.0, -4.0], -t, z);
        let w = match b2.b_inv(&w) {
            Ok(w) => w,
            Err(_) => return nan(),
        };
        let w = rotate_diag(&[1.0, 1.0], -t, &w);
        b2.b(&w).unwrap_or_else(|_| nan())
    };
    Ok(PathFamily::new(format!("S3 loop alpha={alpha}"), 2, eval).with_inverse(inv).as_loop().non_equivariant())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{conformal_factor_check, radial_invariants, sphere_points, symplectic_defect, varrho};
    use crate::exec::Execution;

    fn pts(n: usize, k: usize, seed: u64, r: f64) -> Vec<Vec<C64>> {
        sphere_points(2 * n, k, seed).iter().map(|x| PhasePoint::from_real(x).scaled(r).z).collect()
    }

    fn close(a: &[C64], b: &[C64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn twist_fixes_origin_and_maps_radius() {
        let f = make_twist(1, 2).unwrap();
        let o = ContactPoint::new(PhasePoint::zeros(2), 0.3);
        assert_eq!(f.apply(&o).unwrap(), o);
        let z = PhasePoint::new(vec![c(1.0 / PI.sqrt(), 0.0), c(0.0, 0.0)]);
        let y = f.apply(&ContactPoint::new(z, 0.17)).unwrap();
        assert!((y.z.rho() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn twist_conformal_factor_matches_formula() {
        for nn in 1..=3u32 {
            let f = make_twist(nn, 2).unwrap();
            for z in pts(2, 20, 4, 0.8) {
                let x = ContactPoint::new(PhasePoint::new(z.clone()), 0.37);
                let jac = f.jacobian(&x);
                let y = f.apply(&x).unwrap();
                let tc = nalgebra::DVector::from_vec(f.target.covector(&y.z).coeffs);
                let pulled = jac.transpose() * tc;
                let src = nalgebra::DVector::from_vec(crate::geometry::contact_form(&x).coeffs);
                let expect = 1.0 / (1.0 + nn as f64 * crate::geometry::rho(&z));
                assert!((pulled - src * expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_jacobians_match_fd() {
        let (phi, psi) = make_squeeze_pair(3).unwrap();
        let maps = [make_twist(2, 3).unwrap(), phi, psi, make_planck_map(0.3, 3).unwrap(), make_shift(0.7, 3)];
        for m in &maps {
            for z in pts(3, 10, 8, 0.3) {
                let x = ContactPoint::new(PhasePoint::new(z), 0.41);
                if !m.in_domain(&x) {
                    continue;
                }
                let a = m.jacobian(&x);
                let b = m.fd_jacobian(&x);
                let rel = (&a - &b).norm() / a.norm();
                assert!(rel < 1e-5, "{}: {rel}", m.name);
            }
        }
    }

    #[test]
    fn loop_embedding_reproduces_twist() {
        for nn in 1..=3u32 {
            let h = diagonal_loop("eN", vec![nn as f64; 2]);
            let psi = make_loop_embedding(&h, h.hamiltonian().unwrap());
            let tw = make_twist(nn, 2).unwrap();
            for z in pts(2, 10, 2, 1.3) {
                let x = ContactPoint::new(PhasePoint::new(z), 0.61);
                let a = psi.apply(&x).unwrap();
                let b = tw.apply(&x).unwrap();
                assert!(a.z.dist(&b.z) < 1e-14 && a.t == b.t);
            }
        }
        let id = PathFamily::identity(2);
        let psi = make_loop_embedding(&id, &HamiltonianField::zero());
        let x = ContactPoint::new(PhasePoint::from_pq(&[0.2, 0.1], &[0.3, -0.4]), 0.5);
        assert_eq!(psi.apply(&x).unwrap(), x);
    }

    #[test]
    fn loop_embedding_factor_is_one_over_one_plus_h() {
        let h = f_loop(2);
        let psi = make_loop_embedding(&h, h.hamiltonian().unwrap());
        for z in pts(2, 10, 5, 0.3) {
            let x = ContactPoint::new(PhasePoint::new(z.clone()), 0.23);
            let jac = psi.fd_jacobian(&x);
            let y = psi.apply(&x).unwrap();
            let pulled = jac.transpose() * nalgebra::DVector::from_vec(psi.target.covector(&y.z).coeffs);
            let src = nalgebra::DVector::from_vec(crate::geometry::contact_form(&x).coeffs);
            let hz = h.hamiltonian().unwrap().eval(&h.apply(x.t, &z), x.t);
            let expect = 1.0 / (1.0 + hz);
            assert!((pulled - src * expect).norm() < 1e-6);
        }
    }

    #[test]
    fn fs_endpoints() {
        for n in 2..=4 {
            let f1 = f_homotopy(n, n, 1.0).unwrap();
            let f0 = f_homotopy(n, n, 0.0).unwrap();
            let ff = f_loop(n);
            for z in pts(n, 10, 1, 1.0) {
                for t in [0.0, 0.13, 0.5, 0.77] {
                    assert!(close(&f1.apply(t, &z), &ff.apply(t, &z), 1e-12));
                    assert!(close(&f0.apply(t, &z), &z, 1e-12));
                }
            }
        }
    }

    #[test]
    fn f_is_special_unitary() {
        for n in 2..=4 {
            let f = f_loop(n);
            for t in [0.1, 0.35, 0.9] {
                let d = f.matrix(t).determinant();
                assert!((d - c(1.0, 0.0)).norm() < 1e-12);
                let r = realify(&f.matrix(t));
                assert!(symplectic_defect(&r, n) < 1e-12);
            }
        }
    }

    #[test]
    fn h_identity_and_untouched_coordinates() {
        let n = 3;
        for j in 2..=n {
            for s in [0.0, 0.3, 0.8, 1.0] {
                let h = h_loop(n, j, s).unwrap();
                let i = rotation_i(n, j, s).unwrap();
                for z in pts(n, 10, 7, 1.0) {
                    for t in [0.0, 0.2, 0.65] {
                        let hz = h.apply(t, &z);
                        let lhs = h.hamiltonian().unwrap().eval(&hz, t);
                        let mut bz = z.clone();
                        bz[j - 1] *= phase(-t);
                        let rhs = -rho_j(&z, j - 1) + rho_j(&i.apply_inverse(&bz), j - 1);
                        assert!((lhs - rhs).abs() < 1e-12);
                        for l in 0..n {
                            if l != 0 && l != j - 1 {
                                assert_eq!(hz[l], z[l]);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sgrad_of_f_hamiltonian_is_generator() {
        let n = 3;
        let f = f_loop(n);
        for z in pts(n, 10, 9, 1.1) {
            let v = crate::geometry::sgrad(f.hamiltonian().unwrap(), &PhasePoint::new(z.clone()), 0.0);
            let exact: Vec<C64> = z.iter().enumerate().map(|(j, w)| c(0.0, 2.0 * PI * if j == 0 { (n - 1) as f64 } else { -1.0 }) * w).collect();
            assert!(close(&v.z, &exact, 1e-10));
        }
    }

    #[test]
    fn extraction_reproduces_closed_forms() {
        let n = 3;
        for p in [e_loop(n), f_loop(n), g_loop(n)] {
            let ex = extract_hamiltonian(&p);
            for z in pts(n, 10, 3, 0.9) {
                for t in [0.1, 0.6] {
                    let a = ex.eval(&z, t);
                    let b = p.hamiltonian().unwrap().eval(&z, t);
                    assert!((a - b).abs() < 1e-7, "{}", p.name);
                }
            }
        }
        let id = extract_hamiltonian(&PathFamily::identity(2));
        assert_eq!(id.eval(&[c(0.3, 0.2), c(1.0, 0.0)], 0.4), 0.0);
    }

    #[test]
    fn calculus_consistency() {
        let n = 2;
        let f = h_loop(n, 2, 0.6).unwrap();
        let g = g_loop(n);
        let fg = compose_paths(&f, &g).unwrap();
        let ex = extract_hamiltonian(&fg);
        let gi = invert_path(&f).unwrap();
        let exi = extract_hamiltonian(&gi);
        let a = rotation_i(n, 2, 0.3).unwrap();
        let cj = conjugate_path(&a, &f_loop(n)).unwrap();
        let exc = extract_hamiltonian(&cj);
        for z in pts(n, 10, 6, 1.0) {
            for t in [0.05, 0.4, 0.9] {
                assert!((ex.eval(&z, t) - fg.hamiltonian().unwrap().eval(&z, t)).abs() < 1e-7);
                assert!((exi.eval(&z, t) - gi.hamiltonian().unwrap().eval(&z, t)).abs() < 1e-7);
                assert!((exc.eval(&z, t) - cj.hamiltonian().unwrap().eval(&z, t)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn e_composed_with_itself() {
        let e = e_loop(2);
        let ee = compose_paths(&e, &e).unwrap();
        let e2 = e.time_scaled(2.0);
        for z in pts(2, 5, 1, 1.0) {
            for t in [0.1, 0.3] {
                assert!(close(&ee.apply(t, &z), &e2.apply(t, &z), 1e-12));
                assert!((ee.hamiltonian().unwrap().eval(&z, t) - 2.0 * crate::geometry::rho(&z)).abs() < 1e-12);
            }
        }
        let id = compose_paths(&e, &PathFamily::identity(2)).unwrap();
        let z = [c(0.1, 0.2), c(-0.3, 0.5)];
        assert!((id.hamiltonian().unwrap().eval(&z, 0.2) - crate::geometry::rho(&z)).abs() < 1e-14);
    }

    #[test]
    fn inversion_examples() {
        let e = e_loop(2);
        let ei = invert_path(&e).unwrap();
        let z = [c(0.4, -0.1), c(0.2, 0.3)];
        assert!(close(&ei.apply(0.3, &z), &rotate_diag(&[1.0, 1.0], -0.3, &z), 1e-14));
        assert!((ei.hamiltonian().unwrap().eval(&z, 0.3) + crate::geometry::rho(&z)).abs() < 1e-14);
        let eii = invert_path(&ei).unwrap();
        assert!(close(&eii.apply(0.3, &z), &e.apply(0.3, &z), 1e-9));
        let id = invert_path(&PathFamily::identity(2)).unwrap();
        assert_eq!(id.apply(0.5, &z), z.to_vec());
    }

    #[test]
    fn newton_inverse_without_closed_form() {
        let h = h_loop(3, 3, 0.4).unwrap();
        let bare = PathFamily::new("bare", 3, move |t, z| h.apply(t, z));
        for z in pts(3, 5, 2, 1.0) {
            let x = bare.apply_inverse(0.3, &z).unwrap();
            assert!(close(&bare.apply(0.3, &x), &z, 1e-10));
        }
    }

    #[test]
    fn squeeze_pair_formulas() {
        let n = 3;
        let (phi, psi) = make_squeeze_pair(n).unwrap();
        for z in pts(n, 20, 12, 0.4) {
            let x = ContactPoint::new(PhasePoint::new(z.clone()), 0.3);
            let r = radial_invariants(&x.z);
            let y = psi.apply(&x).unwrap();
            let expect = r.varrho / (1.0 + r.rho_j[0] - r.rho_j[1]);
            assert!((varrho(&y.z.z) - expect).abs() < 1e-12);
            let u = phi.apply(&x).unwrap();
            let expect = (r.rho_j[0] + r.varrho) / (1.0 + (n - 1) as f64 * r.rho_j[0] - r.varrho);
            assert!((u.z.rho() - expect).abs() < 1e-12);
        }
        let z = ContactPoint::new(PhasePoint::new(vec![c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]), 0.1);
        assert_eq!(varrho(&psi.apply(&z).unwrap().z.z), 0.0);
    }

    #[test]
    fn shift_group_law() {
        let z = [c(0.3, 0.1), c(0.5, 0.2)];
        assert_eq!(shift_point(0.0, &z), z.to_vec());
        assert!(close(&shift_point(0.4, &shift_point(0.7, &z)), &shift_point(1.1, &z), 1e-15));
        assert_eq!(varrho(&shift_point(2.0, &z)), varrho(&z));
    }

    #[test]
    fn planck_factor_and_balls() {
        let m = make_planck_map(0.3, 2).unwrap();
        let grid = crate::geometry::SamplingGrid { shells: 2, sphere_points: 30, time_samples: 3, ..Default::default() };
        let rep = conformal_factor_check(&m, &grid.contact_points(2), 1e-12, false, Execution::Sequential);
        let h = 2.0 * PI * 0.3;
        assert!(rep.pass);
        assert!((rep.value - h).abs() < 1e-12 && (rep.extras["max_factor"] - h).abs() < 1e-12);
        let z = PhasePoint::from_pq(&[0.3, 0.1], &[0.2, 0.4]);
        let y = m.apply(&ContactPoint::new(z.clone(), 0.2)).unwrap();
        assert!((y.z.rho() - h * z.rho()).abs() < 1e-14);
        let one = make_planck_map(1.0 / (2.0 * PI), 2).unwrap();
        let y = one.apply(&ContactPoint::new(z.clone(), 0.2)).unwrap();
        assert!(y.z.dist(&z) < 1e-15);
    }

    #[test]
    fn pu21_properties() {
        for alpha in [0.05, 0.3, 1.0] {
            let p = make_pu21(alpha).unwrap();
            let fixed = p.b(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
            assert!(close(&fixed, &[c(1.0, 0.0), c(0.0, 0.0)], 1e-15));
            for z in pts(2, 50, 4, 1.0) {
                let w = p.b(&z).unwrap();
                assert!((w[0].norm_sqr() + w[1].norm_sqr() - 1.0).abs() < 1e-12);
                assert!(close(&p.b_inv(&w).unwrap(), &z, 1e-11));
            }
            assert!(p.dilation_defect < 1e-8);
            // Multiplier of b_1 at its fixed point −1 is coth²(α/2).
            let oracle = 1.0 / (alpha / 2.0).tanh();
            assert!((p.s - oracle).abs() < 1e-8 * oracle);
        }
        assert!(make_pu21(0.01).unwrap().s > make_pu21(0.1).unwrap().s);
        assert!(make_pu21(0.3).unwrap().b(&[c(-0.3f64.cosh(), 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn s3_loop_closes_and_stays_on_sphere() {
        let l = s3_loop(0.2).unwrap();
        for z in pts(2, 20, 3, 1.0) {
            assert!(close(&l.apply(0.0, &z), &z, 1e-12));
            assert!(close(&l.apply(1.0, &z), &z, 1e-11));
            let w = l.apply(0.37, &z);
            assert!((w[0].norm_sqr() + w[1].norm_sqr() - 1.0).abs() < 1e-12);
            assert!(close(&l.apply_inverse(0.37, &w).unwrap(), &z, 1e-11));
        }
    }
}
