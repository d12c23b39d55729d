//! The distinguished equivariant symplectomorphism `a` at `M = point`, the
//! positive loop `φ_t = e_{−t} f_{3t} a e_t a^{-1}` and its contracting homotopy.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::geometry::{rho, rho_j, sphere_points, varrho, HamiltonianField, PhasePoint, SamplingGrid, C64};
use crate::maps::{e_loop, f_homotopy, f_loop, PathFamily, SymplecticMap};
use crate::report::{BoundReport, Witness};
use crate::verify::{HomotopyStage, LoopHomotopy, MuEstimate};

/// Shift parameters `(ν, c, λ)` with `πνc² > 2n/(2n+1) + ν·2n/(n−1)` and `πνc² ≤ λ² < 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftParams {
    pub n: usize,
    pub nu: f64,
    pub c: f64,
    pub lambda: f64,
    /// Admissible interval for `πνc²`.
    pub window: (f64, f64),
}

impl ShiftParams {
    /// Lower end `2n/(2n+1) + ν·2n/(n−1)` of the admissible window.
    pub fn lower_bound(n: usize, nu: f64) -> f64 {
        let nf = n as f64;
        2.0 * nf / (2.0 * nf + 1.0) + nu * 2.0 * nf / (nf - 1.0)
    }

    pub fn pi_nu_c2(&self) -> f64 {
        PI * self.nu * self.c * self.c
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return arg("shift parameters need n >= 2");
        }
        let v = self.pi_nu_c2();
        let lo = Self::lower_bound(self.n, self.nu);
        if !(self.nu > 0.0 && self.c > 0.0 && v > lo && v <= self.lambda * self.lambda && self.lambda < 1.0) {
            return Err(Error::Precondition(format!("shift parameters violate {lo} < pi nu c^2 = {v} <= lambda^2 < 1")));
        }
        Ok(())
    }
}

/// Smallest `ν ∈ {10^{−k}}` whose window keeps 95% of the `ν = 0` gap, `c` at
/// the window midpoint and `λ²` at the midpoint of `[πνc², 1)`.
pub fn choose_shift_params(n: usize) -> Result<ShiftParams> {
    if n < 2 {
        return arg("shift parameters need n >= 2");
    }
    let gap0 = 1.0 - ShiftParams::lower_bound(n, 0.0);
    for k in 1..=12 {
        let nu = 10f64.powi(-k);
        let lo = ShiftParams::lower_bound(n, nu);
        if 1.0 - lo >= 0.05 * gap0 && nu * 2.0 * n as f64 / (n as f64 - 1.0) <= 0.95 * gap0 {
            let mid = 0.5 * (lo + 1.0);
            let c = (mid / (PI * nu)).sqrt();
            let lambda = (0.5 * (mid + 1.0)).sqrt();
            let p = ShiftParams { n, nu, c, lambda, window: (lo, 1.0) };
            p.validate()?;
            return Ok(p);
        }
    }
    Err(Error::Precondition("no admissible nu found".into()))
}

/// `νρ_1 + ϱ`; `E` is its unit level set.
pub fn ellipsoid_e(nu: f64, z: &[C64]) -> f64 {
    nu * rho_j(z, 0) + varrho(z)
}

/// `νπ|z_1 − s|² + ϱ`; `Y_s(E)` is its unit level set.
pub fn shifted_ellipsoid(nu: f64, s: f64, z: &[C64]) -> f64 {
    nu * PI * (z[0] - s).norm_sqr() + varrho(z)
}

/// `(2n+1)ϱ − (n−1)ρ_1`; `W` is its sublevel set `≤ 1`.
pub fn w_function(z: &[C64]) -> f64 {
    let n = z.len() as f64;
    (2.0 * n + 1.0) * varrho(z) - (n - 1.0) * rho_j(z, 0)
}

/// Solves `Q(√u z) = 1` for `u > 0` by bracketing, bisection and Newton.
pub fn ray_crossing(q: &dyn Fn(&[C64]) -> f64, z: &[C64]) -> Result<f64> {
    let g = |u: f64| q(&z.iter().map(|c| c * u.sqrt()).collect::<Vec<_>>()) - 1.0;
    let (mut lo, mut hi) = (1.0, 1.0);
    let mut k = 0;
    while g(lo) >= 0.0 {
        lo *= 0.5;
        k += 1;
        if k > 200 {
            return Err(Error::NotStarshaped("ray does not start inside the hypersurface".into()));
        }
    }
    k = 0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        k += 1;
        if k > 200 {
            return Err(Error::NotStarshaped("ray never crosses the hypersurface".into()));
        }
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gu = g(u);
        if gu == 0.0 {
            return Ok(u);
        }
        if gu < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let h = 1e-7 * u;
        let d = (g(u + h) - g(u - h)) / (2.0 * h);
        let newton = u - gu / d;
        u = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (hi - lo) <= 1e-15 * hi || (gu.abs() < 1e-15) {
            break;
        }
    }
    Ok(u)
}

/// Extends a function `h` on the starshaped hypersurface `Σ = {Q = 1}` to the
/// equivariant function `F(z) = h(u(z) * z)/u(z)`. Points whose ray misses `Σ`
/// evaluate to NaN; use [`ray_crossing`] to get the error.
pub fn equivariant_extension(
    h: impl Fn(&[C64]) -> f64 + Send + Sync + 'static,
    q: impl Fn(&[C64]) -> f64 + Send + Sync + 'static,
) -> HamiltonianField {
    HamiltonianField::new("equivariant extension", move |z, _| {
        if z.iter().all(|c| c.norm_sqr() == 0.0) {
            return 0.0;
        }
        match ray_crossing(&q, z) {
            Ok(u) => h(&z.iter().map(|c| c * u.sqrt()).collect::<Vec<_>>()) / u,
            Err(_) => f64::NAN,
        }
    })
}

/// The shift generator `−q_1` extended equivariantly from `Y_s(E)`:
/// `F_s(z) = −q_1/r` where `r z ∈ Y_s(E)`.
#[derive(Clone, Copy, Debug)]
pub struct ShiftExtension {
    pub nu: f64,
    pub s: f64,
}

impl ShiftExtension {
    /// The real scale `r > 0` with `r z ∈ Y_s(E)`, and `√D = ½ ∂G/∂r`.
    fn scale(&self, x: &[f64]) -> (f64, f64) {
        let n = x.len() / 2;
        let k = PI * self.nu;
        let a = k * (x[0] * x[0] + x[n] * x[n]) + PI * (1..n).map(|j| x[j] * x[j] + x[n + j] * x[n + j]).sum::<f64>();
        let b = k * self.s * x[0];
        let c = 1.0 - k * self.s * self.s;
        let sd = (b * b + a * c).sqrt();
        let r = if b >= 0.0 { (b + sd) / a } else { c / (sd - b) };
        (r, sd)
    }

    /// `F_s` at real coordinates `x = (p, q)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        let n = x.len() / 2;
        -x[n] / self.scale(x).0
    }

    /// Gradient of `F_s` by implicit differentiation of `G(r, x) = 0`.
    pub fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        let n = x.len() / 2;
        let k = PI * self.nu;
        let (r, sd) = self.scale(x);
        let gr = 2.0 * sd;
        let q1 = x[n];
        let r2 = r * r;
        for a in 0..2 * n {
            let gx = if a == 0 {
                2.0 * k * r2 * x[0] - 2.0 * k * self.s * r
            } else if a == n {
                2.0 * k * r2 * x[n]
            } else {
                2.0 * PI * r2 * x[a]
            };
            let dr = -gx / gr;
            g[a] = q1 / r2 * dr - if a == n { 1.0 / r } else { 0.0 };
        }
    }

    pub fn field(&self) -> HamiltonianField {
        let me = *self;
        HamiltonianField::new(format!("F_s[s={}]", self.s), move |z, _| me.value(&PhasePoint::new(z.to_vec()).to_real())).with_gradient(
            move |z, _| {
                let x = PhasePoint::new(z.to_vec()).to_real();
                let mut g = vec![0.0; x.len()];
                me.gradient_into(&x, &mut g);
                g
            },
        )
    }
}

/// Flow-cache file format version.
pub const FLOW_CACHE_VERSION: u32 = 1;

type CacheKey = (u64, u64, bool, Vec<u64>);

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    s: f64,
    forward: bool,
    z: Vec<f64>,
    w: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    n: usize,
    nu: f64,
    c: f64,
    steps_per_unit: usize,
    entries: Vec<CacheEntry>,
}

/// Integrator settings for the distinguished map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub steps_per_unit: usize,
    pub max_halvings: usize,
    /// Allowed `|νπ|w_1 − s|² + ϱ(w) − 1|` for `w = a^{(s)}(x)`, `x ∈ E`.
    pub residual_tol: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self { steps_per_unit: 512, max_halvings: 3, residual_tol: 1e-6, samples: 64, seed: 0x0de }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub steps_per_unit: usize,
    pub halvings: usize,
    /// Max level-set residual of `a^{(s)}(E)` against `Y_s(E)` for `s ∈ {c/2, c}`.
    pub boundary_residual: f64,
    /// Max `|ϱ(a z) − ϱ(z)| / ρ(z)`.
    pub first_integral_defect: f64,
    /// Max `|a_h(z) − a_{h/2}(z)| / |z|` on the samples.
    pub richardson_error: f64,
}

/// The family `a^{(s)}`, `s ∈ [0, c]`, realized by integrating the flow of
/// `F_s` on the unit sphere and extending homogeneously.
#[derive(Clone)]
pub struct DistinguishedMap {
    pub params: ShiftParams,
    pub steps_per_unit: usize,
    pub build: BuildReport,
    cache: Arc<Mutex<HashMap<CacheKey, Vec<f64>>>>,
}

impl std::fmt::Debug for DistinguishedMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DistinguishedMap").field("params", &self.params).field("build", &self.build).finish()
    }
}

/// RK4 for `ẏ = X − ⟨X,y⟩y`, `ℓ̇ = ⟨X,y⟩` on the unit sphere from `s0` to `s1`.
fn integrate(nu: f64, x: &[f64], s0: f64, s1: f64, steps_per_unit: usize) -> Vec<f64> {
    let d = x.len();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || s0 == s1 {
        return x.to_vec();
    }
    let steps = (((s1 - s0).abs() * steps_per_unit as f64).ceil() as usize).max(1);
    let h = (s1 - s0) / steps as f64;
    let mut y: Vec<f64> = x.iter().map(|v| v / norm).collect();
    let mut ell = 0.0;
    let mut g = vec![0.0; d];
    let mut rhs = |s: f64, y: &[f64], out: &mut [f64]| -> f64 {
        ShiftExtension { nu, s }.gradient_into(y, &mut g);
        let n = d / 2;
        for j in 0..n {
            out[j] = -g[n + j];
            out[n + j] = g[j];
        }
        let dot: f64 = out.iter().zip(y).map(|(a, b)| a * b).sum();
        for (o, yi) in out.iter_mut().zip(y) {
            *o -= dot * yi;
        }
        dot
    };
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut tmp = vec![0.0; d];
    for i in 0..steps {
        let s = s0 + i as f64 * h;
        let l1 = rhs(s, &y, &mut k1);
        for a in 0..d {
            tmp[a] = y[a] + 0.5 * h * k1[a];
        }
        let l2 = rhs(s + 0.5 * h, &tmp, &mut k2);
        for a in 0..d {
            tmp[a] = y[a] + 0.5 * h * k2[a];
        }
        let l3 = rhs(s + 0.5 * h, &tmp, &mut k3);
        for a in 0..d {
            tmp[a] = y[a] + h * k3[a];
        }
        let l4 = rhs(s + h, &tmp, &mut k4);
        for a in 0..d {
            y[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
        ell += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v /= ny);
    }
    let k = norm * ell.exp();
    y.into_iter().map(|v| v * k).collect()
}

impl DistinguishedMap {
    /// Integrates and verifies `a^{(s)}(E) = Y_s(E)`, halving the step until the
    /// level-set residual is within tolerance.
    pub fn build(params: &ShiftParams, ode: &OdeConfig, mode: Execution) -> Result<Self> {
        params.validate()?;
        if ode.steps_per_unit == 0 || ode.samples == 0 {
            return arg("ODE config needs positive steps and samples");
        }
        let n = params.n;
        let dirs = sphere_points(2 * n, ode.samples, ode.seed);
        let on_e: Vec<Vec<f64>> = dirs
            .iter()
            .map(|x| {
                let z = PhasePoint::from_real(x);
                let k = ellipsoid_e(params.nu, &z.z).sqrt().recip();
                x.iter().map(|v| v * k).collect()
            })
            .collect();
        let mut spu = ode.steps_per_unit;
        for halvings in 0..=ode.max_halvings {
            let residual = map_indexed(mode, on_e.len() * 2, |i| {
                let s = params.c * (1 + i % 2) as f64 / 2.0;
                let w = PhasePoint::from_real(&integrate(params.nu, &on_e[i / 2], 0.0, s, spu));
                (shifted_ellipsoid(params.nu, s, &w.z) - 1.0).abs()
            })
            .into_iter()
            .fold(0.0, f64::max);
            if residual <= ode.residual_tol {
                let probe = &dirs[..dirs.len().min(16)];
                let stats = map_indexed(mode, probe.len(), |i| {
                    let w = integrate(params.nu, &probe[i], 0.0, params.c, spu);
                    let w2 = integrate(params.nu, &probe[i], 0.0, params.c, 2 * spu);
                    let (z, wz) = (PhasePoint::from_real(&probe[i]), PhasePoint::from_real(&w));
                    let fi = (varrho(&wz.z) - varrho(&z.z)).abs() / z.rho();
                    let rich = w.iter().zip(&w2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / z.norm();
                    (fi, rich)
                });
                let build = BuildReport {
                    steps_per_unit: spu,
                    halvings,
                    boundary_residual: residual,
                    first_integral_defect: stats.iter().map(|s| s.0).fold(0.0, f64::max),
                    richardson_error: stats.iter().map(|s| s.1).fold(0.0, f64::max),
                };
                return Ok(Self { params: params.clone(), steps_per_unit: spu, build, cache: Arc::new(Mutex::new(HashMap::new())) });
            }
            if halvings == ode.max_halvings {
                return Err(Error::Numerical(format!("a^(s)(E) misses Y_s(E) by {residual:e} after {halvings} step halvings")));
            }
            spu *= 2;
        }
        unreachable!("loop returns on its last iteration")
    }

    fn key(&self, s: f64, forward: bool, x: &[f64]) -> CacheKey {
        (s.to_bits(), self.steps_per_unit as u64, forward, x.iter().map(|v| v.to_bits()).collect())
    }

    fn run(&self, s: f64, forward: bool, z: &[C64]) -> Vec<C64> {
        let x = PhasePoint::new(z.to_vec()).to_real();
        let key = self.key(s, forward, &x);
        if let Some(w) = self.cache.lock().expect("cache lock").get(&key) {
            return PhasePoint::from_real(w).z;
        }
        let w = if forward { integrate(self.params.nu, &x, 0.0, s, self.steps_per_unit) } else { integrate(self.params.nu, &x, s, 0.0, self.steps_per_unit) };
        self.cache.lock().expect("cache lock").insert(key, w.clone());
        PhasePoint::from_real(&w).z
    }

    /// `a^{(s)}(z)`.
    pub fn forward(&self, s: f64, z: &[C64]) -> Vec<C64> {
        self.run(s, true, z)
    }

    /// `(a^{(s)})^{-1}(z)`.
    pub fn inverse(&self, s: f64, z: &[C64]) -> Vec<C64> {
        self.run(s, false, z)
    }

    /// `a = a^{(c)}`.
    pub fn apply(&self, z: &[C64]) -> Vec<C64> {
        self.forward(self.params.c, z)
    }

    pub fn apply_inverse(&self, z: &[C64]) -> Vec<C64> {
        self.inverse(self.params.c, z)
    }

    pub fn symplectic_map(&self, s: f64) -> SymplecticMap {
        let (f, i) = (self.clone(), self.clone());
        SymplecticMap::new(format!("a({s})"), self.params.n, move |z| f.forward(s, z), move |z| i.inverse(s, z))
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    /// Writes the cache as versioned JSON with entries in key order.
    pub fn save_cache(&self, path: &Path) -> Result<()> {
        let map = self.cache.lock().expect("cache lock");
        let mut keys: Vec<&CacheKey> = map.keys().collect();
        keys.sort();
        let entries = keys
            .into_iter()
            .map(|k| CacheEntry { s: f64::from_bits(k.0), forward: k.2, z: k.3.iter().map(|b| f64::from_bits(*b)).collect(), w: map[k].clone() })
            .collect();
        let file = CacheFile { version: FLOW_CACHE_VERSION, n: self.params.n, nu: self.params.nu, c: self.params.c, steps_per_unit: self.steps_per_unit, entries };
        let text = serde_json::to_string(&file).map_err(|e| Error::Cache(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))
    }

    /// Merges a cache file written for the same parameters; returns the entry count.
    pub fn load_cache(&self, path: &Path) -> Result<usize> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
        let file: CacheFile = serde_json::from_str(&text).map_err(|e| Error::Cache(e.to_string()))?;
        if file.version != FLOW_CACHE_VERSION {
            return Err(Error::Cache(format!("cache version {} != {FLOW_CACHE_VERSION}", file.version)));
        }
        if file.n != self.params.n || file.nu != self.params.nu || file.c != self.params.c || file.steps_per_unit != self.steps_per_unit {
            return Err(Error::Cache("cache was written for different shift or integrator parameters".into()));
        }
        let mut map = self.cache.lock().expect("cache lock");
        let count = file.entries.len();
        for e in file.entries {
            map.insert(self.key(e.s, e.forward, &e.z), e.w);
        }
        Ok(count)
    }
}

/// Checks `Y_c(E) ⊂ Int W` on shifted samples of `E`; value is `min (1 − W)`.
pub fn shifted_ellipsoid_inclusion(params: &ShiftParams, samples: usize, seed: u64) -> BoundReport {
    let start = std::time::Instant::now();
    let mut rep = BoundReport::new("1 - W(Y_c(x)), x in E", 0.0);
    for x in sphere_points(2 * params.n, samples, seed) {
        let z = PhasePoint::from_real(&x);
        let z = z.scaled(ellipsoid_e(params.nu, &z.z).sqrt().recip());
        let mut w = z.z.clone();
        w[0] += params.c;
        rep.evaluated += 1;
        rep.observe(1.0 - w_function(&w), || Witness::new(&z, None, None));
    }
    rep.pass = rep.evaluated > 0 && rep.nonfinite == 0 && rep.value > 0.0;
    rep.finish(start);
    rep
}

/// Checks `a(∂B) ⊂ Int W`; value is `min (1 − W(a z))` over unit-ball boundary samples.
pub fn boundary_inclusion(a: &DistinguishedMap, samples: usize, seed: u64, mode: Execution) -> BoundReport {
    let start = std::time::Instant::now();
    let pts: Vec<PhasePoint> = sphere_points(2 * a.params.n, samples, seed).iter().map(|x| PhasePoint::from_real(x).scaled(PI.sqrt().recip())).collect();
    let vals = map_indexed(mode, pts.len(), |i| 1.0 - w_function(&a.apply(&pts[i].z)));
    let mut rep = BoundReport::new("1 - W(a(z)), z in boundary of B", 0.0);
    for (p, v) in pts.iter().zip(vals) {
        rep.evaluated += 1;
        rep.observe(v, || Witness::new(p, None, None));
    }
    rep.pass = rep.evaluated > 0 && rep.nonfinite == 0 && rep.value > 0.0;
    rep.finish(start);
    rep
}

/// Checks `ϱ(a z) = ϱ(z)`; value is `−max |ϱ(a z) − ϱ(z)|/ρ(z)`, passing at `≥ −tol`.
pub fn first_integral_check(a: &DistinguishedMap, samples: usize, seed: u64, tol: f64, mode: Execution) -> BoundReport {
    let start = std::time::Instant::now();
    let pts: Vec<PhasePoint> = sphere_points(2 * a.params.n, samples, seed).iter().map(|x| PhasePoint::from_real(x)).collect();
    let vals = map_indexed(mode, pts.len(), |i| -(varrho(&a.apply(&pts[i].z)) - varrho(&pts[i].z)).abs() / pts[i].rho());
    let mut rep = BoundReport::new("-|varrho(a z) - varrho(z)| / rho(z)", tol);
    for (p, v) in pts.iter().zip(vals) {
        rep.evaluated += 1;
        rep.observe(v, || Witness::new(p, None, None));
    }
    rep.decide_min(-tol);
    rep.finish(start);
    rep
}

/// `φ_t`, its Hamiltonian `Φ` and the three-step contracting homotopy.
#[derive(Clone, Debug)]
pub struct MainLoop {
    pub n: usize,
    pub a: DistinguishedMap,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MainLoopReport {
    /// `Φ(z,t)/ρ(z) − (2n−3)`.
    pub positivity_bound: BoundReport,
    /// `H^{(s)}/ρ` on step 1 (contracting `f_{2t}`).
    pub step1_bound: BoundReport,
    /// `G^{(s)}/ρ` on step 2 (contracting `f_t`).
    pub step2_bound: BoundReport,
    /// `−|φ_1(z) − z|/|z|`.
    pub closure: BoundReport,
}

/// Assembles `φ_t` and its homotopy from the distinguished map.
pub fn build_main_loop(a: &DistinguishedMap, n: usize) -> Result<MainLoop> {
    if n < 2 || n != a.params.n {
        return arg(format!("main loop needs n >= 2 matching the distinguished map (n = {})", a.params.n));
    }
    Ok(MainLoop { n, a: a.clone() })
}

fn f_value(z: &[C64]) -> f64 {
    (z.len() as f64 - 1.0) * rho_j(z, 0) - varrho(z)
}

impl MainLoop {
    /// `φ_t(z) = e_{−t} f_{3t} a e_t a^{-1} z`.
    pub fn phi(&self, t: f64, z: &[C64]) -> Vec<C64> {
        let w = self.a.apply_inverse(z);
        let w = e_loop(self.n).apply(t, &w);
        let w = self.a.apply(&w);
        let w = f_loop(self.n).apply(3.0 * t, &w);
        e_loop(self.n).apply(-t, &w)
    }

    pub fn phi_inverse(&self, t: f64, z: &[C64]) -> Vec<C64> {
        let w = e_loop(self.n).apply(t, z);
        let w = f_loop(self.n).apply(-3.0 * t, &w);
        let w = self.a.apply_inverse(&w);
        let w = e_loop(self.n).apply(-t, &w);
        self.a.apply(&w)
    }

    /// `Φ(z,t) = 3F(z) − ρ(z) + ρ(a^{-1}(f_{−3t} e_t z))`.
    pub fn hamiltonian(&self) -> HamiltonianField {
        let me = self.clone();
        HamiltonianField::new("Phi", move |z, t| {
            let w = f_loop(me.n).apply(-3.0 * t, &e_loop(me.n).apply(t, z));
            3.0 * f_value(z) - rho(z) + rho(&me.a.apply_inverse(&w))
        })
    }

    pub fn path(&self) -> PathFamily {
        let (m1, m2) = (self.clone(), self.clone());
        PathFamily::new("phi", self.n, move |t, z| m1.phi(t, z)).with_inverse(move |t, z| m2.phi_inverse(t, z)).with_hamiltonian(self.hamiltonian()).as_loop()
    }

    /// `G^{(s)}(y, t) = F^{(s)}(y, t) + ρ(a^{-1}((f^{(s)}_t)^{-1} y))`.
    fn g_s(&self, fs: &PathFamily, y: &[C64], t: f64) -> f64 {
        let fh = fs.hamiltonian().expect("homotopy loops carry Hamiltonians");
        let x = fs.apply_inverse(t, y).unwrap_or_else(|_| vec![C64::new(f64::NAN, 0.0); self.n]);
        fh.eval(y, t) + rho(&self.a.apply_inverse(&x))
    }

    /// `G(y, t) = F(y) + ρ(a^{-1}(f_t^{-1} y))`.
    fn g_full(&self, y: &[C64], t: f64) -> f64 {
        f_value(y) + rho(&self.a.apply_inverse(&f_loop(self.n).apply(-t, y)))
    }

    /// `H^{(s)}(z, t) = 2F^{(s)}(z, 2t) + G((f^{(s)}_{2t})^{-1} z, t)`.
    fn h_s(&self, fs: &PathFamily, z: &[C64], t: f64) -> f64 {
        let fh = fs.hamiltonian().expect("homotopy loops carry Hamiltonians");
        let y = fs.apply_inverse(2.0 * t, z).unwrap_or_else(|_| vec![C64::new(f64::NAN, 0.0); self.n]);
        2.0 * fh.eval(z, 2.0 * t) + self.g_full(&y, t)
    }

    /// Hamiltonian of `e_{−t} h^{(s)}_t` (step 1), `s ∈ [0, 1]`.
    pub fn step1(&self, s: f64) -> Result<HamiltonianField> {
        let (me, fs) = (self.clone(), f_homotopy(self.n, self.n, s)?);
        Ok(HamiltonianField::new(format!("step1[s={s}]"), move |z, t| -rho(z) + me.h_s(&fs, &e_loop(me.n).apply(t, z), t)))
    }

    /// Hamiltonian of `e_{−t} g^{(s)}_t` (step 2), `s ∈ [0, 1]`.
    pub fn step2(&self, s: f64) -> Result<HamiltonianField> {
        let (me, fs) = (self.clone(), f_homotopy(self.n, self.n, s)?);
        Ok(HamiltonianField::new(format!("step2[s={s}]"), move |z, t| -rho(z) + me.g_s(&fs, &e_loop(me.n).apply(t, z), t)))
    }

    /// Hamiltonian of `e_{−t} a^{(σc)} e_t (a^{(σc)})^{-1}` (step 3), `σ ∈ [0, 1]`.
    pub fn step3(&self, sigma: f64) -> Result<HamiltonianField> {
        let me = self.clone();
        let s = sigma * self.a.params.c;
        Ok(HamiltonianField::new(format!("step3[s={s}]"), move |z, t| -rho(z) + rho(&me.a.inverse(s, &e_loop(me.n).apply(t, z)))))
    }

    /// The homotopy `Δ` as three stages.
    pub fn homotopy(&self) -> LoopHomotopy {
        let (m1, m2, m3) = (self.clone(), self.clone(), self.clone());
        LoopHomotopy {
            name: "Delta".into(),
            n: self.n,
            stages: vec![
                HomotopyStage::new("step 1: contract f_2t", move |s| m1.step1(s)),
                HomotopyStage::new("step 2: contract f_t", move |s| m2.step2(s)),
                HomotopyStage::new("step 3: path a^(s)", move |s| m3.step3(s)),
            ],
        }
    }

    /// Positivity bound of `Φ`, stage bounds of steps 1 and 2, and loop closure.
    pub fn checks(&self, grid: &SamplingGrid, tol: f64, mode: Execution) -> Result<MainLoopReport> {
        let pts = grid.phase_points(self.n);
        let times = grid.times();
        let svals = grid.homotopy_params();
        let phi = self.hamiltonian();
        let bound = 2.0 * self.n as f64 - 3.0;
        let positivity_bound = crate::squeeze::sweep("Phi/rho - (2n-3)", grid, &pts, &times, &[1.0], mode, -tol, |_, z, t| phi.eval(&z.z, t) / z.rho() - bound);
        let fams: Vec<PathFamily> = svals.iter().map(|&s| f_homotopy(self.n, self.n, s)).collect::<Result<_>>()?;
        let idx: Vec<f64> = (0..svals.len()).map(|i| i as f64).collect();
        let mut step1_bound = crate::squeeze::sweep("H^(s)/rho", grid, &pts, &times, &idx, mode, -tol, |i, z, t| self.h_s(&fams[i as usize], &z.z, t) / z.rho());
        let mut step2_bound = crate::squeeze::sweep("G^(s)/rho", grid, &pts, &times, &idx, mode, -tol, |i, z, t| self.g_s(&fams[i as usize], &z.z, t) / z.rho());
        for r in [&mut step1_bound, &mut step2_bound] {
            if let Some(w) = r.witness.as_mut() {
                w.s = w.s.map(|i| svals[i as usize]);
            }
        }
        let start = std::time::Instant::now();
        let mut closure = BoundReport::new("-|phi_1(z) - z| / |z|", tol).with_grid(grid);
        let errs = map_indexed(mode, pts.len(), |i| {
            let w = self.phi(1.0, &pts[i].z);
            -PhasePoint::new(w).dist(&pts[i]) / pts[i].norm()
        });
        for (p, e) in pts.iter().zip(errs) {
            closure.evaluated += 1;
            closure.observe(e, || Witness::new(p, Some(1.0), None));
        }
        closure.decide_min(-1e-5);
        closure.finish(start);
        Ok(MainLoopReport { positivity_bound, step1_bound, step2_bound, closure })
    }
}

/// `μ̂(Δ)` over all three stages with per-stage minima.
pub fn delta_mu_report(main: &MainLoop, grid: &SamplingGrid, refine: usize, mode: Execution) -> Result<MuEstimate> {
    crate::verify::mu_estimate(&main.homotopy(), grid, refine, mode)
}
