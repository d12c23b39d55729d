//! Squeezing decisions and constructions: the verdict trichotomy, the
//! iteration planner, the reparameterized homotopy and the capacity bracket.

use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{FromPrimitive, One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::geometry::{HamiltonianField, PhasePoint, SamplingGrid, C64};
use crate::maps::PathFamily;
use crate::report::{BoundReport, Witness};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NonSqueezable,
    Squeezable,
    Restricted,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Ball,
    Cylinder,
}

/// Names of the results a verdict rests on.
pub mod cite {
    pub const NON_SQUEEZING: &str = "large-scale non-squeezing: an integer m with R2 <= m <= R1 obstructs squeezing";
    pub const SQUEEZING: &str = "small-scale squeezing: R1, R2 < 1 and 2n >= 4";
    pub const RESTRICTED: &str = "restricted non-squeezing: R2 <= m/k <= R1 < R3 < m/(k-1) obstructs squeezing inside B(R3)";
    pub const INCLUSION: &str = "inclusion: R1 <= R2";
    pub const OPEN: &str = "open case: no result decides this window";
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezeVerdict {
    pub verdict: Verdict,
    pub citation: String,
    pub m: Option<u64>,
    pub k: Option<u64>,
    /// Admissible `R3` interval `(R1, m/(k−1))` for the restricted case.
    pub r3_window: Option<(f64, f64)>,
}

/// Decides whether the prequantized ball `B̂(R1)` squeezes into `B̂(R2)` or `Ĉ(R2)`.
///
/// Inequality types follow the squeezing results: `R2 ≤ m ≤ R1` is non-strict,
/// `R1, R2 < 1` is strict.
pub fn squeezing_verdict(n: usize, r1: f64, r2: f64, _target: Target, r3: Option<f64>) -> Result<SqueezeVerdict> {
    if !(r1 > 0.0) || !(r2 > 0.0) || !r1.is_finite() || !r2.is_finite() {
        return arg("radii must be positive and finite");
    }
    if n == 0 {
        return arg("dimension n must be >= 1");
    }
    let base = |verdict, citation: &str| SqueezeVerdict { verdict, citation: citation.to_string(), m: None, k: None, r3_window: None };
    if r1 <= r2 {
        return Ok(base(Verdict::Squeezable, cite::INCLUSION));
    }
    let m = r2.ceil().max(1.0);
    if m <= r1 {
        return Ok(SqueezeVerdict { m: Some(m as u64), ..base(Verdict::NonSqueezable, cite::NON_SQUEEZING) });
    }
    if r1 < 1.0 && r2 < 1.0 && n >= 2 {
        return Ok(base(Verdict::Squeezable, cite::SQUEEZING));
    }
    if let Some(r3) = r3 {
        if !(r3 > r1) {
            return arg("R3 must exceed R1");
        }
        if let Some((m, k)) = restricted_witness(r1, r2, r3) {
            let hi = m as f64 / (k - 1) as f64;
            return Ok(SqueezeVerdict { m: Some(m), k: Some(k), r3_window: Some((r1, hi)), ..base(Verdict::Restricted, cite::RESTRICTED) });
        }
    }
    Ok(base(Verdict::Open, cite::OPEN))
}

/// Smallest `k ≥ 2` (with its `m`) such that `R2 ≤ m/k ≤ R1` and `R3 < m/(k−1)`.
pub fn restricted_witness(r1: f64, r2: f64, r3: f64) -> Option<(u64, u64)> {
    // m/(k−1) − m/k ≈ R1/k, so k beyond R1/(R3 − R1) + 2 cannot work.
    let kmax = ((r1 / (r3 - r1)).ceil() + 2.0).min(1e6) as u64;
    (2..=kmax).find_map(|k| {
        let kf = k as f64;
        let m = (kf * r2).ceil().max(1.0);
        if m <= kf * r1 && r3 * (kf - 1.0) < m {
            Some((m as u64, k))
        } else {
            None
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationPlan {
    pub steps: u64,
    /// `v^{(k)}(R1)` for `k = 0..=steps`.
    pub trajectory: Vec<f64>,
    /// Closed form agrees with literal iteration in exact rational arithmetic.
    pub exact_agreement: bool,
}

/// `v(R) = R/(1 + γR)`.
pub fn contraction_step(r: f64, gamma: f64) -> f64 {
    r / (1.0 + gamma * r)
}

/// `v^{(N)}(R) = R/(1 + NγR)`.
pub fn contraction_closed_form(r: f64, gamma: f64, steps: u64) -> f64 {
    r / (1.0 + steps as f64 * gamma * r)
}

fn rat(x: f64) -> Result<BigRational> {
    BigRational::from_f64(x).ok_or_else(|| Error::Argument(format!("{x} is not representable")))
}

/// Exact check that `N` literal steps of `v` equal the closed form.
pub fn closed_form_matches_iteration(r: f64, gamma: f64, steps: u64) -> Result<bool> {
    let (r, g) = (rat(r)?, rat(gamma)?);
    let one = BigRational::one();
    let mut v = r.clone();
    for _ in 0..steps {
        v = &v / (&one + &g * &v);
    }
    let n = BigRational::from_u64(steps).expect("u64 is rational");
    let closed = &r / (&one + n * &g * &r);
    Ok(v == closed)
}

/// Minimal `N` with `v^{(N)}(R1) < R2`.
pub fn iteration_plan(r1: f64, r2: f64, gamma: f64) -> Result<IterationPlan> {
    if !(gamma > 0.0) || !(r1 > 0.0) || !(r2 > 0.0) {
        return arg("iteration plan needs positive R1, R2 and gamma");
    }
    if r2 >= r1 {
        return Ok(IterationPlan { steps: 0, trajectory: vec![r1], exact_agreement: true });
    }
    // Decide with exact rationals: R1/(1 + NγR1) < R2 ⇔ N > (R1/R2 − 1)/(γR1).
    let (a, b, g) = (rat(r1)?, rat(r2)?, rat(gamma)?);
    let bound = (&a / &b - BigRational::one()) / (&g * &a);
    let steps = (bound.floor() + BigRational::one()).to_integer();
    let steps = steps.to_u64().ok_or_else(|| Error::Argument("iteration count overflow".into()))?;
    let mut trajectory = vec![r1];
    let mut v = r1;
    for _ in 0..steps.min(100_000) {
        v = contraction_step(v, gamma);
        trajectory.push(v);
    }
    let exact_agreement = steps > 100_000 || closed_form_matches_iteration(r1, gamma, steps)?;
    Ok(IterationPlan { steps, trajectory, exact_agreement })
}

/// The constants of the contraction argument: `δ = min(cR, c)`, `γ = min(c, cμ)`.
pub fn contraction_constants(c: f64, mu: f64, r: f64) -> (f64, f64) {
    ((c * r).min(c), c.min(c * mu))
}

/// A C^∞ ramp `τ` with `τ ≡ 0` near 0, `τ ≡ 1` near 1 and `τ′ ≤ slope_cap`.
///
/// `τ′` is a normalized product of two `exp(−1/x)` smoothsteps; `τ` is its
/// integral, tabulated once and interpolated by cubic Hermite.
#[derive(Clone, Debug)]
pub struct Ramp {
    pub plateau: f64,
    pub ramp: f64,
    norm: f64,
    table: Arc<Vec<f64>>,
}

fn psi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// `S(x) = ψ(x)/(ψ(x) + ψ(1−x))`, equal to 0 for `x ≤ 0` and 1 for `x ≥ 1`.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = psi(x);
        a / (a + psi(1.0 - x))
    }
}

const RAMP_TABLE: usize = 1 << 14;

impl Ramp {
    /// Ramp whose slope never exceeds `slope_cap > 1`; plateau and ramp widths
    /// are equal and use up the slack `1 − 1/slope_cap`.
    pub fn with_slope_cap(slope_cap: f64) -> Result<Self> {
        if !(slope_cap > 1.0) {
            return arg("slope cap must exceed 1");
        }
        let slack = 1.0 - 1.0 / slope_cap;
        Self::new(slack / 3.0, slack / 3.0)
    }

    pub fn new(plateau: f64, ramp: f64) -> Result<Self> {
        if !(plateau > 0.0 && ramp > 0.0 && 2.0 * plateau + 2.0 * ramp < 1.0) {
            return arg("ramp widths must be positive with 2(plateau + ramp) < 1");
        }
        let norm = 1.0 - 2.0 * plateau - ramp;
        let mut r = Self { plateau, ramp, norm, table: Arc::new(Vec::new()) };
        // Cumulative Simpson integral of the unnormalized density on a uniform grid.
        let h = 1.0 / RAMP_TABLE as f64;
        let mut table = vec![0.0; RAMP_TABLE + 1];
        for k in 0..RAMP_TABLE {
            let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
            let m = r.density(a) + 4.0 * r.density(0.5 * (a + b)) + r.density(b);
            table[k + 1] = table[k] + h * m / 6.0;
        }
        r.norm = table[RAMP_TABLE];
        r.table = Arc::new(table);
        Ok(r)
    }

    fn density(&self, t: f64) -> f64 {
        smoothstep((t - self.plateau) / self.ramp) * smoothstep((1.0 - t - self.plateau) / self.ramp)
    }

    /// `τ′(t)`.
    pub fn derivative(&self, t: f64) -> f64 {
        self.density(t) / self.norm
    }

    /// `τ(t)`, clamped to `[0, 1]` outside the unit interval.
    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let h = 1.0 / RAMP_TABLE as f64;
        let k = ((t / h) as usize).min(RAMP_TABLE - 1);
        let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
        let u = (t - a) / h;
        let (y0, y1) = (self.table[k], self.table[k + 1]);
        let (d0, d1) = (self.density(a) * h, self.density(b) * h);
        let h00 = 2.0 * u.powi(3) - 3.0 * u * u + 1.0;
        let h10 = u.powi(3) - 2.0 * u * u + u;
        let h01 = -2.0 * u.powi(3) + 3.0 * u * u;
        let h11 = u.powi(3) - u * u;
        (h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1) / self.norm
    }

    /// Upper bound of `τ′`, attained on the middle plateau.
    pub fn max_slope(&self) -> f64 {
        1.0 / self.norm
    }
}

/// Homotopy parameters and the Hamiltonian families of its two steps.
#[derive(Clone)]
pub struct CorrespHomotopy {
    pub delta: f64,
    pub r: f64,
    pub rho: f64,
    pub mu: f64,
    pub tau: Ramp,
    e: HamiltonianField,
    e_flow: PathFamily,
    family: Arc<dyn Fn(f64) -> PathFamily + Send + Sync>,
}

impl CorrespHomotopy {
    /// `θ(t) = (1+δ)t − δτ(t)`.
    pub fn theta(&self, t: f64) -> f64 {
        (1.0 + self.delta) * t - self.delta * self.tau.value(t)
    }

    pub fn theta_prime(&self, t: f64) -> f64 {
        1.0 + self.delta - self.delta * self.tau.derivative(t)
    }

    /// `H_s(z, t)` for `s ∈ [−1, 1]`.
    pub fn hamiltonian(&self, s: f64, z: &[C64], t: f64) -> f64 {
        let e = self.e.eval(z, t);
        if s <= 0.0 {
            (-s + (s + 1.0) * self.theta_prime(t)) / self.r * e
        } else {
            let fam = (self.family)(s);
            let w = self.e_flow.apply(-self.theta(t) / self.r, z);
            let fs = fam.hamiltonian().expect("homotopy loops carry Hamiltonians").eval(&w, self.tau.value(t));
            self.theta_prime(t) / self.r * e + self.tau.derivative(t) * fs
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrespReports {
    pub hypothesis_lower: BoundReport,
    pub theta_prime: BoundReport,
    pub tau_prime: BoundReport,
    pub step1_inclusion: BoundReport,
    pub step2_inclusion: BoundReport,
    pub final_inclusion: BoundReport,
}

/// Builds the reparameterized homotopy from `e_{t/R}` to a path dominated by
/// `(1+δ)R^{-1}E`, and verifies its inclusions on the grid.
///
/// `e_flow` is the flow of `E`; `family(s)` is the loop `f_{t,s}` with its
/// Hamiltonian `F_s`.
#[allow(clippy::too_many_arguments)]
pub fn build_corresp_homotopy(
    e: &HamiltonianField,
    e_flow: &PathFamily,
    family: Arc<dyn Fn(f64) -> PathFamily + Send + Sync>,
    r: f64,
    rho: f64,
    mu: f64,
    delta: f64,
    grid: &SamplingGrid,
    mode: Execution,
) -> Result<(CorrespHomotopy, CorrespReports)> {
    if !(r > 0.0 && rho > r && mu >= 0.0 && delta > 0.0) {
        return arg("need 0 < R < rho, mu >= 0, delta > 0");
    }
    if !(delta * delta < 1.0 - r / rho) {
        return Err(Error::Precondition(format!("delta^2 < 1 - R/rho fails: {} >= {}", delta * delta, 1.0 - r / rho)));
    }
    if !(1.0 / r > mu) || !(delta * delta < 1.0 - 1.0 / (rho * (1.0 / r - mu))) {
        return Err(Error::Precondition("delta^2 < 1 - 1/(rho (1/R - mu)) fails".into()));
    }
    let tau = Ramp::with_slope_cap(1.0 + 0.99 * delta)?;
    let hom = CorrespHomotopy { delta, r, rho, mu, tau, e: e.clone(), e_flow: e_flow.clone(), family };
    let n = e_flow.n;
    let dirs = grid.phase_points(n);
    let times = grid.times();
    let svals = grid.homotopy_params();

    // Hypothesis F_s > −μE.
    let f_ratio = |s: f64, z: &PhasePoint, t: f64| {
        let fam = (hom.family)(s);
        fam.hamiltonian().expect("Hamiltonian").eval(&z.z, t) / hom.e.eval(&z.z, t)
    };
    let hypothesis_lower = sweep("F_s / E + mu", grid, &dirs, &times, &svals, mode, 0.0, |s, z, t| f_ratio(s, z, t) + mu);

    let dense = 20_001;
    let mut theta_prime = BoundReport::new("theta' - (1 - delta^2)", 0.0);
    let mut tau_prime = BoundReport::new("(1 + delta) - tau'", 0.0);
    for k in 0..dense {
        let t = k as f64 / (dense - 1) as f64;
        let w = || Witness { z: vec![], t: Some(t), s: None };
        theta_prime.evaluated += 1;
        tau_prime.evaluated += 1;
        theta_prime.observe(hom.theta_prime(t) - (1.0 - delta * delta), w);
        tau_prime.observe(1.0 + delta - hom.tau.derivative(t), w);
    }
    theta_prime.decide_min(-1e-12);
    tau_prime.pass = tau_prime.value > 0.0;

    let step1_s: Vec<f64> = svals.iter().map(|s| s - 1.0).collect();
    let step1_inclusion = sweep("H_s / E - 1/rho (step 1)", grid, &dirs, &times, &step1_s, mode, 0.0, |s, z, t| {
        hom.hamiltonian(s, &z.z, t) / hom.e.eval(&z.z, t) - 1.0 / rho
    });
    let step2_inclusion = sweep("H_s / E - 1/rho (step 2)", grid, &dirs, &times, &svals, mode, 0.0, |s, z, t| {
        hom.hamiltonian(s, &z.z, t) / hom.e.eval(&z.z, t) - 1.0 / rho
    });
    let mut final_inclusion = sweep("H_1 / E - (1 + delta)/R", grid, &dirs, &times, &[1.0], mode, -1e-9, |s, z, t| {
        hom.hamiltonian(s, &z.z, t) / hom.e.eval(&z.z, t) - (1.0 + delta) / r
    });
    final_inclusion.pass = final_inclusion.pass && final_inclusion.value + (1.0 + delta) / r > 1.0 / r;
    let reports = CorrespReports { hypothesis_lower, theta_prime, tau_prime, step1_inclusion, step2_inclusion, final_inclusion };
    Ok((hom, reports))
}

/// Minimum of `f(s, z, t)` over the `(z, t, s)` grid; passes iff min ≥ threshold.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    name: &str,
    grid: &SamplingGrid,
    points: &[PhasePoint],
    times: &[f64],
    svals: &[f64],
    mode: Execution,
    threshold: f64,
    f: impl Fn(f64, &PhasePoint, f64) -> f64 + Sync + Send,
) -> BoundReport {
    let start = std::time::Instant::now();
    let (np, nt, ns) = (points.len(), times.len(), svals.len());
    let vals = map_indexed(mode, np * nt * ns, |i| {
        let (pi, rest) = (i / (nt * ns), i % (nt * ns));
        let (ti, si) = (rest / ns, rest % ns);
        f(svals[si], &points[pi], times[ti])
    });
    let mut rep = BoundReport::new(name, threshold).with_grid(grid);
    for (i, v) in vals.iter().enumerate() {
        let (pi, rest) = (i / (nt * ns), i % (nt * ns));
        let (ti, si) = (rest / ns, rest % ns);
        rep.evaluated += 1;
        rep.observe(*v, || Witness::new(&points[pi], Some(times[ti]), Some(svals[si])));
    }
    rep.decide_min(threshold);
    rep.finish(start);
    rep
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityBracket {
    pub c_under: f64,
    pub c_over: f64,
    /// `sq(U) ∈ [c_under, c_over]`.
    pub window: (f64, f64),
    pub point_estimate: Option<f64>,
    /// `c_over²`: rescaling beyond which the domain is known to be negligible.
    pub rescale_threshold: f64,
    pub note: String,
}

/// Bookkeeping for user-supplied capacities: the squeezing number lies between them.
pub fn capacity_bracket(c_under: f64, c_over: f64) -> Result<CapacityBracket> {
    if !(c_under > 0.0) || !(c_under <= c_over) {
        return arg("capacity bracket needs 0 < c_under <= c_over");
    }
    Ok(CapacityBracket {
        c_under,
        c_over,
        window: (c_under, c_over),
        point_estimate: (c_under == c_over).then_some(c_under),
        rescale_threshold: c_over * c_over,
        note: "capacities are inputs; sq is bracketed, not computed".into(),
    })
}
