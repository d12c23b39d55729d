//! Grid verification of positivity, the fundamental inequality, the
//! cylinder-squeezing pipeline and the `μ(Δ)` functional of loop homotopies.
//!
//! All reported minima are sampled lower bounds over a finite grid; refinement
//! can only lower them.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::exec::{map_indexed, Execution};
use crate::geometry::{rho, rho_j, varrho, ContactPoint, HamiltonianField, PhasePoint, SamplingGrid, C64};
use crate::maps::{extract_hamiltonian, f_homotopy, hamiltonian_at_image, make_squeeze_pair, s3_loop, shift_point};
use crate::report::{BoundReport, Witness};
use crate::squeeze::sweep;

/// Passes iff `H(z, t) > margin · π|z|²` at every grid point; the reported
/// value is `min H/π|z|²`.
pub fn positivity_check(h: &HamiltonianField, n: usize, grid: &SamplingGrid, margin: f64, mode: Execution) -> Result<BoundReport> {
    grid.validate()?;
    let pts = grid.phase_points(n);
    let mut rep = sweep(&format!("{} / pi|z|^2", h.name), grid, &pts, &grid.times(), &[1.0], mode, margin, |_, z, t| h.eval(&z.z, t) / z.rho());
    if let Some(w) = rep.witness.as_mut() {
        w.s = None;
    }
    rep.pass = rep.pass && rep.value > margin;
    Ok(rep)
}

type StageFamily = Arc<dyn Fn(f64) -> Result<HamiltonianField> + Send + Sync>;

/// One stage of a homotopy of loops: `s ∈ [0, 1] ↦ F_s`.
#[derive(Clone)]
pub struct HomotopyStage {
    pub name: String,
    pub family: StageFamily,
}

impl HomotopyStage {
    pub fn new(name: impl Into<String>, family: impl Fn(f64) -> Result<HamiltonianField> + Send + Sync + 'static) -> Self {
        Self { name: name.into(), family: Arc::new(family) }
    }
}

/// A homotopy of loops given by the Hamiltonians of its stages.
#[derive(Clone)]
pub struct LoopHomotopy {
    pub name: String,
    pub n: usize,
    pub stages: Vec<HomotopyStage>,
}

impl LoopHomotopy {
    pub fn single(name: impl Into<String>, n: usize, family: impl Fn(f64) -> Result<HamiltonianField> + Send + Sync + 'static) -> Self {
        let name = name.into();
        Self { name: name.clone(), n, stages: vec![HomotopyStage::new(name, family)] }
    }

    /// The homotopy with every Hamiltonian multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let stages = self
            .stages
            .iter()
            .map(|st| {
                let f = st.family.clone();
                HomotopyStage::new(st.name.clone(), move |s| Ok(f(s)?.scaled(k)))
            })
            .collect();
        Self { name: format!("{k}*{}", self.name), n: self.n, stages }
    }
}

pub const MU_NOTE: &str = "grid minimum of F_s/pi|z|^2 is an upper bound for the true minimum, so mu_hat <= mu(Delta)";

/// `μ̂ = −min F_s(z,t)/π|z|²` over all stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub mu_hat: f64,
    pub witness: Option<Witness>,
    pub stage: Option<String>,
    /// Minimum of `F_s/π|z|²` per stage.
    pub per_stage: BTreeMap<String, f64>,
    pub grid: SamplingGrid,
    pub evaluated: usize,
    pub refined_evaluations: usize,
    pub nonfinite: usize,
    pub note: String,
    #[serde(skip)]
    pub runtime_ms: f64,
}

struct Sample {
    stage: usize,
    s: f64,
    x: Vec<f64>,
    t: f64,
    v: f64,
}

fn ratio(fam: &HamiltonianField, x: &[f64], t: f64) -> f64 {
    let z = PhasePoint::from_real(x);
    fam.eval(&z.z, t) / z.rho()
}

/// Pattern search on `(direction, t, s)` from a grid sample; returns the best
/// sample found and the number of evaluations.
fn refine(delta: &LoopHomotopy, start: &Sample, ds: f64, dt: f64) -> (Sample, usize) {
    let stage = &delta.stages[start.stage];
    let mut best = Sample { stage: start.stage, s: start.s, x: start.x.clone(), t: start.t, v: start.v };
    let mut fam = match (stage.family)(best.s) {
        Ok(f) => f,
        Err(_) => return (best, 0),
    };
    let d = best.x.len();
    let (mut hx, mut ht, mut hs) = (0.05, dt, ds);
    let mut evals = 0;
    for _ in 0..12 {
        let mut improved = true;
        while improved && evals < 600 {
            improved = false;
            for k in 0..d + 2 {
                for sign in [1.0, -1.0] {
                    let (mut x, mut t, mut s) = (best.x.clone(), best.t, best.s);
                    if k < d {
                        x[k] += sign * hx;
                        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                        x.iter_mut().for_each(|v| *v /= nrm);
                    } else if k == d {
                        t = crate::geometry::wrap_unit(t + sign * ht);
                    } else {
                        if hs == 0.0 {
                            continue;
                        }
                        s = (s + sign * hs).clamp(0.0, 1.0);
                        if s == best.s {
                            continue;
                        }
                    }
                    let f = if s == best.s {
                        None
                    } else {
                        match (stage.family)(s) {
                            Ok(f) => Some(f),
                            Err(_) => continue,
                        }
                    };
                    let v = ratio(f.as_ref().unwrap_or(&fam), &x, t);
                    evals += 1;
                    if v < best.v {
                        best = Sample { stage: best.stage, s, x, t, v };
                        if let Some(f) = f {
                            fam = f;
                        }
                        improved = true;
                    }
                }
            }
        }
        hx *= 0.5;
        ht *= 0.5;
        hs *= 0.5;
    }
    (best, evals)
}

/// Grid estimate of `μ(Δ)`; the `refine` lowest grid samples seed a local
/// pattern search.
pub fn mu_estimate(delta: &LoopHomotopy, grid: &SamplingGrid, refine_starts: usize, mode: Execution) -> Result<MuEstimate> {
    grid.validate()?;
    if delta.stages.is_empty() {
        return arg("homotopy has no stages");
    }
    let start = Instant::now();
    let pts = grid.phase_points(delta.n);
    let times = grid.times();
    let svals = grid.homotopy_params();
    let mut samples: Vec<Sample> = Vec::new();
    let mut nonfinite = 0;
    let mut per_stage = BTreeMap::new();
    for (si, stage) in delta.stages.iter().enumerate() {
        let fams: Vec<HamiltonianField> = svals.iter().map(|&s| (stage.family)(s)).collect::<Result<_>>()?;
        let (np, nt) = (pts.len(), times.len());
        let vals = map_indexed(mode, svals.len() * np * nt, |i| {
            let (k, rest) = (i / (np * nt), i % (np * nt));
            let (p, ti) = (rest / nt, rest % nt);
            fams[k].eval(&pts[p].z, times[ti]) / pts[p].rho()
        });
        let mut stage_min = f64::INFINITY;
        for (i, v) in vals.into_iter().enumerate() {
            if v.is_nan() {
                nonfinite += 1;
                continue;
            }
            stage_min = stage_min.min(v);
            let (k, rest) = (i / (np * nt), i % (np * nt));
            let (p, ti) = (rest / nt, rest % nt);
            samples.push(Sample { stage: si, s: svals[k], x: pts[p].to_real(), t: times[ti], v });
        }
        per_stage.insert(stage.name.clone(), stage_min);
    }
    let evaluated = samples.len() + nonfinite;
    // Stable sort keeps grid order among ties, so the starts are deterministic.
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].v.total_cmp(&samples[b].v));
    let starts: Vec<&Sample> = order.iter().take(refine_starts).map(|&i| &samples[i]).collect();
    let ds = if svals.len() > 1 { 0.5 / (svals.len() - 1) as f64 } else { 0.0 };
    let dt = 0.5 / times.len() as f64;
    let refined = map_indexed(mode, starts.len(), |i| refine(delta, starts[i], ds, dt));
    let mut refined_evaluations = 0;
    let mut best: Option<Sample> = order.first().map(|&i| {
        let s = &samples[i];
        Sample { stage: s.stage, s: s.s, x: s.x.clone(), t: s.t, v: s.v }
    });
    for (r, e) in refined {
        refined_evaluations += e;
        let name = &delta.stages[r.stage].name;
        let m = per_stage.get_mut(name).expect("stage present");
        *m = m.min(r.v);
        if best.as_ref().is_none_or(|b| r.v < b.v) {
            best = Some(r);
        }
    }
    let (mu_hat, witness, stage) = match best {
        Some(b) => (0.0 - b.v, Some(Witness::new(&PhasePoint::from_real(&b.x), Some(b.t), Some(b.s))), Some(delta.stages[b.stage].name.clone())),
        None => (f64::NAN, None, None),
    };
    Ok(MuEstimate {
        mu_hat,
        witness,
        stage,
        per_stage,
        grid: grid.clone(),
        evaluated,
        refined_evaluations,
        nonfinite,
        note: MU_NOTE.into(),
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// `F^{(s)}(f^{(s)}_t z, t) + ϱ(z) ≥ −tol·(1 + ρ(z))` over the `(z, t, s)`
/// grid, with `F^{(s)}` extracted from the loop by differentiation in `t`.
/// The reported value is the minimum of `(F + ϱ)/(1 + ρ)`.
pub fn fundamental_inequality_check(n: usize, grid: &SamplingGrid, tol: f64, mode: Execution) -> Result<BoundReport> {
    if n < 2 {
        return arg("fundamental inequality needs n >= 2");
    }
    grid.validate()?;
    let svals = grid.homotopy_params();
    let fams = svals.iter().map(|&s| f_homotopy(n, n, s)).collect::<Result<Vec<_>>>()?;
    let pts = grid.phase_points(n);
    let idx: Vec<f64> = (0..svals.len()).map(|i| i as f64).collect();
    let mut rep = sweep("(F^(s)(f^(s)_t z, t) + varrho(z)) / (1 + rho(z))", grid, &pts, &grid.times(), &idx, mode, -tol, |i, z, t| {
        let (_, h) = hamiltonian_at_image(&fams[i as usize], t, &z.z);
        (h + varrho(&z.z)) / (1.0 + z.rho())
    });
    if let Some(w) = rep.witness.as_mut() {
        w.s = w.s.map(|i| svals[i as usize]);
    }
    Ok(rep)
}

/// `(n+1)ρ_2 + n(ρ_3 + … + ρ_n) − ρ_1`; `W` is its sublevel set `< 1`.
pub fn cylinder_w(z: &[C64]) -> f64 {
    let n = z.len() as f64;
    (n + 1.0) * rho_j(z, 1) + n * (2..z.len()).map(|j| rho_j(z, j)).sum::<f64>() - rho_j(z, 0)
}

/// Random points of the compact piece `{ρ_2 < 1, |z_j| ≤ 1 otherwise}` of the cylinder.
pub fn cylinder_samples(n: usize, count: usize, seed: u64) -> Result<Vec<ContactPoint>> {
    if n < 2 {
        return arg("cylinder samples need n >= 2");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disc = |r: f64| C64::from_polar(r * rng.gen::<f64>().sqrt(), 2.0 * std::f64::consts::PI * rng.gen::<f64>());
    let r2 = 0.999 / std::f64::consts::PI.sqrt();
    Ok((0..count)
        .map(|_| {
            let z: Vec<C64> = (0..n).map(|j| disc(if j == 1 { r2 } else { 1.0 })).collect();
            ContactPoint::new(PhasePoint::new(z), 0.0)
        })
        .zip(0..)
        .map(|(mut x, k)| {
            x.t = (k as f64 * 0.618_033_988_749_895).fract();
            x
        })
        .collect())
}

/// Squeezes cylinder samples `K ⊂ {ρ_2 < 1}` into `B̂(1/(n−1))`: shift along
/// `Re z_1` into `W`, then apply `Ψ` and `Φ`. The value is
/// `min (1/(n−1) − ρ(Φ Ψ Y z))`; extras record `max ϱ` after `Ψ`, the shift used
/// and how often it was enlarged.
pub fn squeeze_pipeline_check(n: usize, k: &[ContactPoint], shift: Option<f64>, tol: f64, mode: Execution) -> Result<BoundReport> {
    if n < 2 {
        return arg("pipeline needs n >= 2");
    }
    if k.iter().any(|x| x.z.dim() != n || rho_j(&x.z.z, 1) >= 1.0) {
        return arg("samples must lie in the cylinder rho_2 < 1 of C^n");
    }
    let start = Instant::now();
    let (phi, psi) = make_squeeze_pair(n)?;
    let mut c = shift.unwrap_or_else(|| ((n as f64 + 1.0) / std::f64::consts::PI).sqrt() + 1.0);
    let mut enlargements = 0;
    while let Some(bad) = k.iter().position(|x| cylinder_w(&shift_point(c, &x.z.z)) >= 1.0) {
        let z = &k[bad].z.z;
        let need = (cylinder_w(z) + rho_j(z, 0) - 1.0).max(0.0) / std::f64::consts::PI;
        c = c.max(need.sqrt() + z[0].norm() + 1e-3) * 1.25;
        enlargements += 1;
        if enlargements > 64 {
            return arg("no shift moves the samples into W");
        }
    }
    let out = map_indexed(mode, k.len(), |i| {
        let y = ContactPoint { z: PhasePoint::new(shift_point(c, &k[i].z.z)), t: k[i].t };
        let mid = psi.apply(&y)?;
        let fin = phi.apply(&mid)?;
        Some((varrho(&mid.z.z), rho(&fin.z.z)))
    });
    let bound = 1.0 / (n as f64 - 1.0);
    let mut rep = BoundReport::new("1/(n-1) - rho(Phi(Psi(Y z)))", tol);
    let mut max_varrho: f64 = 0.0;
    for (x, r) in k.iter().zip(out) {
        rep.evaluated += 1;
        match r {
            Some((vr, rf)) => {
                max_varrho = max_varrho.max(vr);
                rep.observe(bound - rf, || Witness::from_contact(x, None));
            }
            None => rep.skipped += 1,
        }
    }
    rep.extras.insert("max_varrho_after_psi".into(), max_varrho);
    rep.extras.insert("shift".into(), c);
    rep.extras.insert("shift_enlargements".into(), enlargements as f64);
    rep.pass = rep.evaluated > 0 && rep.skipped == 0 && rep.nonfinite == 0 && rep.value >= -tol && max_varrho < 1.0 / n as f64;
    rep.finish(start);
    Ok(rep)
}

/// Contact Hamiltonian of the loop `e_{−t} f_{3t} b e_t b^{-1}` on S³; the
/// reported value is `min h/π` over the unit sphere and time samples.
pub fn s3_positivity(alpha: f64, grid: &SamplingGrid, mode: Execution) -> Result<BoundReport> {
    grid.validate()?;
    let h = extract_hamiltonian(&s3_loop(alpha)?);
    let dirs = grid.directions(2);
    let mut rep = sweep(&format!("h / pi on S^3, alpha = {alpha}"), grid, &dirs, &grid.times(), &[alpha], mode, 0.0, |_, z, t| h.eval(&z.z, t) / std::f64::consts::PI);
    if let Some(w) = rep.witness.as_mut() {
        w.s = None;
    }
    rep.pass = rep.pass && rep.value > 0.0;
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct S3Row {
    pub alpha: f64,
    pub min_h: f64,
    pub positive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct S3Table {
    pub rows: Vec<S3Row>,
    /// Largest swept `α` below which every swept value was positive.
    pub empirical_threshold: Option<f64>,
}

/// Positivity of the S³ loop across `α`.
pub fn s3_threshold_table(alphas: &[f64], grid: &SamplingGrid, mode: Execution) -> Result<S3Table> {
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rows = sorted
        .iter()
        .map(|&alpha| {
            let r = s3_positivity(alpha, grid, mode)?;
            Ok(S3Row { alpha, min_h: r.value, positive: r.pass })
        })
        .collect::<Result<Vec<_>>>()?;
    let empirical_threshold = rows.iter().take_while(|r| r.positive).last().map(|r| r.alpha);
    Ok(S3Table { rows, empirical_threshold })
}
