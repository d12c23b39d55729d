//! Command implementations. Each returns an [`Outcome`] or a library error.

use std::f64::consts::PI;

use contactforge::distinguished::{boundary_inclusion, build_main_loop, choose_shift_params, delta_mu_report, first_integral_check, shifted_ellipsoid_inclusion, DistinguishedMap};
use contactforge::geometry::{conformal_factor_check, PhasePoint, SamplingGrid, SmoothMap};
use contactforge::index::{action_spectrum, ch_ellipsoid, cz_index, cz_robbin_salamon, ellipsoid_degree, ellipsoid_degree_from_flow, maslov_index, profile_transform, EllipsoidSpec, ProfileFunction, SymplecticPath, DEFAULT_SPECTRUM_DEPTH};
use contactforge::maps::{compose_paths, diagonal_loop, e_loop, extract_hamiltonian, f_loop, g_loop, h_loop, make_loop_embedding, make_planck_map, make_squeeze_pair, make_twist, PathFamily};
use contactforge::olshanskii::{flow_hamiltonian_deviation, olshanskii_report};
use contactforge::squeeze::{iteration_plan, squeezing_verdict, Target};
use contactforge::verify::{cylinder_samples, fundamental_inequality_check, positivity_check, s3_positivity, s3_threshold_table, squeeze_pipeline_check};
use contactforge::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::config::Settings;
use crate::report::{float, Check, Outcome, Table};

pub const CLOSED_FORM_TOL: f64 = 1e-8;
pub const FD_TOL: f64 = 1e-5;
pub const PLANCK_FACTOR_TOL: f64 = 1e-10;

fn grid(cfg: &Settings, base: SamplingGrid) -> Result<SamplingGrid> {
    cfg.grid(base).map_err(Error::Argument)
}

fn verify_grid() -> SamplingGrid {
    SamplingGrid { shells: 4, r_min: 0.25, r_max: 4.0, sphere_points: 2500, time_samples: 1, homotopy_samples: 1, seed: 0x5eed }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum MapKind {
    Twist,
    LoopEmbedding,
    SqueezePhi,
    SqueezePsi,
    Planck,
    Identity,
}

pub fn verify_map(cfg: &Settings, kind: MapKind, n: usize, big_n: u32, hbar: f64) -> Result<Outcome> {
    let map: SmoothMap = match kind {
        MapKind::Twist => make_twist(big_n, n)?,
        MapKind::LoopEmbedding => {
            if big_n == 0 || n == 0 {
                return Err(Error::Argument("loop embedding needs N >= 1 and n >= 1".into()));
            }
            let l = diagonal_loop(format!("e^(2 pi i {big_n} t)"), vec![big_n as f64; n]);
            let ham = l.hamiltonian().cloned().expect("diagonal loops carry a Hamiltonian");
            make_loop_embedding(&l, &ham)
        }
        MapKind::SqueezePhi => make_squeeze_pair(n)?.0,
        MapKind::SqueezePsi => make_squeeze_pair(n)?.1,
        MapKind::Planck => make_planck_map(hbar, n)?,
        MapKind::Identity => SmoothMap::identity(n),
    };
    let g = grid(cfg, verify_grid())?;
    let pts = g.contact_points(n);
    let mode = cfg.mode();
    let params = json!({"map": format!("{kind:?}"), "n": n, "N": big_n, "hbar": hbar, "grid": g});
    let mut out = Outcome::new(params, json!({"name": map.name, "points": pts.len(), "closed_form_jacobian": map.has_closed_form_jacobian()}));
    let anchor = "the map pulls the contact form back to a positive multiple of itself";
    let mut closed = None;
    if map.has_closed_form_jacobian() {
        let r = conformal_factor_check(&map, &pts, cfg.tol_or(CLOSED_FORM_TOL), false, mode);
        out = out.check(Check::new("conformal factor (closed-form Jacobian)", anchor, r.pass, &r));
        closed = Some(r);
    }
    let r = conformal_factor_check(&map, &pts, FD_TOL, true, mode);
    out = out.check(Check::new("conformal factor (finite differences)", anchor, r.pass, &r));
    if let (MapKind::Planck, Some(c)) = (kind, closed) {
        let h = 2.0 * PI * hbar;
        let max = c.extras.get("max_factor").copied().unwrap_or(f64::NAN);
        let dev = (c.value - h).abs().max((max - h).abs()) / h;
        let pass = dev < PLANCK_FACTOR_TOL;
        out = out.check(Check::new("factor equals h = 2 pi hbar", "the Planck rescaling is conformal with constant factor h", pass, json!({"h": h, "relative_deviation": float(dev), "tolerance": PLANCK_FACTOR_TOL})));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum LoopKind {
    E,
    F,
    G,
    H,
    /// `e_{-t} f_{3t}`.
    Ef3,
}

pub fn verify_loop(cfg: &Settings, kind: LoopKind, n: usize, j: usize, s: f64, margin: f64) -> Result<Outcome> {
    let path: PathFamily = match kind {
        LoopKind::E => e_loop(n),
        LoopKind::F => f_loop(n),
        LoopKind::G => g_loop(n),
        LoopKind::H => h_loop(n, j, s)?,
        LoopKind::Ef3 => compose_paths(&e_loop(n).time_scaled(-1.0), &f_loop(n).time_scaled(3.0))?,
    };
    let g = grid(cfg, SamplingGrid { shells: 2, r_min: 0.5, r_max: 2.0, sphere_points: 256, time_samples: 16, homotopy_samples: 1, seed: 0x5eed })?;
    let mode = cfg.mode();
    let h = match path.hamiltonian() {
        Some(h) => h.clone(),
        None => extract_hamiltonian(&path),
    };
    let pos = positivity_check(&h, n, &g, margin, mode)?;
    let dirs = g.directions(n);
    let closure = dirs.iter().map(|z| PhasePoint::new(path.apply(1.0, &z.z)).dist(z)).fold(0.0, f64::max);
    let params = json!({"loop": format!("{kind:?}"), "n": n, "j": j, "s": s, "margin": margin, "grid": g});
    Ok(Outcome::new(params, json!({"name": path.name, "min_h": float(pos.value)}))
        .check(Check::new("positivity", "a loop is positive when its contact Hamiltonian is positive everywhere", pos.pass, &pos))
        .check(Check::new("closure", "the path returns to the identity at t = 1", closure < FD_TOL, json!({"max_deviation": closure}))))
}

pub fn s3_loop(cfg: &Settings, alpha: f64, sweep: &[f64]) -> Result<Outcome> {
    let g = grid(cfg, SamplingGrid::unit_sphere(6250, 16, 1, 0x5eed))?;
    let mode = cfg.mode();
    let params = json!({"alpha": alpha, "sweep": sweep, "grid": g});
    if sweep.is_empty() {
        let r = s3_positivity(alpha, &g, mode)?;
        let mut t = Table::new(&["alpha", "min_h_over_pi", "positive"]);
        t.push(vec![alpha.to_string(), r.value.to_string(), r.pass.to_string()]);
        return Ok(Outcome::new(params, json!({"min_h_over_pi": float(r.value)}))
            .check(Check::new("positivity on S^3", "the loop e_{-t} f_{3t} b e_t b^{-1} is positive for small alpha", r.pass, &r))
            .with_table(t));
    }
    let table = s3_threshold_table(sweep, &g, mode)?;
    let mut t = Table::new(&["alpha", "min_h_over_pi", "positive"]);
    for r in &table.rows {
        t.push(vec![r.alpha.to_string(), r.min_h.to_string(), r.positive.to_string()]);
    }
    Ok(Outcome::new(params, &table).with_table(t))
}

pub fn mu(cfg: &Settings, n: usize, lo: f64, hi: f64) -> Result<Outcome> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::Argument("mu band needs lo <= hi".into()));
    }
    let g = grid(cfg, SamplingGrid::unit_sphere(128, 16, 6, 0x5eed))?;
    let main = build_main_loop(&distinguished_map(cfg, n)?, n)?;
    let refine = cfg.refine.unwrap_or(8);
    let est = delta_mu_report(&main, &g, refine, cfg.mode())?;
    let pass = est.mu_hat >= lo && est.mu_hat <= hi;
    let params = json!({"n": n, "band": [lo, hi], "refine": refine, "grid": g, "ode": cfg.ode()});
    let mut t = Table::new(&["stage", "min"]);
    for (k, v) in &est.per_stage {
        t.push(vec![format!("\"{k}\""), v.to_string()]);
    }
    Ok(Outcome::new(params, json!({"mu_hat": float(est.mu_hat)}))
        .check(Check::new("mu in band", "the contracting homotopy of the main loop has mu close to 1", pass, &est))
        .with_table(t))
}

pub fn fundamental(cfg: &Settings, n: usize) -> Result<Outcome> {
    let g = grid(cfg, SamplingGrid { shells: 4, r_min: 0.25, r_max: 4.0, sphere_points: 500, time_samples: 10, homotopy_samples: 5, seed: 0x5eed })?;
    let r = fundamental_inequality_check(n, &g, cfg.tol_or(1e-6), cfg.mode())?;
    Ok(Outcome::new(json!({"n": n, "grid": g}), json!({"min": float(r.value)}))
        .check(Check::new("fundamental inequality", "F^(s) at the image point plus varrho is non-negative along the contraction of f_t", r.pass, &r)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum TargetKind {
    Ball,
    Cylinder,
}

pub fn squeeze_verdict(n: usize, r1: f64, r2: f64, target: TargetKind, r3: Option<f64>) -> Result<Outcome> {
    let t = match target {
        TargetKind::Ball => Target::Ball,
        TargetKind::Cylinder => Target::Cylinder,
    };
    let v = squeezing_verdict(n, r1, r2, t, r3)?;
    let mut table = Table::new(&["verdict", "m", "k"]);
    let verdict = crate::report::to_value(v.verdict);
    table.push(vec![verdict.as_str().unwrap_or("").to_string(), v.m.map(|m| m.to_string()).unwrap_or_default(), v.k.map(|k| k.to_string()).unwrap_or_default()]);
    Ok(Outcome::new(json!({"n": n, "R1": r1, "R2": r2, "target": t, "R3": r3}), &v).with_table(table))
}

pub fn squeeze_plan(r1: f64, r2: f64, gamma: f64) -> Result<Outcome> {
    let p = iteration_plan(r1, r2, gamma)?;
    let mut t = Table::new(&["step", "r"]);
    for (i, r) in p.trajectory.iter().enumerate() {
        t.push(vec![i.to_string(), r.to_string()]);
    }
    let pass = p.exact_agreement;
    Ok(Outcome::new(json!({"R1": r1, "R2": r2, "gamma": gamma}), &p)
        .check(Check::new("closed form agrees with iteration", "iterating r -> r/(1 + gamma r) gives r/(1 + k gamma r)", pass, json!({"steps": p.steps})))
        .with_table(t))
}

pub fn pipeline(cfg: &Settings, n: usize, samples: usize, shift: Option<f64>) -> Result<Outcome> {
    let seed = cfg.seed_or(0x5eed);
    let k = cylinder_samples(n, samples, seed)?;
    let r = squeeze_pipeline_check(n, &k, shift, cfg.tol_or(1e-9), cfg.mode())?;
    Ok(Outcome::new(json!({"n": n, "samples": samples, "shift": shift, "seed": seed}), json!({"min_margin": float(r.value)}))
        .check(Check::new("cylinder squeezes into the ball", "shift, Psi and Phi carry the prequantized cylinder of radius 1 into B(1/(n-1))", r.pass, &r)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PathKind {
    Rotation,
    Quadratic,
}

pub fn cz(kind: PathKind, values: &[f64], samples: usize) -> Result<Outcome> {
    if values.is_empty() {
        return Err(Error::Argument("cz needs at least one value".into()));
    }
    let path = match kind {
        PathKind::Rotation => SymplecticPath::rotation(values, samples)?,
        PathKind::Quadratic => {
            if !values.len().is_multiple_of(2) {
                return Err(Error::Argument("quadratic path needs an even number of diagonal entries".into()));
            }
            SymplecticPath::quadratic(&DMatrix::from_diagonal(&DVector::from_vec(values.to_vec())), samples)?
        }
    };
    let cz = cz_index(&path)?;
    let rs = cz_robbin_salamon(&path)?;
    let maslov = if path.is_loop() { Some(maslov_index(&path)?) } else { None };
    Ok(Outcome::new(json!({"path": format!("{kind:?}"), "values": values, "samples": samples}), json!({"cz": cz, "robbin_salamon": rs, "maslov": maslov})))
}

fn ellipsoid(n: usize, big_n: u32, r: f64) -> Result<EllipsoidSpec> {
    let spec = EllipsoidSpec::new(n, big_n, r)?;
    spec.check_non_resonant()?;
    Ok(spec)
}

pub fn ch_ellipsoid_cmd(n: usize, big_n: u32, r: f64) -> Result<Outcome> {
    let spec = ellipsoid(n, big_n, r)?;
    let degree = ellipsoid_degree(&spec)?;
    let flow = ellipsoid_degree_from_flow(&spec)?;
    let g = ch_ellipsoid(&spec)?;
    let mut t = Table::new(&["degree", "rank"]);
    for (d, k) in &g.ranks {
        t.push(vec![d.to_string(), k.to_string()]);
    }
    Ok(Outcome::new(json!({"n": n, "N": big_n, "R": r}), json!({"degree": degree, "ranks": g.ranks}))
        .check(Check::new("degree from linearized flow", "the grading equals minus the Conley-Zehnder index of the linearized Reeb flow", flow == degree, json!({"flow_degree": flow})))
        .with_table(t))
}

pub fn spectrum(cfg: &Settings, n: usize, big_n: u32, r: f64) -> Result<Outcome> {
    let spec = EllipsoidSpec::new(n, big_n, r)?;
    let depth = cfg.depth.unwrap_or(DEFAULT_SPECTRUM_DEPTH);
    let s = action_spectrum(&spec, depth)?;
    let mut t = Table::new(&["action"]);
    for v in &s.values {
        t.push(vec![v.to_string()]);
    }
    Ok(Outcome::new(json!({"n": n, "N": big_n, "R": r, "depth": depth}), &s).with_table(t))
}

pub fn profile(a: f64, b: f64, c: f64, samples: usize) -> Result<Outcome> {
    let h = ProfileFunction::f_abc(a, b, c)?;
    let bar = profile_transform(&h)?;
    let expected = (a / c, b, 1.0 / c);
    let got = bar.as_f_abc();
    let exact = got.is_some_and(|g| (g.0 - expected.0).abs() <= 1e-12 * expected.0 && g.1 == expected.1 && (g.2 - expected.2).abs() <= 1e-12 * expected.2);
    let mut t = Table::new(&["u", "H", "H_bar", "phi_bar_of_phi"]);
    let mut worst: f64 = 0.0;
    let hi = 2.0 * b.max(a / c);
    for i in 1..=samples.max(1) {
        let u = hi * i as f64 / samples.max(1) as f64;
        let back = bar.phi(h.phi(u));
        worst = worst.max((back - u).abs() / u);
        t.push(vec![u.to_string(), h.eval(u).to_string(), bar.eval(u).to_string(), back.to_string()]);
    }
    let verts = match &bar {
        ProfileFunction::PiecewiseLinear { vertices } => vertices.clone(),
        ProfileFunction::Smooth { .. } => Vec::new(),
    };
    Ok(Outcome::new(json!({"a": a, "b": b, "c": c, "samples": samples}), json!({"transformed_vertices": verts, "expected": [expected.0, expected.1, expected.2]}))
        .check(Check::new("transform of F_{a,b,c}", "the transform of F_{a,b,c} is F_{a/c,b,1/c}", exact, json!({"got": got})))
        .check(Check::new("inverse phi", "phi of the transformed profile inverts phi of the profile", worst < 1e-12, json!({"max_relative_error": worst})))
        .with_table(t))
}

pub fn olshanskii(cfg: &Settings) -> Result<Outcome> {
    let r = olshanskii_report()?;
    let dev = flow_hamiltonian_deviation(0.7, 0.3, 256, cfg.seed_or(0x5eed));
    let mut t = Table::new(&["cone", "g1_x", "g1_y", "g2_x", "g2_y"]);
    for (name, gens) in [("c_min", &r.c_min), ("c1", &r.c1), ("c0", &r.c0), ("contact", &r.contact_cone)] {
        let mut row = vec![name.to_string()];
        row.extend(gens.iter().flat_map(|g| g.iter().cloned()));
        t.push(row);
    }
    Ok(Outcome::new(json!({}), &r)
        .check(Check::new("c0 equals c_min", "the invariant cone of the maximal compact subalgebra equals the minimal cone", r.c0_equals_c_min, r.c0_equals_c_min))
        .check(Check::new("contact cone from flow", "the cone of contact Hamiltonians agrees with the projected rotation rates", r.contact_cone_matches_flow, r.contact_cone_matches_flow))
        .check(Check::new("Hamiltonian of the torus flow", "the lifted torus flow has the linear Hamiltonian predicted by the rates", dev < 1e-10, json!({"max_deviation": dev})))
        .with_table(t))
}

fn distinguished_map(cfg: &Settings, n: usize) -> Result<DistinguishedMap> {
    let p = choose_shift_params(n)?;
    let a = DistinguishedMap::build(&p, &cfg.ode(), cfg.mode())?;
    if let Some(path) = &cfg.cache {
        if path.exists() {
            a.load_cache(path)?;
        }
    }
    Ok(a)
}

fn store_cache(cfg: &Settings, a: &DistinguishedMap) -> Result<()> {
    match &cfg.cache {
        Some(path) => a.save_cache(path),
        None => Ok(()),
    }
}

pub fn main_loop(cfg: &Settings, n: usize, samples: usize) -> Result<Outcome> {
    let a = distinguished_map(cfg, n)?;
    let g = grid(cfg, SamplingGrid::unit_sphere(128, 16, 6, 0x5eed))?;
    let seed = cfg.seed_or(0x5eed);
    let mode = cfg.mode();
    let shifted = shifted_ellipsoid_inclusion(&a.params, samples, seed);
    let boundary = boundary_inclusion(&a, samples, seed, mode);
    let first = first_integral_check(&a, samples, seed, FD_TOL, mode);
    let main = build_main_loop(&a, n)?;
    let rep = main.checks(&g, cfg.tol_or(1e-3), mode)?;
    store_cache(cfg, &a)?;
    let params = json!({"n": n, "samples": samples, "grid": g, "ode": cfg.ode()});
    Ok(Outcome::new(params, json!({"shift": a.params, "build": a.build}))
        .check(Check::new("shifted ellipsoid inside W", "the shifted ellipsoid lies in the interior of W", shifted.pass, &shifted))
        .check(Check::new("boundary inclusion", "the distinguished map carries the ellipsoid boundary onto the shifted boundary", boundary.pass, &boundary))
        .check(Check::new("first integral", "the flow preserves the equivariant extension", first.pass, &first))
        .check(Check::new("positivity of Phi", "Phi is bounded below by (2n-3) rho", rep.positivity_bound.pass, &rep.positivity_bound))
        .check(Check::new("step 1", "every loop along the contraction of f_2t has a non-negative Hamiltonian", rep.step1_bound.pass, &rep.step1_bound))
        .check(Check::new("step 2", "every loop along the contraction of f_t has a non-negative Hamiltonian", rep.step2_bound.pass, &rep.step2_bound))
        .check(Check::new("closure", "phi_1 is the identity", rep.closure.pass, &rep.closure)))
}
