//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test --release -p contactforge --test acceptance`.

use std::f64::consts::PI;
use std::time::Instant;

use contactforge::distinguished::{boundary_inclusion, build_main_loop, choose_shift_params, delta_mu_report, first_integral_check, shifted_ellipsoid_inclusion, DistinguishedMap, OdeConfig};
use contactforge::exec::Execution;
use contactforge::geometry::{conformal_factor_check, SamplingGrid, SmoothMap};
use contactforge::index::{
    ball_inclusion_iso, ch_ellipsoid, cz_index, ellipsoid_degree, ellipsoid_degree_from_flow, maslov_index, profile_transform, EllipsoidSpec, ProfileFunction, SymplecticPath,
};
use contactforge::maps::{diagonal_loop, make_loop_embedding, make_planck_map, make_squeeze_pair, make_twist};
use contactforge::olshanskii::{build_c0, olshanskii_report, ratio, root_system, su21_structure, vec2, OrderVerdict, RationalMatrix};
use contactforge::squeeze::{closed_form_matches_iteration, iteration_plan, squeezing_verdict, Target, Verdict};
use contactforge::verify::{cylinder_samples, fundamental_inequality_check, positivity_check, s3_positivity, s3_threshold_table, squeeze_pipeline_check};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Run<'a> = Box<dyn Fn(Execution) -> String + 'a>;
type Criterion = (&'static str, f64, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn grid_1e4() -> SamplingGrid {
    SamplingGrid { shells: 4, r_min: 0.25, r_max: 4.0, sphere_points: 2500, time_samples: 1, homotopy_samples: 1, seed: 0x5eed }
}

fn contactness() -> Outcome {
    let grid = grid_1e4();
    let pts = grid.contact_points(2);
    let mode = Execution::default();
    let mut maps: Vec<SmoothMap> = (1..=4).map(|nn| make_twist(nn, 2).unwrap()).collect();
    for nn in 1..=4u32 {
        let l = diagonal_loop(format!("e^(2 pi i {nn} t)"), vec![nn as f64; 2]);
        maps.push(make_loop_embedding(&l, l.hamiltonian().unwrap()));
    }
    for n in [2, 3] {
        let (phi, psi) = make_squeeze_pair(n).unwrap();
        maps.push(phi);
        maps.push(psi);
    }
    let mut failures = Vec::new();
    let mut checked = 0;
    for m in &maps {
        let p = if m.n == 2 { pts.clone() } else { grid.contact_points(m.n) };
        if m.has_closed_form_jacobian() {
            let r = conformal_factor_check(m, &p, 1e-8, false, mode);
            checked += 1;
            if !r.pass || r.evaluated + r.skipped < 10_000 {
                failures.push(format!("{} closed-form", m.name));
            }
        }
        let r = conformal_factor_check(m, &p, 1e-5, true, mode);
        checked += 1;
        if !r.pass || r.evaluated + r.skipped < 10_000 {
            failures.push(format!("{} finite differences (residual {:.2e})", m.name, r.extras["max_relative_residual"]));
        }
    }
    let mut worst_planck: f64 = 0.0;
    for hbar in [1.0, 0.37, 2.5] {
        let m = make_planck_map(hbar, 2).unwrap();
        let h = 2.0 * PI * hbar;
        let c = conformal_factor_check(&m, &pts, 1e-8, false, mode);
        let f = conformal_factor_check(&m, &pts, 1e-5, true, mode);
        let dev = ((c.value - h).abs().max((c.extras["max_factor"] - h).abs())) / h;
        worst_planck = worst_planck.max(dev);
        checked += 2;
        if !c.pass || !f.pass || dev.is_nan() || dev >= 1e-10 {
            failures.push(format!("Planck hbar={hbar} (factor deviation {dev:.1e})"));
        }
    }
    outcome(failures.is_empty(), format!("{checked} checks on {} points, Planck factor deviation {worst_planck:.1e}; failures: {failures:?}", pts.len()))
}

fn fundamental_inequality() -> Outcome {
    let grid = SamplingGrid { shells: 4, r_min: 0.25, r_max: 4.0, sphere_points: 500, time_samples: 10, homotopy_samples: 5, seed: 0x5eed };
    let mut detail = Vec::new();
    let mut pass = true;
    for n in [2, 3] {
        let r = fundamental_inequality_check(n, &grid, 1e-6, Execution::default()).unwrap();
        pass &= r.pass && r.evaluated >= 100_000;
        detail.push(format!("n={n}: min {:.4} over {} points", r.value, r.evaluated));
    }
    outcome(pass, detail.join(", "))
}

fn s3_loop() -> Outcome {
    let grid = SamplingGrid::unit_sphere(6250, 16, 1, 0x5eed);
    let r = s3_positivity(0.05, &grid, Execution::default()).unwrap();
    let alphas = [0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5];
    let table = s3_threshold_table(&alphas, &grid, Execution::default()).unwrap();
    let rows: Vec<String> = table.rows.iter().map(|r| format!("{}:{:.3}", r.alpha, r.min_h)).collect();
    let pass = r.pass && r.value > 0.0 && r.evaluated >= 100_000 && table.rows.len() == alphas.len();
    outcome(pass, format!("alpha=0.05 min h/pi {:.4} on {} samples; threshold {:?}; table [{}]", r.value, r.evaluated, table.empirical_threshold, rows.join(" ")))
}

fn main_loop() -> Outcome {
    let p = choose_shift_params(2).unwrap();
    let mode = Execution::default();
    let a = DistinguishedMap::build(&p, &OdeConfig::default(), mode).unwrap();
    let cache = std::env::temp_dir().join(format!("contactforge-acceptance-{}.json", std::process::id()));
    a.save_cache(&cache).unwrap();
    let a = DistinguishedMap::build(&p, &OdeConfig::default(), mode).unwrap();
    a.load_cache(&cache).unwrap();
    std::fs::remove_file(&cache).ok();
    let shifted = shifted_ellipsoid_inclusion(&p, 256, 7);
    let boundary = boundary_inclusion(&a, 256, 7, mode);
    let first = first_integral_check(&a, 256, 7, 1e-5, mode);
    let main = build_main_loop(&a, 2).unwrap();
    let grid = SamplingGrid::unit_sphere(128, 16, 6, 0x5eed);
    let rep = main.checks(&grid, 1e-3, mode).unwrap();
    let mu = delta_mu_report(&main, &grid, 8, mode).unwrap();
    let mu_ok = (0.8..=1.05).contains(&mu.mu_hat);
    let pass = shifted.pass && boundary.pass && first.pass && rep.positivity_bound.pass && rep.positivity_bound.value > -1e-3 && rep.closure.pass && mu_ok;
    outcome(
        pass,
        format!(
            "inclusion {}/{}, first integral {:.1e}, Phi/rho-(2n-3) min {:.4}, closure {:.1e}, mu {:.4}",
            shifted.pass,
            boundary.pass,
            -first.value,
            rep.positivity_bound.value,
            -rep.closure.value,
            mu.mu_hat
        ),
    )
}

fn negative_count(s: &DMatrix<f64>) -> Option<usize> {
    let eig = s.clone().symmetric_eigen().eigenvalues;
    if eig.iter().any(|e| e.abs() < 0.05 || e.abs() > 1.0) {
        return None;
    }
    Some(eig.iter().filter(|e| **e < 0.0).count())
}

fn random_small_quadratic(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, usize) {
    loop {
        let m = DMatrix::from_fn(2 * n, 2 * n, |_, _| rng.gen_range(-0.5..0.5));
        let s = (&m + m.transpose()) * 0.5;
        if let Some(k) = negative_count(&s) {
            return (s, k);
        }
    }
}

fn index_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut fails = Vec::new();
    if maslov_index(&SymplecticPath::rotation(&[1.0], 257).unwrap()).unwrap() != 2 {
        fails.push("Maslov of e^(2 pi i t)".to_string());
    }
    for i in 0..20 {
        let (s, k) = random_small_quadratic(&mut rng, 2);
        if cz_index(&SymplecticPath::quadratic(&s, 65).unwrap()).unwrap() != k as i64 {
            fails.push(format!("Morse calibration case {i}"));
        }
    }
    for i in 0..50 {
        let (s, _) = random_small_quadratic(&mut rng, 2);
        let ks: Vec<f64> = (0..2).map(|_| rng.gen_range(-2i64..=2) as f64).collect();
        let g1 = SymplecticPath::quadratic(&s, 513).unwrap();
        let g2 = SymplecticPath::rotation(&ks, 513).unwrap();
        let m = maslov_index(&g2).unwrap();
        if m != 2 * (ks[0] + ks[1]) as i64 || cz_index(&g1.twisted_by(&g2).unwrap()).unwrap() != cz_index(&g1).unwrap() - m {
            fails.push(format!("catenation case {i}"));
        }
    }
    let mut tested = 0;
    while tested < 50 {
        let n = rng.gen_range(1..=3);
        let nn = rng.gen_range(1..=4u32);
        let r = rng.gen_range(0.06..3.0);
        let near = |x: f64| (x - x.round()).abs() < 1e-6;
        if near(1.0 / r) || near(1.0 / (nn as f64 * r)) {
            continue;
        }
        let spec = EllipsoidSpec::new(n, nn, r).unwrap();
        if ellipsoid_degree(&spec).unwrap() != ellipsoid_degree_from_flow(&spec).unwrap() {
            fails.push(format!("degree vs flow at n={n} N={nn} R={r}"));
        }
        tested += 1;
    }
    for n in 1..=4usize {
        for r in [1.5, 2.5, 3.7] {
            if ellipsoid_degree(&EllipsoidSpec::new(n, 1, r).unwrap()).unwrap() != 0 {
                fails.push(format!("degree 0 at n={n} R={r}"));
            }
        }
        for k in 2..=6i64 {
            let r = 0.5 * (1.0 / k as f64 + 1.0 / (k - 1) as f64);
            if ellipsoid_degree(&EllipsoidSpec::new(n, 1, r).unwrap()).unwrap() != -2 * n as i64 * (k - 1) {
                fails.push(format!("degree -2n(k-1) at n={n} k={k}"));
            }
        }
    }
    outcome(fails.is_empty(), format!("Maslov, 20 Morse, 50 catenation, 50 formula-vs-flow, 32 anchored degrees; failures: {fails:?}"))
}

/// Number of positive integers `m` with `m x < 1`.
fn multiples_below_one(x: f64) -> i64 {
    (1..).take_while(|&m| (m as f64) * x < 1.0).count() as i64
}

/// Whether some window `1/k < R1 ≤ R2 < 1/(k−1)` (with `1/0 = ∞`) contains both radii.
fn same_window(r1: f64, r2: f64) -> bool {
    (1..10_000u64).any(|k| {
        let lo = 1.0 / k as f64;
        let hi = if k == 1 { f64::INFINITY } else { 1.0 / (k - 1) as f64 };
        lo < r1 && r2 < hi
    })
}

fn homology_tables() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut fails = Vec::new();
    let near = |x: f64| (x - x.round()).abs() < 1e-6;
    let mut cases = 0;
    while cases < 100 {
        let n = rng.gen_range(1..=4usize);
        let nn = rng.gen_range(1..=5u32);
        let r = rng.gen_range(0.05..3.0);
        if near(1.0 / r) || near(1.0 / (nn as f64 * r)) {
            continue;
        }
        let k = -2 * multiples_below_one(r) - 2 * (n as i64 - 1) * multiples_below_one(nn as f64 * r);
        let g = ch_ellipsoid(&EllipsoidSpec::new(n, nn, r).unwrap()).unwrap();
        if g.ranks.len() != 1 || g.rank(k) != 1 {
            fails.push(format!("CH at n={n} N={nn} R={r}"));
        }
        cases += 1;
    }
    let mut battery = 0;
    while battery < 100 {
        let n = rng.gen_range(1..=4usize);
        let a = rng.gen_range(0.05..3.0);
        let b = rng.gen_range(0.05..3.0);
        let (r1, r2) = if a <= b { (a, b) } else { (b, a) };
        if near(1.0 / r1) || near(1.0 / r2) {
            continue;
        }
        let iso = ball_inclusion_iso(n, r1, r2).unwrap();
        if iso.iso != same_window(r1, r2) {
            fails.push(format!("inclusion R1={r1} R2={r2}"));
        }
        battery += 1;
    }
    outcome(fails.is_empty(), format!("100 ellipsoids, 100 inclusions; failures: {fails:?}"))
}

fn olshanskii_suite() -> Outcome {
    let s = su21_structure();
    let roots = root_system(&s).unwrap();
    let c = build_c0(&s, &roots).unwrap();
    let r = olshanskii_report().unwrap();
    let mut vecs: Vec<[i64; 2]> = roots
        .iter()
        .map(|x| {
            let v = vec2(&x.vector);
            let as_int = |q: &contactforge::olshanskii::Rat| if q.is_integer() { q.to_integer().try_into().unwrap_or(i64::MAX) } else { i64::MAX };
            [as_int(&v[0]), as_int(&v[1])]
        })
        .collect();
    vecs.sort();
    let mut expected = vec![[1, -1], [-1, 1], [1, 0], [-1, 0], [0, 1], [0, -1]];
    expected.sort();
    let killing_ok = s.q == RationalMatrix::from_ints(&[&[2, 1], &[1, 2]]);
    let points_ok = c.h1 == [ratio(1, 1), ratio(0, 1)] && c.z == [ratio(2, 3), ratio(2, 3)] && c.h0 == [ratio(-1, 3), ratio(2, 3)];
    let pass = vecs == expected && killing_ok && points_ok && c.c0.same_cone(&c.c_min) && r.verdict == OrderVerdict::NonOrderable;
    outcome(pass, format!("roots {vecs:?}, Killing [[2,1],[1,2]] {killing_ok}, H1/Z/H0 {points_ok}, c0 = c_min {}, verdict {:?}", c.c0.same_cone(&c.c_min), r.verdict))
}

/// Branch selection from the three squeezing results, by brute-force search.
fn expected_verdict(n: usize, r1: f64, r2: f64, r3: Option<f64>) -> (Verdict, Option<u64>, Option<u64>) {
    if r1 <= r2 {
        return (Verdict::Squeezable, None, None);
    }
    if let Some(m) = (1..=(r1 as u64 + 1)).find(|&m| r2 <= m as f64 && m as f64 <= r1) {
        return (Verdict::NonSqueezable, Some(m), None);
    }
    if r1 < 1.0 && r2 < 1.0 && n >= 2 {
        return (Verdict::Squeezable, None, None);
    }
    if let Some(r3) = r3 {
        for k in 2..5000u64 {
            for m in 1..=(k as f64 * r1) as u64 + 1 {
                let q = m as f64 / k as f64;
                if r2 <= q && q <= r1 && r3 < m as f64 / (k - 1) as f64 {
                    return (Verdict::Restricted, Some(m), Some(k));
                }
            }
        }
    }
    (Verdict::Open, None, None)
}

fn squeeze_logic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut fails = Vec::new();
    let mut counts = std::collections::BTreeMap::new();
    let mut cases: Vec<(usize, f64, f64, Option<f64>)> = vec![(2, 0.9, 0.5, None), (2, 2.5, 1.5, None), (1, 0.9, 0.5, None), (2, 1.4, 1.2, Some(1.45)), (3, 0.5, 0.7, None)];
    while cases.len() < 30 {
        let n = rng.gen_range(1..=3usize);
        let r1 = rng.gen_range(0.2..4.0);
        let r2 = r1 * rng.gen_range(0.6..1.0);
        let r3 = if rng.gen_bool(0.6) { Some(r1 * rng.gen_range(1.001..1.2)) } else { None };
        cases.push((n, r1, r2, r3));
    }
    for (n, r1, r2, r3) in &cases {
        let v = squeezing_verdict(*n, *r1, *r2, Target::Ball, *r3).unwrap();
        let (e, m, k) = expected_verdict(*n, *r1, *r2, *r3);
        *counts.entry(format!("{e:?}")).or_insert(0) += 1;
        let mk_ok = match e {
            Verdict::NonSqueezable => v.m == m,
            Verdict::Restricted => v.m.zip(v.k).is_some_and(|(vm, vk)| {
                let q = vm as f64 / vk as f64;
                vk == k.unwrap() && *r2 <= q && q <= *r1 && r3.unwrap() < vm as f64 / (vk - 1) as f64
            }),
            _ => true,
        };
        if v.verdict != e || !mk_ok {
            fails.push(format!("n={n} R1={r1} R2={r2} R3={r3:?}: got {:?}, expected {e:?}", v.verdict));
        }
    }
    let mut exact = 0;
    for _ in 0..200 {
        let r = rng.gen_range(0.1..10.0);
        let gamma = rng.gen_range(0.05..3.0);
        if closed_form_matches_iteration(r, gamma, rng.gen_range(0..60)).unwrap() {
            exact += 1;
        }
    }
    let plan = iteration_plan(0.9, 0.1, 1.0).unwrap();
    let pass = fails.is_empty() && exact == 200 && plan.steps == 9 && plan.exact_agreement;
    outcome(pass, format!("30 verdicts {counts:?}, 200/{exact} closed-form matches, gamma=1 0.9->0.1 takes {} steps; failures: {fails:?}", plan.steps))
}

fn profile_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut fails = Vec::new();
    let mut params = 0;
    while params < 100 {
        let a = rng.gen_range(0.05..3.0);
        let b = a + rng.gen_range(0.05..3.0);
        let c = rng.gen_range(0.1..5.0);
        if a >= c * b {
            continue;
        }
        let bar = profile_transform(&ProfileFunction::f_abc(a, b, c).unwrap()).unwrap();
        if bar.as_f_abc() != Some((a / c, b, 1.0 / c)) {
            fails.push(format!("F({a},{b},{c})"));
        }
        params += 1;
    }
    let mut pairs = 0;
    while pairs < 100 {
        let mut us: Vec<f64> = (0..3).map(|_| rng.gen_range(0.01..1.0)).collect();
        us.sort_by(f64::total_cmp);
        if us.windows(2).any(|w| w[1] - w[0] <= 1e-3) {
            continue;
        }
        let hs: Vec<f64> = {
            let mut acc = 0.0;
            let mut v: Vec<f64> = (0..3).map(|_| { acc += rng.gen_range(0.1..2.0); acc }).collect();
            v.reverse();
            v
        };
        let ds: Vec<f64> = {
            let mut acc = 0.0;
            let mut v: Vec<f64> = (0..3).map(|_| { acc += rng.gen_range(0.0..1.0); acc }).collect();
            v.reverse();
            v
        };
        let h1 = ProfileFunction::piecewise_linear(us.iter().cloned().zip(hs.iter().cloned()).collect()).unwrap();
        let h2 = ProfileFunction::piecewise_linear(us.iter().cloned().zip(hs.iter().zip(&ds).map(|(a, b)| a + b)).collect()).unwrap();
        let (b1, b2) = (profile_transform(&h1).unwrap(), profile_transform(&h2).unwrap());
        let bb = profile_transform(&b1).unwrap();
        let ok = (1..400).all(|k| {
            let v = 0.01 * k as f64;
            (bb.eval(v) - h1.eval(v)).abs() <= 1e-10 && b1.eval(v) >= b2.eval(v) - 1e-10
        });
        if !ok {
            fails.push(format!("pair {pairs}"));
        }
        pairs += 1;
    }
    outcome(fails.is_empty(), format!("100 exact parameter transforms, 100 involution/anti-monotone pairs; failures: {fails:?}"))
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap()
}

fn determinism() -> Outcome {
    let grid = SamplingGrid { shells: 2, sphere_points: 200, time_samples: 8, homotopy_samples: 3, ..SamplingGrid::default() };
    let runs: Vec<(&str, Run)> = vec![
        ("positivity", Box::new(|m| json(&positivity_check(diagonal_loop("d", vec![1.0, 0.5]).hamiltonian().unwrap(), 2, &grid, 0.0, m).unwrap()))),
        ("conformal", Box::new(|m| json(&conformal_factor_check(&make_twist(2, 2).unwrap(), &grid.contact_points(2), 1e-8, true, m)))),
        ("fundamental", Box::new(|m| json(&fundamental_inequality_check(2, &grid, 1e-6, m).unwrap()))),
        ("s3", Box::new(|m| json(&s3_positivity(0.05, &SamplingGrid::unit_sphere(500, 8, 1, 3), m).unwrap()))),
        ("pipeline", Box::new(|m| json(&squeeze_pipeline_check(2, &cylinder_samples(2, 2000, 4).unwrap(), None, 1e-9, m).unwrap()))),
        ("verdict", Box::new(|_| json(&squeezing_verdict(2, 1.4, 1.2, Target::Ball, Some(1.45)).unwrap()))),
        ("olshanskii", Box::new(|_| json(&olshanskii_report().unwrap()))),
    ];
    let mut fails = Vec::new();
    for (name, f) in &runs {
        let a = f(Execution::Parallel);
        if a != f(Execution::Parallel) || a != f(Execution::Sequential) {
            fails.push(*name);
        }
    }
    outcome(fails.is_empty(), format!("{} report kinds re-run and compared across execution modes; failures: {fails:?}", runs.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("contactness suite", 30.0, contactness),
        ("fundamental inequality", 60.0, fundamental_inequality),
        ("loop on S^3", 120.0, s3_loop),
        ("main loop", 600.0, main_loop),
        ("index suite", f64::INFINITY, index_suite),
        ("contact homology tables", f64::INFINITY, homology_tables),
        ("Olshanskii suite", 1.0, olshanskii_suite),
        ("squeeze logic", f64::INFINITY, squeeze_logic),
        ("profile transform", f64::INFINITY, profile_suite),
        ("determinism", f64::INFINITY, determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        let in_budget = secs < *budget;
        let pass = o.pass && in_budget;
        if !pass {
            failed += 1;
        }
        let budget_note = if budget.is_finite() { format!(", budget {budget} s") } else { String::new() };
        println!("criterion {:>2} {name}: {} ({secs:.2} s{budget_note}) {}", i + 1, if pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
