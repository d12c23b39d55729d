use std::sync::OnceLock;

use contactforge::distinguished::{choose_shift_params, build_main_loop, DistinguishedMap, OdeConfig};
use contactforge::exec::Execution;
use contactforge::geometry::{liouville_pair, rho, rplus_action, sgrad, symplectic_defect, HamiltonianField, PhasePoint, SamplingGrid};
use contactforge::index::{
    cz_index, ellipsoid_degree, ellipsoid_degree_from_flow, maslov_index, profile_transform, EllipsoidSpec, ProfileFunction, SymplecticPath,
};
use contactforge::maps::{compose_paths, diagonal_loop, extract_hamiltonian, h_loop, invert_path};
use contactforge::olshanskii::{dual_cone, rat, RationalCone2, RationalMatrix};
use contactforge::squeeze::{iteration_plan, squeezing_verdict, Ramp, Target, Verdict};
use contactforge::verify::{mu_estimate, positivity_check, LoopHomotopy};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn point(n: usize) -> impl Strategy<Value = PhasePoint> {
    prop::collection::vec(-2.0f64..2.0, 2 * n).prop_filter("away from the origin", |x| x.iter().map(|v| v * v).sum::<f64>() > 1e-2).prop_map(|x| PhasePoint::from_real(&x))
}

fn symmetric(n: usize, scale: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, 4 * n * n).prop_map(move |v| {
        let m = DMatrix::from_vec(2 * n, 2 * n, v) * scale;
        (&m + m.transpose()) * 0.5
    })
}

fn negative_count(s: &DMatrix<f64>) -> Option<i64> {
    let eig = s.clone().symmetric_eigen().eigenvalues;
    if eig.iter().any(|e| e.abs() < 0.05) || eig.iter().any(|e| e.abs() > 1.0) {
        return None;
    }
    Some(eig.iter().filter(|e| **e < 0.0).count() as i64)
}

fn distinguished() -> &'static DistinguishedMap {
    static A: OnceLock<DistinguishedMap> = OnceLock::new();
    A.get_or_init(|| {
        let p = choose_shift_params(2).unwrap();
        DistinguishedMap::build(&p, &OdeConfig::default(), Execution::default()).unwrap()
    })
}

proptest! {
    #![proptest_config(cfg(48))]

    #[test]
    fn euler_property(rates in prop::collection::vec(-3.0f64..3.0, 3), z in point(3), t in 0.0f64..1.0) {
        let h = diagonal_loop("d", rates).hamiltonian().unwrap().clone();
        let v = sgrad(&h, &z, t);
        let a = liouville_pair(&z.z, &v.z);
        let hv = h.eval(&z.z, t);
        prop_assert!((a - hv).abs() <= 1e-9 * (1.0 + hv.abs()));
    }

    #[test]
    fn unitary_loops_are_equivariant(rates in prop::collection::vec(-3.0f64..3.0, 2), z in point(2), c in 0.1f64..10.0, t in 0.0f64..1.0) {
        let f = diagonal_loop("d", rates);
        let lhs = f.apply(t, &rplus_action(c, &z).unwrap().z);
        let rhs = rplus_action(c, &PhasePoint::new(f.apply(t, &z.z))).unwrap();
        prop_assert!(PhasePoint::new(lhs).dist(&rhs) <= 1e-9 * (1.0 + rhs.norm()));
    }

    #[test]
    fn compose_and_invert_match_extraction(r1 in prop::collection::vec(-2.0f64..2.0, 2), s in 0.0f64..1.0, z in point(2), t in 0.05f64..0.95) {
        let f = diagonal_loop("f", r1);
        let g = h_loop(2, 2, s).unwrap();
        let fg = compose_paths(&f, &g).unwrap();
        let scale = 1e-7 * (1.0 + rho(&z.z));
        let lhs = extract_hamiltonian(&fg).eval(&z.z, t);
        prop_assert!((lhs - fg.hamiltonian().unwrap().eval(&z.z, t)).abs() <= scale);
        let gi = invert_path(&g).unwrap();
        let lhs = extract_hamiltonian(&gi).eval(&z.z, t);
        prop_assert!((lhs - gi.hamiltonian().unwrap().eval(&z.z, t)).abs() <= scale);
    }

    #[test]
    fn h_loop_fixes_other_coordinates(s in 0.0f64..1.0, z in point(4), t in 0.0f64..1.0, j in 2usize..=4) {
        let w = h_loop(4, j, s).unwrap().apply(t, &z.z);
        for (l, (a, b)) in w.iter().zip(&z.z).enumerate() {
            if l != 0 && l != j - 1 {
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn verdict_is_scale_consistent(r1 in 0.05f64..12.0, frac in 0.05f64..1.0, n in 1usize..4) {
        let r2 = r1 * frac;
        let v = squeezing_verdict(n, r1, r2, Target::Ball, None).unwrap();
        if v.verdict == Verdict::NonSqueezable {
            let m = v.m.unwrap() as f64;
            prop_assert!(r2 <= m && m <= r1);
            let w = squeezing_verdict(n, r1 / m, r2 / m, Target::Ball, None).unwrap();
            prop_assert_eq!(w.verdict, Verdict::NonSqueezable);
            prop_assert_eq!(w.m, Some(1));
        }
    }

    #[test]
    fn ramp_slope_stays_under_cap(delta in 0.01f64..1.0) {
        let cap = 1.0 + 0.99 * delta;
        let tau = Ramp::with_slope_cap(cap).unwrap();
        for k in 0..=4000 {
            let t = k as f64 / 4000.0;
            prop_assert!(tau.derivative(t) < 1.0 + delta);
        }
        prop_assert!(tau.value(0.0).abs() < 1e-12 && (tau.value(1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iteration_plan_is_exact(r1 in 0.2f64..20.0, frac in 0.01f64..0.99, gamma in 0.05f64..3.0) {
        let p = iteration_plan(r1, r1 * frac, gamma).unwrap();
        prop_assert!(p.exact_agreement);
        prop_assert!(*p.trajectory.last().unwrap() < r1 * frac * (1.0 + 1e-12));
        if p.steps > 0 {
            prop_assert!(p.trajectory[p.trajectory.len() - 2] >= r1 * frac * (1.0 - 1e-12));
        }
    }

    #[test]
    fn morse_calibration(s in symmetric(2, 0.5)) {
        if let Some(k) = negative_count(&s) {
            prop_assert_eq!(cz_index(&SymplecticPath::quadratic(&s, 65).unwrap()).unwrap(), k);
        }
    }

    #[test]
    fn catenation_rule(s in symmetric(2, 0.5), k in prop::collection::vec(-2i64..=2, 2)) {
        if negative_count(&s).is_some() {
            let g1 = SymplecticPath::quadratic(&s, 513).unwrap();
            let rates: Vec<f64> = k.iter().map(|&x| x as f64).collect();
            let g2 = SymplecticPath::rotation(&rates, 513).unwrap();
            let m = maslov_index(&g2).unwrap();
            prop_assert_eq!(m, 2 * (k[0] + k[1]));
            prop_assert_eq!(cz_index(&g1.twisted_by(&g2).unwrap()).unwrap(), cz_index(&g1).unwrap() - m);
        }
    }

    #[test]
    fn direct_sum_is_additive(a in 0.05f64..3.0, b in 0.05f64..3.0) {
        prop_assume!((a.fract()).min(1.0 - a.fract()) > 1e-3 && (b.fract()).min(1.0 - b.fract()) > 1e-3);
        let pa = SymplecticPath::rotation(&[a], 257).unwrap();
        let pb = SymplecticPath::rotation(&[b], 257).unwrap();
        let sum = pa.direct_sum(&pb).unwrap();
        prop_assert_eq!(cz_index(&sum).unwrap(), cz_index(&pa).unwrap() + cz_index(&pb).unwrap());
    }

    #[test]
    fn ellipsoid_formula_matches_flow(n in 1usize..=3, big_n in 1u32..=4, r in 0.06f64..3.0) {
        let spec = EllipsoidSpec::new(n, big_n, r).unwrap();
        let near = |x: f64| (x - x.round()).abs() < 1e-6;
        prop_assume!(!near(1.0 / r) && !near(1.0 / (big_n as f64 * r)));
        prop_assert_eq!(ellipsoid_degree(&spec).unwrap(), ellipsoid_degree_from_flow(&spec).unwrap());
    }

    #[test]
    fn profile_transform_involution_and_antimonotone(
        u in prop::collection::vec(0.01f64..1.0, 3),
        h in prop::collection::vec(0.1f64..2.0, 3),
        d in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        let mut us = u.clone();
        us.sort_by(f64::total_cmp);
        prop_assume!(us.windows(2).all(|w| w[1] - w[0] > 1e-3));
        // Decreasing positive profiles satisfy H − uH′ > 0.
        let mut hs: Vec<f64> = h.iter().scan(0.0, |acc, x| { *acc += x; Some(*acc) }).collect();
        hs.reverse();
        let mut ds: Vec<f64> = d.iter().scan(0.0, |acc, x| { *acc += x; Some(*acc) }).collect();
        ds.reverse();
        let h1 = ProfileFunction::piecewise_linear(us.iter().cloned().zip(hs.iter().cloned()).collect()).unwrap();
        let h2 = ProfileFunction::piecewise_linear(us.iter().cloned().zip(hs.iter().zip(&ds).map(|(a, b)| a + b)).collect()).unwrap();
        let (b1, b2) = (profile_transform(&h1).unwrap(), profile_transform(&h2).unwrap());
        let bb = profile_transform(&b1).unwrap();
        for k in 1..400 {
            let v = 0.01 * k as f64;
            prop_assert!((bb.eval(v) - h1.eval(v)).abs() <= 1e-10);
            prop_assert!(b1.eval(v) >= b2.eval(v) - 1e-10);
        }
    }

    #[test]
    fn cone_duality_is_involutive(g in prop::collection::vec(-5i64..=5, 4), q in (1i64..6, -3i64..3, 1i64..6)) {
        let (a, b, c) = q;
        prop_assume!(a * c - b * b > 0);
        let cone = RationalCone2::from_generators([rat(g[0]), rat(g[1])], [rat(g[2]), rat(g[3])]);
        prop_assume!(cone.is_ok());
        let cone = cone.unwrap();
        let qm = RationalMatrix::from_ints(&[&[a, b], &[b, c]]);
        let dd = dual_cone(&dual_cone(&cone, &qm).unwrap(), &qm).unwrap();
        prop_assert!(dd.same_cone(&cone));
    }
}

proptest! {
    #![proptest_config(cfg(16))]

    #[test]
    fn reports_are_deterministic(rates in prop::collection::vec(0.1f64..2.0, 2), seed in 0u64..1000) {
        let h = diagonal_loop("d", rates).hamiltonian().unwrap().clone();
        let grid = SamplingGrid { shells: 2, sphere_points: 40, time_samples: 4, seed, ..SamplingGrid::default() };
        let a = positivity_check(&h, 2, &grid, 0.0, Execution::Sequential).unwrap();
        let b = positivity_check(&h, 2, &grid, 0.0, Execution::Parallel).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn refinement_never_raises_the_minimum(rates in prop::collection::vec(-1.0f64..2.0, 2), seed in 0u64..1000) {
        let h = diagonal_loop("d", rates).hamiltonian().unwrap().clone();
        let coarse = SamplingGrid { shells: 2, sphere_points: 30, time_samples: 4, seed, ..SamplingGrid::default() };
        let fine = SamplingGrid { sphere_points: 90, ..coarse.clone() };
        let a = positivity_check(&h, 2, &coarse, 0.0, Execution::default()).unwrap();
        let b = positivity_check(&h, 2, &fine, 0.0, Execution::default()).unwrap();
        prop_assert!(b.value <= a.value);
    }

    #[test]
    fn mu_hat_bounded_when_hamiltonians_dominate(rates in prop::collection::vec(-1.0f64..2.0, 2)) {
        let r = rates.clone();
        let hom = LoopHomotopy::single("d", 2, move |s| {
            let scaled: Vec<f64> = r.iter().map(|x| x * (0.5 + 0.5 * s)).collect();
            Ok(diagonal_loop("d", scaled).hamiltonian().unwrap().clone())
        });
        let grid = SamplingGrid::unit_sphere(40, 4, 3, 1);
        let mu = mu_estimate(&hom, &grid, 2, Execution::default()).unwrap();
        prop_assert!(mu.mu_hat <= 1.0 + 1e-9);
    }
}

proptest! {
    #![proptest_config(cfg(12))]

    #[test]
    fn distinguished_map_invariants(z in point(2), c in 0.2f64..5.0) {
        let a = distinguished();
        let lhs = a.apply(&rplus_action(c, &z).unwrap().z);
        let rhs = rplus_action(c, &PhasePoint::new(a.apply(&z.z))).unwrap();
        prop_assert!(PhasePoint::new(lhs).dist(&rhs) <= 1e-5 * (1.0 + rhs.norm()));
        let back = a.apply_inverse(&a.apply(&z.z));
        prop_assert!(PhasePoint::new(back).dist(&z) <= 1e-5 * z.norm());
        let jac = contactforge::geometry::fd_jacobian_of(&|x: &[f64]| PhasePoint::new(a.apply(&PhasePoint::from_real(x).z)).to_real(), &z.to_real());
        prop_assert!(symplectic_defect(&jac, 2) < 1e-4);
    }

    #[test]
    fn main_loop_closes(z in point(2)) {
        let main = build_main_loop(distinguished(), 2).unwrap();
        let w = main.phi(1.0, &z.z);
        prop_assert!(PhasePoint::new(w).dist(&z) <= 1e-5 * z.norm());
        let h: HamiltonianField = main.hamiltonian();
        prop_assert!(h.eval(&z.z, 0.3).is_finite());
    }
}
