//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured numbers (visible under `cargo test -- --nocapture`).

use lielyap::certify::{build_kl, check_envelope, kl_shape, max_segment_count};
use lielyap::clf::{estimate_gamma, verify, CLFCandidate, GammaFn};
use lielyap::config::{parse_config, CompiledSystem};
use lielyap::expr::parse_expr;
use lielyap::field::{lie_bracket, Generator, VectorFieldDef};
use lielyap::hamiltonian::{Smoothness, SystemDef};
use lielyap::lie::{enumerate_brackets, eval_bracket, setvalued_pair, FormalBracket};
use lielyap::linalg;
use lielyap::report::to_sorted_json;
use lielyap::sample::RegionSpec;
use lielyap::steering::{
    asymptotic_order, synthesize, word_for_bracket, DriftBracketKind, StepKnobs, SteerDirection,
    Trajectory,
};
use std::time::Instant;

fn fixture(name: &str) -> CompiledSystem {
    let path = format!("{}/fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap();
    parse_config(&text).unwrap().compile().unwrap()
}

fn field(dim: usize, comps: &[&str]) -> VectorFieldDef {
    VectorFieldDef::new(
        dim,
        comps.iter().map(|c| parse_expr(c, dim).unwrap()).collect(),
    )
    .unwrap()
}

fn nonholonomic_fields() -> Vec<VectorFieldDef> {
    vec![field(3, &["1", "0", "-x2"]), field(3, &["0", "1", "x1"])]
}

fn squares_fields() -> Vec<VectorFieldDef> {
    vec![field(3, &["1", "0", "x2^2"]), field(3, &["0", "1", "x1^2"])]
}

fn pair(i: usize, j: usize) -> FormalBracket {
    FormalBracket::node(FormalBracket::leaf(i), FormalBracket::leaf(j))
}

#[test]
fn criterion_1_bracket_fixtures_exact() {
    let start = Instant::now();

    // nonholonomic: [f1,f2] = (0,0,2) at every probe point
    let nh = nonholonomic_fields();
    let b12 = pair(1, 2);
    for x in [
        [0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [-2.5, 3.0, 7.0],
        [0.1, -0.9, 4.2],
    ] {
        assert_eq!(eval_bracket(&b12, &nh, &x).unwrap(), vec![0.0, 0.0, 2.0]);
    }

    // quadratic pair: [f1,f2] = (0,0,2(x1-x2)) and [f1,[f1,f2]] = (0,0,2)
    let sq = squares_fields();
    for x in [[0.0, 0.0, 1.0], [1.5, -0.5, 2.0], [-1.0, 2.0, -3.0]] {
        assert_eq!(
            eval_bracket(&b12, &sq, &x).unwrap(),
            vec![0.0, 0.0, 2.0 * (x[0] - x[1])]
        );
        let b112 = FormalBracket::node(FormalBracket::leaf(1), b12.clone());
        assert_eq!(eval_bracket(&b112, &sq, &x).unwrap(), vec![0.0, 0.0, 2.0]);
    }

    // Lipschitz twist: the set-valued table over all six sign regions
    let lip = fixture("lipschitz_twist");
    let gens = lip.sys.generators();
    let thirds = |x: [f64; 3]| -> Vec<f64> {
        let set = setvalued_pair(gens, 1, 2, &x, 1e-12).unwrap();
        let mut v: Vec<f64> = set.vertices().iter().map(|w| w[2]).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    assert_eq!(thirds([1.0, 1.0, 0.0]), vec![4.0]);
    assert_eq!(thirds([-1.0, -1.0, 0.5]), vec![4.0]);
    assert_eq!(thirds([-1.0, 1.0, 0.0]), vec![2.0]);
    assert_eq!(thirds([1.0, -1.0, 0.0]), vec![6.0]);
    assert_eq!(thirds([0.0, 1.0, 0.0]), vec![2.0, 4.0]);
    assert_eq!(thirds([-1.0, 0.0, 0.0]), vec![2.0, 4.0]);
    assert_eq!(thirds([0.0, -1.0, 0.0]), vec![4.0, 6.0]);
    assert_eq!(thirds([1.0, 0.0, 0.0]), vec![4.0, 6.0]);
    assert_eq!(thirds([0.0, 0.0, 5.0]), vec![2.0, 6.0]);
    assert_eq!(thirds([0.0, 0.0, -1.0]), vec![2.0, 6.0]);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("criterion 1 PASS: bracket fixtures exact in {elapsed:?}");
}

#[test]
fn criterion_2_unit_ball_margin_bound() {
    let start = Instant::now();
    let sys = SystemDef::new(
        3,
        nonholonomic_fields().into_iter().map(Generator::Smooth).collect(),
        None,
        2,
        Smoothness::Smooth,
    )
    .unwrap();
    let u = CLFCandidate::distance_to_ball(vec![0.0; 3], 1.0);
    let region = RegionSpec {
        lo: vec![-5.0; 3],
        hi: vec![5.0; 3],
        u_min: 0.0,
        u_max: 4.0,
        exclude_tube: None,
    };
    let report = verify(&sys, &u, &region, 10_000, 0).unwrap();
    assert_eq!(report.samples, 10_000);
    assert!(report.failures.is_empty());
    // every sampled H^(2)(x, DU(x)) <= -2/3 + 1e-9
    assert!(
        report.min_margin >= 2.0 / 3.0 - 1e-9,
        "min margin {}",
        report.min_margin
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 2.0, "took {elapsed:?}");
    println!(
        "criterion 2 PASS: 10^4 samples in 1<|x|<=5, min margin {:.6} >= 2/3 - 1e-9, in {elapsed:?}",
        report.min_margin
    );
}

#[test]
fn criterion_3_degeneracy_witnesses() {
    // nonholonomic with the unit-ball distance: H^(1) vanishes on the axis
    let nh = SystemDef::new(
        3,
        nonholonomic_fields().into_iter().map(Generator::Smooth).collect(),
        None,
        2,
        Smoothness::Smooth,
    )
    .unwrap();
    let u = CLFCandidate::distance_to_ball(vec![0.0; 3], 1.0);
    for z in [1.5, -2.0, 4.0, 100.0] {
        let x = [0.0, 0.0, z];
        let p = &u.limiting_gradients(&x).unwrap()[0];
        let h1 = nh.hamiltonian(1, &x, p).unwrap();
        assert!(h1.abs() <= 1e-12, "H1 at z={z}: {h1}");
    }

    // quadratic pair: H^(2) = 0 but H^(3) = -2 < -1 on the punctured axis
    let sq = SystemDef::new(
        3,
        squares_fields().into_iter().map(Generator::Smooth).collect(),
        None,
        3,
        Smoothness::Smooth,
    )
    .unwrap();
    let u0 = CLFCandidate::distance_to_ball(vec![0.0; 3], 0.0);
    for z in [1.0, -2.0, 0.5, 7.0] {
        let x = [0.0, 0.0, z];
        let p = &u0.limiting_gradients(&x).unwrap()[0];
        let chain = sq.hamiltonian_chain(&x, p).unwrap();
        assert!(chain[1].abs() <= 1e-12, "H2 at z={z}: {}", chain[1]);
        assert!((chain[2] + 2.0).abs() <= 1e-12, "H3 at z={z}: {}", chain[2]);
        assert!(chain[2] < -1.0);
    }
    println!("criterion 3 PASS: axis degeneracies exact (H1=0; H2=0, H3=-2)");
}

#[test]
fn criterion_4_hamiltonian_chain_monotone() {
    let fixtures = [
        "nonholonomic",
        "squares_k3",
        "gated_twist",
        "cutoff_rings",
        "lipschitz_twist",
        "soft_landing",
    ];
    for name in fixtures {
        let built = fixture(name);
        let n = built.sys.dim();
        let mut checked = 0;
        let mut k: u32 = 0;
        while checked < 1000 {
            k += 1;
            let x: Vec<f64> = (0..n)
                .map(|d| 2.0 * ((0.37 * f64::from(k) + 1.7 * d as f64).sin()))
                .collect();
            let p: Vec<f64> = (0..n)
                .map(|d| (0.91 * f64::from(k) + 0.3 * d as f64).cos())
                .collect();
            let chain = match built.sys.hamiltonian_chain(&x, &p) {
                Ok(c) => c,
                // kinked sample points for the bump fields are skipped
                Err(_) => continue,
            };
            for w in chain.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-12,
                    "{name}: chain not monotone at {x:?}: {chain:?}"
                );
            }
            checked += 1;
        }
        assert_eq!(checked, 1000);
    }
    println!("criterion 4 PASS: H^(h) <= H^(h-1) at 1000 points per fixture, slack <= 1e-12");
}

#[test]
fn criterion_5_word_fidelity_and_segment_counts() {
    let triple = FormalBracket::node(pair(1, 2), FormalBracket::leaf(3));
    let w = word_for_bracket(&triple);
    let codes: Vec<i32> = w.segments().iter().map(|a| a.code()).collect();
    assert_eq!(codes, vec![1, 2, -1, -2, 3, 2, 1, -2, -1, -3]);

    let g = FormalBracket::leaf;
    assert_eq!(g(1).r(), 1);
    assert_eq!(pair(1, 2).r(), 4);
    assert_eq!(FormalBracket::node(g(1), pair(2, 3)).r(), 10);
    assert_eq!(
        FormalBracket::node(g(1), FormalBracket::node(g(2), pair(3, 4))).r(),
        22
    );
    assert_eq!(FormalBracket::node(pair(1, 2), pair(3, 4)).r(), 16);
    assert_eq!(max_segment_count(4), 22);
    println!("criterion 5 PASS: ten-segment schedule exact; r in {{1,4,10,22,16}}");
}

#[test]
fn criterion_6_asymptotic_orders() {
    let start = Instant::now();
    let t_list = [0.1, 0.05, 0.025, 0.0125, 0.01];
    let floor = 1e-10;

    // every bracket of degree <= 3 of both polynomial fixtures, and the
    // drift brackets of the soft-landing system
    let mut cases: Vec<(SystemDef, SteerDirection, [f64; 3])> = Vec::new();
    let nh = || {
        SystemDef::new(
            3,
            nonholonomic_fields().into_iter().map(Generator::Smooth).collect(),
            None,
            3,
            Smoothness::Smooth,
        )
        .unwrap()
    };
    let sq = || {
        SystemDef::new(
            3,
            squares_fields().into_iter().map(Generator::Smooth).collect(),
            None,
            3,
            Smoothness::Smooth,
        )
        .unwrap()
    };
    for b in enumerate_brackets(2, 3).unwrap() {
        cases.push((nh(), SteerDirection::Formal(b.clone()), [1.0, 1.0, 0.0]));
        cases.push((sq(), SteerDirection::Formal(b), [1.0, -1.0, 0.5]));
    }
    let mut slopes_checked = 0;
    let mut exact_cases = 0;
    let mut directions_checked = 0;
    for (sys, dir, x) in &cases {
        let rep = asymptotic_order(sys, dir, x, &t_list, 32).unwrap();
        match rep.slope {
            Some(slope) => {
                let h = rep.degree as f64;
                assert!(
                    (slope - (h + 1.0)).abs() <= 0.4,
                    "{}: slope {slope} vs order {}",
                    rep.descriptor,
                    h + 1.0
                );
                slopes_checked += 1;
            }
            None => {
                // nilpotent fixture: the word realizes the bracket exactly
                for (t, e) in &rep.errors {
                    assert!(*e <= floor, "{} at t={t}: {e}", rep.descriptor);
                }
                exact_cases += 1;
            }
        }
        if let Some(rel) = rep.rel_direction_error {
            assert!(rel <= 0.05, "{}: direction error {rel}", rep.descriptor);
            directions_checked += 1;
        }
    }

    // soft-landing drift brackets at the drift zero (1, 0)
    let sl = fixture("soft_landing");
    for kind in [
        DriftBracketKind::DriftThenGen(1),
        DriftBracketKind::GenThenDrift(1),
    ] {
        let rep = asymptotic_order(
            &sl.sys,
            &SteerDirection::DriftBracket(kind),
            &[1.0, 0.0],
            &t_list,
            32,
        )
        .unwrap();
        match rep.slope {
            Some(slope) => assert!((slope - 3.0).abs() <= 0.4, "{}", rep.descriptor),
            None => {
                for (_, e) in &rep.errors {
                    assert!(*e <= floor);
                }
                exact_cases += 1;
            }
        }
        let rel = rep.rel_direction_error.unwrap();
        assert!(rel <= 0.05, "{}: direction error {rel}", rep.descriptor);
        directions_checked += 1;
    }

    // a non-nilpotent system keeps the slope check itself honest: here the
    // truncation term exists and the measured orders must match h+1
    let trig = SystemDef::new(
        3,
        vec![
            Generator::Smooth(field(3, &["1", "0", "-sin(x2)"])),
            Generator::Smooth(field(3, &["0", "1", "sin(x1)"])),
        ],
        None,
        3,
        Smoothness::Smooth,
    )
    .unwrap();
    for b in enumerate_brackets(2, 3).unwrap() {
        if b.degree() < 2 {
            continue;
        }
        let rep = asymptotic_order(&trig, &SteerDirection::Formal(b), &[1.0, 1.0, 0.0], &t_list, 32)
            .unwrap();
        let slope = rep.slope.expect("non-nilpotent: remainder present");
        let h = rep.degree as f64;
        assert!(
            (slope - (h + 1.0)).abs() <= 0.4,
            "{}: slope {slope}",
            rep.descriptor
        );
        slopes_checked += 1;
        if let Some(rel) = rep.rel_direction_error {
            assert!(rel <= 0.05, "{}: direction error {rel}", rep.descriptor);
            directions_checked += 1;
        }
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "criterion 6 PASS: {slopes_checked} slopes in h+1 +/- 0.4, {exact_cases} exact-word cases, \
{directions_checked} directions within 5% at t=0.01, in {elapsed:?}"
    );
}

struct Run {
    traj: Trajectory,
    gamma: GammaFn,
    built: CompiledSystem,
}

fn run_fixture(name: &str) -> Run {
    let built = fixture(name);
    let sigma = built.region.u_max / 2.0;
    let gamma = estimate_gamma(
        &built.sys,
        &built.clf,
        &built.region,
        sigma,
        built.knobs.levels,
        built.knobs.samples_per_level,
        built.knobs.seed,
    )
    .unwrap();
    let knobs = StepKnobs {
        m_hat: built.knobs.m_hat,
        substeps: built.knobs.substeps,
        max_halvings: built.knobs.max_halvings,
        record_stride: built.knobs.record_stride,
    };
    let traj = synthesize(
        &built.sys,
        &built.clf,
        &built.target,
        &gamma,
        built.knobs.x0.as_ref().unwrap(),
        built.knobs.eps_d,
        built.knobs.max_steps,
        &knobs,
    )
    .unwrap();
    Run { traj, gamma, built }
}

fn assert_descent(run: &Run) {
    // strict decrease plus the accepted-step inequality at every checkpoint
    for w in run.traj.checkpoints.windows(2) {
        assert!(w[1].u < w[0].u, "u not strictly decreasing");
        let gamma_value = run.gamma.eval(w[0].u);
        let threshold = -(gamma_value / 2.0) * (w[1].t / w[1].r as f64).powi(w[1].degree as i32);
        assert!(
            w[1].u - w[0].u <= threshold * (1.0 - 1e-12),
            "descent test fails at u={}: decrease {} vs threshold {threshold}",
            w[0].u,
            w[1].u - w[0].u
        );
    }
}

#[test]
fn criterion_7_synthesis_runs() {
    // nonholonomic from (0,0,2) to the 0.25-ball within distance 0.05
    let start = Instant::now();
    let run = run_fixture("nonholonomic");
    let d = run
        .built
        .target
        .distance(&run.traj.checkpoints.last().unwrap().x)
        .unwrap();
    assert!(d <= 0.05, "final distance {d}");
    assert_descent(&run);
    let t_nh = start.elapsed();
    assert!(t_nh.as_secs_f64() < 30.0);
    let steps_nh = run.traj.steps();

    // soft landing from (1,0) into |x| <= 0.1
    let start = Instant::now();
    let run = run_fixture("soft_landing");
    let xf = &run.traj.checkpoints.last().unwrap().x;
    assert!(linalg::norm(xf) <= 0.1, "final |x| = {}", linalg::norm(xf));
    assert_descent(&run);
    let t_sl = start.elapsed();
    assert!(t_sl.as_secs_f64() < 30.0);
    let steps_sl = run.traj.steps();

    // Lipschitz twist from (0,0,1) to within 0.1 of the 0.1-ball
    let start = Instant::now();
    let run = run_fixture("lipschitz_twist");
    let d = run
        .built
        .target
        .distance(&run.traj.checkpoints.last().unwrap().x)
        .unwrap();
    assert!(d <= 0.1, "final distance {d}");
    assert_descent(&run);
    let t_lip = start.elapsed();
    assert!(t_lip.as_secs_f64() < 30.0);

    println!(
        "criterion 7 PASS: nonholonomic {steps_nh} steps in {t_nh:?}; soft landing {steps_sl} steps \
in {t_sl:?}; lipschitz {} steps in {t_lip:?}; all descents strict and accepted",
        run.traj.steps()
    );
}

#[test]
fn criterion_8_kl_certificates() {
    for name in ["nonholonomic", "soft_landing", "lipschitz_twist"] {
        let run = run_fixture(name);
        let kl = build_kl(
            &run.gamma,
            &run.traj,
            &run.built.clf,
            &run.built.target,
            &run.built.region,
            run.built.knobs.m_hat,
            run.built.sys.max_degree(),
            run.built.knobs.kl_levels,
            run.built.knobs.kl_samples,
            run.built.knobs.seed,
        )
        .unwrap();
        let envelope = check_envelope(&run.traj, &kl, &run.built.target).unwrap();
        assert!(
            envelope.max_violation <= 1e-9,
            "{name}: envelope violated by {}",
            envelope.max_violation
        );
        let d0 = run.built.target.distance(&run.traj.checkpoints[0].x).unwrap();
        let deltas: Vec<f64> = (0..=8).map(|i| d0 * 1.25 * f64::from(i) / 8.0).collect();
        let times: Vec<f64> = (0..=16)
            .map(|i| run.traj.duration() * 0.25 * f64::from(i))
            .collect();
        let shape = kl_shape(&kl, &deltas, &times, 1e12);
        assert!(shape.zero_at_zero, "{name}");
        assert!(shape.increasing_in_delta, "{name}");
        assert!(shape.nonincreasing_in_s, "{name}");
        assert!(
            shape.tail_value <= 1e-3 * d0.max(1.0),
            "{name}: tail {}",
            shape.tail_value
        );
        println!(
            "criterion 8 PASS ({name}): violation {:.3e} <= 1e-9 over {} dense samples, KL shape holds",
            envelope.max_violation, envelope.samples
        );
    }
}

#[test]
fn criterion_9_property_suites() {
    // antisymmetry and Jacobi at 1e-8 on polynomial fields
    let f = field(3, &["x2^2", "x3", "x1*x2"]);
    let g = field(3, &["x3^2", "x1", "-x2"]);
    let h = field(3, &["x1^2 - x2", "x2*x3", "x1"]);
    let fg = lie_bracket(&f, &g);
    let gf = lie_bracket(&g, &f);
    let t1 = lie_bracket(&f, &lie_bracket(&g, &h));
    let t2 = lie_bracket(&g, &lie_bracket(&h, &f));
    let t3 = lie_bracket(&h, &fg);
    for k in 0..100u32 {
        let x = [
            (0.13 * f64::from(k)).sin(),
            (0.29 * f64::from(k)).cos(),
            0.02 * f64::from(k) - 1.0,
        ];
        let a = fg.eval(&x).unwrap();
        let b = gf.eval(&x).unwrap();
        let (j1, j2, j3) = (t1.eval(&x).unwrap(), t2.eval(&x).unwrap(), t3.eval(&x).unwrap());
        for i in 0..3 {
            assert!((a[i] + b[i]).abs() <= 1e-8);
            assert!((j1[i] + j2[i] + j3[i]).abs() <= 1e-8);
        }
    }

    // finite-difference oracle for the symbolic Jacobians at 1e-6
    for fld in [&f, &g, &h, &field(3, &["sin(x1)*x3", "exp(x2/4)", "sqrt(x1^2+2)"])] {
        for k in 0..25u32 {
            let x = [
                0.4 + 0.01 * f64::from(k),
                -0.3 + 0.02 * f64::from(k),
                0.25 * f64::from(k % 5) + 0.1,
            ];
            let d = fld.fd_check(&x, 1e-5).unwrap();
            assert!(d <= 1e-6, "fd discrepancy {d}");
        }
    }

    // positive homogeneity of H in p at 1e-12
    let built = fixture("squares_k3");
    for k in 1..200u32 {
        let x = [0.7, -0.4, 0.02 * f64::from(k)];
        let p = [(0.17 * f64::from(k)).sin(), 0.33, -0.51];
        let lambda = 0.07 * f64::from(k);
        for h in 1..=3 {
            let a = built
                .sys
                .hamiltonian(h, &x, &linalg::scale(&p, lambda))
                .unwrap();
            let b = lambda * built.sys.hamiltonian(h, &x, &p).unwrap();
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    // determinism: identical inputs give byte-identical reports
    let nh = fixture("nonholonomic");
    let rep1 = verify(&nh.sys, &nh.clf, &nh.region, 2000, 42).unwrap();
    let rep2 = verify(&nh.sys, &nh.clf, &nh.region, 2000, 42).unwrap();
    let json1 = to_sorted_json(&lielyap::report::VerifyReport::from_verification(&rep1));
    let json2 = to_sorted_json(&lielyap::report::VerifyReport::from_verification(&rep2));
    assert_eq!(json1, json2);
    let e = parse_expr("sin(x1)*exp(x2) - sqrt(x1^2+1)/max(x2, 0.5)", 2).unwrap();
    let bits1 = e.eval(&[0.3, 0.7]).unwrap().to_bits();
    let bits2 = e.eval(&[0.3, 0.7]).unwrap().to_bits();
    assert_eq!(bits1, bits2);

    println!(
        "criterion 9 PASS: antisymmetry/Jacobi (1e-8), fd oracle (1e-6), homogeneity (1e-12), determinism"
    );
}
