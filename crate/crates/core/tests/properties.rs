mod common;

use common::*;
use hypercd::bench::{gate_hit, gate_stats, instance_references, run_experiment, GateMetric, InstanceRuns, RunCurve};
use hypercd::hypergraph::{clique_expand, hyperedge_degrees, Hyperedge, Layer};
use hypercd::objective::{coordinate_gradient, delta_objective, evaluate, gradient, phi_p, regularizer, Problem};
use hypercd::solvers::{init_state, solve, Method, SolverOptions};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

const EXPONENTS: [f64; 5] = [1.8, 1.9, 2.0, 2.25, 2.5];

fn instance_params() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 2usize..=30, 1usize..=3, 1usize..=4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_matches_central_differences((seed, n, l, m) in instance_params(), pi in 0usize..5) {
        let p = EXPONENTS[pi];
        let inst = random_instance(seed, n, l, m);
        let pb = inst.problem(p);
        let mut r = rng(seed ^ 0x9e37);
        let z = random_scores(&mut r, n, m);
        if p < 2.0 {
            // keep away from the non-differentiable set
            let st = init_state(&pb, z.clone()).unwrap();
            let min_diff = (0..pb.layers().len())
                .flat_map(|l| st.scaled_differences(l).iter().map(|d| d.abs()).collect::<Vec<_>>())
                .fold(f64::INFINITY, f64::min);
            prop_assume!(min_diff > 1e-2);
        }
        let g = gradient(&pb, &z).unwrap();
        let scale = max_abs(&g).max(1.0);
        for i in 0..n {
            for j in 0..m {
                let h = 1e-6 * (1.0 + z[[i, j]].abs());
                let mut zp = z.clone();
                zp[[i, j]] += h;
                let mut zm = z.clone();
                zm[[i, j]] -= h;
                let fd = (evaluate(&pb, &zp).unwrap() - evaluate(&pb, &zm).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[[i, j]]).abs() <= 1e-5 * scale, "p={p} ({i},{j}): fd {fd} vs {}", g[[i, j]]);
            }
        }
    }

    #[test]
    fn objective_equals_per_class_expansion((seed, n, l, m) in instance_params(), p in prop_oneof![Just(1.0), Just(1.5), Just(1.8), Just(2.0), Just(2.5), Just(3.0)]) {
        let inst = random_instance(seed, n, l, m);
        let pb = inst.problem(p);
        let z = random_scores(&mut rng(seed.wrapping_add(1)), n, m);
        let ours = evaluate(&pb, &z).unwrap();
        let oracle = oracle_objective(&inst, p, &z);
        prop_assert!(rel_err(ours, oracle) <= 1e-12, "{ours} vs {oracle}");
    }

    #[test]
    fn orientation_does_not_change_regularizer(seed in any::<u64>(), n in 2usize..=25, pi in 0usize..3) {
        let p = [1.8, 2.0, 2.5][pi];
        let inst = random_instance(seed, n, 2, 2);
        let pb = inst.problem(p);
        let mut r = rng(seed ^ 7);
        let mut cliques = inst.hypergraph.clique_layers();
        for c in &mut cliques {
            for e in 0..c.num_edges() {
                if r.gen_bool(0.5) {
                    c.flip_orientation(e);
                }
            }
        }
        let flipped = Problem::from_clique_layers(cliques, pb.labels().clone(), p, &inst.lambdas).unwrap();
        let z = random_scores(&mut r, n, 2);
        let a = regularizer(&pb, &z);
        let b = regularizer(&flipped, &z);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{a} vs {b}");
        let ga = gradient(&pb, &z).unwrap();
        let gb = gradient(&flipped, &z).unwrap();
        prop_assert!(max_abs_diff(&ga, &gb) <= 1e-12 * max_abs(&ga).max(1.0));
    }

    #[test]
    fn expansion_is_additive_over_hyperedge_lists(seed in any::<u64>(), n in 2usize..=20) {
        let mut r = rng(seed);
        let a = random_layer(&mut r, n, 15);
        let b = random_layer(&mut r, n, 15);
        let both = Layer { hyperedges: a.hyperedges.iter().chain(&b.hyperedges).cloned().collect() };
        let (ca, cb, cab) = (clique_expand(&a, n), clique_expand(&b, n), clique_expand(&both, n));
        let weight_of = |c: &hypercd::CliqueLayer, e: (usize, usize)| {
            c.edges.iter().position(|&x| x == e).map_or(0.0, |k| c.weights[k])
        };
        for (k, &e) in cab.edges.iter().enumerate() {
            let sum = weight_of(&ca, e) + weight_of(&cb, e);
            prop_assert!((cab.weights[k] - sum).abs() <= 1e-12 * sum);
        }
        for &e in ca.edges.iter().chain(&cb.edges) {
            prop_assert!(cab.edges.contains(&e));
        }
    }

    #[test]
    fn pairwise_layers_halve_weights(seed in any::<u64>(), n in 2usize..=20) {
        let mut r = rng(seed);
        let mut seen = std::collections::BTreeSet::new();
        let mut hyperedges = Vec::new();
        for _ in 0..3 * n {
            let u = r.gen_range(0..n);
            let v = r.gen_range(0..n);
            if u != v && seen.insert((u.min(v), u.max(v))) {
                hyperedges.push(Hyperedge { weight: r.gen_range(0.1..5.0), nodes: vec![u, v] });
            }
        }
        let c = clique_expand(&Layer { hyperedges: hyperedges.clone() }, n);
        prop_assert_eq!(c.num_edges(), hyperedges.len());
        for e in &hyperedges {
            let key = (e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1]));
            let k = c.edges.iter().position(|&x| x == key).unwrap();
            prop_assert_eq!(c.weights[k], e.weight / 2.0);
        }
    }

    #[test]
    fn clique_degrees_match_hyperedge_degrees(seed in any::<u64>(), n in 2usize..=30) {
        let layer = random_layer(&mut rng(seed), n, 40);
        let c = clique_expand(&layer, n);
        let from_edges = oracle_degrees(&layer, n);
        let helper = hyperedge_degrees(&layer, n);
        for u in 0..n {
            let tol = 1e-12 * from_edges[u].max(1e-300);
            prop_assert!((c.degrees[u] - from_edges[u]).abs() <= tol);
            prop_assert!((helper[u] - from_edges[u]).abs() <= tol);
            let incident: f64 = c.adjacency[u].iter().map(|&e| c.weights[e]).sum();
            prop_assert!((incident - from_edges[u]).abs() <= tol);
        }
    }

    #[test]
    fn objective_is_convex((seed, n, l, m) in instance_params(), p in 1.0f64..3.0, t in 0.01f64..0.99) {
        let inst = random_instance(seed, n, l, m);
        let pb = inst.problem(p);
        let mut r = rng(seed ^ 3);
        let z1 = random_scores(&mut r, n, m);
        let z2 = random_scores(&mut r, n, m);
        let mix = &z1 * t + &z2 * (1.0 - t);
        let lhs = evaluate(&pb, &mix).unwrap();
        let rhs = t * evaluate(&pb, &z1).unwrap() + (1.0 - t) * evaluate(&pb, &z2).unwrap();
        prop_assert!(lhs <= rhs + 1e-9, "{lhs} > {rhs}");
    }

    #[test]
    fn phi_is_odd(y in -50.0f64..50.0, p in 1.0f64..4.0) {
        prop_assert_eq!(phi_p(-y, p), -phi_p(y, p));
        prop_assert_eq!(phi_p(0.0, p), 0.0);
    }

    #[test]
    fn coordinate_gradient_and_delta_match_full_evaluation((seed, n, l, m) in instance_params(), pi in 0usize..5) {
        let p = EXPONENTS[pi];
        let inst = random_instance(seed, n, l, m);
        let pb = inst.problem(p);
        let mut r = rng(seed ^ 11);
        let z = random_scores(&mut r, n, m);
        let st = init_state(&pb, z.clone()).unwrap();
        let g = gradient(&pb, &z).unwrap();
        let tol = if p == 2.0 { 1e-10 } else { 1e-8 };
        let base = evaluate(&pb, &z).unwrap();
        for i in 0..n {
            for j in 0..m {
                let cg = coordinate_gradient(&pb, &st, i, j).unwrap();
                prop_assert!((cg - g[[i, j]]).abs() <= tol * g[[i, j]].abs().max(1.0));
                let s = r.gen_range(-1.0..1.0);
                let d = delta_objective(&pb, &st, i, j, s).unwrap();
                let mut zs = z.clone();
                zs[[i, j]] += s;
                let want = evaluate(&pb, &zs).unwrap() - base;
                prop_assert!((d - want).abs() <= 1e-9 * want.abs().max(base), "{d} vs {want}");
            }
        }
    }

    #[test]
    fn incremental_state_stays_consistent((seed, n, l, m) in instance_params(), pi in 0usize..5) {
        let p = EXPONENTS[pi];
        let inst = random_instance(seed, n, l, m);
        let pb = inst.problem(p);
        let mut r = rng(seed ^ 13);
        let mut st = init_state(&pb, Array2::zeros((n, m))).unwrap();
        st.enable_heaps();
        for _ in 0..10 * n {
            let i = r.gen_range(0..n);
            let j = r.gen_range(0..m);
            let alpha = r.gen_range(0.0..0.3);
            st.apply_coordinate_update(&pb, i, j, alpha).unwrap();
        }
        let z = st.scores().clone();
        let fresh = init_state(&pb, z.clone()).unwrap();
        for l in 0..pb.layers().len() {
            prop_assert!(max_abs_diff(st.scaled_differences(l), fresh.scaled_differences(l)) <= 1e-9);
        }
        let g = gradient(&pb, &z).unwrap();
        let gtol = if p == 2.0 { 1e-10 } else { 1e-8 };
        prop_assert!(max_abs_diff(st.gradient(), &g) <= gtol * max_abs(&g).max(1.0));
        let theta = evaluate(&pb, &z).unwrap();
        prop_assert!(rel_err(st.objective(), theta) <= 1e-8, "{} vs {theta}", st.objective());
        for j in 0..m {
            let (top, key) = st.heap_top(j).unwrap();
            let gmax = g.column(j).iter().fold(0.0f64, |a, x| a.max(x.abs()));
            prop_assert!((key - gmax).abs() <= gtol * gmax.max(1.0));
            prop_assert!(g[[top, j]].abs() >= gmax - gtol * gmax.max(1.0));
        }
        let acc_fresh = fresh.accuracy();
        prop_assert!(acc_fresh == st.accuracy() || (acc_fresh.is_nan() && st.accuracy().is_nan()));
    }

    #[test]
    fn traces_descend_and_count_flops((seed, n, l, m) in instance_params(), pi in 0usize..5, mi in 0usize..4) {
        let p = EXPONENTS[pi];
        let method = Method::ALL[mi];
        let inst = random_instance(seed, n, l, m);
        let pb = inst.problem(p);
        let stride = if method == Method::Gd { n as u64 } else { 1 };
        let t = solve(&pb, method, &SolverOptions::with_budget(4 * n as u64).seed(seed).stride(stride)).unwrap();
        let step = if method == Method::Gd { n as u64 } else { 1 };
        prop_assert_eq!(t.checkpoints[0].flops, 0);
        for w in t.checkpoints.windows(2) {
            prop_assert_eq!(w[1].flops - w[0].flops, step);
            prop_assert!(w[1].objective <= w[0].objective + 1e-12 * w[0].objective.abs().max(1.0),
                "{method} p={p}: {} -> {}", w[0].objective, w[1].objective);
        }
        for c in &t.checkpoints {
            prop_assert_eq!(c.normalized_flops, c.flops as f64 / n as f64);
        }
        prop_assert_eq!(t.total_flops(), 4 * n as u64);
    }

    #[test]
    fn gate_hits_are_monotone_and_reference_is_a_lower_bound(seed in any::<u64>(), n in 5usize..=25) {
        let inst = random_instance(seed, n, 2, 3);
        let pb = inst.problem(2.0);
        let traces = run_experiment(&pb, &Method::ALL, 4 * n as u64, &[seed, seed ^ 1], Some(1)).unwrap();
        prop_assert_eq!(traces.len(), 8);
        let runs = InstanceRuns { label: "x".into(), runs: traces.iter().map(RunCurve::from).collect() };
        let (best, _) = instance_references(&runs);
        for r in &runs.runs {
            for c in &r.checkpoints {
                prop_assert!(best <= c.objective);
            }
            let mut last = 0.0;
            for g in [0.75, 0.5, 0.25, 0.1, 0.05] {
                match gate_hit(r, best, g, GateMetric::Objective) {
                    Some(f) => {
                        prop_assert!(f >= last);
                        last = f;
                    }
                    None => last = f64::INFINITY,
                }
            }
        }
        let rep = gate_stats(&[runs], &[0.5], GateMetric::Objective);
        for row in &rep.cells {
            for c in row {
                prop_assert!((0.0..=1.0).contains(&c.fail));
                prop_assert_eq!(c.mean.is_none(), c.fail == 1.0);
            }
        }
    }
}

#[test]
fn label_matrix_follows_definition() {
    for seed in 0..50 {
        let inst = random_instance(seed, 12, 1, 3);
        let pb = inst.problem(2.0);
        let y = pb.labels().label_matrix();
        assert_eq!(y, &oracle_labels(&inst));
        for j in 0..3 {
            let s: f64 = y.column(j).sum();
            let any = inst.observed.iter().any(|&u| inst.truth[u] == Some(j));
            assert!(if any { (s - 1.0).abs() < 1e-12 } else { s == 0.0 });
        }
        for &u in &inst.observed {
            assert_eq!(y.row(u).iter().filter(|&&v| v != 0.0).count(), 1);
        }
    }
}

#[test]
fn solvers_reach_the_linear_system_solution() {
    for seed in 0..6 {
        let inst = random_instance(100 + seed, 15, 2, 3);
        let pb = inst.problem(2.0);
        let want = oracle_fixed_point(&inst);
        for method in Method::ALL {
            let opts = SolverOptions::with_budget(2_000_000).seed(seed).grad_tol(1e-10);
            let t = solve(&pb, method, &opts).unwrap();
            assert!(!t.failed, "{method} did not converge");
            let err = max_abs_diff(&t.scores, &want) / max_abs(&want);
            assert!(err <= 1e-8, "{method}: {err}");
            assert!(t.scores.iter().all(|&v| v >= -1e-8), "{method}: negative entry");
        }
    }
}

#[test]
fn greedy_selection_matches_brute_force() {
    for seed in 0..3 {
        let inst = random_instance(seed, 20, 2, 3);
        for p in [2.0, 2.5] {
            let audit = audit_gcd(&inst.problem(p), 60);
            assert_eq!(audit.mismatches, 0, "seed {seed} p {p}: {audit:?}");
        }
    }
}
