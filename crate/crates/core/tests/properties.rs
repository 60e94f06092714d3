use proptest::prelude::*;

use subdiff::harness::{make_example, ExampleId, NoiseModel};
use subdiff::inversion::{discrepancy_stop, mollify, InverseProblem};
use subdiff::{
    cq_weights, ForwardModel, LateralObservation, ObservationKind, TraceField, TraceMass, TraceNorm,
};

fn field(nx: usize, nt: usize) -> impl Strategy<Value = TraceField> {
    prop::collection::vec(-10.0..10.0f64, nx * nt)
        .prop_map(move |v| TraceField::from_data(nx, nt, v).unwrap())
}

proptest! {
    #[test]
    fn cq_weights_recurrence_and_signs(alpha in 0.01..0.99f64, n in 1usize..400) {
        let w = cq_weights(alpha, n).unwrap().w;
        prop_assert_eq!(w[0], 1.0);
        let mut partial = 1.0;
        for j in 1..=n {
            prop_assert_eq!(w[j], (1.0 - (alpha + 1.0) / j as f64) * w[j - 1]);
            prop_assert!(w[j] < 0.0);
            let next = partial + w[j];
            prop_assert!(next > 0.0 && next < partial);
            partial = next;
        }
    }

    #[test]
    fn mollifier_is_a_bounded_linear_smoother(g in field(9, 7), s in -3.0..3.0f64, width in 0.5..3.0f64) {
        let m = mollify(&g, width);
        prop_assert!(m.max_abs() <= g.max_abs() * (1.0 + 1e-12));
        for n in 1..=g.nt() {
            prop_assert_eq!(m.get(0, n), g.get(0, n));
            prop_assert_eq!(m.get(8, n), g.get(8, n));
        }
        let mut scaled = g.clone();
        scaled.scale(s);
        let mut expected = m.clone();
        expected.scale(s);
        prop_assert!(mollify(&scaled, width).sub(&expected).max_abs() <= 1e-12 * (1.0 + m.max_abs()));
    }

    #[test]
    fn trace_norm_is_an_inner_product(a in field(6, 5), b in field(6, 5), tau in 0.01..1.0f64) {
        let norm = TraceNorm::new(TraceMass::with_size(6, 0.2), tau);
        prop_assert!((norm.inner(&a, &b) - norm.inner(&b, &a)).abs() <= 1e-12 * norm.norm(&a) * norm.norm(&b));
        prop_assert!(norm.norm(&a) >= 0.0);
        let mut sum = a.clone();
        sum.axpy(1.0, &b);
        prop_assert!(norm.norm(&sum) <= (norm.norm(&a) + norm.norm(&b)) * (1.0 + 1e-12));

        // the Riesz map turns the Euclidean pairing into the norm's pairing
        let mut r = a.clone();
        norm.riesz(&mut r);
        let euclid: f64 = (1..=a.nt())
            .map(|n| a.level(n).iter().zip(b.level(n)).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        prop_assert!((norm.inner(&r, &b) - euclid).abs() <= 1e-9 * (1.0 + euclid.abs()));
    }

    #[test]
    fn noise_is_linear_in_epsilon(g in field(7, 4), seed in any::<u64>(), stream in any::<u64>(), eps in 1e-4..1e-1f64) {
        prop_assume!(g.max_abs() > 0.0);
        let unit = NoiseModel::new(1.0, seed, stream).apply(&g).sub(&g);
        let noise = NoiseModel::new(eps, seed, stream).apply(&g).sub(&g);
        let mut expected = unit.clone();
        expected.scale(eps);
        prop_assert!(noise.sub(&expected).max_abs() <= 1e-12 * (1.0 + unit.max_abs()));
        prop_assert_eq!(NoiseModel::new(0.0, seed, stream).apply(&g), g);
    }

    #[test]
    fn discrepancy_rule_is_monotone(r in 0.0..10.0f64, s in 0.0..10.0f64, delta in 0.0..5.0f64, c in 1.0001..3.0f64) {
        let (lo, hi) = if r <= s { (r, s) } else { (s, r) };
        if discrepancy_stop(hi, c, delta).unwrap() {
            prop_assert!(discrepancy_stop(lo, c, delta).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solver_is_linear_and_adjoint_consistent(
        alpha in 0.05..0.95f64,
        a in -2.0..2.0f64,
        f in field(5, 6),
        g in field(5, 6),
        r in field(5, 6),
    ) {
        let coeffs = make_example(ExampleId::Ex52i, 1.0).unwrap().coeffs;
        let model = ForwardModel::build(4, 6, 1.0, alpha, coeffs).unwrap();
        let zero = model.zero_trace();
        let problem = InverseProblem::new(&model, &LateralObservation::new(ObservationKind::Trace, zero.clone())).unwrap();
        let mut comb = g.clone();
        comb.axpy(a, &f);
        let mut expected = problem.forward_trace(&g).unwrap();
        expected.axpy(a, &problem.forward_trace(&f).unwrap());
        let got = problem.forward_trace(&comb).unwrap();
        prop_assert!(got.sub(&expected).max_abs() <= 1e-10 * (1.0 + expected.max_abs()));

        let norm = model.trace_norm();
        let lhs = norm.inner(&problem.forward_trace(&f).unwrap(), &r);
        let rhs = norm.inner(&f, &problem.gradient_from_residual(&r).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs().max(rhs.abs())));
    }
}
