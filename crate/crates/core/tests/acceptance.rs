//! Acceptance suite. Every test prints one `PASS`/`FAIL` line (written past
//! the test harness capture so it shows up in plain `cargo test` output) and
//! then asserts. Full-scale reproductions are `#[ignore]`d; run them with
//! `cargo test --release -p subdiff --test acceptance -- --ignored`.

// oracle constants keep every digit of the high-precision reference
#![allow(clippy::excessive_precision, clippy::type_complexity)]

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use subdiff::harness::{
    make_example, run_convergence_study, run_fixed_point, run_table, validate_example,
    ConvergenceConfig, ExampleId, ExperimentConfig, TableReport, TableSpec,
};
use subdiff::inversion::{error_metric, FixedPointOptions, InverseProblem, StopReason};
use subdiff::{
    build_mesh, caputo_apply, cq_weights, gamma_fn, CoefficientSet, ForwardModel,
    LateralObservation, ObservationKind, TimeGrid, TraceField, ValidationOptions,
};

fn verdict(criterion: u32, ok: bool, detail: &str) {
    let line = format!(
        "{} criterion {criterion}: {detail}\n",
        if ok { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn random_trace(rng: &mut ChaCha20Rng, like: &TraceField) -> TraceField {
    let mut f = like.clone();
    for v in f.data_mut() {
        *v = StandardNormal.sample(rng);
    }
    f
}

fn desk(example: ExampleId) -> ExperimentConfig {
    ExperimentConfig {
        example,
        m: 50,
        n: 500,
        ..Default::default()
    }
}

/// Example 5.1 over the full (α, ε) grid at desk scale, shared by several criteria.
fn desk_table() -> &'static TableReport {
    static TABLE: OnceLock<TableReport> = OnceLock::new();
    TABLE.get_or_init(|| run_table(&desk(ExampleId::Ex51), &TableSpec::default()).unwrap())
}

fn errors(table: &TableReport, ai: usize) -> Vec<f64> {
    (0..table.spec.epsilons.len())
        .map(|ei| {
            table
                .cell(ai, ei)
                .report()
                .and_then(|r| r.error)
                .unwrap_or(f64::NAN)
        })
        .collect()
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

#[test]
fn c1_gradient_matches_finite_differences() {
    let start = Instant::now();
    let coeffs = make_example(ExampleId::Ex52i, 1.0).unwrap().coeffs;
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut worst_fd: f64 = 0.0;
    let mut worst_dual: f64 = 0.0;
    for alpha in [0.25, 0.75] {
        let model = ForwardModel::build(16, 32, 1.0, alpha, coeffs.clone()).unwrap();
        let zero = model.zero_trace();
        let (f, h, g, r) = (
            random_trace(&mut rng, &zero),
            random_trace(&mut rng, &zero),
            random_trace(&mut rng, &zero),
            random_trace(&mut rng, &zero),
        );
        let problem =
            InverseProblem::new(&model, &LateralObservation::new(ObservationKind::Trace, g))
                .unwrap();
        let norm = model.trace_norm();

        let eps = 1e-5;
        let (mut fp, mut fm) = (f.clone(), f.clone());
        fp.axpy(eps, &h);
        fm.axpy(-eps, &h);
        let fd = (problem.eval_j(&fp).unwrap() - problem.eval_j(&fm).unwrap()) / (2.0 * eps);
        let adj = norm.inner(&problem.eval_gradient(&f).unwrap(), &h);
        worst_fd = worst_fd.max((fd - adj).abs() / adj.abs());

        let lhs = norm.inner(&problem.forward_trace(&f).unwrap(), &r);
        let rhs = norm.inner(&f, &problem.gradient_from_residual(&r).unwrap());
        worst_dual = worst_dual.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
    }
    let elapsed = start.elapsed();
    let ok = worst_fd <= 1e-6 && worst_dual <= 1e-10 && elapsed < Duration::from_secs(10);
    verdict(
        1,
        ok,
        &format!(
            "gradient vs central FD rel err {worst_fd:.2e} (<= 1e-6), duality rel err {worst_dual:.2e} (<= 1e-10), {:.1}s (< 10s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c2_manufactured_convergence_orders() {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for alpha in [0.25, 0.5, 0.75] {
        for (cfg, lo, hi) in [
            (ConvergenceConfig::space(alpha), 1.7, 2.3),
            (ConvergenceConfig::time(alpha), 0.8, 1.2),
        ] {
            let rep = run_convergence_study(&cfg).unwrap();
            let mut orders: Vec<f64> = rep.rows.iter().filter_map(|r| r.order).collect();
            orders.extend(rep.fitted_order);
            ok &= !orders.is_empty() && orders.iter().all(|p| (lo..=hi).contains(p));
            detail.push(format!(
                "{:?} a={alpha}: {}",
                cfg.refinement,
                orders
                    .iter()
                    .map(|p| format!("{p:.3}"))
                    .collect::<Vec<_>>()
                    .join("/")
            ));
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(120);
    verdict(
        2,
        ok,
        &format!(
            "space order in [1.7, 2.3], time order in [0.8, 1.2] ({}), {:.1}s (< 120s)",
            detail.join(", "),
            elapsed.as_secs_f64()
        ),
    );
}

/// `(-1)^j binom(α, j)` to 20 digits, and the partial sum up to `j = 10⁴`
/// which equals `(-1)^N binom(α-1, N)`.
const CQ_ORACLE: [(f64, [(usize, f64); 9], f64); 3] = [
    (
        0.25,
        [
            (1, -0.25),
            (2, -0.09375),
            (3, -0.0546875),
            (10, -0.011657763272523880005),
            (100, -0.00064615468611796499986),
            (1000, -0.000036284746115684964024),
            (5000, -4.8524076657825893718e-6),
            (9999, -2.0404092768629403628e-6),
            (10000, -2.0401542257033324952e-6),
        ],
        0.081604128873907596477,
    ),
    (
        0.5,
        [
            (1, -0.5),
            (2, -0.125),
            (3, -0.0625),
            (10, -0.009273529052734375),
            (100, -0.00028315818597616292587),
            (1000, -8.9239675567055131217e-6),
            (5000, -7.9794440837905328137e-7),
            (9999, -2.8214769303352000925e-7),
            (10000, -2.8210537087956498125e-7),
        ],
        0.00564182531222042006,
    ),
    (
        0.75,
        [
            (1, -0.75),
            (2, -0.09375),
            (3, -0.0390625),
            (10, -0.0039394386112689971924),
            (100, -0.000065847938615042610572),
            (1000, -1.1640330544231643078e-6),
            (5000, -6.9588854342303454298e-8),
            (9999, -2.0691153295423265829e-8),
            (10000, -2.0687532343596566758e-8),
        ],
        0.0002758130770489439602,
    ),
];

#[test]
fn c3_cq_weights_and_caputo_of_t() {
    let start = Instant::now();
    let n = 10_000;
    let mut dev: f64 = 0.0;
    for (alpha, spots, partial) in CQ_ORACLE {
        let w = cq_weights(alpha, n).unwrap();
        assert!(w.w.len() > n);
        dev = dev.max((w.w[0] - 1.0).abs());
        for (j, v) in spots {
            dev = dev.max((w.w[j] - v).abs());
        }
        dev = dev.max((w.w[..=n].iter().sum::<f64>() - partial).abs());
    }

    // D^α t = t^{1-α}/Γ(2-α) at t = 1 under halving τ
    let mut orders = Vec::new();
    for alpha in [0.25, 0.5, 0.75] {
        let exact = 1.0 / gamma_fn(2.0 - alpha).unwrap();
        let errs: Vec<f64> = [100, 200, 400, 800]
            .iter()
            .map(|&steps| {
                let grid = TimeGrid::new(steps, 1.0).unwrap();
                let w = cq_weights(alpha, steps).unwrap();
                let samples: Vec<Vec<f64>> = (0..=steps).map(|k| vec![grid.t(k)]).collect();
                (caputo_apply(&w, &grid, &samples).unwrap()[0] - exact).abs()
            })
            .collect();
        orders.extend(errs.windows(2).map(|e| (e[0] / e[1]).log2()));
    }
    let elapsed = start.elapsed();
    let ok = dev <= 1e-13
        && orders.iter().all(|p| (0.8..=1.2).contains(p))
        && elapsed < Duration::from_secs(5);
    verdict(
        3,
        ok,
        &format!(
            "CQ weight deviation {dev:.2e} (<= 1e-13), Caputo of t orders {} (O(tau)), {:.2}s (< 5s)",
            orders.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join("/"),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c4_desk_error_grows_with_noise() {
    let table = desk_table();
    let mut ok = true;
    let mut rows = Vec::new();
    for ai in 0..table.spec.alphas.len() {
        let e = errors(table, ai);
        ok &= strictly_increasing(&e);
        rows.push(format!(
            "a={}: {}",
            table.spec.alphas[ai],
            (0..e.len())
                .map(|ei| table.cell(ai, ei).summary())
                .collect::<Vec<_>>()
                .join(" ")
        ));
    }
    verdict(
        4,
        ok,
        &format!("desk M=50 N=500, e increasing in eps [{}]", rows.join("; ")),
    );
}

/// Example 5.1 reference errors and stopping indices, rows α, columns ε.
const TABLE1: [[(f64, usize); 5]; 3] = [
    [
        (8.61e-5, 50),
        (3.87e-4, 13),
        (7.36e-4, 10),
        (1.26e-3, 7),
        (2.33e-3, 4),
    ],
    [
        (4.27e-5, 50),
        (3.91e-4, 10),
        (6.84e-4, 8),
        (1.29e-3, 6),
        (2.19e-3, 3),
    ],
    [
        (8.61e-5, 50),
        (3.62e-4, 16),
        (5.93e-4, 11),
        (8.84e-4, 9),
        (1.71e-3, 4),
    ],
];

#[test]
#[ignore = "full scale, long running"]
fn c4_full_table_one() {
    let table = run_table(&ExperimentConfig::default(), &TableSpec::default()).unwrap();
    let mut ok = true;
    let mut misses = Vec::new();
    for (ai, row) in TABLE1.iter().enumerate() {
        for (ei, &(e_ref, k_ref)) in row.iter().enumerate() {
            let cell = table.cell(ai, ei);
            let Some(rep) = cell.report() else {
                ok = false;
                misses.push(format!("({}, {:e}) failed", cell.alpha, cell.epsilon));
                continue;
            };
            let e = rep.error.unwrap_or(f64::NAN);
            let good = if cell.epsilon == 0.0 {
                e <= 5.0 * e_ref
            } else {
                e <= 2.0 * e_ref && e >= 0.5 * e_ref && rep.stop_index.abs_diff(k_ref) <= 3
            };
            if !good {
                ok = false;
                misses.push(format!(
                    "({}, {:e}) {} vs {e_ref:.2e} ({k_ref})",
                    cell.alpha,
                    cell.epsilon,
                    rep.summary()
                ));
            }
        }
    }
    print!("{}", table.to_table_csv());
    verdict(
        4,
        ok,
        &format!(
            "full scale within factor 2 and +-3 iterations (eps = 0: 5x); misses: [{}]",
            misses.join("; ")
        ),
    );
}

/// Fraction of `‖f̂ - f†‖²` carried by levels with `|t - 0.7| ≤ 0.1`.
fn error_mass_near_jump(model: &ForwardModel, f_hat: &TraceField, f_dagger: &TraceField) -> f64 {
    let err = f_hat.sub(f_dagger);
    let mut near = err.clone();
    let grid = model.grid();
    for n in 1..=near.nt() {
        if (grid.t(n) - 0.7).abs() > 0.1 + 1e-12 {
            near.level_mut(n).fill(0.0);
        }
    }
    let norm = model.trace_norm();
    (norm.norm(&near) / norm.norm(&err)).powi(2)
}

fn table_two_trend(base: &ExperimentConfig, criterion_scale: &str) {
    let spec = TableSpec {
        epsilons: vec![1e-2],
        ..Default::default()
    };
    let table = run_table(base, &spec).unwrap();
    let example = make_example(ExampleId::Ex52ii, base.t_final).unwrap();
    let e: Vec<f64> = (0..spec.alphas.len())
        .map(|ai| errors(&table, ai)[0])
        .collect();
    let mut ok = strictly_increasing(&e);
    let mut fractions = Vec::new();
    for (ai, &alpha) in spec.alphas.iter().enumerate() {
        let model =
            ForwardModel::build(base.m, base.n, base.t_final, alpha, example.coeffs.clone())
                .unwrap();
        let rep = table.cell(ai, 0).report().unwrap();
        let frac = error_mass_near_jump(&model, &rep.f_hat, &example.f_dagger(&model));
        ok &= frac >= 0.5;
        fractions.push(format!("{frac:.2}"));
    }
    verdict(
        5,
        ok,
        &format!(
            "{criterion_scale}: e(k*) at eps=1e-2 increasing in alpha [{}], squared-error share near t=0.7 [{}] (>= 0.5)",
            (0..spec.alphas.len()).map(|ai| table.cell(ai, 0).summary()).collect::<Vec<_>>().join(", "),
            fractions.join(", ")
        ),
    );
}

#[test]
fn c5_discontinuous_source_trend_desk() {
    table_two_trend(&desk(ExampleId::Ex52ii), "desk M=50 N=500");
}

#[test]
#[ignore = "full scale, long running"]
fn c5_discontinuous_source_trend_full() {
    table_two_trend(
        &ExperimentConfig {
            example: ExampleId::Ex52ii,
            ..Default::default()
        },
        "full scale",
    );
}

#[test]
fn c6_discrepancy_principle() {
    let table = desk_table();
    let mut ok = true;
    let mut detail = Vec::new();
    for cell in table.cells.iter().filter(|c| c.epsilon > 0.0) {
        let rep = cell.report().unwrap();
        let delta = rep.delta.unwrap();
        let k = rep.stop_index;
        let at_stop = rep.history[k].residual_norm;
        let before = k.checked_sub(1).map(|j| rep.history[j].residual_norm);
        let (_, e_min) = rep.min_error().unwrap();
        let good = rep.stop_reason == StopReason::Discrepancy
            && at_stop <= 1.01 * delta
            && before.is_some_and(|r| r > 1.01 * delta)
            && rep.error.unwrap() <= 2.0 * e_min;
        ok &= good;
        if !good {
            detail.push(format!("({}, {:e}) k*={k}", cell.alpha, cell.epsilon));
        }
    }
    verdict(
        6,
        ok,
        &format!(
            "12 noisy cells: r(k*) <= 1.01 delta < r(k*-1), e(k*) <= 2 min e; violations: [{}]",
            detail.join("; ")
        ),
    );
}

#[test]
fn c7_fixed_point_on_exact_data() {
    let cfg = ExperimentConfig {
        alpha: 0.5,
        ..desk(ExampleId::Ex51)
    };
    let fp = run_fixed_point(&cfg, &FixedPointOptions::default()).unwrap();
    let ratios = fp.report.ratios();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);

    let table = desk_table();
    let ai = table.spec.alphas.iter().position(|&a| a == 0.5).unwrap();
    let ei = table.spec.epsilons.iter().position(|&e| e == 0.0).unwrap();
    let cg = table.cell(ai, ei).report().unwrap();
    let example = make_example(cfg.example, cfg.t_final).unwrap();
    let model =
        ForwardModel::build(cfg.m, cfg.n, cfg.t_final, cfg.alpha, example.coeffs.clone()).unwrap();
    let gap = error_metric(&model, &fp.report.f, &cg.f_hat).unwrap();
    let bound = fp.error + cg.error.unwrap();

    let ok = fp.report.converged
        && fp.relative_error <= 5e-2
        && !ratios.is_empty()
        && max_ratio < 1.0
        && gap <= bound;
    verdict(
        7,
        ok,
        &format!(
            "relative error {:.3e} (<= 5e-2) after {} iterations, increment ratios <= {max_ratio:.3} (< 1), |f_fp - f_cg| = {gap:.3e} <= {bound:.3e}",
            fp.relative_error, fp.report.iterations
        ),
    );
}

#[test]
fn c8_ispd_alpha_trend_desk() {
    // the best iterate of every α lies well inside 20 iterations at this scale
    let base = ExperimentConfig {
        k_max: 20,
        ..desk(ExampleId::Ex53ii)
    };
    let spec = TableSpec {
        epsilons: vec![1e-2],
        ..Default::default()
    };
    let table = run_table(&base, &spec).unwrap();
    let e: Vec<f64> = (0..spec.alphas.len())
        .map(|ai| errors(&table, ai)[0])
        .collect();
    verdict(
        8,
        strictly_increasing(&e),
        &format!(
            "desk ISPd case (ii), eps=1e-2, best iterate increasing in alpha [{}]",
            (0..spec.alphas.len())
                .map(|ai| table.cell(ai, 0).summary())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

/// Example 5.3 reference best-iterate errors at ε = 1e-2 and 5e-2.
const TABLE3: [(ExampleId, [[f64; 2]; 3]); 2] = [
    (
        ExampleId::Ex53i,
        [[4.84e-3, 6.28e-3], [4.86e-3, 6.11e-3], [4.70e-3, 5.84e-3]],
    ),
    (
        ExampleId::Ex53ii,
        [[4.20e-3, 5.47e-3], [4.37e-3, 5.95e-3], [4.97e-3, 7.07e-3]],
    ),
];

#[test]
#[ignore = "full scale, long running"]
fn c8_ispd_full_scale() {
    let spec = TableSpec {
        epsilons: vec![1e-2, 5e-2],
        ..Default::default()
    };
    let mut ok = true;
    let mut detail = Vec::new();
    for (id, reference) in TABLE3 {
        let table = run_table(
            &ExperimentConfig {
                example: id,
                ..Default::default()
            },
            &spec,
        )
        .unwrap();
        for (ai, row) in reference.iter().enumerate() {
            for (ei, &e_ref) in row.iter().enumerate() {
                let e = errors(&table, ai)[ei];
                ok &= e <= 2.0 * e_ref && e >= 0.5 * e_ref;
                detail.push(format!(
                    "{id} a={} eps={:e}: {} vs {e_ref:.2e}",
                    spec.alphas[ai],
                    spec.epsilons[ei],
                    table.cell(ai, ei).summary()
                ));
            }
        }
        if id == ExampleId::Ex53ii {
            let e: Vec<f64> = (0..spec.alphas.len())
                .map(|ai| errors(&table, ai)[0])
                .collect();
            ok &= strictly_increasing(&e);
        }
    }
    verdict(
        8,
        ok,
        &format!(
            "full scale ISPd within factor 2, case (ii) increasing in alpha [{}]",
            detail.join("; ")
        ),
    );
}

#[test]
fn c9_assumption_validators() {
    let mut ok = true;
    let mut detail = Vec::new();
    for id in ExampleId::ALL {
        let res = validate_example(&ExperimentConfig {
            example: id,
            ..Default::default()
        });
        ok &= res.is_ok();
        detail.push(format!(
            "{id}: {}",
            if res.is_ok() { "ok" } else { "rejected" }
        ));
    }

    let base = make_example(ExampleId::Ex52i, 1.0).unwrap().coeffs;
    let (a, q, r) = (base.clone(), base.clone(), base);
    let corrupted = CoefficientSet::new(
        move |x, t| {
            let mut m = a.a(x, t);
            m.a12 = 0.05 * x[1];
            m
        },
        move |x, t| q.q(x, t),
        move |x, t| r.r(x, t),
        0.2,
    );
    let mesh = build_mesh(100).unwrap();
    let rejected = corrupted
        .validate(&mesh, 1.0, &ValidationOptions::default())
        .is_err();
    ok &= rejected;
    detail.push(format!(
        "a12 != 0 on top: {}",
        if rejected { "rejected" } else { "accepted" }
    ));
    verdict(9, ok, &detail.join(", "));
}
