mod common;

use std::time::Duration;

use common::{tiny_case, tiny_expect};
use drocal::design::{kw_optimize, robust_objective, KwConfig, RobustObjective, SamplePolicy, Selection};
use drocal::eligibility::{
    build_indicator_tensor, construct_eligibility_set, simulate_summaries, summarize_all, EligibilityOptions,
    EligibleSet, TieRule,
};
use drocal::model::{sample_uniform, ExternalModel, Oscillator, SimulationModel};
use drocal::reliability::{failure_prob_range, rmin_rmax_table, severity};
use drocal::summary::{extract_summary, BandPair, TimeSeries};
use drocal::Error;

#[test]
fn reliability_and_objective_match_vertex_enumeration() {
    for s in 0..40 {
        let case = tiny_case(s);
        let want = tiny_expect(&case);
        let theta = [1.0];
        let close = |a: f64, b: f64| (a - b).abs() < 1e-6;

        let (req, comb) = failure_prob_range(&case.set, &case.model, &theta).unwrap();
        for (r, &(lo, hi)) in req.iter().zip(&want.requirement_ranges) {
            assert!(close(r.lo, lo) && close(r.hi, hi), "seed {s}");
        }
        assert!(close(comb.lo, want.combined.0) && close(comb.hi, want.combined.1), "seed {s}");
        for (i, &sev) in want.severities.iter().enumerate() {
            let got = severity(&case.set, &case.model, &theta, i).unwrap();
            assert!(close(got, sev), "seed {s} s{i}: {got} vs {sev}");
        }
        let table = rmin_rmax_table(&case.set, &case.model, &theta).unwrap();
        for (row, &(lo, hi)) in table.iter().zip(&want.rows) {
            assert!(close(row.r_min, lo) && close(row.r_max, hi));
        }
        let got = robust_objective(&case.set, &case.model, &theta).unwrap();
        assert!(close(got, want.objective), "seed {s} objective: {got} vs {}", want.objective);
    }
}

#[test]
fn oscillator_behind_protocol_matches_in_process() {
    let ext = ExternalModel::new(
        env!("CARGO_BIN_EXE_oscillator-model"),
        Oscillator.dims(),
        Duration::from_secs(10),
        2,
    )
    .unwrap();
    let bands = BandPair::default();
    let a = sample_uniform(&Oscillator::a_box(), 12, 1);
    let e = sample_uniform(&Oscillator::e_box(), 12, 2);
    let theta = Oscillator::theta_baseline();
    for (a, e) in a.iter().zip(&e) {
        let mine = extract_summary(&Oscillator.simulate(a, e).unwrap(), &bands).unwrap();
        let theirs = extract_summary(&ext.simulate(a, e).unwrap(), &bands).unwrap();
        for (x, y) in mine.0.iter().zip(&theirs.0) {
            assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
        }
        let g0 = Oscillator.requirements(a, e, &theta).unwrap();
        let g1 = ext.requirements(a, e, &theta).unwrap();
        for (x, y) in g0.iter().zip(&g1) {
            assert!((x - y).abs() <= 1e-9);
        }
    }
    assert!(matches!(ext.simulate(&[2.0, 0.0], &e[0]), Err(Error::Model(_))));
}

#[test]
fn synthetic_pipeline_end_to_end() {
    let bands = BandPair::default();
    let e_true = vec![1.2, 0.8, 0.9, 1.1];
    let data: Vec<TimeSeries> = sample_uniform(&Oscillator::a_box(), 20, 10)
        .iter()
        .map(|a| Oscillator.simulate(a, &e_true).unwrap())
        .collect();
    let mut es = sample_uniform(&Oscillator::e_box(), 30, 11);
    es.push(e_true.clone());
    let a = sample_uniform(&Oscillator::a_box(), 120, 12);
    let opts = EligibilityOptions {
        keep_tensors: true,
        keep_witness: true,
        ..EligibilityOptions::default()
    };
    let run = construct_eligibility_set(&data, &Oscillator, &es, &a, &bands, &opts).unwrap();
    let truth = run.outcomes.last().unwrap().as_ref().unwrap();
    assert!(truth.eligible, "q* = {}", truth.q_star);
    for r in run.records() {
        assert_eq!(r.eligible, r.q_star <= run.threshold);
        assert_eq!(r.witness_weights.as_ref().unwrap().len(), a.len());
        let feasible = drocal::eligibility::check_feasible(&build_tensor(&data, &r.e, &a), run.threshold).unwrap();
        assert_eq!(feasible, r.eligible);
    }
    let set = EligibleSet::from_run(&run, &a).unwrap();
    let summaries = summarize_all(&data, &bands).unwrap();
    let objective = RobustObjective {
        model: &Oscillator,
        set: &set,
        data_summaries: &summaries,
        candidates: &es,
        a_box: Oscillator::a_box(),
        bands,
        q_threshold: run.threshold,
        tie_rule: TieRule::Exact,
        policy: SamplePolicy::FreshA,
    };
    let theta = Oscillator::theta_baseline();
    let f0 = objective.eval(&theta, 5).unwrap();
    assert!((0.0..=1.0).contains(&f0));
    assert_eq!(f0, objective.eval(&theta, 5).unwrap());
    let mut cfg = KwConfig::new(theta);
    cfg.n_max = 2;
    cfg.selection = Selection::BestSeen;
    let res = kw_optimize(|th, s| objective.eval(th, s), &cfg, 3).unwrap();
    assert!(res.f_new <= res.f_baseline);
    assert_eq!(res.trace.steps.len(), 2 * 9);

    let frozen = RobustObjective {
        policy: SamplePolicy::Frozen,
        ..objective
    };
    assert_eq!(frozen.eval(&cfg.theta_baseline, 1).unwrap(), frozen.eval(&cfg.theta_baseline, 2).unwrap());
    let recompute = RobustObjective {
        policy: SamplePolicy::Recompute,
        ..frozen
    };
    assert!((0.0..=1.0).contains(&recompute.eval(&cfg.theta_baseline, 1).unwrap()));
}

fn build_tensor(data: &[TimeSeries], e: &[f64], a: &[Vec<f64>]) -> drocal::eligibility::IndicatorTensor {
    let bands = BandPair::default();
    let sims = simulate_summaries(&Oscillator, e, a, &bands).unwrap();
    build_indicator_tensor(&summarize_all(data, &bands).unwrap(), &sims).unwrap()
}
