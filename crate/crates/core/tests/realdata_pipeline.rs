use elicit_core::experiment::{run_experiment, DataSource, ExperimentConfig, InitialEstimator, RealDataSource, SemMode};
use elicit_core::realdata::{
    build_target_cases, centered_dataset, learn_all, learn_pseudo_ground_truth, parse_expression, parse_responses,
    planted_fixture, read_cache, responsive_cell_lines, write_cache, write_expression, write_responses, FixtureSpec,
    ResponseRecord, ResponseTable,
};
use elicit_core::regression::lambda_max;
use elicit_core::synthgen::SyntheticConfig;

fn exact_fixture() -> FixtureSpec {
    FixtureSpec {
        cell_lines: 100,
        genes: 50,
        drugs: 1,
        active_genes: 3,
        noise_sd: 0.0,
        seed: 41,
    }
}

#[test]
fn planted_three_gene_response_is_recovered() {
    let (expr, resp, planted) = planted_fixture(&exact_fixture()).unwrap();
    let entry = learn_pseudo_ground_truth(&expr, &resp, "DRUG01", "CL0001", 7).unwrap();
    let found = entry.weights.support();
    let truth = planted[0].support();
    assert_eq!(truth.len(), 3);
    for g in truth {
        assert!(found.contains(&g), "gene {g} missed; support {found:?}");
    }
}

#[test]
fn held_out_response_never_reaches_its_own_fit() {
    let (expr, resp, _) = planted_fixture(&FixtureSpec { noise_sd: 0.3, ..exact_fixture() }).unwrap();
    let before = learn_pseudo_ground_truth(&expr, &resp, "DRUG01", "CL0042", 3).unwrap();
    let perturbed: Vec<ResponseRecord> = resp
        .records()
        .iter()
        .map(|r| ResponseRecord {
            log_ic50: if r.cell_line == "CL0042" { r.log_ic50 + 100.0 } else { r.log_ic50 },
            ..r.clone()
        })
        .collect();
    let resp2 = ResponseTable::new(perturbed).unwrap();
    let after = learn_pseudo_ground_truth(&expr, &resp2, "DRUG01", "CL0042", 3).unwrap();
    assert_eq!(before, after);

    // a training cell line does matter
    let perturbed: Vec<ResponseRecord> = resp
        .records()
        .iter()
        .map(|r| ResponseRecord {
            log_ic50: if r.cell_line == "CL0043" { r.log_ic50 + 100.0 } else { r.log_ic50 },
            ..r.clone()
        })
        .collect();
    let resp3 = ResponseTable::new(perturbed).unwrap();
    assert_ne!(before, learn_pseudo_ground_truth(&expr, &resp3, "DRUG01", "CL0042", 3).unwrap());
}

#[test]
fn selected_penalty_stays_on_the_grid() {
    let (expr, resp, _) = planted_fixture(&FixtureSpec { noise_sd: 0.5, ..exact_fixture() }).unwrap();
    let training = responsive_cell_lines(&expr, &resp, "DRUG01", Some("CL0001"));
    let (data, _) = centered_dataset(&expr, &resp, "DRUG01", &training).unwrap();
    let top = lambda_max(&data, 1.0, true);
    for s in [1, 2] {
        let e = learn_pseudo_ground_truth(&expr, &resp, "DRUG01", "CL0001", s).unwrap();
        assert!(e.lambda_min <= top * (1.0 + 1e-12) && e.lambda_min >= top * 1e-3 * (1.0 - 1e-12));
    }
}

#[test]
fn too_few_cell_lines_is_an_error() {
    let (expr, resp, _) = planted_fixture(&FixtureSpec { cell_lines: 12, ..exact_fixture() }).unwrap();
    assert!(learn_pseudo_ground_truth(&expr, &resp, "DRUG01", "CL0001", 0).is_err());
    assert!(learn_pseudo_ground_truth(&expr, &resp, "NOPE", "CL0001", 0).is_err());
}

#[test]
fn target_cases_use_expression_rows_verbatim() {
    let spec = FixtureSpec {
        cell_lines: 30,
        genes: 12,
        drugs: 10,
        ..FixtureSpec::default()
    };
    let (expr, resp, _) = planted_fixture(&spec).unwrap();
    let drugs = resp.drugs();
    let cells: Vec<String> = expr.cell_line_ids()[..10].to_vec();
    let pgt = learn_all(&expr, &resp, &drugs, &cells, false, 9).unwrap();
    let cases = build_target_cases(&pgt, &expr, &drugs, &cells).unwrap();
    assert_eq!(cases.len(), 100);
    for (k, case) in cases.iter().enumerate() {
        let (d, c) = (k / 10, k % 10);
        assert_eq!(case.x_star, expr.row(&cells[c]).unwrap());
        assert_eq!(case.theta_star, pgt.get(&drugs[d], &cells[c]).unwrap().weights);
    }
    let single = build_target_cases(&pgt, &expr, &drugs[..1], &cells[..1]).unwrap();
    assert_eq!(single.len(), 1);
    assert!(build_target_cases(&pgt, &expr, &drugs[..1], &expr.cell_line_ids()[20..21]).is_err());
}

#[test]
fn tables_and_cache_round_trip_bit_exactly() {
    let (expr, resp, _) = planted_fixture(&FixtureSpec::default()).unwrap();
    let mut buf = Vec::new();
    write_expression(&expr, &mut buf).unwrap();
    assert_eq!(parse_expression(buf.as_slice(), "expr").unwrap(), expr);
    let mut buf = Vec::new();
    write_responses(&resp, &mut buf).unwrap();
    assert_eq!(parse_responses(buf.as_slice(), "resp").unwrap(), resp);

    let dir = tempfile::tempdir().unwrap();
    let cells = expr.cell_line_ids()[..3].to_vec();
    let pgt = learn_all(&expr, &resp, &resp.drugs(), &cells, false, 1).unwrap();
    write_cache(dir.path(), &pgt).unwrap();
    assert_eq!(read_cache(dir.path()).unwrap(), pgt);

    let per_drug = learn_all(&expr, &resp, &resp.drugs(), &[], true, 1).unwrap();
    assert!(per_drug.get("DRUG01", "CL0005").is_some());
}

#[test]
fn real_data_experiment_runs_on_the_fixture() {
    let (expr, resp, _) = planted_fixture(&FixtureSpec {
        cell_lines: 40,
        genes: 20,
        drugs: 3,
        ..FixtureSpec::default()
    })
    .unwrap();
    let drugs = resp.drugs();
    let cells = expr.cell_line_ids()[..4].to_vec();
    let pgt = learn_all(&expr, &resp, &drugs, &cells, false, 2).unwrap();
    let source = RealDataSource {
        expression: expr,
        responses: resp,
        ground_truth: pgt,
        drugs,
        cells,
        drugs_per_rep: 2,
        cells_per_rep: 2,
        sem_mode: SemMode::Repetitions,
    };
    let mut config = ExperimentConfig {
        source: DataSource::Real(Box::new(source)),
        n_train_grid: vec![5, 10],
        budget_max: 5,
        repetitions: 3,
        master_seed: 4,
        estimator: InitialEstimator::default(),
        ..ExperimentConfig::synthetic(SyntheticConfig::default())
    };
    let result = run_experiment(&config).unwrap();
    assert_eq!(result.scenario, "real");
    assert_eq!(result.curves.len(), 2 * 4);
    assert!(result.curves.iter().all(|c| c.points.len() == 6 && c.points[0].reps == 3));

    if let DataSource::Real(r) = &mut config.source {
        r.sem_mode = SemMode::Pairs;
    }
    let pairs = run_experiment(&config).unwrap();
    assert!(pairs.curves.iter().all(|c| c.points[0].reps == 3 * 2 * 2));
    // pooling changes the error bars, never the means
    for (a, b) in result.curves.iter().zip(&pairs.curves) {
        assert!((a.points[3].mean_loss - b.points[3].mean_loss).abs() < 1e-9 * a.points[3].mean_loss.max(1.0));
    }
}
