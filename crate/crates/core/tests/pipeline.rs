use spectra_core::outliers::Analysis;
use spectra_core::shrinkage::{oracle_outlier_value, shrink_spectrum, Loss, Method, ShrinkOptions, Shrinker};
use spectra_core::sim::{rigidity_check, run_with, verify_theorems, SimulationConfig};
use spectra_core::stieltjes::classical_locations;
use spectra_core::{ModelSpec, Thresholds};

const TWO_BULK: &str = r#"{
  "M": 200, "N": 400,
  "bulk": { "atoms": [ { "value": 18, "weight": 0.5 }, { "value": 1, "weight": 0.5 } ] },
  "spikes": [ { "sigma_g": 35 }, { "sigma_g": 4 } ]
}"#;

fn two_bulk() -> ModelSpec {
    serde_json::from_str(TWO_BULK).unwrap()
}

#[test]
fn config_to_report() {
    let model = two_bulk().build().unwrap();
    let a = Analysis::new(&model, Thresholds::default()).unwrap();
    assert_eq!(a.structure.p, 2);
    assert_eq!(a.classification.r_plus, vec![1, 1]);
    let json = serde_json::to_value(a.report()).unwrap();
    let spikes = json["spikes"].as_array().unwrap();
    assert_eq!(spikes.len(), 2);
    assert!(spikes.iter().all(|s| s["is_outlier"] == true));
    assert!(spikes.iter().all(|s| s["overlap"].as_f64().unwrap() > 0.0));
}

#[test]
fn unknown_config_fields_are_rejected() {
    let bad = TWO_BULK.replace("\"N\": 400", "\"N\": 400, \"n_typo\": 1");
    assert!(serde_json::from_str::<ModelSpec>(&bad).is_err());
}

#[test]
fn simulate_then_shrink() {
    let model = two_bulk().build().unwrap();
    let a = Analysis::new(&model, Thresholds::default()).unwrap();
    let mut cfg = SimulationConfig::new(model.clone());
    cfg.replicates = 6;
    cfg.seed = 11;
    let r = run_with(&cfg, &a).unwrap();
    assert_eq!(r.replicates.len(), 6);
    let report = verify_theorems(&r, &a, 3.0);
    let interlacing = report.checks.iter().find(|c| c.name == "interlacing").unwrap();
    assert!(interlacing.passed);

    let mu = &r.replicates[0].mu;
    let plan = shrink_spectrum(
        mu,
        &model,
        &a.f,
        &a.structure,
        Loss::Shrinker(Shrinker::Frobenius),
        &ShrinkOptions::default(),
    )
    .unwrap();
    assert_eq!(plan.outliers, 2);
    assert_eq!(plan.entries.len(), mu.len());
    for e in plan.entries.iter().filter(|e| e.method == Method::OutlierFormula) {
        let l = e.l.unwrap();
        assert!(e.beta > 0.0 && e.beta <= l + 1e-12);
    }

    let oracle = shrink_spectrum(mu, &model, &a.f, &a.structure, Loss::FrobeniusOracle, &ShrinkOptions::default())
        .unwrap();
    // the 35 spike sits too close to its edge for l = f^{-1}(mu) to be stable at this N
    let second = oracle
        .entries
        .iter()
        .find(|e| e.method == Method::OutlierFormula && e.component == Some(2))
        .unwrap()
        .beta;
    let want = oracle_outlier_value(&a.f, &a.structure, 4.0).unwrap();
    assert!((second - want).abs() / want < 0.15, "{second} vs {want}");
    assert!(oracle.entries.iter().all(|e| e.beta.is_finite() && e.beta > 0.0));
}

#[test]
fn null_model_rigidity() {
    let spec: ModelSpec =
        serde_json::from_str(r#"{ "M": 150, "N": 300, "bulk": { "atoms": [ { "value": 1, "weight": 1 } ] } }"#)
            .unwrap();
    let model = spec.build().unwrap();
    let a = Analysis::new(&model, Thresholds::default()).unwrap();
    let gammas = classical_locations(&a.f, &a.structure, model.n()).unwrap();
    let mut cfg = SimulationConfig::new(model);
    cfg.replicates = 4;
    let r = run_with(&cfg, &a).unwrap();
    let rep = rigidity_check(&r, &gammas, &a.structure, 0.02, 5.0);
    assert!(rep.fraction_within >= 0.95, "{rep:?}");
}
