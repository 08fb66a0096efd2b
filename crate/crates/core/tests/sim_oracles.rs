use weatlab::sim::{
    closed_form_optimum, compare_decisions, conditional_rates, employer_decide, generate,
    mean_loss, predict_pair, sweep, sweep_csv, train, Batch,
};
use weatlab::{SimConfig, TrainConfig};

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn small(seed: u64, p_male: f64, p_female: f64) -> SimConfig {
    SimConfig {
        n_samples: 20_000,
        seed,
        p_pos_given_male: p_male,
        p_pos_given_female: p_female,
        ..SimConfig::default()
    }
}

#[test]
fn generator_hits_planted_rates() {
    let data = generate(&SimConfig::default()).unwrap();
    assert_eq!(data.len(), 100_000);
    let (male, female) = conditional_rates(&data);
    assert!((male - 0.8).abs() <= 0.01, "{male}");
    assert!((female - 0.4).abs() <= 0.01, "{female}");
    let males = data.iter().filter(|s| s.z == 1).count() as f64 / data.len() as f64;
    assert!((males - 0.5).abs() <= 0.01);
    let mean_x: f64 = data.iter().map(|s| s.x[0]).sum::<f64>() / data.len() as f64;
    assert!(mean_x.abs() < 0.02);
}

#[test]
fn generator_is_deterministic_per_seed() {
    let a = generate(&small(3, 0.8, 0.4)).unwrap();
    assert_eq!(a, generate(&small(3, 0.8, 0.4)).unwrap());
    assert_ne!(a, generate(&small(4, 0.8, 0.4)).unwrap());
}

#[test]
fn training_recovers_empirical_log_odds() {
    // With uninformative features the optimum puts all weight on the gender
    // and bias terms; their values follow from the empirical rates alone.
    let data = generate(&SimConfig::default()).unwrap();
    let (pm, pf) = conditional_rates(&data);
    let out = train(&data, &TrainConfig::default()).unwrap();
    let gamma = (logit(pm) - logit(pf)) / 2.0;
    let bias = (logit(pm) + logit(pf)) / 2.0;
    assert!(
        (out.params.gamma - gamma).abs() < 0.01,
        "{} vs {gamma}",
        out.params.gamma
    );
    assert!(
        (out.params.bias - bias).abs() < 0.01,
        "{} vs {bias}",
        out.params.bias
    );
    assert!(out.params.weight_norm() < 0.05);
}

#[test]
fn closed_form_matches_independent_log_odds() {
    let (g, b) = closed_form_optimum(0.8, 0.4);
    assert!((g - (4f64.ln() - (2.0f64 / 3.0).ln()) / 2.0).abs() < 1e-15);
    assert!((b - (4f64.ln() + (2.0f64 / 3.0).ln()) / 2.0).abs() < 1e-15);
    assert!((g - 0.8958797346140275).abs() < 1e-12);
    assert!((b - 0.49041462650586315).abs() < 1e-12);
}

#[test]
fn symmetric_rates_leave_gamma_near_zero() {
    let data = generate(&SimConfig {
        p_pos_given_male: 0.6,
        p_pos_given_female: 0.6,
        ..SimConfig::default()
    })
    .unwrap();
    let out = train(&data, &TrainConfig::default()).unwrap();
    assert!(out.params.gamma.abs() < 0.05, "{}", out.params.gamma);
}

#[test]
fn reversed_planting_flips_gamma() {
    let data = generate(&SimConfig {
        p_pos_given_male: 0.4,
        p_pos_given_female: 0.8,
        ..SimConfig::default()
    })
    .unwrap();
    let out = train(&data, &TrainConfig::default()).unwrap();
    assert!(
        (out.params.gamma + 0.8959).abs() < 0.05,
        "{}",
        out.params.gamma
    );
    assert!((out.params.bias - 0.4904).abs() < 0.05);
}

#[test]
fn full_batch_loss_never_increases() {
    let data = generate(&small(1, 0.8, 0.4)).unwrap();
    let out = train(&data, &TrainConfig::default()).unwrap();
    assert_eq!(out.loss_trace.len(), 200);
    for pair in out.loss_trace.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-9, "{pair:?}");
    }
    assert!(out.final_loss <= out.loss_trace[0]);
    assert!((out.final_loss - mean_loss(&out.params, &data)).abs() < 1e-12);
    assert!((out.loss_trace[0] - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn training_is_deterministic() {
    let data = generate(&small(2, 0.8, 0.4)).unwrap();
    let config = TrainConfig {
        batch: Batch::Size(256),
        epochs: 10,
        learning_rate: 0.2,
        seed: 5,
    };
    assert_eq!(
        train(&data, &config).unwrap(),
        train(&data, &config).unwrap()
    );
}

#[test]
fn mini_batch_reaches_same_sign() {
    let data = generate(&small(9, 0.8, 0.4)).unwrap();
    let out = train(
        &data,
        &TrainConfig {
            batch: Batch::Size(512),
            epochs: 20,
            learning_rate: 0.5,
            seed: 1,
        },
    )
    .unwrap();
    assert!(out.params.gamma > 0.5);
}

#[test]
fn employer_hires_men_and_rejects_women() {
    let history = generate(&SimConfig::default()).unwrap();
    let male = employer_decide(&history, 1, 0.6, 1.0);
    let female = employer_decide(&history, -1, 0.6, 1.0);
    assert!(male.hire && !female.hire);
    assert!((male.expected_productivity - 0.8).abs() < 0.01);
    assert!((female.expected_productivity - 0.4).abs() < 0.01);
}

#[test]
fn model_agrees_with_employer() {
    let history = generate(&SimConfig::default()).unwrap();
    let params = train(&history, &TrainConfig::default()).unwrap().params;
    let held_out = generate(&small(1234, 0.8, 0.4)).unwrap();
    let cmp = compare_decisions(&history, &params, &held_out, 0.6, 1.0);
    assert!(cmp.agreement_rate >= 0.95, "{cmp:?}");
    assert!(cmp.model_hire_rate_male > 0.95 && cmp.model_hire_rate_female < 0.05);
    for s in held_out.iter().take(1000) {
        let (m, f) = predict_pair(&params, &s.x);
        assert!(m > f);
    }
}

#[test]
fn sweep_rows_are_seed_ordered_and_reproducible() {
    let base = small(0, 0.8, 0.4);
    let seeds = [7, 3, 11];
    let rows = sweep(&base, &seeds, &TrainConfig::default()).unwrap();
    assert_eq!(rows.iter().map(|r| r.seed).collect::<Vec<_>>(), seeds);
    assert!(rows.iter().all(|r| r.gamma > 0.0));
    let csv = sweep_csv(&rows).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(
        csv,
        sweep_csv(&sweep(&base, &seeds, &TrainConfig::default()).unwrap()).unwrap()
    );
}
