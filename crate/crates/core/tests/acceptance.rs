//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use weatlab::sim::{
    compare_decisions, generate, grad_bias, grad_gamma, grad_weights, loss, predict_pair,
    prediction_grad_gamma, sweep, train,
};
use weatlab::synthetic::PlantedTable;
use weatlab::weat::{
    associations, effect_size, for_each_combination, permutation_test,
    permutation_test_associations, weat_statistic, Associations, PartitionNull,
};
use weatlab::{
    audit, render, AuditOptions, EmbeddingTable, Lexicon, LogisticParams, LookupPolicy,
    Permutations, ReportFormat, Sample, SimConfig, TrainConfig, WeatQuery, WordSet,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:.2?}, limit {limit:?}")
    })
}

fn gradient_oracle() -> Check {
    const H: f64 = 1e-6;
    const TOL: f64 = 1e-6;
    // Components whose true value is near zero are compared on an absolute
    // scale of 1e-3 instead of relative to themselves.
    const FLOOR: f64 = 1e-3;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(FLOOR);
    for _ in 0..1000 {
        let d = 4;
        let params = LogisticParams {
            weights: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            gamma: rng.random_range(-2.0..2.0),
            bias: rng.random_range(-2.0..2.0),
        };
        let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let z = if rng.random_bool(0.5) { 1 } else { -1 };
        let y = u8::from(rng.random_bool(0.5));
        let s = Sample::new(x, z, y);

        let central = |f: &dyn Fn(&mut LogisticParams, f64), g: &dyn Fn(&LogisticParams) -> f64| {
            let mut plus = params.clone();
            f(&mut plus, H);
            let mut minus = params.clone();
            f(&mut minus, -H);
            (g(&plus) - g(&minus)) / (2.0 * H)
        };
        let l = |p: &LogisticParams| loss(p, &s);
        let yhat = |p: &LogisticParams| p.predict(&s.x, s.z);

        let mut pairs = vec![
            (grad_gamma(&params, &s), central(&|p, h| p.gamma += h, &l)),
            (grad_bias(&params, &s), central(&|p, h| p.bias += h, &l)),
            (
                prediction_grad_gamma(&params, &s),
                central(&|p, h| p.gamma += h, &yhat),
            ),
        ];
        for (i, g) in grad_weights(&params, &s).into_iter().enumerate() {
            pairs.push((g, central(&|p, h| p.weights[i] += h, &l)));
        }
        for (a, n) in pairs {
            worst = worst.max(rel(a, n));
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= TOL, || {
        format!("max relative error {worst:e} > {TOL:e}")
    })?;
    within(elapsed, Duration::from_secs(5))?;
    Ok(format!(
        "1000 points, max relative error {worst:.2e}, {elapsed:.2?}"
    ))
}

fn gamma_sign_law() -> Check {
    let start = Instant::now();
    let seeds: Vec<u64> = (0..20).collect();
    let planted =
        sweep(&SimConfig::default(), &seeds, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let reversed = SimConfig {
        p_pos_given_male: 0.4,
        p_pos_given_female: 0.8,
        ..SimConfig::default()
    };
    let flipped = sweep(&reversed, &seeds, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let pos = planted.iter().filter(|r| r.gamma > 0.0).count();
    let neg = flipped.iter().filter(|r| r.gamma < 0.0).count();
    ensure(pos == 20 && neg == 20, || {
        format!("planted {pos}/20 positive, reversed {neg}/20 negative")
    })?;
    within(elapsed, Duration::from_secs(120))?;
    Ok(format!(
        "20/20 positive, 20/20 negative after reversal, {elapsed:.2?}"
    ))
}

fn trained_default() -> Result<(Vec<Sample>, LogisticParams), String> {
    let data = generate(&SimConfig::default()).map_err(|e| e.to_string())?;
    let params = train(&data, &TrainConfig::default())
        .map_err(|e| e.to_string())?
        .params;
    Ok((data, params))
}

fn gamma_value_oracle() -> Check {
    // σ(b + γ) = 0.8 and σ(b − γ) = 0.4, solved by hand.
    let up = (0.8f64 / 0.2).ln();
    let down = (0.4f64 / 0.6).ln();
    let (gamma_star, bias_star) = ((up - down) / 2.0, (up + down) / 2.0);
    let (_, p) = trained_default()?;
    ensure(
        (p.gamma - gamma_star).abs() <= 0.05 && (p.bias - bias_star).abs() <= 0.05,
        || {
            format!(
                "learned ({:.4}, {:.4}) vs ({gamma_star:.4}, {bias_star:.4})",
                p.gamma, p.bias
            )
        },
    )?;
    Ok(format!(
        "learned (γ, b) = ({:.4}, {:.4}), target ({gamma_star:.4}, {bias_star:.4})",
        p.gamma, p.bias
    ))
}

fn prediction_ordering() -> Check {
    let (_, p) = trained_default()?;
    ensure(p.gamma > 0.0, || format!("γ = {} is not positive", p.gamma))?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut held = 0;
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..p.weights.len())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let (male, female) = predict_pair(&p, &x);
        held += usize::from(male > female);
    }
    ensure(held == 10_000, || format!("ordering held for {held}/10000"))?;
    Ok("ŷ(z=+1) > ŷ(z=−1) for 10000/10000 draws".into())
}

fn employer_agreement() -> Check {
    let (history, params) = trained_default()?;
    let candidates = generate(&SimConfig {
        n_samples: 10_000,
        seed: 777,
        ..SimConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let cmp = compare_decisions(&history, &params, &candidates, 0.6, 1.0);
    ensure(cmp.agreement_rate >= 0.95, || {
        format!("agreement {:.4}", cmp.agreement_rate)
    })?;
    Ok(format!(
        "agreement {:.4} on {} held-out candidates at threshold 0.6",
        cmp.agreement_rate, cmp.candidates
    ))
}

fn permutation_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let assoc = Associations {
            x: (0..4).map(|_| rng.random_range(-0.5..0.5)).collect(),
            y: (0..4).map(|_| rng.random_range(-0.5..0.5)).collect(),
        };
        let exact = permutation_test_associations(&assoc, Permutations::Exact)
            .map_err(|e| e.to_string())?;
        let mc = permutation_test_associations(
            &assoc,
            Permutations::MonteCarlo {
                count: 100_000,
                seed: i,
            },
        )
        .map_err(|e| e.to_string())?;
        worst = worst.max((exact.p_value - mc.p_value).abs());

        // Enumeration order: shuffled partition list and relabelled pools.
        let null = PartitionNull::new(assoc.x.iter().chain(&assoc.y).copied().collect());
        let mut masks = Vec::new();
        for_each_combination(8, 4, |c| {
            let mut m = vec![false; 8];
            c.iter().for_each(|&j| m[j] = true);
            masks.push(m);
        });
        masks.shuffle(&mut rng);
        let hits = masks.iter().filter(|m| null.reaches_observed(m)).count() as u64;
        let (mut x, mut y) = (assoc.x.clone(), assoc.y.clone());
        x.shuffle(&mut rng);
        y.shuffle(&mut rng);
        let relabelled = permutation_test_associations(&Associations { x, y }, Permutations::Exact)
            .map_err(|e| e.to_string())?;
        ensure(
            hits == exact.at_least_observed && relabelled.p_value == exact.p_value,
            || format!("instance {i}: exact p depends on enumeration order"),
        )?;
    }
    ensure(worst <= 0.02, || format!("max |MC − exact| = {worst:.4}"))?;
    Ok(format!(
        "50 instances, max |MC − exact| = {worst:.4}, order-invariant"
    ))
}

struct Instance {
    table: EmbeddingTable,
    sets: [WordSet; 4],
}

impl Instance {
    fn random(rng: &mut ChaCha8Rng, n: usize, m: usize, dim: usize) -> Self {
        let mut rows = Vec::new();
        let mut make = |prefix: &str, k: usize| {
            let words: Vec<String> = (0..k).map(|i| format!("{prefix}{i}")).collect();
            for w in &words {
                rows.push((
                    w.clone(),
                    (0..dim)
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect::<Vec<f64>>(),
                ));
            }
            WordSet::new(prefix, words).unwrap()
        };
        let sets = [make("x", n), make("y", n), make("a", m), make("b", m)];
        Self {
            table: EmbeddingTable::from_rows("random", dim, rows).unwrap(),
            sets,
        }
    }

    fn query(&self) -> WeatQuery<'_> {
        let [x, y, a, b] = &self.sets;
        WeatQuery::new(x, y, a, b, &self.table)
            .with_policy(LookupPolicy::Strict)
            .with_permutations(Permutations::Auto {
                count: 5_000,
                seed: 1,
            })
    }
}

fn naive_s(table: &EmbeddingTable, w: &str, a: &WordSet, b: &WordSet) -> f64 {
    let cos = |u: &[f64], v: &[f64]| {
        let dot: f64 = u.iter().zip(v).map(|(p, q)| p * q).sum();
        dot / (u.iter().map(|p| p * p).sum::<f64>().sqrt()
            * v.iter().map(|q| q * q).sum::<f64>().sqrt())
    };
    let v = table.get(w).unwrap();
    let mean = |s: &WordSet| {
        s.words()
            .iter()
            .map(|t| cos(v, table.get(t).unwrap()))
            .sum::<f64>()
            / s.len() as f64
    };
    mean(a) - mean(b)
}

fn weat_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut anti, mut scale, mut cache) = (0.0f64, 0.0f64, 0.0f64);
    let err = |e: weatlab::WeatError| e.to_string();
    for _ in 0..200 {
        let n = rng.random_range(2..=6);
        let m = rng.random_range(1..=4);
        let dim = rng.random_range(2..=10);
        let inst = Instance::random(&mut rng, n, m, dim);
        let q = inst.query();
        let s = weat_statistic(&q).map_err(err)?;
        let d = effect_size(&q).map_err(err)?;
        for swapped in [
            WeatQuery {
                x: q.y,
                y: q.x,
                ..q
            },
            WeatQuery {
                a: q.b,
                b: q.a,
                ..q
            },
        ] {
            anti = anti.max((s + weat_statistic(&swapped).map_err(err)?).abs());
            anti = anti.max((d + effect_size(&swapped).map_err(err)?).abs());
        }

        let factor = 10f64.powf(rng.random_range(-6.0..6.0));
        let scaled = inst.table.scaled(factor);
        let qs = WeatQuery {
            table: &scaled,
            ..q
        };
        let p = permutation_test(&q).map_err(err)?.p_value;
        scale = scale
            .max((s - weat_statistic(&qs).map_err(err)?).abs())
            .max((d - effect_size(&qs).map_err(err)?).abs())
            .max((p - permutation_test(&qs).map_err(err)?.p_value).abs());

        let assoc = associations(&q).map_err(err)?;
        let [x, y, a, b] = &inst.sets;
        let naive: Vec<f64> = x
            .words()
            .iter()
            .chain(y.words())
            .map(|w| naive_s(&inst.table, w, a, b))
            .collect();
        for (c, n) in assoc.x.iter().chain(&assoc.y).zip(&naive) {
            cache = cache.max((c - n).abs());
        }
        let naive_stat = naive[..n].iter().sum::<f64>() - naive[n..].iter().sum::<f64>();
        cache = cache.max((s - naive_stat).abs());
    }
    ensure(anti <= 1e-12, || format!("antisymmetry error {anti:e}"))?;
    ensure(scale <= 1e-9, || format!("scale error {scale:e}"))?;
    ensure(cache <= 1e-12, || {
        format!("cached vs naive error {cache:e}")
    })?;
    Ok(format!(
        "200 instances: antisymmetry {anti:.1e}, scale {scale:.1e}, cached vs naive {cache:.1e}"
    ))
}

fn planted_audit() -> Check {
    let mut lines = Vec::new();
    for lexicon in [Lexicon::builtin_en(), Lexicon::builtin_zh()] {
        let table = PlantedTable::default().build(&lexicon, "planted");
        let start = Instant::now();
        let report = audit(&[table], &lexicon, "builtin", &AuditOptions::default())
            .map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        ensure(report.runs.len() == 14, || {
            format!(
                "{}: {} runs, skipped {:?}",
                lexicon.language,
                report.runs.len(),
                report.skipped
            )
        })?;
        for r in &report.runs {
            ensure(
                r.result.effect_size > 1.5 && r.result.p_value < 0.01,
                || {
                    format!(
                        "{} {}: d = {}, p = {}",
                        lexicon.language, r.category, r.result.effect_size, r.result.p_value
                    )
                },
            )?;
        }
        within(elapsed, Duration::from_secs(30))?;
        let min_d = report
            .runs
            .iter()
            .map(|r| r.result.effect_size)
            .fold(f64::INFINITY, f64::min);
        let max_p = report
            .runs
            .iter()
            .map(|r| r.result.p_value)
            .fold(0.0, f64::max);
        lines.push(format!(
            "{}: 14/14, min d {min_d:.3}, max p {max_p:.1e}, {elapsed:.2?}",
            lexicon.language
        ));
    }
    Ok(lines.join("; "))
}

fn worker_determinism() -> Check {
    let lexicon = Lexicon::builtin_en();
    let tables = [
        PlantedTable::default().build(&lexicon, "first"),
        PlantedTable {
            seed: 4,
            noise: 0.5,
            ..Default::default()
        }
        .build(&lexicon, "second"),
    ];
    let run = |workers| {
        let options = AuditOptions {
            workers: Some(workers),
            seed: 17,
            ..AuditOptions::default()
        };
        let report = audit(&tables, &lexicon, "en.json", &options).map_err(|e| e.to_string())?;
        render(&report, ReportFormat::Json).map_err(|e| e.to_string())
    };
    let one = run(1)?;
    for n in [2, 4, 8] {
        ensure(run(n)? == one, || {
            format!("report with {n} workers differs from 1 worker")
        })?;
    }
    Ok(format!(
        "{} bytes identical for 1, 2, 4, 8 workers",
        one.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("gradient oracle", gradient_oracle),
        ("gamma sign law", gamma_sign_law),
        ("gamma value oracle", gamma_value_oracle),
        ("prediction ordering", prediction_ordering),
        ("employer agreement", employer_agreement),
        ("permutation oracle", permutation_oracle),
        ("weat algebra", weat_algebra),
        ("planted-bias audit", planted_audit),
        ("worker determinism", worker_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
