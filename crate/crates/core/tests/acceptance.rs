//! Acceptance gate: one PASS/FAIL line per criterion; exits non-zero when
//! any criterion fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabsan::adversarial::{
    backward, losses, AdvConfig, AdvVariant, AdversarialNets, Mlp, UpdateTarget,
};
use tabsan::classifiers::ClassifierKind;
use tabsan::dataset::{
    decode_rows, encode_rows, fit_normalization, load_csv, FeatureSchema, Labels, Record,
    RecordTable, Value,
};
use tabsan::llm::{MockTransform, RemapRule};
use tabsan::metrics::{accuracy, distortion, fairness, macro_f1, TradeoffScores};
use tabsan::prompting::{
    build_prompt, count_token, parse_response, ParseStatus, PromptTemplates, VariantTag,
};
use tabsan::runner::{
    verify_published_fixtures, EvaluationReport, Experiment, ExperimentConfig, MeanStd,
    MechanismSpec,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn data_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/adult.csv")
}

fn relationship_flip() -> MockTransform {
    MockTransform {
        remap: vec![RemapRule {
            column: "relationship".into(),
            mapping: [("Husband", "Wife"), ("Wife", "Husband")]
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .into_iter()
                .collect(),
        }],
    }
}

fn adult_config(mechanisms: Vec<MechanismSpec>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        mechanisms,
        data_path: data_path(),
        ..ExperimentConfig::default()
    };
    cfg.backend.mock_transform = Some(relationship_flip());
    // mock usage is charged like live usage; 5 seeds exceed one day's default
    cfg.budget.token_limit = 1 << 40;
    cfg
}

fn summary(r: &EvaluationReport, mech: &str) -> Option<(f64, f64)> {
    let s = r.mechanism(mech)?.summary.as_ref()?;
    Some((s.private.accuracy, s.utility.accuracy))
}

// ---------------------------------------------------------------- 1

fn fixtures() -> Outcome {
    let t = Instant::now();
    let checks = verify_published_fixtures();
    let elapsed = t.elapsed();
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} {} {}", c.mechanism, c.task.id(), c.quantity))
        .collect();
    outcome(
        failed.is_empty() && checks.len() == 16 && elapsed < Duration::from_secs(1),
        format!(
            "{}/{} values within ±0.01 in {:?}{}",
            checks.len() - failed.len(),
            checks.len(),
            elapsed,
            if failed.is_empty() {
                String::new()
            } else {
                format!("; failed {failed:?}")
            }
        ),
    )
}

// ---------------------------------------------------------------- 2, 3, 8

struct AdultRun {
    report: EvaluationReport,
    aux_rows: usize,
    test_rows: usize,
    elapsed: Duration,
}

fn adult_run() -> Result<AdultRun, String> {
    let cfg = adult_config(vec![
        MechanismSpec::Adversarial(AdvVariant::Alfr),
        MechanismSpec::Llm(VariantTag::P1),
    ]);
    let t = Instant::now();
    let exp = Experiment::new(cfg).map_err(|e| e.to_string())?;
    let (aux, test) = exp.split(0).map_err(|e| e.to_string())?;
    let report = exp.run().map_err(|e| e.to_string())?;
    Ok(AdultRun {
        report,
        aux_rows: aux.len(),
        test_rows: test.len(),
        elapsed: t.elapsed(),
    })
}

fn baseline(run: &Result<AdultRun, String>) -> Outcome {
    let run = match run {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let Some((gender, income)) = summary(&run.report, "none") else {
        return outcome(false, "no baseline summary");
    };
    outcome(
        run.aux_rows >= 20_000
            && run.test_rows == 1000
            && gender >= 0.81
            && income >= 0.84
            && run.elapsed < Duration::from_secs(600),
        format!(
            "gender {gender:.4} (>= 0.81), income {income:.4} (>= 0.84); {} aux / {} test rows, 5 seeds; whole shared run {:.0?}",
            run.aux_rows, run.test_rows, run.elapsed
        ),
    )
}

fn alfr(run: &Result<AdultRun, String>) -> Outcome {
    let run = match run {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let m = run.report.mechanism("alfr");
    let (Some((gender, income)), Some(t)) = (
        summary(&run.report, "alfr"),
        m.and_then(|m| m.tradeoff.as_ref()),
    ) else {
        return outcome(false, format!("alfr incomplete: {:?}", run.report.failures));
    };
    outcome(
        gender <= 0.72 && income >= 0.76 && t.m_p <= 0.2 && t.m_u >= 0.35 && run.elapsed < Duration::from_secs(1800),
        format!(
            "gender {gender:.4} (<= 0.72), income {income:.4} (>= 0.76), M_p {:.3} (<= 0.2), M_u {:.3} (>= 0.35), seeds {:?}",
            t.m_p,
            t.m_u,
            m.map(|m| &m.seeds).unwrap()
        ),
    )
}

// ---------------------------------------------------------------- 4

fn objective(
    nets: &AdversarialNets<f64>,
    x: &Array2<f64>,
    noise: Option<&Array2<f64>>,
    p: &[usize],
    u: &[usize],
    cfg: &AdvConfig,
) -> f64 {
    let (_, dec) = nets.generator.forward_trace(x.view(), noise).unwrap();
    let ph = nets.private_head.forward_trace(dec.output.view()).unwrap();
    let uh = nets.utility_head.forward_trace(dec.output.view()).unwrap();
    losses(&dec.output, x.view(), ph.logits(), uh.logits(), p, u, cfg).total
}

type Pick = fn(&mut AdversarialNets<f64>) -> &mut Mlp<f64>;

fn gradients() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut by_net: std::collections::BTreeMap<&str, f64> = Default::default();
    let mut checked = 0usize;
    for _ in 0..100 {
        let d = rng.random_range(2..6);
        let n = rng.random_range(2..7);
        let cfg = AdvConfig {
            alpha: rng.random_range(0.1..2.0),
            lambda_p: rng.random_range(0.1..2.0),
            lambda_u: rng.random_range(0.1..2.0),
            hidden_dim: rng.random_range(2..6),
            latent_dim: rng.random_range(1..4),
            ..AdvConfig::default()
        };
        let sigma = if rng.random_bool(0.5) { 0.3 } else { 0.0 };
        let mut nets = AdversarialNets::<f64>::init(d, &cfg, sigma, &mut rng);
        // zero biases put dead rows exactly on a ReLU kink; move off it
        for m in [
            &mut nets.generator.encoder,
            &mut nets.generator.decoder,
            &mut nets.private_head,
            &mut nets.utility_head,
        ] {
            for (k, slice) in m.param_slices_mut().into_iter().enumerate() {
                if k % 2 == 1 {
                    slice
                        .iter_mut()
                        .for_each(|b| *b = rng.random_range(-0.5..0.5));
                }
            }
        }
        let x = Array2::from_shape_simple_fn((n, d), || rng.random_range(-1.5..1.5));
        let noise = nets.generator.sample_noise(n, &mut rng);
        let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let u: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        for target in [
            UpdateTarget::PrivateDiscriminator,
            UpdateTarget::GeneratorAndUtility,
        ] {
            let g = backward(&nets, x.view(), noise.as_ref(), &p, &u, &cfg, target).unwrap();
            let parts: Vec<(&str, Pick, _)> = match target {
                UpdateTarget::PrivateDiscriminator => {
                    vec![(
                        "private_head",
                        (|n: &mut AdversarialNets<f64>| &mut n.private_head) as Pick,
                        g.private_head.unwrap(),
                    )]
                }
                UpdateTarget::GeneratorAndUtility => vec![
                    (
                        "encoder",
                        (|n: &mut AdversarialNets<f64>| &mut n.generator.encoder) as Pick,
                        g.encoder.unwrap(),
                    ),
                    (
                        "decoder",
                        (|n: &mut AdversarialNets<f64>| &mut n.generator.decoder) as Pick,
                        g.decoder.unwrap(),
                    ),
                    (
                        "utility_head",
                        (|n: &mut AdversarialNets<f64>| &mut n.utility_head) as Pick,
                        g.utility_head.unwrap(),
                    ),
                ],
            };
            for (name, pick, grads) in parts {
                for (s, gs) in grads.slices().iter().enumerate() {
                    for j in 0..gs.len() {
                        let mut plus = nets.clone();
                        pick(&mut plus).param_slices_mut()[s][j] += h;
                        let mut minus = nets.clone();
                        pick(&mut minus).param_slices_mut()[s][j] -= h;
                        let fd = (objective(&plus, &x, noise.as_ref(), &p, &u, &cfg)
                            - objective(&minus, &x, noise.as_ref(), &p, &u, &cfg))
                            / (2.0 * h);
                        // relative error, floored so that near-zero entries
                        // are judged on absolute difference
                        let rel = (fd - gs[j]).abs() / fd.abs().max(gs[j].abs()).max(1e-3);
                        worst = worst.max(rel);
                        let w = by_net.entry(name).or_default();
                        *w = w.max(rel);
                        checked += 1;
                    }
                }
            }
        }
    }
    let elapsed = t.elapsed();
    let per_net: Vec<String> = by_net.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    outcome(
        worst < 1e-4 && elapsed < Duration::from_secs(60),
        format!(
            "100 configurations, {checked} parameters, both update targets: \
             max relative error {worst:.2e} ({}) in {elapsed:.1?}",
            per_net.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 5

fn brute_f1(pred: &[usize], labels: &[usize]) -> f64 {
    let mut per = Vec::new();
    for class in 0..2 {
        let predicted: Vec<usize> = (0..pred.len()).filter(|&i| pred[i] == class).collect();
        let actual: Vec<usize> = (0..pred.len()).filter(|&i| labels[i] == class).collect();
        if predicted.is_empty() && actual.is_empty() {
            continue;
        }
        let hits = predicted.iter().filter(|i| actual.contains(i)).count() as f64;
        let precision = if predicted.is_empty() {
            0.0
        } else {
            hits / predicted.len() as f64
        };
        let recall = if actual.is_empty() {
            0.0
        } else {
            hits / actual.len() as f64
        };
        per.push(if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        });
    }
    per.iter().sum::<f64>() / per.len() as f64
}

fn rate_where(pred: &[usize], keep: impl Fn(usize) -> bool) -> Option<f64> {
    let idx: Vec<usize> = (0..pred.len()).filter(|&i| keep(i)).collect();
    (!idx.is_empty())
        .then(|| idx.iter().filter(|&&i| pred[i] == 1).count() as f64 / idx.len() as f64)
}

fn random_adult_record(schema: &FeatureSchema, rng: &mut ChaCha8Rng) -> Record {
    Record::new(
        schema
            .features()
            .map(|c| match c.categories() {
                Some(cats) => Value::Category(rng.random_range(0..cats.len())),
                None => {
                    let top = if rng.random_bool(0.5) {
                        100u32
                    } else {
                        100_000
                    };
                    Value::Number(rng.random_range(0..top) as f64)
                }
            })
            .collect(),
    )
}

fn random_labels(rng: &mut ChaCha8Rng) -> Labels {
    Labels {
        private: rng.random_range(0..2),
        utility: rng.random_range(0..2),
    }
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let schema = FeatureSchema::adult();
    let tol = 1e-12;
    let mut mismatches = Vec::new();
    let mut fairness_defined = 0;
    for case in 0..1000 {
        let n = rng.random_range(1..40);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let groups: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();

        let acc = (0..n).filter(|&i| pred[i] == labels[i]).count() as f64 / n as f64;
        if (accuracy(&pred, &labels).unwrap() - acc).abs() > tol {
            mismatches.push(format!("case {case}: accuracy"));
        }
        if (macro_f1(&pred, &labels).unwrap() - brute_f1(&pred, &labels)).abs() > tol {
            mismatches.push(format!("case {case}: f1"));
        }

        let r = |g: usize, y: Option<usize>| {
            rate_where(&pred, |i| {
                groups[i] == g && y.is_none_or(|y| labels[i] == y)
            })
        };
        let brute = match (
            r(0, Some(1)),
            r(1, Some(1)),
            r(0, Some(0)),
            r(1, Some(0)),
            r(0, None),
            r(1, None),
        ) {
            (Some(t0), Some(t1), Some(f0), Some(f1), Some(p0), Some(p1)) => {
                let opp = (t0 - t1).abs();
                Some([opp.max((f0 - f1).abs()), opp, (p0 - p1).abs()])
            }
            _ => None,
        };
        match (fairness(&pred, &labels, &groups, "g"), brute) {
            (Ok(f), Some(b)) => {
                fairness_defined += 1;
                let got = [f.equalized_odds, f.equal_opportunity, f.demographic_parity];
                if got.iter().zip(b).any(|(g, b)| (g - b).abs() > tol) {
                    mismatches.push(format!("case {case}: fairness {got:?} vs {b:?}"));
                }
            }
            (Err(_), None) => {}
            (got, want) => mismatches.push(format!(
                "case {case}: fairness definedness {:?} vs {want:?}",
                got.is_ok()
            )),
        }

        let [c_n, c_a, c_r]: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        let raw = (c_a - c_r) / (c_n - c_r);
        let clamped = if raw < 0.0 {
            0.0
        } else if raw > 1.0 {
            1.0
        } else {
            raw
        };
        let t = TradeoffScores::compute([c_n, c_a, c_r], [c_n, c_a, c_r]).unwrap();
        if t.m_p != clamped || t.m_u != clamped || t.m_p_raw != raw {
            mismatches.push(format!("case {case}: tradeoff"));
        }

        let rows = rng.random_range(1..15);
        let original = RecordTable::new(
            schema.clone(),
            (0..rows)
                .map(|_| random_adult_record(&schema, &mut rng))
                .collect(),
            (0..rows).map(|_| random_labels(&mut rng)).collect(),
        )
        .unwrap();
        let source: Vec<usize> = (0..rows).filter(|_| rng.random_bool(0.8)).collect();
        let san_rows: Vec<Record> = source
            .iter()
            .map(|&i| {
                let mut r = original.rows[i].clone();
                for k in 0..schema.n_features() {
                    if rng.random_bool(0.3) {
                        r.values[k] = random_adult_record(&schema, &mut rng).values[k];
                    }
                }
                r
            })
            .collect();
        let san_labels = source.iter().map(|&i| original.labels[i]).collect();
        let sanitized = RecordTable::new(schema.clone(), san_rows, san_labels).unwrap();
        let d = distortion(&original, &sanitized, &source, 10).unwrap();
        for c in &d.categorical {
            let k = schema.feature_position(&c.column).unwrap();
            let brute = (0..source.len())
                .filter(|&j| {
                    original.rows[source[j]].text(&schema, k) != sanitized.rows[j].text(&schema, k)
                })
                .count();
            if c.flips != brute || c.compared != source.len() {
                mismatches.push(format!("case {case}: flips in {}", c.column));
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        format!(
            "1000 instances (fairness defined in {fairness_defined}): accuracy, macro F1, EO/EOpp/DP, clamped ratios, flip counts{}",
            if mismatches.is_empty() { " all match".to_string() } else { format!("; {} mismatches, first {:?}", mismatches.len(), &mismatches[..mismatches.len().min(3)]) }
        ),
    )
}

// ---------------------------------------------------------------- 6

fn random_f64(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..5) {
        0 => rng.random_range(0.0..1.0),
        1 => rng.random_range(-1e300..1e300),
        2 => f64::from_bits(rng.random_range(1..(1u64 << 52))),
        3 => (rng.random_range(0..1000) as f64) / 1000.0,
        _ => -rng.random_range(0.0..1e-5),
    }
}

fn random_mean_std(rng: &mut ChaCha8Rng) -> MeanStd {
    MeanStd {
        mean: random_f64(rng),
        std: random_f64(rng).abs(),
        n: rng.random_range(1..10),
    }
}

fn round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let schema = FeatureSchema::adult();
    let templates = PromptTemplates::default();
    let mut failures = Vec::new();

    // dataset: 500 random tables through encode and decode
    for case in 0..500 {
        let n = rng.random_range(2..20);
        let rows: Vec<Record> = (0..n)
            .map(|_| random_adult_record(&schema, &mut rng))
            .collect();
        let table = RecordTable::new(
            schema.clone(),
            rows,
            (0..n).map(|_| random_labels(&mut rng)).collect(),
        )
        .unwrap();
        let fitted = fit_normalization(&table).unwrap();
        let m = encode_rows::<f64>(&fitted, &table.rows).unwrap();
        if decode_rows(&m, &fitted).unwrap() != table.rows {
            failures.push(format!("encode/decode case {case}"));
        }
    }

    // prompts: build, answer with the format-echo oracle, parse back
    let echo = MockTransform::echo();
    for case in 0..500 {
        let record = random_adult_record(&schema, &mut rng);
        let tag = VariantTag::ALL[case % VariantTag::ALL.len()];
        let labels = tag.is_supervised().then(|| random_labels(&mut rng));
        let bundle = build_prompt(case, &record, labels, &schema, tag, &templates).unwrap();
        let reply = echo.respond(&bundle.text).unwrap();
        let parsed = parse_response(
            &reply,
            &schema,
            &bundle.expected_columns,
            &templates.refusal_phrases,
        );
        if parsed.status != ParseStatus::Ok || parsed.record.as_ref() != Some(&record) {
            failures.push(format!("prompt case {case} ({})", tag.id()));
        }
    }

    // reports: a real small report with randomized numeric fields
    let base = {
        let table = load_csv(data_path(), &schema).unwrap();
        let idx: Vec<usize> = (0..900).collect();
        let mut cfg = adult_config(vec![MechanismSpec::Adversarial(AdvVariant::Alfr)]);
        cfg.seeds = vec![0, 1];
        cfg.test_size = 200;
        cfg.classifiers = vec![ClassifierKind::Lr];
        cfg.adversarial.epochs = 1;
        Experiment::with_table(cfg, table.select(&idx))
            .unwrap()
            .run()
            .unwrap()
    };
    for case in 0..500 {
        let mut r = base.clone();
        for c in &mut r.cells {
            c.accuracy = random_f64(&mut rng);
            c.f1 = random_f64(&mut rng);
            c.raw_accuracy = random_f64(&mut rng);
            c.seed = rng.random();
        }
        for m in &mut r.mechanisms {
            for s in &mut m.scores {
                s.accuracy = random_mean_std(&mut rng);
                s.f1 = random_mean_std(&mut rng);
            }
            for f in &mut m.fairness {
                f.equalized_odds = rng.random_bool(0.7).then(|| random_mean_std(&mut rng));
                f.undefined_seeds = (0..rng.random_range(0..3)).map(|_| rng.random()).collect();
            }
            if let Some(t) = &mut m.tradeoff {
                t.m_p_raw = random_f64(&mut rng);
                t.m_u = random_f64(&mut rng);
            }
            m.coverage = Some(random_mean_std(&mut rng));
        }
        if rng.random_bool(0.3) {
            r.failures.push(tabsan::runner::Failure {
                seed: rng.random(),
                mechanism: "llm:p2".into(),
                stage: "sanitize".into(),
                message: format!(
                    "quote \" backslash \\ unicode ±{} newline\n",
                    rng.random::<u32>()
                ),
            });
        }
        let json = r.to_json();
        match EvaluationReport::from_json(&json) {
            Ok(back) if back == r && back.to_json() == json => {}
            _ => failures.push(format!("report case {case}")),
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "500 encode/decode tables, 500 echo-parsed prompts, 500 reports{}",
            if failures.is_empty() {
                " all identical".to_string()
            } else {
                format!(
                    "; {} failed, first {:?}",
                    failures.len(),
                    &failures[..failures.len().min(3)]
                )
            }
        ),
    )
}

// ---------------------------------------------------------------- 7

fn determinism() -> Outcome {
    let build = || {
        let mut cfg = adult_config(vec![
            MechanismSpec::Adversarial(AdvVariant::Alfr),
            MechanismSpec::Adversarial(AdvVariant::UaePupet),
            MechanismSpec::Llm(VariantTag::P2),
            MechanismSpec::Llm(VariantTag::Unsupervised),
        ]);
        cfg.seeds = vec![0, 1];
        cfg.aux_size = Some(3000);
        cfg.adversarial.epochs = 5;
        cfg.classifiers.push(ClassifierKind::LlmZeroShot);
        cfg
    };
    let run = || {
        Experiment::new(build())
            .and_then(|e| e.run())
            .map(|r| r.to_json())
    };
    match (run(), run()) {
        (Ok(a), Ok(b)) => {
            let complete = EvaluationReport::from_json(&a)
                .map(|r| r.is_complete())
                .unwrap_or(false);
            outcome(
                a == b && complete,
                format!(
                    "two runs (5 mechanisms, 5 classifiers incl. zero-shot, 2 seeds, mock backend): {} bytes, identical: {}",
                    a.len(),
                    a == b
                ),
            )
        }
        (a, b) => outcome(false, format!("run failed: {:?} / {:?}", a.err(), b.err())),
    }
}

// ---------------------------------------------------------------- 8

fn llm_properties(run: &Result<AdultRun, String>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let schema = FeatureSchema::adult();
    let templates = PromptTemplates::default();
    let mut problems = Vec::new();
    let label_text = |col: &tabsan::dataset::Column, i: usize| col.categories().unwrap()[i].clone();
    for case in 0..500 {
        let record = random_adult_record(&schema, &mut rng);
        let labels = random_labels(&mut rng);
        for tag in VariantTag::ALL {
            let l = tag.is_supervised().then_some(labels);
            let text = build_prompt(case, &record, l, &schema, tag, &templates)
                .unwrap()
                .text;
            let p = count_token(&text, &label_text(schema.private_column(), labels.private));
            let u = count_token(&text, &label_text(schema.utility_column(), labels.utility));
            let want = usize::from(tag.is_supervised());
            if p != want || u != want {
                problems.push(format!(
                    "{} prompt case {case}: private x{p}, utility x{u}",
                    tag.id()
                ));
            }
        }
    }

    let record = random_adult_record(&schema, &mut rng);
    let cols: Vec<String> = schema.features().map(|c| c.name.clone()).collect();
    let good = MockTransform::echo()
        .respond(
            &build_prompt(
                0,
                &record,
                None,
                &schema,
                VariantTag::Unsupervised,
                &templates,
            )
            .unwrap()
            .text,
        )
        .unwrap();
    let truncated: String = good.lines().take(3).collect::<Vec<_>>().join("\n");
    let parse = |raw: &str| parse_response(raw, &schema, &cols, &templates.refusal_phrases);
    let cases = [
        ("well-formed", parse(&good).status, ParseStatus::Ok),
        (
            "well-formed in prose",
            parse(&format!("Sure, here it is:\n{good}\nThanks.")).status,
            ParseStatus::Ok,
        ),
        (
            "missing columns",
            parse(&truncated).status,
            ParseStatus::Malformed,
        ),
        ("empty", parse("").status, ParseStatus::Malformed),
        (
            "refusal",
            parse("I'm sorry, but I cannot help with that request.").status,
            ParseStatus::Refusal,
        ),
    ];
    for (name, got, want) in cases {
        if got != want {
            problems.push(format!("parser {name}: {got:?}, expected {want:?}"));
        }
    }

    let e2e = match run {
        Ok(r) => match (summary(&r.report, "none"), summary(&r.report, "llm:p1")) {
            (Some((g0, i0)), Some((g1, i1))) => {
                let ok = g0 - g1 >= 0.05 && (i1 - i0).abs() <= 0.02;
                if !ok {
                    problems.push("relationship flip did not move only the gender attack".into());
                }
                format!(
                    "relationship-flip mock: gender {g0:.4} -> {g1:.4}, income {i0:.4} -> {i1:.4}"
                )
            }
            _ => {
                problems.push("llm:p1 missing from the shared run".into());
                String::new()
            }
        },
        Err(e) => {
            problems.push(format!("shared run failed: {e}"));
            String::new()
        }
    };
    outcome(
        problems.is_empty(),
        format!(
            "label counts over 500 records x {} variants, 5 parser contracts; {e2e}{}",
            VariantTag::ALL.len(),
            if problems.is_empty() {
                String::new()
            } else {
                format!("; problems {problems:?}")
            }
        ),
    )
}

fn main() {
    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();
    let timed = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let mut o = f();
        o.detail = format!("{} [{:.1?}]", o.detail, t.elapsed());
        o
    };
    results.push((1, "fixture reproduction", timed(&fixtures)));
    results.push((4, "gradient correctness", timed(&gradients)));
    results.push((5, "metric oracle equivalence", timed(&metric_oracles)));
    results.push((6, "round-trip properties", timed(&round_trips)));
    results.push((7, "end-to-end determinism", timed(&determinism)));
    let run = adult_run();
    results.push((2, "baseline attack accuracy", baseline(&run)));
    results.push((3, "ALFR tradeoff", alfr(&run)));
    results.push((8, "LLM mechanism properties", llm_properties(&run)));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (n, name, o) in &results {
        println!(
            "criterion {n} {:<28} {}  {}",
            name,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
