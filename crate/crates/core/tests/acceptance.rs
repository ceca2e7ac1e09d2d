//! End-to-end acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use songdecode::eval::{self, EvalReport, RatingTarget};
use songdecode::experiment::{self, SessionSource};
use songdecode::features::{dfa, dwt_multilevel, idwt_multilevel, Dataset, FeatureFamily};
use songdecode::models::{self, mlp::Mlp, ModelKind, ModelSpec};
use songdecode::preprocess::{average_rereference, notch_filter, PreprocessConfig};
use songdecode::session::ChannelMask;
use songdecode::synthgen::{noise::power_law_noise, GeneratorConfig};

const SEED: u64 = 7;
/// Class separation of the intermediate regime.
const INTERMEDIATE_SEPARATION: f64 = 0.2;

type Criterion<'a> = (u32, &'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn regime_dataset(class_separation: f64) -> Dataset {
    let generator = GeneratorConfig {
        class_separation,
        seed: SEED,
        ..GeneratorConfig::default()
    };
    let selection = [FeatureFamily::Spectopo].into_iter().collect();
    experiment::build_dataset(&SessionSource::Generate(generator), &PreprocessConfig::default(), &selection)
        .expect("regime dataset builds")
}

fn run(dataset: &Dataset, kind: ModelKind) -> EvalReport {
    let (train, test, _) = eval::split_dataset(dataset, 1.0 / 3.0, SEED).expect("split");
    let model = models::fit(&ModelSpec::new(kind, SEED), &train).expect("fit");
    eval::evaluate(&model, &test).expect("evaluate")
}

fn binomial_halfwidth(p: f64, n: usize, z: f64) -> f64 {
    z * (p * (1.0 - p) / n as f64).sqrt()
}

struct Regimes {
    separable: Dataset,
    separable_secs: f64,
    separable_knn: EvalReport,
    null: Dataset,
    intermediate: Dataset,
}

fn criterion_1(r: &Regimes) -> Outcome {
    let acc = r.separable_knn.overall_accuracy;
    outcome(
        acc >= 80.0 && r.separable_secs < 300.0,
        format!("knn+spectopo accuracy {acc:.2}% (>= 80), end-to-end {:.1} s (< 300)", r.separable_secs),
    )
}

fn criterion_2(r: &Regimes) -> Outcome {
    let p = 1.0 / 12.0;
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in ModelKind::ALL {
        let rep = run(&r.null, kind);
        let h = 100.0 * binomial_halfwidth(p, rep.n_test, 2.576);
        let ok = (rep.overall_accuracy - 100.0 * p).abs() <= h;
        pass &= ok;
        parts.push(format!("{kind} {:.2}%", rep.overall_accuracy));
        if kind == ModelKind::Knn {
            parts.insert(0, format!("99% band {:.2}..{:.2}%", 100.0 * p - h, 100.0 * p + h));
        }
    }
    outcome(pass, parts.join(", "))
}

fn criterion_3(r: &Regimes) -> Outcome {
    let chance = 100.0 / 12.0;
    let knn = run(&r.intermediate, ModelKind::Knn).overall_accuracy;
    let gb = run(&r.intermediate, ModelKind::Gboost).overall_accuracy;
    let mlp = run(&r.intermediate, ModelKind::Mlp).overall_accuracy;
    let pass = (20.0..=60.0).contains(&knn) && [knn, gb, mlp].iter().all(|&a| a >= 3.0 * chance);
    outcome(
        pass,
        format!(
            "separation {INTERMEDIATE_SEPARATION}: knn {knn:.2}% (20..60), gboost {gb:.2}%, mlp {mlp:.2}% (all >= {:.2}%)",
            3.0 * chance
        ),
    )
}

fn criterion_4() -> Outcome {
    let mean_alpha = |exponent: f64| {
        let total: f64 = (0..20u64)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                let x = power_law_noise(&mut rng, 10_000, 250.0, exponent, 0.0);
                dfa(&x, None).expect("dfa").alpha
            })
            .sum();
        total / 20.0
    };
    let white = mean_alpha(0.0);
    let pink = mean_alpha(1.0);
    outcome(
        (white - 0.5).abs() <= 0.05 && (pink - 1.0).abs() <= 0.1,
        format!("white alpha {white:.4} (0.50 +- 0.05), pink alpha {pink:.4} (1.00 +- 0.10)"),
    )
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_rec: f64 = 0.0;
    let mut worst_energy: f64 = 0.0;
    for (n, levels) in [(2500usize, 5usize), (4096, 7), (3200, 7), (10_000, 5)] {
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let c = dwt_multilevel(&x, levels).expect("dwt");
        let y = idwt_multilevel(&c).expect("idwt");
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        worst_rec = worst_rec.max(l2(&diff) / l2(&x));
        if n % (1 << levels) == 0 {
            let e_in: f64 = x.iter().map(|v| v * v).sum();
            let e_out: f64 = c.approx.iter().chain(c.details.iter().flatten()).map(|v| v * v).sum();
            worst_energy = worst_energy.max((e_in - e_out).abs() / e_in);
        }
    }
    let c = dwt_multilevel(&vec![3.25; 4096], 7).expect("dwt");
    let detail: f64 = c.details.iter().flatten().map(|v| v * v).sum();
    outcome(
        worst_rec <= 1e-8 && worst_energy <= 1e-9 && detail < 1e-10,
        format!("reconstruction {worst_rec:.2e} (<= 1e-8), energy {worst_energy:.2e} (<= 1e-9), constant detail energy {detail:.2e} (< 1e-10)"),
    )
}

fn criterion_6() -> Outcome {
    let fs = 250.0;
    let n = 2500;
    let trim = 500;
    let rms = |v: &[f64]| (v[trim..n - trim].iter().map(|x| x * x).sum::<f64>() / (n - 2 * trim) as f64).sqrt();
    let tone = |f: f64| -> Vec<f64> { (0..n).map(|t| (2.0 * std::f64::consts::PI * f * t as f64 / fs).sin()).collect() };
    let x50 = tone(50.0);
    let x10 = tone(10.0);
    let att = 20.0 * (rms(&x50) / rms(&notch_filter(&x50, fs, 50.0, 2.0).expect("notch"))).log10();
    let pass_change = (20.0 * (rms(&notch_filter(&x10, fs, 50.0, 2.0).expect("notch")) / rms(&x10)).log10()).abs();
    outcome(
        att >= 40.0 && pass_change <= 0.1,
        format!("50 Hz attenuation {att:.1} dB (>= 40), 10 Hz change {pass_change:.2e} dB (<= 0.1)"),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let x = Array2::from_shape_simple_fn((32, 5000), || 20.0 * rng.sample::<f64, _>(StandardNormal) + 3.0);
    let mut mask = ChannelMask::all_good(32);
    mask.good[4] = false;
    mask.good[17] = false;
    let once = average_rereference(x.view(), &mask).expect("rereference");
    let twice = average_rereference(once.view(), &mask).expect("rereference");
    let good: Vec<usize> = (0..32).filter(|&c| mask.good[c]).collect();
    let max_mean = once
        .select(Axis(0), &good)
        .mean_axis(Axis(0))
        .expect("mean")
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let idem = (&twice - &once).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    outcome(
        max_mean < 1e-10 && idem <= 1e-10,
        format!("max |good-channel mean| {max_mean:.2e} (< 1e-10), idempotence {idem:.2e} (<= 1e-10)"),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let net = Mlp::new(4, 8, 3, &mut rng);
    let x = Array2::from_shape_simple_fn((16, 4), || rng.sample::<f64, _>(StandardNormal));
    let y: Vec<usize> = (0..16).map(|i| i % 3).collect();
    let (_, g) = net.loss_and_gradient(x.view(), &y);
    let analytic = g.flat();
    let base = net.flat_params();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] += h;
        probe.set_flat_params(&p);
        let up = probe.loss_and_gradient(x.view(), &y).0;
        p[i] -= 2.0 * h;
        probe.set_flat_params(&p);
        let down = probe.loss_and_gradient(x.view(), &y).0;
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    outcome(worst < 1e-4, format!("{} parameters, max relative error {worst:.2e} (< 1e-4)", base.len()))
}

fn criterion_9(r: &Regimes) -> Outcome {
    let (train, _, _) = eval::split_dataset(&r.intermediate, 1.0 / 3.0, SEED).expect("split");
    let trace = |kind| models::fit(&ModelSpec::new(kind, SEED), &train).expect("fit").trace;
    let gmm = trace(ModelKind::Gmm);
    let km = trace(ModelKind::Kmeans);
    let gb = trace(ModelKind::Gboost);
    let worst_up = |t: &[f64]| t.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let worst_down = |t: &[f64]| t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let gmm_ok = worst_down(&gmm) >= -1e-8;
    let km_ok = worst_up(&km) <= 0.0;
    let gb_ok = worst_up(&gb) <= 0.0;
    outcome(
        gmm_ok && km_ok && gb_ok && gmm.len() > 1 && km.len() > 1,
        format!(
            "gmm {} iterations, worst step {:.2e}; kmeans {} iterations, worst step {:.2e}; gboost {} rounds, worst step {:.2e}",
            gmm.len(),
            worst_down(&gmm),
            km.len(),
            worst_up(&km),
            gb.len() - 1,
            worst_up(&gb)
        ),
    )
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .expect("read dir")
        .map(|e| e.expect("entry"))
        .filter(|e| e.path().is_file())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).expect("read")))
        .collect()
}

fn criterion_10(r: &Regimes) -> Outcome {
    let reports = [&r.separable_knn];
    let trace_ok = reports.iter().all(|rep| rep.accuracy_from_confusion() == rep.overall_accuracy);

    let (_, test, plan) = eval::split_dataset(&r.separable, 1.0 / 3.0, SEED).expect("split");
    let mut sizes: BTreeMap<(u32, u32), (usize, usize)> = BTreeMap::new();
    for (i, m) in r.separable.meta.iter().enumerate() {
        let e = sizes.entry((m.subject_id, m.song_id)).or_default();
        e.0 += 1;
        if plan.folds[i] == eval::Fold::Test {
            e.1 += 1;
        }
    }
    let strata_ok = sizes
        .values()
        .all(|&(n, t)| t == (n as f64 / 3.0).round() as usize)
        && test.n_rows() == sizes.values().map(|v| v.1).sum::<usize>();

    let dir = tempfile::tempdir().expect("tempdir");
    let out = dir.path().join("run");
    let args = |o: &Path| {
        vec![
            "songdecode".to_string(),
            "pipeline".into(),
            "--seed".into(),
            SEED.to_string(),
            "--model".into(),
            "knn".into(),
            "--features".into(),
            "spectopo".into(),
            "--subjects".into(),
            "2".into(),
            "--out".into(),
            o.display().to_string(),
        ]
    };
    let first_code = songdecode::cli::run(args(&out));
    let first = read_dir_bytes(&out);
    fs::remove_dir_all(&out).expect("clean");
    let second_code = songdecode::cli::run(args(&out));
    let second = read_dir_bytes(&out);
    let identical = first_code == 0 && second_code == 0 && first == second && first.contains_key("report.txt");
    outcome(
        trace_ok && strata_ok && identical,
        format!(
            "trace/total == accuracy: {trace_ok}; {} strata with exact test counts: {strata_ok}; two seeded CLI runs byte-identical over {} files: {identical}",
            sizes.len(),
            first.len()
        ),
    )
}

fn criterion_11(r: &Regimes) -> Outcome {
    let spec = ModelSpec::new(ModelKind::Knn, SEED);
    let accs: Vec<f64> = (0..5u64)
        .map(|s| {
            eval::evaluate_ratings(&spec, &r.separable, RatingTarget::Enjoyment, 1.0 / 3.0, s)
                .expect("ratings")
                .overall_accuracy
        })
        .collect();
    let relabeled = eval::relabel_by_rating(&r.separable, RatingTarget::Enjoyment).expect("relabel");
    let shuffled = eval::shuffle_labels(&relabeled, SEED);
    let control = eval::evaluate_ordinal(&spec, &shuffled, 1.0 / 3.0, SEED).expect("control");
    let h = 100.0 * binomial_halfwidth(0.2, control.n_test, 3.0);
    let min = accs.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    outcome(
        min >= 90.0 && (control.overall_accuracy - 20.0).abs() <= h,
        format!(
            "enjoyment accuracy over 5 seeds min {min:.2}% (>= 90); shuffled control {:.2}% (20 +- {h:.2})",
            control.overall_accuracy
        ),
    )
}

fn main() {
    let started = Instant::now();
    let t0 = Instant::now();
    let separable = regime_dataset(1.0);
    let separable_knn = run(&separable, ModelKind::Knn);
    let separable_secs = t0.elapsed().as_secs_f64();
    let regimes = Regimes {
        separable,
        separable_secs,
        separable_knn,
        null: regime_dataset(0.0),
        intermediate: regime_dataset(INTERMEDIATE_SEPARATION),
    };

    let criteria: Vec<Criterion<'_>> = vec![
        (1, "separable regime", Box::new(|| criterion_1(&regimes))),
        (2, "null regime at chance", Box::new(|| criterion_2(&regimes))),
        (3, "intermediate regime ordering", Box::new(|| criterion_3(&regimes))),
        (4, "DFA exponents", Box::new(criterion_4)),
        (5, "DWT reconstruction and energy", Box::new(criterion_5)),
        (6, "notch filter", Box::new(criterion_6)),
        (7, "average re-reference", Box::new(criterion_7)),
        (8, "MLP gradient check", Box::new(criterion_8)),
        (9, "training monotonicity", Box::new(|| criterion_9(&regimes))),
        (10, "evaluation identities", Box::new(|| criterion_10(&regimes))),
        (11, "rating prediction", Box::new(|| criterion_11(&regimes))),
    ];
    let mut failed = 0;
    for (n, name, check) in &criteria {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {n:>2} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.0?}",
        criteria.len() - failed,
        Duration::from_secs(started.elapsed().as_secs())
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
