//! End-to-end acceptance checks. Runs sequentially so the time limits are
//! measured without interference, prints one line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use postscan::relevance::{deviations, rank_values, ReferenceExpectation, ValueExpectation};
use postscan::scan::{scan_with_trace, StepRecord};
use postscan::significance::BootstrapConfig;
use postscan::{
    bernoulli_score, cross_substitute_greedy, empirical_p_value, enumerate_substitutions, exhaustive_scan,
    generate_synthetic, optimal_q, rank_feature_relevance, scan, Dataset, Feature, GreedyConfig, RelevanceConfig,
    ScanConfig, ScanResult, Schema, SubsetDescriptor, SyntheticSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

type Criterion = (&'static str, fn() -> Verdict, Duration);

fn main() {
    let criteria: [Criterion; 8] = [
        ("score formula", score_formula, Duration::from_secs(5)),
        ("scan matches exhaustive search", oracle_equivalence, Duration::from_secs(60)),
        ("planted subset recovery", planted_recovery, Duration::from_secs(30)),
        ("p-value floor and calibration", p_value_calibration, Duration::from_secs(600)),
        ("relevance arithmetic", relevance_arithmetic, Duration::from_secs(60)),
        ("substitution enumeration", substitution_enumeration, Duration::from_secs(60)),
        ("denormalization", denormalization, Duration::from_secs(600)),
        ("pipeline determinism", determinism, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let took = start.elapsed();
        let pass = v.pass && took <= *limit;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {} {:<32} {}  {} ({:.1} s, limit {} s)",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}

// ---------------------------------------------------------------- fixtures

fn dataset_from(cards: &[usize], rows: &[Vec<usize>], outcomes: Vec<bool>) -> Dataset {
    Dataset::from_rows(Schema::from_cardinalities(cards).unwrap(), rows, outcomes).unwrap()
}

/// Uniform rows; the outcome rate depends on each row's cell when `structured`.
fn random_dataset(seed: u64, cards: &[usize], n: usize, rate: f64, structured: bool) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lifts: Vec<Vec<f64>> = cards
        .iter()
        .map(|&h| (0..h).map(|_| if structured { rng.gen_range(0.3..2.5) } else { 1.0 }).collect())
        .collect();
    loop {
        let rows: Vec<Vec<usize>> = (0..n).map(|_| cards.iter().map(|&h| rng.gen_range(0..h)).collect()).collect();
        let outcomes = rows
            .iter()
            .map(|r| {
                let lift: f64 = r.iter().enumerate().map(|(z, &v)| lifts[z][v]).product();
                rng.gen_bool((rate * lift).min(0.95))
            })
            .collect();
        let ds = dataset_from(cards, &rows, outcomes);
        if ds.ensure_nondegenerate().is_ok() {
            return ds;
        }
    }
}

fn planted_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_records: 2000,
        cardinalities: vec![2, 2, 2, 2, 2],
        base_rate: 0.05,
        planted: SubsetDescriptor::from_constraints([(0, vec![1]), (1, vec![1])]),
        odds_multiplier: 3.0,
        seed,
    }
}

const COHORT_SEEDS: std::ops::Range<u64> = 0..20;

// ---------------------------------------------------------------- 1

/// Numeric maximizer: bisection on the sign of ds/dq over ln q.
fn numeric_q(c: usize, n: usize, mu: f64) -> f64 {
    let slope = |q: f64| c as f64 / q - n as f64 * mu / (1.0 - mu + q * mu);
    if slope(1.0) <= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid.exp()) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

fn objective(q: f64, c: usize, n: usize, mu: f64) -> f64 {
    c as f64 * q.ln() - n as f64 * (1.0 - mu + q * mu).ln()
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn score_formula() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_q = 0.0f64;
    let mut worst_s = 0.0f64;
    for _ in 0..1000 {
        let mu = rng.gen_range(0.005..0.995);
        let n = rng.gen_range(1..5000usize);
        let c = rng.gen_range(0..n);
        let q = optimal_q(c, n, mu).unwrap();
        let s = bernoulli_score(c, n, mu).unwrap().score;
        let q_num = numeric_q(c, n, mu);
        let s_num = objective(q_num, c, n, mu).max(0.0);
        worst_q = worst_q.max(rel_err(q, q_num));
        // a near-zero score has no meaningful relative error
        worst_s = worst_s.max(if s_num < 1e-9 { (s - s_num).abs() } else { rel_err(s, s_num) });
    }
    let mut full_nonzero = 0;
    for seed in 0..200 {
        let ds = random_dataset(seed, &[3, 2, 4], 50 + seed as usize * 7, 0.3, false);
        let r = ScanResult::evaluate(&ds, SubsetDescriptor::new(), 0).unwrap();
        if r.panel.score != 0.0 {
            full_nonzero += 1;
        }
    }
    verdict(
        worst_q <= 1e-6 && worst_s <= 1e-6 && full_nonzero == 0,
        format!("max rel err q {worst_q:.1e}, score {worst_s:.1e}; full-dataset nonzero {full_nonzero}/200"),
    )
}

// ---------------------------------------------------------------- 2

fn step_best(step: &StepRecord) -> f64 {
    let h = step.category_counts.len();
    (1u32..1 << h)
        .map(|mask| {
            let (n, c) = (0..h)
                .filter(|v| (mask >> v) & 1 == 1)
                .fold((0, 0), |(n, c), v| (n + step.category_counts[v].0, c + step.category_counts[v].1));
            if n == 0 {
                0.0
            } else {
                bernoulli_score(c, n, step.global_mean).unwrap().score
            }
        })
        .fold(0.0, f64::max)
}

fn oracle_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut matched, mut steps, mut steps_ok) = (0, 0, 0);
    for seed in 0..50u64 {
        let cards: Vec<usize> = (0..3).map(|_| rng.gen_range(2..=3)).collect();
        let n = rng.gen_range(80..=200);
        let ds = random_dataset(seed, &cards, n, 0.2, true);
        let exact = exhaustive_scan(&ds, 1 << 20).unwrap();
        let cfg = ScanConfig { n_restarts: 50, seed, ..Default::default() };
        let (found, trace) = scan_with_trace(&ds, &cfg).unwrap();
        if (found.panel.score - exact.panel.score).abs() <= 1e-9 * exact.panel.score.max(1.0) {
            matched += 1;
        }
        for step in &trace {
            steps += 1;
            if (step.score_after - step_best(step)).abs() <= 1e-9 && step.score_after + 1e-12 >= step.score_before {
                steps_ok += 1;
            }
        }
    }
    verdict(
        matched * 100 >= 98 * 50 && steps_ok == steps,
        format!("{matched}/50 instances match; {steps_ok}/{steps} steps optimal"),
    )
}

// ---------------------------------------------------------------- 3

/// Allowed values per feature, with unconstrained features fully allowed.
fn allowed(d: &SubsetDescriptor, cards: &[usize]) -> Vec<BTreeSet<usize>> {
    cards
        .iter()
        .enumerate()
        .map(|(z, &h)| match d.get(z) {
            Some(vals) => vals.clone(),
            None => (0..h).collect(),
        })
        .collect()
}

/// Number of differing values, if one descriptor's subset contains the other's.
fn nested_distance(a: &SubsetDescriptor, b: &SubsetDescriptor, cards: &[usize]) -> Option<usize> {
    let (a, b) = (allowed(a, cards), allowed(b, cards));
    let a_in_b = a.iter().zip(&b).all(|(x, y)| x.is_subset(y));
    let b_in_a = a.iter().zip(&b).all(|(x, y)| y.is_subset(x));
    (a_in_b || b_in_a).then(|| a.iter().zip(&b).map(|(x, y)| x.symmetric_difference(y).count()).sum())
}

fn recoveries() -> Vec<(u64, Dataset, SubsetDescriptor, ScanResult)> {
    COHORT_SEEDS
        .map(|seed| {
            let cohort = generate_synthetic(&planted_spec(seed)).unwrap();
            let found = scan(&cohort.dataset, &ScanConfig { n_restarts: 10, seed, ..Default::default() }).unwrap();
            (seed, cohort.dataset, cohort.planted, found)
        })
        .collect()
}

fn planted_recovery() -> Verdict {
    let runs = recoveries();
    let (mut exact, mut near, mut far) = (0, 0, Vec::new());
    for (seed, ds, planted, found) in &runs {
        let cards = ds.schema().cardinalities();
        match nested_distance(&planted.normalized(ds.schema()), &found.descriptor, &cards) {
            Some(0) => exact += 1,
            Some(1) => near += 1,
            _ => far.push(*seed),
        }
    }
    let total = runs.len();
    verdict(
        exact * 10 >= 9 * total && far.is_empty(),
        format!("{exact}/{total} exact, {near} within one value, others at seeds {far:?}"),
    )
}

// ---------------------------------------------------------------- 4

fn p_value_calibration() -> Verdict {
    let planted = generate_synthetic(&planted_spec(0)).unwrap().dataset;
    let boot = |n_replicates, seed| BootstrapConfig { n_replicates, seed, scan: ScanConfig::default() };

    let (zero, _) = empirical_p_value(&planted, 0.0, &boot(50, 1)).unwrap();
    let observed = scan(&planted, &ScanConfig::default()).unwrap();
    let (floor, _) = empirical_p_value(&planted, observed.panel.score, &boot(50, 2)).unwrap();
    let floor_text = format!("{:.6}", floor.value);

    let mut rejections = 0;
    for seed in 0..200u64 {
        let ds = random_dataset(10_000 + seed, &[3, 3, 3], 300, 0.15, false);
        let cfg = ScanConfig { n_restarts: 5, seed, ..Default::default() };
        let obs = scan(&ds, &cfg).unwrap();
        let (p, _) = empirical_p_value(&ds, obs.panel.score, &BootstrapConfig { n_replicates: 99, seed, scan: cfg })
            .unwrap();
        if p.value <= 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / 200.0;
    verdict(
        zero.value == 1.0 && floor.exceedances == 0 && floor_text == "0.019608" && (0.01..=0.12).contains(&rate),
        format!("p(0) = {}, floor {floor_text}, null rejection rate {rate:.3}", zero.value),
    )
}

// ---------------------------------------------------------------- 5

const RELEVANCE_ROWS: [(&str, f64); 9] = [
    ("Medical Retiree", -52.21),
    ("Early Retiree", -62.27),
    ("L.T Disability", -78.06),
    ("COBRA Continue", -91.79),
    ("West", -91.96),
    ("55-64", -92.20),
    ("N. Cent", -92.95),
    ("Full Time", 15293.85),
    ("South", 798.75),
];

fn relevance_arithmetic() -> Verdict {
    let (_, _, ratio) = deviations(0.057, 0.0389, 1.0);
    let ratio = ratio.unwrap_or(f64::NAN);
    let within = ((ratio - -52.21) / 52.21).abs() <= 0.01;

    let e_bar = 0.0389;
    let mut values: Vec<ValueExpectation> = RELEVANCE_ROWS
        .iter()
        .enumerate()
        .map(|(i, &(value, r))| ValueExpectation {
            feature: "F".into(),
            feature_index: 0,
            value: value.into(),
            value_index: i,
            e_value: (1.0 - r * e_bar) / (1.0 - r),
        })
        .collect();
    values.push(ValueExpectation {
        feature: "F".into(),
        feature_index: 0,
        value: "undefined".into(),
        value_index: 9,
        e_value: e_bar,
    });
    values.reverse();
    let cfg = RelevanceConfig { reference: ReferenceExpectation::Unity, ..Default::default() };
    let ranked = rank_values(values, e_bar, 1.0, &cfg);
    let order: Vec<&str> = ranked.iter().map(|e| e.value.as_str()).collect();
    let mut expected: Vec<&str> = RELEVANCE_ROWS.iter().map(|r| r.0).collect();
    expected.push("undefined");
    verdict(
        within && order == expected,
        format!("ratio {ratio:.2}, ordering {}", if order == expected { "holds" } else { "broken" }),
    )
}

// ---------------------------------------------------------------- 6

fn substitution_enumeration() -> Verdict {
    let schema = Schema::new(vec![
        Feature::new("Gender", ["Female", "Male"]),
        Feature::new("Race", ["Black", "Brown", "White"]),
        Feature::new("Smoking", ["Yes", "No"]),
        Feature::new("Weight", ["Low", "Mid", "High"]),
    ])
    .unwrap();
    let d = SubsetDescriptor::from_constraints([(3, vec![2]), (1, vec![2, 0]), (0, vec![0]), (2, vec![0])]);
    let first = enumerate_substitutions(&d, &schema).unwrap();
    let again = serde_json::to_string(&enumerate_substitutions(&d, &schema).unwrap()).unwrap();
    let labels: Vec<String> = first.iter().map(|c| c.label()).collect();
    let expected = [
        "Gender: [Female -> Male]",
        "Race: [Black -> Brown]",
        "Race: [White -> Brown]",
        "Race: [Black, White -> Brown]",
        "Smoking: [Yes -> No]",
        "Weight: [High -> Low]",
        "Weight: [High -> Mid]",
    ];
    let stable = serde_json::to_string(&first).unwrap() == again;
    verdict(
        labels == expected && stable,
        format!("{} candidates, serialization {}", labels.len(), if stable { "stable" } else { "unstable" }),
    )
}

// ---------------------------------------------------------------- 7

fn binomial_upper_tail(k: usize, n: usize, p: f64) -> f64 {
    use statrs::distribution::{Binomial, DiscreteCDF};
    if k == 0 {
        return 1.0;
    }
    Binomial::new(p, n as u64).unwrap().sf(k as u64 - 1)
}

fn denormalization() -> Verdict {
    let mut swaps = 0;
    let mut bad_swaps = Vec::new();
    let mut bad_greedy = Vec::new();
    for (seed, ds, planted, found) in recoveries() {
        let base = ScanResult::evaluate(&ds, planted.clone(), 0).unwrap();
        for cand in enumerate_substitutions(&planted, ds.schema()).unwrap() {
            if cand.from_indices.len() != 1 {
                continue;
            }
            swaps += 1;
            let swapped = ScanResult::evaluate(&ds, cand.resulting_descriptor.clone(), 0).unwrap();
            if swapped.panel.score >= base.panel.score {
                bad_swaps.push(seed);
            }
        }

        let ranking = rank_feature_relevance(&ds, &found, &RelevanceConfig::default()).unwrap();
        let boot = BootstrapConfig { n_replicates: 50, seed: seed ^ 0x9E37_79B9_7F4A_7C15, scan: ScanConfig::default() };
        let outcome = cross_substitute_greedy(&ds, &found, &ranking, &GreedyConfig::default(), &boot).unwrap();
        let members = outcome.descriptor.membership(&ds).unwrap();
        let c = members.iter().filter(|&&i| ds.outcomes()[i]).count();
        let tail = binomial_upper_tail(c, members.len(), ds.global_mean());
        if !(outcome.denormalized && outcome.p_value > 0.05 && tail > 0.05 && !members.is_empty()) {
            bad_greedy.push(seed);
        }
    }
    verdict(
        bad_swaps.is_empty() && bad_greedy.is_empty(),
        format!(
            "{} of {swaps} planted swaps lower the score; greedy fails at seeds {bad_greedy:?}",
            swaps - bad_swaps.len()
        ),
    )
}

// ---------------------------------------------------------------- 8

fn run_pipeline(input: &Path, out: &Path, workers: usize) -> String {
    let status = Command::new(env!("CARGO_BIN_EXE_postscan"))
        .args(["pipeline", "--seed", "7", "--replicates", "30", "--workers"])
        .arg(workers.to_string())
        .arg("--input")
        .arg(input)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let mut report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    report["metadata"] = serde_json::Value::Null;
    let mut text = serde_json::to_string_pretty(&report).unwrap();
    for table in ["relevance.csv", "substitution_plot.csv", "substitution_table.csv", "greedy_trace.csv"] {
        text.push_str(&std::fs::read_to_string(out.join(table)).unwrap());
    }
    text
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("cohort.csv");
    let cohort = generate_synthetic(&SyntheticSpec { cardinalities: vec![2, 3, 4, 5, 2], ..planted_spec(11) }).unwrap();
    postscan::io::save_csv(&cohort.dataset, "y", &input).unwrap();
    let runs: Vec<String> = [1, 1, 8, 8]
        .iter()
        .enumerate()
        .map(|(i, &w)| run_pipeline(&input, &dir.path().join(format!("run{i}")), w))
        .collect();
    let identical = runs.windows(2).all(|w| w[0] == w[1]);
    verdict(
        identical,
        format!("4 runs at workers 1 and 8 {}", if identical { "identical" } else { "differ" }),
    )
}
