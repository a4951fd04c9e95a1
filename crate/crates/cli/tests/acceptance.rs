//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Run alone with `cargo test -p pdtriage-cli --test acceptance`.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use pdtriage_core::eval::{
    confusion, grouped_report, metrics, predicted_labels, ConfusionMatrix, GroupBy, Labels, Ratio,
};
use pdtriage_core::ingest::{Administration, DocumentMeta};
use pdtriage_core::lda::{train_observed, TrainingConfig, STOCHASTIC_TOLERANCE};
use pdtriage_core::rules::{decide, weighted_category_vector, CategoryMapping, ClassificationRecord};
use pdtriage_core::synthetic::{greedy_topic_matching, planted_corpus, PlantedSpec};
use pdtriage_core::Category;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PLANTED_BUDGET: Duration = Duration::from_secs(60);
const DEMO_BUDGET: Duration = Duration::from_secs(30);
const MIN_MEAN_OVERLAP: f64 = 7.0;
const WC_TOLERANCE: f64 = 1e-9;
const WC_INSTANCES: usize = 10_000;
const ORACLE_INSTANCES: usize = 1_000;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn metrics_oracle() -> Result<String, String> {
    let m = ConfusionMatrix {
        tp: 118,
        fp: 28,
        fn_: 18,
        tn: 240,
    };
    let r = metrics(&m).map_err(|e| e.to_string())?;
    let precision = r.precision.ok_or("precision undefined")?;
    let recall = r.recall.ok_or("recall undefined")?;
    ensure(r.accuracy == Ratio { num: 358, den: 404 }, || {
        format!("accuracy {:?}", r.accuracy)
    })?;
    ensure(precision == Ratio { num: 118, den: 146 }, || {
        format!("precision {precision:?}")
    })?;
    ensure(recall == Ratio { num: 118, den: 136 }, || format!("recall {recall:?}"))?;
    let shown = [r.accuracy.render(), precision.render(), recall.render()];
    ensure(
        shown == ["88.61% (358/404)", "80.82% (118/146)", "86.76% (118/136)"],
        || format!("{shown:?}"),
    )?;
    Ok(shown.join(", "))
}

fn truth_table() -> Result<String, String> {
    let wc = |other: f64| {
        let mut w = [0.0; 8];
        w[7] = other;
        w[5] = 1.0 - other;
        w
    };
    let cases = [
        (true, 0.2, true),
        (true, 0.8, false),
        (false, 0.2, false),
        (false, 0.8, false),
        (true, 0.50, false),
        (false, 0.50, false),
        (true, f64::from_bits(0.5f64.to_bits() - 1), true),
    ];
    for (nuclear, other, expected) in cases {
        let r = decide("d", wc(other), nuclear);
        ensure(
            r.analyze_document == expected && r.other_dominates == (other >= 0.5),
            || {
                format!(
                    "nuclear={nuclear} wc7={other}: analyze={} other_dominates={}",
                    r.analyze_document, r.other_dominates
                )
            },
        )?;
    }
    Ok(format!("{} cases incl. wc7 = 0.50 boundary", cases.len()))
}

fn planted_recovery() -> Result<String, String> {
    let p = planted_corpus(&PlantedSpec::default());
    let start = Instant::now();
    let model = train_observed(&p.corpus, &TrainingConfig::new(5, 17), |_| {}).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let matching = greedy_topic_matching(model.phi(), &p.phi, 10);
    let mean = matching.iter().map(|m| m.2 as f64).sum::<f64>() / matching.len() as f64;
    ensure(mean >= MIN_MEAN_OVERLAP, || {
        format!("mean top-10 overlap {mean:.1} < 7")
    })?;
    ensure(elapsed <= PLANTED_BUDGET, || format!("took {elapsed:.1?}"))?;
    Ok(format!(
        "D=500 V=200 K=5, 1000 sweeps, mean overlap {mean:.1}/10 in {elapsed:.1?}"
    ))
}

fn sampler_invariants() -> Result<String, String> {
    let p = planted_corpus(&PlantedSpec {
        docs: 200,
        ..PlantedSpec::default()
    });
    let cfg = TrainingConfig {
        iterations: 300,
        burn_in: 60,
        ..TrainingConfig::new(5, 5)
    };
    let mut violation = None;
    let a = train_observed(&p.corpus, &cfg, |s| {
        if let (None, Err(e)) = (&violation, s.check_counts()) {
            violation = Some(format!("sweep {}: {e}", s.sweeps_done()));
        }
    })
    .map_err(|e| e.to_string())?;
    if let Some(v) = violation {
        return Err(v);
    }
    for row in a.phi().iter().chain(a.theta()) {
        let sum: f64 = row.iter().sum();
        ensure((sum - 1.0).abs() <= STOCHASTIC_TOLERANCE, || {
            format!("row sums to {sum}")
        })?;
    }
    let b = train_observed(&p.corpus, &cfg, |_| {}).map_err(|e| e.to_string())?;
    let bits = |m: &pdtriage_core::lda::TopicModel| -> Vec<u64> {
        m.phi().iter().chain(m.theta()).flatten().map(|x| x.to_bits()).collect()
    };
    ensure(bits(&a) == bits(&b) && a.assignments() == b.assignments(), || {
        "two identical runs differ".into()
    })?;
    Ok(format!(
        "counts conserved over {} sweeps, rows within 1e-9, reruns bit-identical",
        cfg.iterations
    ))
}

fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k)
        .map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random::<f64>() })
        .collect();
    if v.iter().all(|x| *x == 0.0) {
        v[0] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn random_ranks(rng: &mut ChaCha8Rng) -> [Category; 3] {
    if rng.random_bool(0.3) {
        return [Category::Other; 3];
    }
    let mut codes: Vec<u8> = (0..7).collect();
    codes.shuffle(rng);
    [0, 1, 2].map(|i| Category::from_code(codes[i]).expect("signaling code"))
}

fn mapping_of(ranks: &[[Category; 3]]) -> CategoryMapping {
    let mut m = CategoryMapping::all_other(ranks.len());
    for (k, r) in ranks.iter().enumerate() {
        m.set(k, "", *r);
    }
    m
}

fn weighted_vector_properties() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4040);
    let wc = |theta: &[f64], m: &CategoryMapping| weighted_category_vector(theta, m).map_err(|e| e.to_string());
    for case in 0..WC_INSTANCES {
        let k = rng.random_range(1..=40);
        let ranks: Vec<[Category; 3]> = (0..k).map(|_| random_ranks(&mut rng)).collect();
        let mapping = mapping_of(&ranks);
        let a = random_simplex(&mut rng, k);
        let b = random_simplex(&mut rng, k);
        let lambda: f64 = rng.random();
        let wa = wc(&a, &mapping)?;
        let wb = wc(&b, &mapping)?;
        let sum: f64 = wa.iter().sum();
        ensure((sum - 1.0).abs() <= WC_TOLERANCE, || {
            format!("case {case}: wc sums to {sum}")
        })?;

        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
        let wm = wc(&mix, &mapping)?;
        for c in 0..8 {
            let lin = lambda * wa[c] + (1.0 - lambda) * wb[c];
            ensure((wm[c] - lin).abs() <= WC_TOLERANCE, || {
                format!("case {case}: linearity off at category {c}")
            })?;
        }

        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng);
        let mut theta_p = vec![0.0; k];
        let mut ranks_p = vec![[Category::Other; 3]; k];
        for (old, &new) in perm.iter().enumerate() {
            theta_p[new] = a[old];
            ranks_p[new] = ranks[old];
        }
        let wp = wc(&theta_p, &mapping_of(&ranks_p))?;
        ensure(wp.map(f64::to_bits) == wa.map(f64::to_bits), || {
            format!("case {case}: permutation changed wc")
        })?;
    }

    // Brute-force confusion and group-by counts.
    let admins = [
        Administration::Reagan,
        Administration::Bush,
        Administration::Clinton,
        Administration::Other,
    ];
    for case in 0..ORACLE_INSTANCES {
        let n = rng.random_range(1..80);
        let mut metas = Vec::new();
        let mut records = Vec::new();
        let mut expect = [0usize; 4];
        let mut groups: BTreeMap<String, (usize, usize, usize, [usize; 7])> = BTreeMap::new();
        for i in 0..n {
            let id = format!("d{i:03}");
            let admin = admins[rng.random_range(0..4)];
            let gold = rng.random_bool(0.4);
            let flagged = rng.random_bool(0.4);
            let mut m = DocumentMeta::new(id.clone(), admin, 1985);
            m.gold_relevant = Some(gold);
            metas.push(m);
            let top3: Vec<Category> = if flagged {
                random_ranks(&mut rng).into_iter().filter(|c| !c.is_other()).collect()
            } else {
                vec![]
            };
            expect[match (gold, flagged) {
                (true, true) => 0,
                (false, true) => 1,
                (true, false) => 2,
                (false, false) => 3,
            }] += 1;
            let g = groups.entry(admin.to_string()).or_default();
            g.0 += 1;
            g.1 += gold as usize;
            g.2 += flagged as usize;
            for c in &top3 {
                g.3[c.index()] += 1;
            }
            records.push(ClassificationRecord {
                doc_id: id,
                wc: [0.0; 8],
                contains_nuclear: flagged,
                other_dominates: false,
                analyze_document: flagged,
                top3,
            });
        }
        records.shuffle(&mut rng);
        let gold: Labels = metas
            .iter()
            .map(|m| (m.doc_id.clone(), m.gold_relevant.unwrap()))
            .collect();
        let cm = confusion(&gold, &predicted_labels(&records)).map_err(|e| e.to_string())?;
        ensure([cm.tp, cm.fp, cm.fn_, cm.tn] == expect, || {
            format!("oracle case {case}: confusion {cm:?} vs {expect:?}")
        })?;
        let table = grouped_report(&records, &metas, GroupBy::Administration).map_err(|e| e.to_string())?;
        let got: BTreeMap<String, (usize, usize, usize, [usize; 7])> = table
            .rows
            .iter()
            .map(|r| {
                (
                    r.group.clone(),
                    (r.documents, r.gold_relevant, r.machine_flagged, r.machine_categories),
                )
            })
            .collect();
        ensure(got == groups, || format!("oracle case {case}: grouped counts differ"))?;
    }
    Ok(format!(
        "{WC_INSTANCES} wc instances (sum, linearity, permutation), {ORACLE_INSTANCES} confusion/group-by oracles"
    ))
}

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

fn pdtriage(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pdtriage"))
        .arg("--quiet")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn run_demo(ws: &Path, mapping: &Path) -> Result<(), String> {
    let ws = ws.to_str().unwrap();
    let demo = demo_dir();
    let manifest = demo.join("manifest.csv");
    let manifest = manifest.to_str().unwrap();
    pdtriage(&["--workspace", ws, "ingest", "--manifest", manifest])?;
    pdtriage(&[
        "--workspace",
        ws,
        "train",
        "--topics",
        "4",
        "--seed",
        "7",
        "--iters",
        "1000",
    ])?;
    pdtriage(&["--workspace", ws, "classify", "--mapping", mapping.to_str().unwrap()])?;
    pdtriage(&[
        "--workspace",
        ws,
        "eval",
        "--manifest",
        manifest,
        "--group-by",
        "administration",
    ])?;
    Ok(())
}

fn flags(csv_text: &str, column: &str) -> Result<BTreeMap<String, String>, String> {
    let mut lines = csv_text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty csv")?.split(',').collect();
    let col = header
        .iter()
        .position(|h| *h == column)
        .ok_or_else(|| format!("no column {column}"))?;
    Ok(lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[col].to_string())
        })
        .collect())
}

fn demo_pipeline() -> Result<String, String> {
    let ws = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    run_demo(ws.path(), &demo_dir().join("mapping.json"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < DEMO_BUDGET, || format!("pipeline took {elapsed:.1?}"))?;
    let got = flags(
        &fs::read_to_string(ws.path().join("classification.csv")).map_err(|e| e.to_string())?,
        "analyze_document",
    )?;
    let expected = flags(
        &fs::read_to_string(demo_dir().join("expected_flags.csv")).map_err(|e| e.to_string())?,
        "analyze_document",
    )?;
    ensure(got == expected, || {
        let diff: Vec<&String> = expected.keys().filter(|k| got.get(*k) != expected.get(*k)).collect();
        format!("flags differ from design on {diff:?}")
    })?;
    let n = got.values().filter(|v| *v == "1").count();
    Ok(format!(
        "20 documents, {n} flagged exactly as designed, in {elapsed:.1?}"
    ))
}

fn broad_mapping_trend() -> Result<String, String> {
    let ws = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_demo(ws.path(), &demo_dir().join("broad_mapping.json"))?;
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.path().join("report.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let totals = |key: &str| -> [u64; 7] {
        let mut t = [0u64; 7];
        for row in report["grouped"]["rows"].as_array().into_iter().flatten() {
            for (c, v) in row[key].as_array().into_iter().flatten().enumerate() {
                t[c] += v.as_u64().unwrap_or(0);
            }
        }
        t
    };
    let gold = totals("gold_categories");
    let machine = totals("machine_categories");
    // Categories the broad mapping attaches to topics analysts would not tag with them.
    let over_mapped = [Category::Funding, Category::Maintenance, Category::Movement];
    let mut parts = Vec::new();
    for c in over_mapped {
        let (g, m) = (gold[c.index()], machine[c.index()]);
        ensure(m > g, || format!("{}: machine {m} <= gold {g}", c.name()))?;
        parts.push(format!("{} machine {m} > gold {g}", c.short_name()));
    }
    Ok(parts.join(", "))
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 7] = [
        ("metrics oracle", metrics_oracle),
        ("decision-rule truth table", truth_table),
        ("planted-topic recovery", planted_recovery),
        ("sampler conservation, normalization, determinism", sampler_invariants),
        ("weighted-vector properties and oracles", weighted_vector_properties),
        ("demo-fixture pipeline", demo_pipeline),
        ("broad-mapping over-count trend", broad_mapping_trend),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({ms} ms)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why} ({ms} ms)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
