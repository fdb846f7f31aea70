//! Acceptance criteria, one test per criterion.
//!
//! Each test prints a single `ACCEPTANCE Cn <name>: PASS|FAIL` line
//! (visible with `--nocapture`); the test name doubles as the pass/fail
//! line in regular harness output.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::str::FromStr;
use std::time::{Duration, Instant};

use churnmin_core::cp::{cp_table, CpMetric, CpTable};
use churnmin_core::eval::{accuracy, fdr, VersionOutcome};
use churnmin_core::extract::LanguageProfile;
use churnmin_core::graph::{
    dependencies, normalize_graph, parse_edge_list, CallGraph, DependencySet,
};
use churnmin_core::ledger::{aggregate, ChangeRecord, RawLedger};
use churnmin_core::mine::mine;
use churnmin_core::score::{score_tests, select, Measure, TestScore};
use churnmin_core::stats::{fisher_exact, odds_ratio};
use churnmin_core::MethodId;
use churnmin_fixture::script::{config_label, selection_label, BUDGETS, MEASURES, METRICS};
use churnmin_fixture::{generate, oracle, FixtureScript, GenParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn criterion(tag: &str, body: impl FnOnce()) {
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(body));
    match outcome {
        Ok(()) => println!("ACCEPTANCE {tag}: PASS"),
        Err(e) => {
            println!("ACCEPTANCE {tag}: FAIL");
            std::panic::resume_unwind(e);
        }
    }
}

fn rel_close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

fn id(text: &str) -> MethodId {
    MethodId::parse(text).unwrap()
}

#[test]
fn acceptance_c1_variant_aggregation_replay() {
    criterion("C1 signature-variant aggregation replay", || {
        let start = Instant::now();

        // The two raw rows of the worked aggregation example: the same
        // method under two signature variants, (change commits, total
        // commits, insertions, deletions).
        let mut raw = RawLedger::new();
        raw.insert(
            "LocaleUtils::toLocale(String str)".to_string(),
            ChangeRecord {
                change_commits: 4,
                total_commits: 573,
                insertions: 91,
                deletions: 49,
                modifications: 0,
            },
        );
        raw.insert(
            "LocaleUtils::toLocale(String locale)".to_string(),
            ChangeRecord {
                change_commits: 2,
                total_commits: 21,
                insertions: 32,
                deletions: 33,
                modifications: 0,
            },
        );

        let ledger = aggregate(&raw).unwrap();
        assert_eq!(ledger.len(), 1, "variants must merge into one identity");
        let (merged_id, rec) = ledger.iter().next().unwrap();
        assert_eq!(merged_id.rendered(), "LocaleUtils::toLocale(String)");
        assert_eq!(
            (
                rec.change_commits,
                rec.total_commits,
                rec.insertions,
                rec.deletions
            ),
            (6, 573, 123, 82)
        );

        let freq = cp_table(&ledger, CpMetric::ChgFreq).unwrap();
        let got = freq.values[merged_id];
        assert!(
            (got - 6.0 / 573.0).abs() < 1e-12,
            "ChgFreq {got} vs 6/573"
        );

        let ext = cp_table(&ledger, CpMetric::ChgExt).unwrap();
        let got = ext.values[merged_id];
        assert!(
            (got - 205.0 / 573.0).abs() < 1e-12,
            "ChgExt {got} vs 205/573"
        );

        assert!(start.elapsed() < Duration::from_secs(1));
    });
}

#[test]
fn acceptance_c2_fdr_worked_example() {
    criterion("C2 FDR worked example (15 of 18)", || {
        let fault: BTreeSet<MethodId> = [id("LocaleUtilsTest::testLang865()")].into();
        let unrelated: BTreeSet<MethodId> = [id("Other::test()")].into();

        let mut outcomes = Vec::new();
        for v in 0..18 {
            let selected = if v < 15 { &fault } else { &unrelated };
            outcomes.push(VersionOutcome::new(
                format!("v{v:02}"),
                fault.clone(),
                selected.clone(),
            ));
        }
        let got = fdr(&outcomes).unwrap();
        assert!(
            (got - 15.0 / 18.0).abs() < 1e-12,
            "FDR {got} vs 15/18 = 0.8333…"
        );
    });
}

#[test]
fn acceptance_c3_multilevel_dependency_replay() {
    criterion("C3 multilevel dependency example replay", || {
        let text = "\
LocaleUtilsTest::testLang865()\tLocaleUtilsTest::assertValidToLocale()
LocaleUtilsTest::testLang865()\tLocaleUtils::toLocale()
LocaleUtilsTest::assertValidToLocale()\tLocale::getVariant()
LocaleUtilsTest::assertValidToLocale()\tLocale::isEmpty()
LocaleUtilsTest::assertValidToLocale()\tLocale::getLanguage()
";
        let graph = normalize_graph(&parse_edge_list(text).unwrap()).unwrap();
        let deps = dependencies(&graph, &id("LocaleUtilsTest::testLang865()")).unwrap();

        let got: BTreeSet<&str> = deps.methods.iter().map(|m| m.rendered()).collect();
        let want: BTreeSet<&str> = [
            "LocaleUtilsTest::testLang865()",
            "LocaleUtilsTest::assertValidToLocale()",
            "LocaleUtils::toLocale()",
            "Locale::getVariant()",
            "Locale::isEmpty()",
            "Locale::getLanguage()",
        ]
        .into();
        assert_eq!(got, want, "dependency set");
        assert_eq!(got.len(), 6);
        assert_eq!(
            deps.methods[0].rendered(),
            "LocaleUtilsTest::testLang865()",
            "test root listed first"
        );
    });
}

/// Full pipeline-versus-oracle comparison on one generated fixture.
fn check_fixture_against_oracle(seed: u64, dir: &Path, script: &FixtureScript) {
    let outcome = mine(&dir.join("repo"), "main", &LanguageProfile::java(), 1).unwrap();
    assert!(outcome.warnings.is_empty(), "seed {seed}: warnings");
    assert_eq!(outcome.ledger.history_len, script.expected.history_len);

    let raw = outcome.ledger.to_raw_ledger();
    for (sig, want) in &script.expected.raw_ledger {
        let got = raw
            .get(sig)
            .unwrap_or_else(|| panic!("seed {seed}: raw row {sig} missing"));
        assert_eq!(
            (
                got.change_commits,
                got.total_commits,
                got.insertions,
                got.deletions,
                got.modifications
            ),
            (
                want.change_commits,
                want.total_commits,
                want.insertions,
                want.deletions,
                want.modifications
            ),
            "seed {seed}: raw row {sig}"
        );
    }
    assert_eq!(raw.len(), script.expected.raw_ledger.len(), "seed {seed}");

    let ledger = aggregate(&raw).unwrap();
    for (rendered, want) in &script.expected.ledger {
        let got = &ledger[&id(rendered)];
        assert_eq!(
            (
                got.change_commits,
                got.total_commits,
                got.insertions,
                got.deletions,
                got.modifications
            ),
            (
                want.change_commits,
                want.total_commits,
                want.insertions,
                want.deletions,
                want.modifications
            ),
            "seed {seed}: ledger row {rendered}"
        );
    }
    assert_eq!(ledger.len(), script.expected.ledger.len(), "seed {seed}");

    let graph_text = fs::read_to_string(dir.join("graph.tsv")).unwrap();
    let graph = normalize_graph(&parse_edge_list(&graph_text).unwrap()).unwrap();
    let mut deps: Vec<DependencySet> = Vec::new();
    for test in &script.tests {
        let set = dependencies(&graph, &id(test)).unwrap();
        let got: BTreeSet<String> = set
            .methods
            .iter()
            .map(|m| m.rendered().to_string())
            .collect();
        assert_eq!(
            got, script.expected.dependencies[test],
            "seed {seed}: dependencies of {test}"
        );
        deps.push(set);
    }

    for metric_label in METRICS {
        let metric = CpMetric::from_str(metric_label).unwrap();
        let table = cp_table(&ledger, metric).unwrap();
        let expected_cp = &script.expected.cp[metric_label];
        assert_eq!(table.values.len(), expected_cp.len(), "seed {seed}");
        for (mid, value) in &table.values {
            let want = expected_cp[mid.rendered()];
            assert!(
                rel_close(*value, want),
                "seed {seed}: CP {metric_label} {} = {value} vs {want}",
                mid.rendered()
            );
        }

        for measure_label in MEASURES {
            let measure = Measure::from_str(measure_label).unwrap();
            let ranking = score_tests(&table, &deps, measure).unwrap();
            let config = config_label(metric_label, measure_label);

            let got_order: Vec<&str> = ranking.iter().map(|s| s.test.rendered()).collect();
            let want_order: Vec<&str> = script.expected.rankings[&config]
                .iter()
                .map(|s| s.as_str())
                .collect();
            assert_eq!(got_order, want_order, "seed {seed}: ranking {config}");

            let naive = oracle::naive_rank(expected_cp, &script.expected.dependencies, measure_label);
            for (got, want) in ranking.iter().zip(naive.iter()) {
                assert!(
                    rel_close(got.score, want.1),
                    "seed {seed}: score {config} {} = {} vs {}",
                    want.0,
                    got.score,
                    want.1
                );
            }

            for (budget_label, num, den) in BUDGETS {
                let label = selection_label(metric_label, measure_label, budget_label);
                let suite = select(&ranking, num as f64 / den as f64).unwrap();
                let got: Vec<&str> = suite.selected.iter().map(|m| m.rendered()).collect();
                let want: Vec<&str> = script.expected.selections[&label]
                    .iter()
                    .map(|s| s.as_str())
                    .collect();
                assert_eq!(got, want, "seed {seed}: selection {label}");

                let selected_set: BTreeSet<MethodId> = suite.selected.iter().cloned().collect();
                let mut outcomes = Vec::new();
                for (version, tests) in &script.fault_plants {
                    let fault: BTreeSet<MethodId> = tests.iter().map(|t| id(t)).collect();
                    let outcome =
                        VersionOutcome::new(version.clone(), fault, selected_set.clone());
                    let got_acc = accuracy(&outcome).unwrap();
                    let want_acc = script.expected.accuracy[&label][version];
                    assert!(
                        rel_close(got_acc, want_acc),
                        "seed {seed}: accuracy {label} {version} = {got_acc} vs {want_acc}"
                    );
                    outcomes.push(outcome);
                }
                let got_fdr = fdr(&outcomes).unwrap();
                let want_fdr = script.expected.fdr[&label];
                assert!(
                    rel_close(got_fdr, want_fdr),
                    "seed {seed}: FDR {label} = {got_fdr} vs {want_fdr}"
                );
            }
        }
    }
}

#[test]
fn acceptance_c4_differential_on_100_fixtures() {
    criterion("C4 differential suite, 100 seeded fixtures", || {
        let start = Instant::now();
        let params = GenParams::default();
        for seed in 0..100 {
            let dir = tempfile::tempdir().unwrap();
            let script = generate(seed, &params, dir.path()).unwrap();
            check_fixture_against_oracle(seed, dir.path(), &script);
        }
        let elapsed = start.elapsed();
        assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    });
}

#[test]
fn acceptance_c5_fisher_against_enumeration() {
    criterion("C5 exact test vs enumeration, all tables with total <= 40", || {
        let start = Instant::now();
        let mut checked: u64 = 0;
        for a in 0..=40u64 {
            for b in 0..=(40 - a) {
                for c in 0..=(40 - a - b) {
                    for d in 0..=(40 - a - b - c) {
                        if a + b + c + d == 0 {
                            continue;
                        }
                        let table = [[a, b], [c, d]];
                        let got = fisher_exact(table).unwrap();
                        let want = oracle::fisher_enumeration(table);
                        assert!(
                            (got - want).abs() <= 1e-9,
                            "fisher [[{a},{b}],[{c},{d}]] = {got} vs {want}"
                        );
                        match (odds_ratio(table), oracle::odds_ratio_enumeration(table)) {
                            (Ok(x), Some(y)) => assert_eq!(
                                x, y,
                                "odds ratio [[{a},{b}],[{c},{d}]]"
                            ),
                            (Err(_), None) => {}
                            (x, y) => panic!(
                                "odds ratio convention differs on [[{a},{b}],[{c},{d}]]: {x:?} vs {y:?}"
                            ),
                        }
                        checked += 1;
                    }
                }
            }
        }
        // C(44, 4) quadruples with sum <= 40, minus the all-zero table.
        assert_eq!(checked, 135_750);

        // Anchored values: a perfectly split table is not significant,
        // a perfectly diagonal one is.
        assert_eq!(fisher_exact([[5, 5], [5, 5]]).unwrap(), 1.0);
        assert!((fisher_exact([[3, 0], [0, 3]]).unwrap() - 0.1).abs() < 1e-12);
        assert!(fisher_exact([[20, 0], [0, 20]]).unwrap() < 0.001);
        assert_eq!(odds_ratio([[1, 9], [11, 3]]).unwrap(), 3.0 / 99.0);

        let elapsed = start.elapsed();
        assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    });
}

/// Reachability by boolean fixpoint over an adjacency mask, nothing
/// shared with the DFS under test.
fn closure_from(n: usize, adj: &[u32], root: usize) -> u32 {
    let mut reach: u32 = 1 << root;
    loop {
        let mut next = reach;
        for v in 0..n {
            if reach & (1 << v) != 0 {
                next |= adj[v];
            }
        }
        if next == reach {
            return reach;
        }
        reach = next;
    }
}

fn check_graph_against_closure(n: usize, adj: &[u32], nodes: &[MethodId]) {
    let mut graph = CallGraph::new();
    for node in &nodes[..n] {
        graph.add_node(node.clone());
    }
    for (v, mask) in adj.iter().enumerate().take(n) {
        for w in 0..n {
            if mask & (1 << w) != 0 {
                graph.add_edge(nodes[v].clone(), nodes[w].clone());
            }
        }
    }
    for root in 0..n {
        let deps = dependencies(&graph, &nodes[root]).unwrap();
        let mut got: u32 = 0;
        for m in &deps.methods {
            let idx = nodes[..n].iter().position(|x| x == m).unwrap();
            got |= 1 << idx;
        }
        assert_eq!(got.count_ones() as usize, deps.methods.len(), "duplicates");
        let want = closure_from(n, adj, root);
        assert_eq!(
            got, want,
            "closure mismatch: n={n} adj={adj:?} root={root}"
        );
        assert_eq!(deps.methods[0], nodes[root], "root first");
    }
}

#[test]
fn acceptance_c6_reachability_vs_brute_force() {
    criterion("C6 dependency DFS vs transitive closure", || {
        let nodes: Vec<MethodId> = (0..12)
            .map(|i| MethodId::new("N", format!("m{i}"), Vec::new()))
            .collect();

        // All loop-free digraphs on up to 5 nodes. Self-loops cannot
        // change reachability, so the loop-free enumeration is complete
        // for this property.
        for n in 1..=5usize {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|v| (0..n).filter(move |w| *w != v).map(move |w| (v, w)))
                .collect();
            let count = 1u32 << pairs.len();
            for mask in 0..count {
                let mut adj = vec![0u32; n];
                for (bit, (v, w)) in pairs.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        adj[*v] |= 1 << w;
                    }
                }
                check_graph_against_closure(n, &adj, &nodes);
            }
        }

        // Random 12-node digraphs, edge probability 0.2.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..1000 {
            let n = 12usize;
            let mut adj = vec![0u32; n];
            for v in 0..n {
                for w in 0..n {
                    if v != w && rng.gen_bool(0.2) {
                        adj[v] |= 1 << w;
                    }
                }
            }
            check_graph_against_closure(n, &adj, &nodes);
        }
    });
}

#[test]
fn acceptance_c7_selection_size_and_scaling() {
    criterion("C7 selection sizes and scaling invariance", || {
        for n in 1..=1000usize {
            let scores: Vec<TestScore> = (0..n)
                .map(|i| TestScore {
                    test: MethodId::new("T", format!("t{i}"), Vec::new()),
                    score: (n - i) as f64,
                    dependency_count: 1,
                    measure: Measure::Avg,
                    metric: CpMetric::ChgFreq,
                })
                .collect();
            for (num, den) in [(1u64, 4u64), (1, 2), (3, 4)] {
                let suite = select(&scores, num as f64 / den as f64).unwrap();
                let expected = ((num * n as u64 + den - 1) / den) as usize;
                assert_eq!(
                    suite.selected.len(),
                    expected,
                    "n={n} budget={num}/{den}"
                );
            }
        }

        // Positive scaling of the CP table must not change any selection.
        let dir = tempfile::tempdir().unwrap();
        let script = generate(3, &GenParams::default(), dir.path()).unwrap();
        let outcome = mine(&dir.path().join("repo"), "main", &LanguageProfile::java(), 1).unwrap();
        let ledger = aggregate(&outcome.ledger.to_raw_ledger()).unwrap();
        let graph_text = fs::read_to_string(dir.path().join("graph.tsv")).unwrap();
        let graph = normalize_graph(&parse_edge_list(&graph_text).unwrap()).unwrap();
        let deps: Vec<DependencySet> = script
            .tests
            .iter()
            .map(|t| dependencies(&graph, &id(t)).unwrap())
            .collect();

        for metric in CpMetric::ALL {
            let table = cp_table(&ledger, metric).unwrap();
            for measure in Measure::ALL {
                let baseline = score_tests(&table, &deps, measure).unwrap();
                for scale in [0.25, 2.0, 3.7, 1.0e6] {
                    let scaled = CpTable {
                        metric,
                        values: table
                            .values
                            .iter()
                            .map(|(k, v)| (k.clone(), v * scale))
                            .collect(),
                    };
                    let ranking = score_tests(&scaled, &deps, measure).unwrap();
                    for budget in [0.25, 0.5, 0.75] {
                        let a: BTreeSet<MethodId> =
                            select(&baseline, budget).unwrap().selected.into_iter().collect();
                        let b: BTreeSet<MethodId> =
                            select(&ranking, budget).unwrap().selected.into_iter().collect();
                        assert_eq!(
                            a, b,
                            "selection changed under scale {scale} ({metric}, {measure}, b{budget})"
                        );
                    }
                }
            }
        }
    });
}

fn run_pipeline(fix: &Path, out_dir: &Path) {
    let out = Command::new(env!("CARGO_BIN_EXE_churnmin"))
        .args([
            "pipeline",
            "--repo",
            fix.join("repo").to_str().unwrap(),
            "--graph",
            fix.join("graph.tsv").to_str().unwrap(),
            "--graph-format",
            "tsv",
            "--tests-file",
            fix.join("tests.txt").to_str().unwrap(),
            "--ground-truth",
            fix.join("ground_truth.tsv").to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .env_remove("CHURNMIN_OUT")
        .env_remove("CHURNMIN_JOBS")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "pipeline failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn acceptance_c8_pipeline_determinism() {
    criterion("C8 byte-identical artifacts across pipeline runs", || {
        let tmp = tempfile::tempdir().unwrap();
        let fix = tmp.path().join("fix");
        generate(11, &GenParams::default(), &fix).unwrap();

        let out_a = tmp.path().join("a");
        let out_b = tmp.path().join("b");
        run_pipeline(&fix, &out_a);
        run_pipeline(&fix, &out_b);

        let names = |dir: &Path| -> BTreeSet<String> {
            fs::read_dir(dir)
                .unwrap()
                .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
                .collect()
        };
        let names_a = names(&out_a);
        assert_eq!(names_a, names(&out_b), "artifact sets differ");
        assert!(names_a.len() > 30, "expected the full artifact set");

        for name in &names_a {
            let a = fs::read(out_a.join(name)).unwrap();
            let b = fs::read(out_b.join(name)).unwrap();
            match name.as_str() {
                // Wall-clock lives in exactly two places: timings.csv
                // entirely, and the total_seconds column of summary.csv.
                "timings.csv" => {}
                "summary.csv" => {
                    let strip = |bytes: &[u8]| -> Vec<String> {
                        String::from_utf8(bytes.to_vec())
                            .unwrap()
                            .lines()
                            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
                            .collect()
                    };
                    assert_eq!(strip(&a), strip(&b), "summary.csv differs beyond timing");
                }
                _ => assert_eq!(a, b, "{name} differs between runs"),
            }
        }
    });
}

fn max_child_rss_bytes() -> u64 {
    let mut ru = std::mem::MaybeUninit::<libc::rusage>::uninit();
    let rc = unsafe { libc::getrusage(libc::RUSAGE_CHILDREN, ru.as_mut_ptr()) };
    assert_eq!(rc, 0);
    let ru = unsafe { ru.assume_init() };
    // Linux reports ru_maxrss in kilobytes.
    ru.ru_maxrss as u64 * 1024
}

#[test]
fn acceptance_c9_thousand_commit_mining_scale() {
    criterion("C9 ~1000-commit repository mines in budget", || {
        let tmp = tempfile::tempdir().unwrap();
        let repo = tmp.path().join("repo");
        let methods =
            churnmin_fixture::bulk::build_bulk_repo(&repo, &Default::default(), 7).unwrap();
        assert!(methods.len() > 50);

        let out_dir = tmp.path().join("out");
        let start = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_churnmin"))
            .args([
                "mine",
                "--repo",
                repo.to_str().unwrap(),
                "--out",
                out_dir.to_str().unwrap(),
            ])
            .env_remove("CHURNMIN_OUT")
            .env_remove("CHURNMIN_JOBS")
            .output()
            .expect("binary runs");
        let elapsed = start.elapsed();
        assert!(
            out.status.success(),
            "mine failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(
            elapsed < Duration::from_secs(180),
            "mining took {elapsed:?}"
        );

        let rss = max_child_rss_bytes();
        assert!(
            rss < 1024 * 1024 * 1024,
            "peak child RSS {} MB exceeds 1 GB",
            rss / (1024 * 1024)
        );

        let ledger = fs::read_to_string(out_dir.join("ledger.csv")).unwrap();
        let rows = ledger.lines().count();
        assert!(rows > methods.len() / 2, "ledger has {rows} rows");
    });
}
