//! Definition-direct recomputations of every planted quantity.
//!
//! Nothing here calls into the production crates: ledgers are replayed
//! straight from the edit plan, change-proneness comes from the raw
//! formulas, reachability is a fixpoint loop, measures are their
//! textbook definitions, and the exact test is counted with integer
//! binomials. Differential tests compare these against the pipeline.

use std::collections::{BTreeMap, BTreeSet};

use crate::script::{
    config_label, selection_label, CommitPlan, Edit, Expected, ExpectedRecord, FixtureScript,
    MethodPlan, BUDGETS, MEASURES, METRICS,
};

/// Replay the edit plan into a ledger keyed by raw signature.
///
/// `total_commits` for a signature counts commits from its first touch
/// through the end of history.
pub fn replay_raw_ledger(
    methods: &[MethodPlan],
    commits: &[CommitPlan],
) -> BTreeMap<String, ExpectedRecord> {
    struct Row {
        first_seen: usize,
        rec: ExpectedRecord,
    }
    fn touch<'a>(rows: &'a mut BTreeMap<String, Row>, sig: &str, index: usize) -> &'a mut Row {
        rows.entry(sig.to_string()).or_insert(Row {
            first_seen: index,
            rec: ExpectedRecord::default(),
        })
    }
    let mut rows: BTreeMap<String, Row> = BTreeMap::new();
    let mut variant: Vec<usize> = vec![0; methods.len()];
    let mut body_len: Vec<usize> = vec![0; methods.len()];
    for commit in commits {
        for edit in &commit.edits {
            let m = edit.method();
            let sig = methods[m].variants[variant[m]].clone();
            match *edit {
                Edit::AddMethod { body_lines, .. } => {
                    let row = touch(&mut rows, &sig, commit.index);
                    row.rec.change_commits += 1;
                    row.rec.insertions += body_lines as u64 + 2;
                    body_len[m] = body_lines;
                }
                Edit::EditBody { del, ins, .. } => {
                    let paired = del.min(ins) as u64;
                    let row = touch(&mut rows, &sig, commit.index);
                    row.rec.change_commits += 1;
                    row.rec.modifications += paired;
                    row.rec.deletions += del as u64 - paired;
                    row.rec.insertions += ins as u64 - paired;
                    body_len[m] = body_len[m] - del + ins;
                }
                Edit::RenameParam { .. } => {
                    let row = touch(&mut rows, &sig, commit.index);
                    row.rec.change_commits += 1;
                    row.rec.deletions += 1;
                    variant[m] += 1;
                    let next = methods[m].variants[variant[m]].clone();
                    let row = touch(&mut rows, &next, commit.index);
                    row.rec.change_commits += 1;
                    row.rec.insertions += 1;
                }
                Edit::DeleteMethod { .. } => {
                    let row = touch(&mut rows, &sig, commit.index);
                    row.rec.change_commits += 1;
                    row.rec.deletions += body_len[m] as u64 + 2;
                    body_len[m] = 0;
                }
            }
        }
    }
    let history_len = commits.len();
    rows.into_iter()
        .map(|(sig, row)| {
            let mut rec = row.rec;
            rec.total_commits = (history_len - row.first_seen) as u64;
            (sig, rec)
        })
        .collect()
}

/// Fold raw rows into canonical rows: sums for the change counters,
/// the maximum for `total_commits`.
pub fn aggregate_ledger(
    methods: &[MethodPlan],
    raw: &BTreeMap<String, ExpectedRecord>,
) -> BTreeMap<String, ExpectedRecord> {
    let mut canon_of: BTreeMap<&str, &str> = BTreeMap::new();
    for m in methods {
        for v in &m.variants {
            canon_of.insert(v, &m.canonical_id);
        }
    }
    let mut out: BTreeMap<String, ExpectedRecord> = BTreeMap::new();
    for (sig, rec) in raw {
        let canon = canon_of
            .get(sig.as_str())
            .unwrap_or_else(|| panic!("raw signature `{sig}` not in plan"));
        let agg = out.entry(canon.to_string()).or_default();
        agg.change_commits += rec.change_commits;
        agg.insertions += rec.insertions;
        agg.deletions += rec.deletions;
        agg.modifications += rec.modifications;
        agg.total_commits = agg.total_commits.max(rec.total_commits);
    }
    out
}

/// Change-proneness straight from the definitions.
pub fn cp_values(
    ledger: &BTreeMap<String, ExpectedRecord>,
    metric: &str,
) -> BTreeMap<String, f64> {
    ledger
        .iter()
        .map(|(id, rec)| {
            let total = rec.total_commits as f64;
            let value = match metric {
                "chgfreq" => rec.change_commits as f64 / total,
                "chgext" => {
                    (rec.insertions + rec.deletions + rec.modifications) as f64 / total
                }
                other => panic!("unknown metric `{other}`"),
            };
            (id.clone(), value)
        })
        .collect()
}

/// Reachable set of `root` over `edges`, root included, by fixpoint
/// relaxation rather than traversal.
pub fn reachable(edges: &[(String, String)], root: &str) -> BTreeSet<String> {
    let mut set = BTreeSet::new();
    set.insert(root.to_string());
    loop {
        let mut grew = false;
        for (from, to) in edges {
            if set.contains(from) && !set.contains(to) {
                set.insert(to.clone());
                grew = true;
            }
        }
        if !grew {
            return set;
        }
    }
}

/// Textbook aggregation of a non-empty value list. Values are summed
/// in ascending order so the result is a function of the multiset.
pub fn naive_measure(values: &[f64], measure: &str) -> f64 {
    assert!(!values.is_empty(), "measure of an empty list");
    if values.len() == 1 {
        return values[0];
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    match measure {
        "avg" => sorted.iter().sum::<f64>() / n,
        "gmean" => {
            if sorted[0] == 0.0 {
                return 0.0;
            }
            sorted.iter().product::<f64>().powf(1.0 / n)
        }
        "hmean" => {
            if sorted[0] == 0.0 {
                return 0.0;
            }
            n / sorted.iter().map(|v| 1.0 / v).sum::<f64>()
        }
        "median" => {
            let mid = sorted.len() / 2;
            if sorted.len() % 2 == 1 {
                sorted[mid]
            } else {
                (sorted[mid - 1] + sorted[mid]) / 2.0
            }
        }
        other => panic!("unknown measure `{other}`"),
    }
}

/// Score every test over its dependency set and order by score
/// descending, identifier ascending. Methods without a ledger entry
/// contribute zero.
pub fn naive_rank(
    cp: &BTreeMap<String, f64>,
    deps: &BTreeMap<String, BTreeSet<String>>,
    measure: &str,
) -> Vec<(String, f64)> {
    let mut rank: Vec<(String, f64)> = deps
        .iter()
        .map(|(test, set)| {
            let values: Vec<f64> = set
                .iter()
                .map(|id| cp.get(id).copied().unwrap_or(0.0))
                .collect();
            (test.clone(), naive_measure(&values, measure))
        })
        .collect();
    rank.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    rank
}

/// Suite size for an exact budget `num/den`: the integer ceiling,
/// at least one test, at most all of them.
pub fn naive_size(n: usize, num: u64, den: u64) -> usize {
    let k = (num as u128 * n as u128).div_ceil(den as u128) as usize;
    k.clamp(usize::from(n > 0), n)
}

/// Top slice of a ranking under an exact budget.
pub fn naive_select(rank: &[(String, f64)], num: u64, den: u64) -> Vec<String> {
    let k = naive_size(rank.len(), num, den);
    rank.iter().take(k).map(|(id, _)| id.clone()).collect()
}

/// Fraction of a version's fault-revealing tests that were kept.
pub fn naive_accuracy(fault: &BTreeSet<String>, selected: &BTreeSet<String>) -> f64 {
    assert!(!fault.is_empty(), "version with no fault-revealing tests");
    fault.intersection(selected).count() as f64 / fault.len() as f64
}

/// Fraction of versions with at least one retained revealing test.
pub fn naive_fdr(detected: &[bool]) -> f64 {
    assert!(!detected.is_empty(), "no versions");
    detected.iter().filter(|&&d| d).count() as f64 / detected.len() as f64
}

/// Exact binomial coefficient in unbounded-for-our-sizes arithmetic.
pub fn choose(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Two-sided exact test on a 2x2 table by full enumeration with
/// integer weights; the common denominator cancels.
pub fn fisher_enumeration(table: [[u64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = table;
    let row1 = a + b;
    let row2 = c + d;
    let col1 = a + c;
    assert!(row1 + row2 > 0, "empty table");
    let weight = |x: u64| choose(row1, x) * choose(row2, col1 - x);
    let observed = weight(a);
    let lo = col1.saturating_sub(row2);
    let hi = row1.min(col1);
    let mut kept: u128 = 0;
    let mut all: u128 = 0;
    for x in lo..=hi {
        let w = weight(x);
        all += w;
        if w <= observed {
            kept += w;
        }
    }
    kept as f64 / all as f64
}

/// Exact odds ratio; `None` when both diagonal products vanish.
pub fn odds_ratio_enumeration(table: [[u64; 2]; 2]) -> Option<f64> {
    let [[a, b], [c, d]] = table;
    let ad = a as u128 * d as u128;
    let bc = b as u128 * c as u128;
    match (ad, bc) {
        (0, 0) => None,
        (_, 0) => Some(f64::INFINITY),
        (ad, bc) => Some(ad as f64 / bc as f64),
    }
}

/// Fill in every expected value derivable from the plan.
pub fn expected_from_plan(script: &mut FixtureScript) {
    let raw = replay_raw_ledger(&script.methods, &script.commits);
    let ledger = aggregate_ledger(&script.methods, &raw);

    let mut deps: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for test in &script.tests {
        deps.insert(test.clone(), reachable(&script.graph_edges, test));
    }

    let mut expected = Expected {
        history_len: script.commits.len(),
        raw_ledger: raw,
        ledger,
        dependencies: deps.clone(),
        ..Expected::default()
    };
    for metric in METRICS {
        let cp = cp_values(&expected.ledger, metric);
        for measure in MEASURES {
            let rank = naive_rank(&cp, &deps, measure);
            expected.rankings.insert(
                config_label(metric, measure),
                rank.iter().map(|(id, _)| id.clone()).collect(),
            );
            for (budget, num, den) in BUDGETS {
                let label = selection_label(metric, measure, budget);
                let selected = naive_select(&rank, num, den);
                let selected_set: BTreeSet<String> = selected.iter().cloned().collect();
                let mut acc = BTreeMap::new();
                let mut detected = Vec::new();
                for (version, fault) in &script.fault_plants {
                    let a = naive_accuracy(fault, &selected_set);
                    detected.push(a > 0.0);
                    acc.insert(version.clone(), a);
                }
                expected.selections.insert(label.clone(), selected);
                expected.accuracy.insert(label.clone(), acc);
                expected.fdr.insert(label, naive_fdr(&detected));
            }
        }
        expected.cp.insert(metric.to_string(), cp);
    }
    script.expected = expected;
}
