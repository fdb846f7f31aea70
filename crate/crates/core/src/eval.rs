//! Evaluation over faulty versions: accuracy, fault-detection rate, and
//! pairwise configuration comparison.
//!
//! Ground truth arrives as `version_id<TAB>test_id` rows naming the
//! fault-revealing tests of each version. A minimized suite is evaluated by
//! intersecting it with each version's set. Outcomes of other tools can be
//! supplied as `version_id<TAB>0|1[<TAB>accuracy]` rows; multiple rows per
//! version (one per run) fold by majority vote, ties counting as detected,
//! with accuracies averaged.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};

use crate::cp::format_cp_value;
use crate::error::{Error, Result};
use crate::method::MethodId;
use crate::stats::{fisher_exact, odds_ratio};

/// One faulty version joined with a minimized suite.
#[derive(Clone, Debug)]
pub struct VersionOutcome {
    pub version_id: String,
    /// Ground-truth fault-revealing tests (F).
    pub fault_revealing: BTreeSet<MethodId>,
    /// The minimized suite under evaluation.
    pub selected: BTreeSet<MethodId>,
    /// F intersected with the suite (F').
    pub retained: BTreeSet<MethodId>,
}

impl VersionOutcome {
    pub fn new(
        version_id: impl Into<String>,
        fault_revealing: BTreeSet<MethodId>,
        selected: BTreeSet<MethodId>,
    ) -> VersionOutcome {
        let retained = fault_revealing.intersection(&selected).cloned().collect();
        VersionOutcome {
            version_id: version_id.into(),
            fault_revealing,
            selected,
            retained,
        }
    }

    /// A version counts as detected when at least one fault-revealing test
    /// survives minimization.
    pub fn detects(&self) -> bool {
        !self.retained.is_empty()
    }
}

/// Fraction of fault-revealing tests the suite retained for one version.
pub fn accuracy(outcome: &VersionOutcome) -> Result<f64> {
    if outcome.fault_revealing.is_empty() {
        return Err(Error::Domain(format!(
            "version `{}` has no fault-revealing tests",
            outcome.version_id
        )));
    }
    Ok(outcome.retained.len() as f64 / outcome.fault_revealing.len() as f64)
}

/// Fraction of versions with at least one retained fault-revealing test.
pub fn fdr(outcomes: &[VersionOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Domain("no versions to evaluate".to_string()));
    }
    let detected = outcomes.iter().filter(|o| o.detects()).count();
    Ok(detected as f64 / outcomes.len() as f64)
}

/// Detection flag and optional accuracy for one version, the shape shared
/// by this pipeline's outcomes and external tools' outcome files.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeRow {
    pub version_id: String,
    pub detected: bool,
    pub accuracy: Option<f64>,
}

/// Converts full outcomes into rows, computing accuracies.
pub fn outcome_rows(outcomes: &[VersionOutcome]) -> Result<Vec<OutcomeRow>> {
    outcomes
        .iter()
        .map(|o| {
            Ok(OutcomeRow {
                version_id: o.version_id.clone(),
                detected: o.detects(),
                accuracy: Some(accuracy(o)?),
            })
        })
        .collect()
}

fn fdr_of_rows(rows: &[OutcomeRow]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::Domain("no versions to evaluate".to_string()));
    }
    Ok(rows.iter().filter(|r| r.detected).count() as f64 / rows.len() as f64)
}

/// Mean of the accuracies present; `None` when no row carries one.
pub fn mean_accuracy(rows: &[OutcomeRow]) -> Option<f64> {
    let known: Vec<f64> = rows.iter().filter_map(|r| r.accuracy).collect();
    if known.is_empty() {
        None
    } else {
        Some(known.iter().sum::<f64>() / known.len() as f64)
    }
}

/// Pairwise comparison of two configurations over the same versions.
#[derive(Clone, Debug)]
pub struct Comparison {
    /// `[[a detects, a misses], [b detects, b misses]]`.
    pub table: [[u64; 2]; 2],
    pub p_value: f64,
    /// `None` when both diagonal products are zero (undefined ratio).
    pub odds_ratio: Option<f64>,
    pub fdr_a: f64,
    pub fdr_b: f64,
    pub mean_accuracy_a: Option<f64>,
    pub mean_accuracy_b: Option<f64>,
}

/// Builds the 2x2 detection table for two outcome sets over the same
/// versions and runs the significance tests.
pub fn compare(a: &[OutcomeRow], b: &[OutcomeRow]) -> Result<Comparison> {
    let ids_a: BTreeSet<&str> = a.iter().map(|r| r.version_id.as_str()).collect();
    let ids_b: BTreeSet<&str> = b.iter().map(|r| r.version_id.as_str()).collect();
    if ids_a != ids_b {
        let only_a: Vec<&str> = ids_a.difference(&ids_b).copied().collect();
        let only_b: Vec<&str> = ids_b.difference(&ids_a).copied().collect();
        return Err(Error::Input(format!(
            "version sets differ: only in first = [{}], only in second = [{}]",
            only_a.join(", "),
            only_b.join(", ")
        )));
    }
    let detect_a = a.iter().filter(|r| r.detected).count() as u64;
    let detect_b = b.iter().filter(|r| r.detected).count() as u64;
    let n = a.len() as u64;
    let table = [[detect_a, n - detect_a], [detect_b, n - detect_b]];
    let p_value = fisher_exact(table)?;
    let ratio = match odds_ratio(table) {
        Ok(v) => Some(v),
        Err(Error::Domain(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Comparison {
        table,
        p_value,
        odds_ratio: ratio,
        fdr_a: fdr_of_rows(a)?,
        fdr_b: fdr_of_rows(b)?,
        mean_accuracy_a: mean_accuracy(a),
        mean_accuracy_b: mean_accuracy(b),
    })
}

/// Parses `version_id<TAB>test_id` ground-truth rows. Blank lines and `#`
/// comments are skipped; versions may appear on many rows.
pub fn read_ground_truth<R: Read>(r: R) -> Result<BTreeMap<String, BTreeSet<MethodId>>> {
    let mut out: BTreeMap<String, BTreeSet<MethodId>> = BTreeMap::new();
    for (idx, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (version, test) = line.split_once('\t').ok_or_else(|| {
            Error::Input(format!(
                "ground truth line {}: expected `version<TAB>test_id`",
                idx + 1
            ))
        })?;
        let id = MethodId::parse(test.trim()).map_err(|e| {
            Error::Input(format!("ground truth line {}: {e}", idx + 1))
        })?;
        out.entry(version.trim().to_string()).or_default().insert(id);
    }
    Ok(out)
}

/// Parses `version_id<TAB>0|1[<TAB>accuracy]` outcome rows from another
/// tool. Repeated versions are runs: detection folds by majority vote with
/// ties detected, accuracies average over the rows carrying one.
pub fn read_external_outcomes<R: Read>(r: R) -> Result<Vec<OutcomeRow>> {
    struct Tally {
        runs: u64,
        detected_runs: u64,
        accuracy_sum: f64,
        accuracy_count: u64,
    }
    let mut tallies: BTreeMap<String, Tally> = BTreeMap::new();
    for (idx, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let version = fields.next().unwrap_or("").trim();
        let flag = fields.next().map(str::trim);
        let acc_text = fields.next().map(str::trim);
        let bad = |detail: &str| {
            Error::Input(format!("outcomes line {}: {detail}", idx + 1))
        };
        if version.is_empty() {
            return Err(bad("missing version id"));
        }
        let detected = match flag {
            Some("0") => false,
            Some("1") => true,
            _ => return Err(bad("expected detection flag 0 or 1")),
        };
        let accuracy = match acc_text {
            None | Some("") => None,
            Some(t) => {
                let v: f64 = t
                    .parse()
                    .map_err(|_| bad("accuracy is not a number"))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(bad("accuracy outside [0, 1]"));
                }
                Some(v)
            }
        };
        let tally = tallies.entry(version.to_string()).or_insert(Tally {
            runs: 0,
            detected_runs: 0,
            accuracy_sum: 0.0,
            accuracy_count: 0,
        });
        tally.runs += 1;
        tally.detected_runs += u64::from(detected);
        if let Some(v) = accuracy {
            tally.accuracy_sum += v;
            tally.accuracy_count += 1;
        }
    }
    Ok(tallies
        .into_iter()
        .map(|(version_id, t)| OutcomeRow {
            version_id,
            detected: t.detected_runs * 2 >= t.runs,
            accuracy: (t.accuracy_count > 0).then(|| t.accuracy_sum / t.accuracy_count as f64),
        })
        .collect())
}

/// Evaluation of one configuration across all versions.
#[derive(Clone, Debug)]
pub struct EvaluationReport {
    pub config: String,
    /// (version id, accuracy) sorted by version id.
    pub per_version: Vec<(String, f64)>,
    pub mean_accuracy: f64,
    pub fdr: f64,
    pub n_versions: usize,
}

/// Evaluates one suite against every version in the ground truth.
pub fn evaluate(
    ground_truth: &BTreeMap<String, BTreeSet<MethodId>>,
    selected: &BTreeSet<MethodId>,
    config: impl Into<String>,
) -> Result<EvaluationReport> {
    if ground_truth.is_empty() {
        return Err(Error::Domain("ground truth names no versions".to_string()));
    }
    let outcomes: Vec<VersionOutcome> = ground_truth
        .iter()
        .map(|(vid, faults)| VersionOutcome::new(vid.clone(), faults.clone(), selected.clone()))
        .collect();
    let mut per_version = Vec::with_capacity(outcomes.len());
    for o in &outcomes {
        per_version.push((o.version_id.clone(), accuracy(o)?));
    }
    let mean = per_version.iter().map(|(_, a)| a).sum::<f64>() / per_version.len() as f64;
    Ok(EvaluationReport {
        config: config.into(),
        per_version,
        mean_accuracy: mean,
        fdr: fdr(&outcomes)?,
        n_versions: outcomes.len(),
    })
}

/// Converts a report's outcomes to rows for cross-configuration comparison.
pub fn report_rows(report: &EvaluationReport) -> Vec<OutcomeRow> {
    report
        .per_version
        .iter()
        .map(|(vid, acc)| OutcomeRow {
            version_id: vid.clone(),
            detected: *acc > 0.0,
            accuracy: Some(*acc),
        })
        .collect()
}

fn fmt_or(ratio: Option<f64>) -> String {
    match ratio {
        None => "undefined".to_string(),
        Some(v) if v.is_infinite() => "inf".to_string(),
        Some(v) => format_cp_value(v),
    }
}

/// Renders reports and comparisons as a key-value text document. Wall-clock
/// numbers are deliberately absent so reruns are byte-identical.
pub fn render_report(
    reports: &[EvaluationReport],
    comparisons: &[(String, Comparison)],
) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&format!("[config {}]\n", r.config));
        out.push_str(&format!("n_versions = {}\n", r.n_versions));
        out.push_str(&format!(
            "mean_accuracy = {}\n",
            format_cp_value(r.mean_accuracy)
        ));
        out.push_str(&format!("fdr = {}\n", format_cp_value(r.fdr)));
        for (vid, acc) in &r.per_version {
            out.push_str(&format!("version {} accuracy = {}\n", vid, format_cp_value(*acc)));
        }
        out.push('\n');
    }
    for (label, c) in comparisons {
        out.push_str(&format!("[comparison {label}]\n"));
        out.push_str(&format!(
            "table = {},{},{},{}\n",
            c.table[0][0], c.table[0][1], c.table[1][0], c.table[1][1]
        ));
        out.push_str(&format!("p_value = {}\n", format_cp_value(c.p_value)));
        out.push_str(&format!("odds_ratio = {}\n", fmt_or(c.odds_ratio)));
        out.push_str(&format!("fdr_a = {}\n", format_cp_value(c.fdr_a)));
        out.push_str(&format!("fdr_b = {}\n", format_cp_value(c.fdr_b)));
        if let Some(a) = c.mean_accuracy_a {
            out.push_str(&format!("mean_accuracy_a = {}\n", format_cp_value(a)));
        }
        if let Some(b) = c.mean_accuracy_b {
            out.push_str(&format!("mean_accuracy_b = {}\n", format_cp_value(b)));
        }
        out.push('\n');
    }
    out
}

/// One row of the summary CSV.
#[derive(Clone, Debug)]
pub struct SummaryRow {
    pub config: String,
    pub mean_accuracy: f64,
    pub fdr: f64,
    pub n_versions: usize,
    pub total_seconds: f64,
}

pub const SUMMARY_HEADER: &str = "config,mean_accuracy,fdr,n_versions,total_seconds";

/// Summary CSV; `total_seconds` is the one wall-clock column and is masked
/// out by reproducibility checks.
pub fn write_summary_csv<W: Write>(mut w: W, rows: &[SummaryRow]) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{:.3}",
            r.config,
            format_cp_value(r.mean_accuracy),
            format_cp_value(r.fdr),
            r.n_versions,
            r.total_seconds
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(text: &str) -> MethodId {
        MethodId::parse(text).unwrap()
    }

    fn ids(names: &[&str]) -> BTreeSet<MethodId> {
        names.iter().map(|n| id(n)).collect()
    }

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn accuracy_is_the_retained_fraction() {
        let o = VersionOutcome::new(
            "v1",
            ids(&["T::a()", "T::b()", "T::c()", "T::d()"]),
            ids(&["T::a()", "T::b()", "T::c()", "T::x()"]),
        );
        close(accuracy(&o).unwrap(), 0.75);

        let full = VersionOutcome::new("v2", ids(&["T::a()"]), ids(&["T::a()", "T::b()"]));
        close(accuracy(&full).unwrap(), 1.0);

        let none = VersionOutcome::new("v3", ids(&["T::a()"]), ids(&["T::z()"]));
        close(accuracy(&none).unwrap(), 0.0);
        assert!(!none.detects());
    }

    #[test]
    fn empty_ground_truth_is_a_domain_error() {
        let o = VersionOutcome::new("v1", BTreeSet::new(), ids(&["T::a()"]));
        assert!(matches!(accuracy(&o), Err(Error::Domain(_))));
    }

    #[test]
    fn fdr_counts_detecting_versions() {
        let mut outcomes = Vec::new();
        for i in 0..18 {
            let faults = ids(&["T::f()"]);
            let selected = if i < 15 {
                ids(&["T::f()"])
            } else {
                ids(&["T::other()"])
            };
            outcomes.push(VersionOutcome::new(format!("v{i:02}"), faults, selected));
        }
        close(fdr(&outcomes).unwrap(), 15.0 / 18.0);
        assert!(matches!(fdr(&[]), Err(Error::Domain(_))));
    }

    #[test]
    fn positive_accuracy_implies_detection() {
        let o = VersionOutcome::new(
            "v1",
            ids(&["T::a()", "T::b()"]),
            ids(&["T::b()"]),
        );
        assert!(accuracy(&o).unwrap() > 0.0);
        assert!(o.detects());
    }

    fn rows(detects: &[bool]) -> Vec<OutcomeRow> {
        detects
            .iter()
            .enumerate()
            .map(|(i, d)| OutcomeRow {
                version_id: format!("v{i:02}"),
                detected: *d,
                accuracy: Some(if *d { 1.0 } else { 0.0 }),
            })
            .collect()
    }

    #[test]
    fn total_separation_gives_infinite_odds_and_tiny_p() {
        let a = rows(&[true; 20]);
        let b = rows(&[false; 20]);
        let c = compare(&a, &b).unwrap();
        assert_eq!(c.table, [[20, 0], [0, 20]]);
        assert_eq!(c.odds_ratio, Some(f64::INFINITY));
        assert!(c.p_value < 0.001);
    }

    #[test]
    fn identical_mixed_vectors_compare_as_even() {
        let mut flags = vec![true; 15];
        flags.extend(vec![false; 5]);
        let a = rows(&flags);
        let c = compare(&a, &a.clone()).unwrap();
        assert_eq!(c.odds_ratio, Some(1.0));
        close(c.p_value, 1.0);
    }

    #[test]
    fn identical_all_detect_vectors_have_undefined_odds() {
        let a = rows(&[true; 6]);
        let c = compare(&a, &a.clone()).unwrap();
        assert_eq!(c.odds_ratio, None);
        close(c.p_value, 1.0);
    }

    #[test]
    fn mismatched_version_sets_are_an_input_error() {
        let a = rows(&[true, false]);
        let mut b = rows(&[true, false]);
        b[1].version_id = "other".to_string();
        let err = compare(&a, &b).unwrap_err();
        match err {
            Error::Input(msg) => {
                assert!(msg.contains("v01"), "{msg}");
                assert!(msg.contains("other"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ground_truth_parses_tab_rows() {
        let text = "# version\ttest\nv1\tT::a()\nv1\tT::b()\nv2\tT::a()\n";
        let gt = read_ground_truth(text.as_bytes()).unwrap();
        assert_eq!(gt.len(), 2);
        assert_eq!(gt["v1"], ids(&["T::a()", "T::b()"]));
        assert!(read_ground_truth("v1 no tab\n".as_bytes()).is_err());
    }

    #[test]
    fn external_outcomes_fold_runs_by_majority_vote() {
        let text = "v1\t1\t0.8\nv1\t1\t0.6\nv1\t0\t0.0\nv2\t1\nv2\t0\nv3\t0\t0.25\n";
        let rows = read_external_outcomes(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].detected);
        let acc = rows[0].accuracy.unwrap();
        assert!((acc - (0.8 + 0.6) / 3.0).abs() < 1e-12, "{acc}");
        // A 1-1 tie counts as detected.
        assert!(rows[1].detected);
        assert_eq!(rows[1].accuracy, None);
        assert!(!rows[2].detected);
        assert!(read_external_outcomes("v1\t2\n".as_bytes()).is_err());
        assert!(read_external_outcomes("v1\t1\t1.5\n".as_bytes()).is_err());
    }

    #[test]
    fn evaluate_walks_every_version() {
        let mut gt = BTreeMap::new();
        gt.insert("v1".to_string(), ids(&["T::a()", "T::b()"]));
        gt.insert("v2".to_string(), ids(&["T::c()"]));
        let suite = ids(&["T::a()", "T::b()"]);
        let report = evaluate(&gt, &suite, "cfg").unwrap();
        assert_eq!(report.n_versions, 2);
        close(report.mean_accuracy, 0.5);
        close(report.fdr, 0.5);
        assert_eq!(report.per_version[0].0, "v1");
        let rows = report_rows(&report);
        assert!(rows[0].detected);
        assert!(!rows[1].detected);
    }

    #[test]
    fn report_text_is_deterministic_key_value() {
        let mut gt = BTreeMap::new();
        gt.insert("v1".to_string(), ids(&["T::a()"]));
        let report = evaluate(&gt, &ids(&["T::a()"]), "chgfreq-avg-b50").unwrap();
        let a = rows(&[true, false]);
        let b = rows(&[false, false]);
        let cmp = compare(&a, &b).unwrap();
        let text = render_report(&[report], &[("chgfreq-avg-b50 vs baseline".to_string(), cmp)]);
        assert_eq!(
            text,
            "[config chgfreq-avg-b50]\n\
             n_versions = 1\n\
             mean_accuracy = 1.00000000000e0\n\
             fdr = 1.00000000000e0\n\
             version v1 accuracy = 1.00000000000e0\n\
             \n\
             [comparison chgfreq-avg-b50 vs baseline]\n\
             table = 1,1,0,2\n\
             p_value = 1.00000000000e0\n\
             odds_ratio = inf\n\
             fdr_a = 5.00000000000e-1\n\
             fdr_b = 0.00000000000e0\n\
             mean_accuracy_a = 5.00000000000e-1\n\
             mean_accuracy_b = 0.00000000000e0\n\
             \n"
        );
    }

    #[test]
    fn summary_csv_has_fixed_columns() {
        let rowset = vec![SummaryRow {
            config: "chgfreq-gmean-b50".to_string(),
            mean_accuracy: 2.0 / 3.0,
            fdr: 15.0 / 18.0,
            n_versions: 18,
            total_seconds: 1.25,
        }];
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &rowset).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "config,mean_accuracy,fdr,n_versions,total_seconds\n\
             chgfreq-gmean-b50,6.66666666667e-1,8.33333333333e-1,18,1.250\n"
        );
    }
}
