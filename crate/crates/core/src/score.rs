//! Test scoring and budgeted suite selection.
//!
//! Each test's score aggregates the change-proneness values of its
//! dependency set under one of four measures; methods absent from the CP
//! table contribute 0. The ranking orders by score descending with ties
//! broken by rendered test id, and selection keeps the top `ceil(budget*n)`
//! entries.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use crate::cp::{format_cp_value, CpMetric, CpTable};
use crate::error::{Error, Result};
use crate::graph::DependencySet;
use crate::method::MethodId;

/// Aggregation measure over a dependency set's CP values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Measure {
    Avg,
    GMean,
    HMean,
    Median,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::Avg, Measure::GMean, Measure::HMean, Measure::Median];

    pub fn label(self) -> &'static str {
        match self {
            Measure::Avg => "avg",
            Measure::GMean => "gmean",
            Measure::HMean => "hmean",
            Measure::Median => "median",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Measure> {
        match s.trim().to_ascii_lowercase().as_str() {
            "avg" => Ok(Measure::Avg),
            "gmean" => Ok(Measure::GMean),
            "hmean" => Ok(Measure::HMean),
            "median" => Ok(Measure::Median),
            other => Err(Error::Input(format!(
                "unknown measure `{other}` (expected avg, gmean, hmean, median)"
            ))),
        }
    }
}

/// One test's aggregated score under a (metric, measure) configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct TestScore {
    pub test: MethodId,
    pub score: f64,
    pub dependency_count: usize,
    pub measure: Measure,
    pub metric: CpMetric,
}

/// A budgeted selection plus the full ranking it was cut from.
#[derive(Clone, Debug)]
pub struct MinimizedSuite {
    pub budget: f64,
    /// Selected test ids in rank order.
    pub selected: Vec<MethodId>,
    /// The complete ranking, selected entries first.
    pub scores: Vec<TestScore>,
}

/// Aggregates non-negative values under `measure`.
///
/// Values are summed in ascending order, so the result depends only on
/// the value multiset, never on dependency traversal order. A
/// single-element list returns that element unchanged for every
/// measure. GMean runs in log-space; GMean and HMean of any list
/// containing 0 are 0, the limiting value.
pub fn aggregate_score(values: &[f64], measure: Measure) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain(
            "cannot aggregate an empty value list".to_string(),
        ));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Domain(
            "aggregation values must be finite and non-negative".to_string(),
        ));
    }
    if values.len() == 1 {
        return Ok(values[0]);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let out = match measure {
        Measure::Avg => sorted.iter().sum::<f64>() / n,
        Measure::GMean => {
            if sorted[0] == 0.0 {
                0.0
            } else {
                (sorted.iter().map(|v| v.ln()).sum::<f64>() / n).exp()
            }
        }
        Measure::HMean => {
            if sorted[0] == 0.0 {
                0.0
            } else {
                n / sorted.iter().map(|v| 1.0 / v).sum::<f64>()
            }
        }
        Measure::Median => {
            let mid = sorted.len() / 2;
            if sorted.len() % 2 == 1 {
                sorted[mid]
            } else {
                (sorted[mid - 1] + sorted[mid]) / 2.0
            }
        }
    };
    Ok(out)
}

/// Scores every dependency set against the CP table and returns the ranking:
/// score descending, ties by rendered test id ascending.
pub fn score_tests(
    cp: &CpTable,
    deps: &[DependencySet],
    measure: Measure,
) -> Result<Vec<TestScore>> {
    let mut scores = Vec::with_capacity(deps.len());
    for dep in deps {
        let values: Vec<f64> = dep
            .methods
            .iter()
            .map(|m| cp.values.get(m).copied().unwrap_or(0.0))
            .collect();
        let score = aggregate_score(&values, measure)?;
        scores.push(TestScore {
            test: dep.test.clone(),
            score,
            dependency_count: dep.methods.len(),
            measure,
            metric: cp.metric,
        });
    }
    sort_ranking(&mut scores);
    Ok(scores)
}

fn sort_ranking(scores: &mut [TestScore]) {
    scores.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.test.rendered().cmp(b.test.rendered()))
    });
}

/// Number of tests a budget keeps out of `n`: the ceiling of `budget*n`,
/// except that products within 1e-9 of an integer round to it, so exact
/// fractions like 0.1 of 10 do not overshoot from floating-point noise.
pub fn budget_size(budget: f64, n: usize) -> usize {
    let product = budget * n as f64;
    let nearest = product.round();
    let k = if (product - nearest).abs() < 1e-9 {
        nearest as usize
    } else {
        product.ceil() as usize
    };
    k.clamp(usize::from(n > 0), n)
}

/// Cuts a ranking at the budget.
pub fn select(scores: &[TestScore], budget: f64) -> Result<MinimizedSuite> {
    if !budget.is_finite() || budget <= 0.0 || budget > 1.0 {
        return Err(Error::Domain(format!(
            "budget must lie in (0, 1], got {budget}"
        )));
    }
    let mut ranked = scores.to_vec();
    sort_ranking(&mut ranked);
    let k = budget_size(budget, ranked.len());
    let selected = ranked.iter().take(k).map(|s| s.test.clone()).collect();
    Ok(MinimizedSuite {
        budget,
        selected,
        scores: ranked,
    })
}

pub const RANKING_HEADER: &str = "rank,test_id,score,dependency_count,measure,metric";

/// Ranking CSV: `rank,test_id,score,dependency_count,measure,metric`, test
/// id always quoted.
pub fn write_ranking_csv<W: Write>(mut w: W, scores: &[TestScore]) -> Result<()> {
    writeln!(w, "{RANKING_HEADER}")?;
    for (i, s) in scores.iter().enumerate() {
        writeln!(
            w,
            "{},\"{}\",{},{},{},{}",
            i + 1,
            s.test.rendered().replace('"', "\"\""),
            format_cp_value(s.score),
            s.dependency_count,
            s.measure.label(),
            s.metric.label()
        )?;
    }
    Ok(())
}

/// Minimized suite: one rendered test id per line, rank order.
pub fn write_suite<W: Write>(mut w: W, suite: &MinimizedSuite) -> Result<()> {
    for id in &suite.selected {
        writeln!(w, "{}", id.rendered())?;
    }
    Ok(())
}

/// Reads a suite file back into method ids; blank lines are skipped.
pub fn read_suite<R: Read>(r: R) -> Result<Vec<MethodId>> {
    let mut out = Vec::new();
    for line in BufReader::new(r).lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(MethodId::parse(line)?);
    }
    Ok(out)
}

/// Scores and selects for every requested (metric, measure) pair over one
/// set of dependency sets.
pub fn minimize_all(
    tables: &[CpTable],
    deps: &[DependencySet],
    measures: &[Measure],
    budget: f64,
) -> Result<BTreeMap<(CpMetric, Measure), MinimizedSuite>> {
    let mut out = BTreeMap::new();
    for table in tables {
        for &measure in measures {
            let scores = score_tests(table, deps, measure)?;
            out.insert((table.metric, measure), select(&scores, budget)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp::CpMetric;

    fn id(text: &str) -> MethodId {
        MethodId::parse(text).unwrap()
    }

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn measure_examples() {
        close(aggregate_score(&[0.25, 1.0], Measure::GMean).unwrap(), 0.5);
        close(aggregate_score(&[0.2, 0.4], Measure::Avg).unwrap(), 0.3);
        assert_eq!(aggregate_score(&[0.0, 0.9], Measure::HMean).unwrap(), 0.0);
        assert_eq!(aggregate_score(&[0.0, 0.9], Measure::GMean).unwrap(), 0.0);
        close(
            aggregate_score(&[1.0, 3.0, 5.0, 7.0], Measure::Median).unwrap(),
            4.0,
        );
        close(
            aggregate_score(&[5.0, 1.0, 3.0], Measure::Median).unwrap(),
            3.0,
        );
        close(
            aggregate_score(&[2.0, 8.0], Measure::HMean).unwrap(),
            3.2,
        );
    }

    #[test]
    fn single_element_returns_the_element_exactly() {
        let v = 0.1 + 0.2;
        for m in Measure::ALL {
            assert_eq!(aggregate_score(&[v], m).unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn empty_and_invalid_inputs_are_domain_errors() {
        assert!(matches!(
            aggregate_score(&[], Measure::Avg),
            Err(Error::Domain(_))
        ));
        assert!(aggregate_score(&[-0.1], Measure::Avg).is_err());
        assert!(aggregate_score(&[f64::NAN], Measure::Avg).is_err());
    }

    #[test]
    fn dominance_holds_for_all_measures() {
        let lo = [0.1, 0.2, 0.3];
        let hi = [0.2, 0.2, 0.5];
        for m in Measure::ALL {
            let a = aggregate_score(&hi, m).unwrap();
            let b = aggregate_score(&lo, m).unwrap();
            assert!(a >= b, "{m}: {a} < {b}");
        }
    }

    fn table(entries: &[(&str, f64)]) -> CpTable {
        CpTable {
            metric: CpMetric::ChgFreq,
            values: entries.iter().map(|(k, v)| (id(k), *v)).collect(),
        }
    }

    fn deps(test: &str, methods: &[&str]) -> DependencySet {
        let mut all = vec![id(test)];
        all.extend(methods.iter().map(|m| id(m)));
        DependencySet {
            test: id(test),
            methods: all,
        }
    }

    #[test]
    fn scores_average_dependency_cp_values() {
        let cp = table(&[("M::m1()", 0.5), ("M::m2()", 0.1), ("T::t()", 0.0)]);
        let d = vec![deps("T::t()", &["M::m1()", "M::m2()"])];
        let scored = score_tests(&cp, &d, Measure::Avg).unwrap();
        close(scored[0].score, 0.2);
        assert_eq!(scored[0].dependency_count, 3);
    }

    #[test]
    fn missing_methods_contribute_zero() {
        let cp = table(&[("M::known()", 0.6)]);
        let d = vec![deps("T::t()", &["M::known()", "M::ghost()"])];
        let scored = score_tests(&cp, &d, Measure::Avg).unwrap();
        close(scored[0].score, 0.2);
        for m in Measure::ALL {
            let all_ghost = vec![deps("T::t()", &["M::ghost()"])];
            let s = score_tests(&cp, &all_ghost, m).unwrap();
            assert_eq!(s[0].score, 0.0);
        }
    }

    #[test]
    fn ranking_sorts_by_score_then_id() {
        let cp = table(&[("T::a()", 0.3), ("T::b()", 0.9), ("T::c()", 0.3)]);
        let d = vec![deps("T::c()", &[]), deps("T::a()", &[]), deps("T::b()", &[])];
        let scored = score_tests(&cp, &d, Measure::Avg).unwrap();
        let order: Vec<&str> = scored.iter().map(|s| s.test.rendered()).collect();
        assert_eq!(order, vec!["T::b()", "T::a()", "T::c()"]);
    }

    fn dummy_scores(n: usize) -> Vec<TestScore> {
        (0..n)
            .map(|i| TestScore {
                test: id(&format!("T::t{i:04}()")),
                score: 1.0 / (i + 1) as f64,
                dependency_count: 1,
                measure: Measure::Avg,
                metric: CpMetric::ChgFreq,
            })
            .collect()
    }

    #[test]
    fn selection_sizes_follow_the_ceiling_rule() {
        assert_eq!(select(&dummy_scores(10), 0.5).unwrap().selected.len(), 5);
        assert_eq!(select(&dummy_scores(7), 0.5).unwrap().selected.len(), 4);
        assert_eq!(select(&dummy_scores(6), 1.0).unwrap().selected.len(), 6);
        // 0.1 * 10 is 1.0000000000000002 in floating point; a naive ceiling
        // would keep 2.
        assert_eq!(select(&dummy_scores(10), 0.1).unwrap().selected.len(), 1);
    }

    #[test]
    fn selection_size_matches_exact_ceiling_for_all_small_suites() {
        for n in 1..=1000usize {
            let scores = dummy_scores(n);
            for (p, q, budget) in [(1usize, 4usize, 0.25), (1, 2, 0.5), (3, 4, 0.75)] {
                let want = (p * n + q - 1) / q;
                let got = select(&scores, budget).unwrap().selected.len();
                assert_eq!(got, want, "n={n} budget={budget}");
            }
        }
    }

    #[test]
    fn invalid_budgets_are_domain_errors() {
        let scores = dummy_scores(3);
        for b in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(select(&scores, b), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn selected_scores_dominate_unselected() {
        let suite = select(&dummy_scores(9), 0.5).unwrap();
        let cut = suite.selected.len();
        let min_in = suite.scores[..cut]
            .iter()
            .map(|s| s.score)
            .fold(f64::INFINITY, f64::min);
        let max_out = suite.scores[cut..]
            .iter()
            .map(|s| s.score)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(min_in >= max_out);
    }

    #[test]
    fn scaling_cp_by_a_constant_preserves_the_ranking() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let methods: Vec<String> = (0..12).map(|i| format!("M::m{i}()")).collect();
        let base: Vec<(String, f64)> = methods.iter().map(|m| (m.clone(), next())).collect();
        let dep_sets: Vec<DependencySet> = (0..6)
            .map(|t| {
                let picks: Vec<&str> = methods
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| (t + i) % 3 != 0)
                    .map(|(_, m)| m.as_str())
                    .collect();
                deps(&format!("T::t{t}()"), &picks)
            })
            .collect();
        for scale in [8.0, 0.25] {
            for measure in Measure::ALL {
                let cp1 = CpTable {
                    metric: CpMetric::ChgFreq,
                    values: base.iter().map(|(m, v)| (id(m), *v)).collect(),
                };
                let cp2 = CpTable {
                    metric: CpMetric::ChgFreq,
                    values: base.iter().map(|(m, v)| (id(m), *v * scale)).collect(),
                };
                let r1: Vec<String> = score_tests(&cp1, &dep_sets, measure)
                    .unwrap()
                    .iter()
                    .map(|s| s.test.rendered().to_string())
                    .collect();
                let r2: Vec<String> = score_tests(&cp2, &dep_sets, measure)
                    .unwrap()
                    .iter()
                    .map(|s| s.test.rendered().to_string())
                    .collect();
                assert_eq!(r1, r2, "measure {measure} scale {scale}");
            }
        }
    }

    #[test]
    fn ranking_csv_is_stable_text() {
        let cp = table(&[("T::a()", 0.25), ("T::b()", 0.5)]);
        let d = vec![deps("T::a()", &[]), deps("T::b()", &[])];
        let scored = score_tests(&cp, &d, Measure::GMean).unwrap();
        let mut buf = Vec::new();
        write_ranking_csv(&mut buf, &scored).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "rank,test_id,score,dependency_count,measure,metric\n\
             1,\"T::b()\",5.00000000000e-1,1,gmean,chgfreq\n\
             2,\"T::a()\",2.50000000000e-1,1,gmean,chgfreq\n"
        );
    }

    #[test]
    fn suite_file_roundtrips() {
        let suite = select(&dummy_scores(4), 0.5).unwrap();
        let mut buf = Vec::new();
        write_suite(&mut buf, &suite).unwrap();
        let back = read_suite(&buf[..]).unwrap();
        assert_eq!(back, suite.selected);
    }

    #[test]
    fn minimize_all_covers_every_configuration() {
        let cp_freq = table(&[("T::a()", 0.3), ("T::b()", 0.6)]);
        let mut cp_ext = cp_freq.clone();
        cp_ext.metric = CpMetric::ChgExt;
        let d = vec![deps("T::a()", &[]), deps("T::b()", &[])];
        let suites = minimize_all(&[cp_freq, cp_ext], &d, &Measure::ALL, 0.5).unwrap();
        assert_eq!(suites.len(), 8);
        for suite in suites.values() {
            assert_eq!(suite.selected.len(), 1);
        }
    }
}
