//! Change-proneness metrics derived from the aggregated ledger.
//!
//! Two metrics are supported:
//!
//! - change frequency: `change_commits / total_commits`, the fraction of a
//!   method's lifetime commits that touched it, always in `[0, 1]`
//! - change extent: `(insertions + deletions + modifications) /
//!   total_commits`, average churn per lifetime commit, unbounded above

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ledger::{ChangeRecord, MethodLedger};
use crate::method::MethodId;

/// Which change-proneness formula to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CpMetric {
    ChgFreq,
    ChgExt,
}

impl CpMetric {
    pub const ALL: [CpMetric; 2] = [CpMetric::ChgFreq, CpMetric::ChgExt];

    pub fn label(self) -> &'static str {
        match self {
            CpMetric::ChgFreq => "chgfreq",
            CpMetric::ChgExt => "chgext",
        }
    }
}

impl fmt::Display for CpMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CpMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<CpMetric> {
        match s.trim().to_ascii_lowercase().as_str() {
            "chgfreq" => Ok(CpMetric::ChgFreq),
            "chgext" => Ok(CpMetric::ChgExt),
            other => Err(Error::Input(format!(
                "unknown change-proneness metric `{other}` (expected chgfreq or chgext)"
            ))),
        }
    }
}

/// Fraction of lifetime commits in which the method changed.
pub fn chg_freq(rec: &ChangeRecord) -> Result<f64> {
    if rec.total_commits == 0 {
        return Err(Error::Domain(
            "chg_freq needs total_commits >= 1".to_string(),
        ));
    }
    if rec.change_commits > rec.total_commits {
        return Err(Error::Domain(format!(
            "change_commits {} exceeds total_commits {}",
            rec.change_commits, rec.total_commits
        )));
    }
    Ok(rec.change_commits as f64 / rec.total_commits as f64)
}

/// Total churn: insertions + deletions + modifications.
pub fn code_churn(rec: &ChangeRecord) -> u64 {
    rec.insertions + rec.deletions + rec.modifications
}

/// Average churn per lifetime commit.
pub fn chg_ext(rec: &ChangeRecord) -> Result<f64> {
    if rec.total_commits == 0 {
        return Err(Error::Domain(
            "chg_ext needs total_commits >= 1".to_string(),
        ));
    }
    Ok(code_churn(rec) as f64 / rec.total_commits as f64)
}

/// Per-method values of one metric.
#[derive(Clone, Debug, PartialEq)]
pub struct CpTable {
    pub metric: CpMetric,
    pub values: BTreeMap<MethodId, f64>,
}

/// Evaluates one metric over every ledger row.
pub fn cp_table(ledger: &MethodLedger, metric: CpMetric) -> Result<CpTable> {
    let mut values = BTreeMap::new();
    for (id, rec) in ledger {
        let v = match metric {
            CpMetric::ChgFreq => chg_freq(rec)?,
            CpMetric::ChgExt => chg_ext(rec)?,
        };
        values.insert(id.clone(), v);
    }
    Ok(CpTable { metric, values })
}

/// Formats with 12 significant digits, the precision CP files carry.
pub fn format_cp_value(v: f64) -> String {
    format!("{v:.11e}")
}

const CP_HEADER: &str = "method_id,metric,value";

/// Writes a CP table as `method_id,metric,value` rows in id order.
pub fn write_cp_csv<W: Write>(mut w: W, table: &CpTable) -> Result<()> {
    writeln!(w, "{CP_HEADER}")?;
    for (id, v) in &table.values {
        writeln!(
            w,
            "\"{}\",{},{}",
            id.rendered().replace('"', "\"\""),
            table.metric,
            format_cp_value(*v),
        )?;
    }
    Ok(())
}

/// Reads a CP table, requiring a single consistent metric column.
pub fn read_cp_csv<R: Read>(r: R) -> Result<CpTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    {
        let headers = reader.headers()?;
        let got: Vec<&str> = headers.iter().collect();
        if got != ["method_id", "metric", "value"] {
            return Err(Error::Input(format!(
                "cp header mismatch: expected `{CP_HEADER}`, got `{}`",
                got.join(",")
            )));
        }
    }
    let mut metric: Option<CpMetric> = None;
    let mut values = BTreeMap::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row?;
        if row.len() != 3 {
            return Err(Error::Input(format!(
                "cp row {} has {} fields, expected 3",
                idx + 2,
                row.len()
            )));
        }
        let id = MethodId::parse(&row[0])?;
        let m: CpMetric = row[1].parse()?;
        match metric {
            None => metric = Some(m),
            Some(prev) if prev != m => {
                return Err(Error::Input(format!(
                    "cp file mixes metrics {prev} and {m}"
                )));
            }
            _ => {}
        }
        let v: f64 = row[2].trim().parse().map_err(|e| {
            Error::Input(format!("cp row {}: bad value `{}`: {e}", idx + 2, &row[2]))
        })?;
        if !v.is_finite() {
            return Err(Error::Input(format!(
                "cp row {}: non-finite value",
                idx + 2
            )));
        }
        values.insert(id, v);
    }
    let metric = metric.ok_or_else(|| Error::Input("cp file has no rows".to_string()))?;
    Ok(CpTable { metric, values })
}
