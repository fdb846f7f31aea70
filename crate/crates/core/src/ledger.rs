//! Change ledgers: per-signature change accounting mined from history.
//!
//! A raw ledger keys records by the signature text exactly as it appeared in
//! source, so each parameter-name variant of a method has its own row.
//! [`aggregate`] folds variants that normalize to the same [`MethodId`] into
//! one record: change commits, insertions, deletions, and modifications are
//! summed, while `total_commits` takes the maximum across variants (the
//! oldest variant has seen the most history, and the merged method has
//! existed at least that long).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::method::{normalize_signature, MethodId};

/// Change counts for one method over a mined history window.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChangeRecord {
    /// Commits in which the method changed at all.
    pub change_commits: u64,
    /// Commits in the history since the method first appeared.
    pub total_commits: u64,
    /// Pure inserted lines attributed to the method.
    pub insertions: u64,
    /// Pure deleted lines attributed to the method.
    pub deletions: u64,
    /// Paired insert/delete lines counted as in-place modifications.
    pub modifications: u64,
}

/// Ledger keyed by raw signature text.
pub type RawLedger = BTreeMap<String, ChangeRecord>;

/// Ledger keyed by normalized method identity.
pub type MethodLedger = BTreeMap<MethodId, ChangeRecord>;

/// Folds signature variants into per-method records.
///
/// Each raw key is normalized; records landing on the same id merge by
/// summing `change_commits`, `insertions`, `deletions`, and `modifications`
/// and taking the maximum `total_commits`. Raw ledgers whose keys are
/// already canonical pass through unchanged, so aggregating twice is safe.
pub fn aggregate(raw: &RawLedger) -> Result<MethodLedger> {
    let mut out = MethodLedger::new();
    for (signature, rec) in raw {
        let id = normalize_signature(signature)?;
        let merged = out.entry(id).or_default();
        merged.change_commits += rec.change_commits;
        merged.insertions += rec.insertions;
        merged.deletions += rec.deletions;
        merged.modifications += rec.modifications;
        merged.total_commits = merged.total_commits.max(rec.total_commits);
    }
    Ok(out)
}

const LEDGER_HEADER: &str =
    "raw_signature,change_commits,total_commits,insertions,deletions,modifications";

/// Writes ledger rows in key order. The signature column is always
/// double-quoted (signatures contain commas); numeric columns are bare.
pub fn write_ledger_csv<'a, W, I, S>(mut w: W, rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (S, &'a ChangeRecord)>,
    S: AsRef<str>,
{
    writeln!(w, "{LEDGER_HEADER}")?;
    for (signature, rec) in rows {
        writeln!(
            w,
            "\"{}\",{},{},{},{},{}",
            signature.as_ref().replace('"', "\"\""),
            rec.change_commits,
            rec.total_commits,
            rec.insertions,
            rec.deletions,
            rec.modifications,
        )?;
    }
    Ok(())
}

/// Reads a ledger CSV. Works for both raw and aggregated files; keys are
/// returned as written, so callers wanting method identities run the result
/// through [`aggregate`].
pub fn read_ledger_csv<R: Read>(r: R) -> Result<RawLedger> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    {
        let headers = reader.headers()?;
        let expected: Vec<&str> = LEDGER_HEADER.split(',').collect();
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(Error::Input(format!(
                "ledger header mismatch: expected `{LEDGER_HEADER}`, got `{}`",
                got.join(",")
            )));
        }
    }
    let mut out = RawLedger::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row?;
        if row.len() != 6 {
            return Err(Error::Input(format!(
                "ledger row {} has {} fields, expected 6",
                idx + 2,
                row.len()
            )));
        }
        let field = |i: usize| -> Result<u64> {
            row[i].trim().parse::<u64>().map_err(|e| {
                Error::Input(format!("ledger row {}: bad count `{}`: {e}", idx + 2, &row[i]))
            })
        };
        let rec = ChangeRecord {
            change_commits: field(1)?,
            total_commits: field(2)?,
            insertions: field(3)?,
            deletions: field(4)?,
            modifications: field(5)?,
        };
        if out.insert(row[0].to_string(), rec).is_some() {
            return Err(Error::Input(format!(
                "duplicate ledger signature `{}`",
                &row[0]
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(c: u64, t: u64, i: u64, d: u64, m: u64) -> ChangeRecord {
        ChangeRecord {
            change_commits: c,
            total_commits: t,
            insertions: i,
            deletions: d,
            modifications: m,
        }
    }

    #[test]
    fn aggregate_merges_renamed_parameter_variants() {
        // Two spellings of the same reader method: counts sum, the longer
        // history wins the total.
        let mut raw = RawLedger::new();
        raw.insert(
            "ExtendedBufferedReader::read(char [] buf, int off, int len)".into(),
            rec(4, 573, 91, 49, 0),
        );
        raw.insert(
            "ExtendedBufferedReader::read(char [] buffer, int off, int len)".into(),
            rec(2, 21, 32, 33, 0),
        );
        let merged = aggregate(&raw).unwrap();
        assert_eq!(merged.len(), 1);
        let (id, total) = merged.iter().next().unwrap();
        assert_eq!(id.rendered(), "ExtendedBufferedReader::read(char [], int, int)");
        assert_eq!(total.change_commits, 6);
        assert_eq!(total.total_commits, 573);
        assert_eq!(total.insertions, 123);
        assert_eq!(total.deletions, 82);
        assert_eq!(total.modifications, 0);
    }

    #[test]
    fn aggregate_is_idempotent() {
        let mut raw = RawLedger::new();
        raw.insert("A::f(int x)".into(), rec(3, 10, 5, 2, 1));
        raw.insert("A::f(long y)".into(), rec(1, 4, 1, 0, 0));
        raw.insert("B::g()".into(), rec(2, 10, 4, 4, 4));
        let once = aggregate(&raw).unwrap();
        let rekeyed: RawLedger = once
            .iter()
            .map(|(id, r)| (id.rendered().to_string(), r.clone()))
            .collect();
        let twice = aggregate(&rekeyed).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn aggregate_preserves_count_sums() {
        let mut raw = RawLedger::new();
        raw.insert("A::f(int x)".into(), rec(3, 10, 5, 2, 1));
        raw.insert("A::f(int y)".into(), rec(1, 4, 1, 0, 7));
        raw.insert("B::g()".into(), rec(2, 10, 4, 4, 4));
        let merged = aggregate(&raw).unwrap();
        let sum = |f: fn(&ChangeRecord) -> u64| -> (u64, u64) {
            (raw.values().map(f).sum(), merged.values().map(f).sum())
        };
        for f in [
            (|r: &ChangeRecord| r.change_commits) as fn(&ChangeRecord) -> u64,
            |r| r.insertions,
            |r| r.deletions,
            |r| r.modifications,
        ] {
            let (before, after) = sum(f);
            assert_eq!(before, after);
        }
    }

    #[test]
    fn csv_roundtrip_preserves_rows_and_quoting() {
        let mut raw = RawLedger::new();
        raw.insert("A::f(int x, char [] cs)".into(), rec(3, 10, 5, 2, 1));
        raw.insert("B::g()".into(), rec(1, 10, 9, 0, 0));
        let mut buf = Vec::new();
        write_ledger_csv(&mut buf, raw.iter().map(|(s, r)| (s.as_str(), r))).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "raw_signature,change_commits,total_commits,insertions,deletions,modifications"
        );
        assert_eq!(lines.next().unwrap(), "\"A::f(int x, char [] cs)\",3,10,5,2,1");
        assert_eq!(lines.next().unwrap(), "\"B::g()\",1,10,9,0,0");
        let back = read_ledger_csv(&buf[..]).unwrap();
        assert_eq!(back, raw);
    }

    #[test]
    fn read_rejects_wrong_header_and_duplicates() {
        let wrong = "signature,a,b,c,d,e\n\"A::f()\",1,2,3,4,5\n";
        assert!(read_ledger_csv(wrong.as_bytes()).is_err());
        let dup = format!(
            "{LEDGER_HEADER}\n\"A::f()\",1,2,3,4,5\n\"A::f()\",1,2,3,4,5\n"
        );
        assert!(read_ledger_csv(dup.as_bytes()).is_err());
    }

    #[test]
    fn read_rejects_short_rows_and_bad_counts() {
        let short = format!("{LEDGER_HEADER}\n\"A::f()\",1,2,3\n");
        assert!(read_ledger_csv(short.as_bytes()).is_err());
        let bad = format!("{LEDGER_HEADER}\n\"A::f()\",1,2,three,4,5\n");
        assert!(read_ledger_csv(bad.as_bytes()).is_err());
    }
}
