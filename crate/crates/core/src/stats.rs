//! Fisher's exact test and the odds ratio for 2x2 contingency tables.

use crate::error::{Error, Result};

/// Tables whose log-probability is within this of the observed one count as
/// ties. Log-factorial rounding perturbs probabilities by well under 1e-13
/// at the table sizes we compare, while genuinely distinct hypergeometric
/// probabilities with total count <= 40 differ in log by more than 7e-12,
/// so this threshold separates the two cleanly.
const TIE_EPS: f64 = 1e-12;

/// Cumulative table of ln(k!).
struct LnFact(Vec<f64>);

impl LnFact {
    fn new(n: usize) -> LnFact {
        let mut t = Vec::with_capacity(n + 1);
        t.push(0.0);
        let mut acc = 0.0f64;
        for k in 1..=n {
            acc += (k as f64).ln();
            t.push(acc);
        }
        LnFact(t)
    }

    fn ln_choose(&self, n: u64, k: u64) -> f64 {
        self.0[n as usize] - self.0[k as usize] - self.0[(n - k) as usize]
    }
}

/// Two-sided Fisher's exact test on `[[a, b], [c, d]]`.
///
/// Sums the hypergeometric probabilities of every table sharing the
/// observed marginals whose probability does not exceed the observed
/// table's, the standard two-sided definition.
pub fn fisher_exact(table: [[u64; 2]; 2]) -> Result<f64> {
    let [[a, b], [c, d]] = table;
    let n = a + b + c + d;
    if n == 0 {
        return Err(Error::Domain(
            "contingency table is all zero".to_string(),
        ));
    }
    let row1 = a + b;
    let row2 = c + d;
    let col1 = a + c;
    let lf = LnFact::new(n as usize);
    let ln_p = |x: u64| {
        lf.ln_choose(row1, x) + lf.ln_choose(row2, col1 - x) - lf.ln_choose(n, col1)
    };
    let lo = col1.saturating_sub(row2);
    let hi = row1.min(col1);
    let observed = ln_p(a);
    let mut total = 0.0f64;
    for x in lo..=hi {
        let lp = ln_p(x);
        if lp <= observed + TIE_EPS {
            total += lp.exp();
        }
    }
    Ok(total.min(1.0))
}

/// Odds ratio `(a*d)/(b*c)`. A zero denominator with a positive numerator
/// is +infinity; both products zero leaves the ratio undefined.
pub fn odds_ratio(table: [[u64; 2]; 2]) -> Result<f64> {
    let [[a, b], [c, d]] = table;
    let ad = a as u128 * d as u128;
    let bc = b as u128 * c as u128;
    if ad == 0 && bc == 0 {
        return Err(Error::Domain(
            "odds ratio undefined: both diagonal products are zero".to_string(),
        ));
    }
    if bc == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(ad as f64 / bc as f64)
}
