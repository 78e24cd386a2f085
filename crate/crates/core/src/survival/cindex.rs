use crate::data::SurvivalRecord;
use crate::error::{Error, Result};

/// Pair counts behind a concordance index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Concordance {
    pub concordant: u64,
    pub tied_risk: u64,
    pub comparable: u64,
}

impl Concordance {
    /// `(concordant + tied/2) / comparable`.
    pub fn index(&self) -> f64 {
        (2 * self.concordant + self.tied_risk) as f64 / (2 * self.comparable) as f64
    }
}

struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self { tree: vec![0; n + 1] }
    }

    fn add(&mut self, i: usize) {
        let mut i = i + 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted ranks `< i`.
    fn prefix(&self, i: usize) -> u64 {
        let mut i = i;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Harrell pair counts in `O(n log n)`.
///
/// A pair is comparable when the subject with the shorter observed time had
/// an event; at equal times, an event paired with a censored subject is
/// comparable and two events are not. The shorter-lived subject holding the
/// strictly higher risk is concordant; equal risks are tied.
pub fn concordance(risks: &[f64], records: &[SurvivalRecord]) -> Result<Concordance> {
    if risks.len() != records.len() {
        return Err(Error::Shape(format!(
            "{} risks for {} records",
            risks.len(),
            records.len()
        )));
    }
    if risks.iter().any(|r| !r.is_finite()) {
        return Err(Error::Numeric("non-finite risk score".into()));
    }
    let n = risks.len();
    let mut sorted: Vec<f64> = risks.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let rank: Vec<usize> = risks
        .iter()
        .map(|r| sorted.partition_point(|v| v < r))
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| records[b].time.total_cmp(&records[a].time));
    let mut tree = Fenwick::new(sorted.len());
    let mut inserted = 0u64;
    let mut out = Concordance {
        concordant: 0,
        tied_risk: 0,
        comparable: 0,
    };
    let mut start = 0;
    while start < n {
        let t = records[order[start]].time;
        let mut end = start;
        while end < n && records[order[end]].time == t {
            end += 1;
        }
        let group = &order[start..end];
        for &j in group.iter().filter(|&&j| !records[j].event) {
            tree.add(rank[j]);
            inserted += 1;
        }
        for &i in group.iter().filter(|&&i| records[i].event) {
            let below = tree.prefix(rank[i]);
            let at = tree.prefix(rank[i] + 1) - below;
            out.concordant += below;
            out.tied_risk += at;
            out.comparable += inserted;
        }
        for &i in group.iter().filter(|&&i| records[i].event) {
            tree.add(rank[i]);
            inserted += 1;
        }
        start = end;
    }
    Ok(out)
}

/// Harrell's C-index of `risks` against `records` (higher risk should mean
/// shorter survival).
pub fn concordance_index(risks: &[f64], records: &[SurvivalRecord]) -> Result<f64> {
    let c = concordance(risks, records)?;
    if c.comparable == 0 {
        return Err(Error::Data("no comparable pairs for the C-index".into()));
    }
    Ok(c.index())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(times: &[f64], events: &[bool]) -> Vec<SurvivalRecord> {
        times
            .iter()
            .zip(events)
            .enumerate()
            .map(|(i, (&t, &e))| SurvivalRecord::new(format!("P{i}"), t, e))
            .collect()
    }

    #[test]
    fn perfect_concordance() {
        let r = recs(&[1.0, 2.0, 3.0, 4.0], &[true; 4]);
        assert_eq!(concordance_index(&[4.0, 3.0, 2.0, 1.0], &r).unwrap(), 1.0);
        assert_eq!(concordance_index(&[1.0, 2.0, 3.0, 4.0], &r).unwrap(), 0.0);
    }

    #[test]
    fn all_ties_is_half() {
        let r = recs(&[1.0, 5.0, 3.0, 4.0], &[true, false, true, true]);
        assert_eq!(concordance_index(&[0.7; 4], &r).unwrap(), 0.5);
    }

    #[test]
    fn censoring_and_time_ties() {
        // pairs: (0 event t=2, 1 censored t=2) comparable; (2 event t=2) vs 0 not;
        // 3 censored at t=1 is never the shorter-lived event
        let r = recs(&[2.0, 2.0, 2.0, 1.0], &[true, false, true, false]);
        let c = concordance(&[1.0, 0.0, 0.0, 5.0], &r).unwrap();
        assert_eq!(c.comparable, 2);
        assert_eq!(c.concordant, 1);
        assert_eq!(c.tied_risk, 1);
    }

    #[test]
    fn no_comparable_pairs_errors() {
        let r = recs(&[1.0, 2.0], &[false, false]);
        assert!(concordance_index(&[1.0, 2.0], &r).is_err());
    }
}
