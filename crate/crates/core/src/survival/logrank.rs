use statrs::function::erf::erfc;

use crate::data::SurvivalRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRank {
    pub chi_square: f64,
    pub p_value: f64,
    pub observed_a: f64,
    pub expected_a: f64,
}

/// Upper tail of the chi-square distribution with one degree of freedom.
pub fn chi2_1_sf(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        erfc((x / 2.0).sqrt())
    }
}

/// Two-group log-rank test.
///
/// At every distinct event time the hypergeometric mean and variance of the
/// group-A death count are accumulated; the statistic is
/// `(O_A − E_A)² / V` with one degree of freedom.
pub fn log_rank(group_a: &[SurvivalRecord], group_b: &[SurvivalRecord]) -> Result<LogRank> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::Data("log-rank test needs two non-empty groups".into()));
    }
    let mut all: Vec<(f64, bool, bool)> = group_a
        .iter()
        .map(|r| (r.time, r.event, true))
        .chain(group_b.iter().map(|r| (r.time, r.event, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = all.len();
    let mut at_risk_a = group_a.len() as f64;
    let mut at_risk = n as f64;
    let (mut observed, mut expected, mut variance) = (0.0, 0.0, 0.0);
    let mut i = 0;
    while i < n {
        let t = all[i].0;
        let (mut d, mut d_a, mut leaving, mut leaving_a) = (0.0, 0.0, 0.0, 0.0);
        while i < n && all[i].0 == t {
            let (_, event, in_a) = all[i];
            if event {
                d += 1.0;
                if in_a {
                    d_a += 1.0;
                }
            }
            leaving += 1.0;
            if in_a {
                leaving_a += 1.0;
            }
            i += 1;
        }
        if d > 0.0 {
            let frac = at_risk_a / at_risk;
            observed += d_a;
            expected += d * frac;
            if at_risk > 1.0 {
                variance += d * frac * (1.0 - frac) * (at_risk - d) / (at_risk - 1.0);
            }
        }
        at_risk -= leaving;
        at_risk_a -= leaving_a;
    }
    let chi_square = if variance > 0.0 {
        (observed - expected).powi(2) / variance
    } else {
        0.0
    };
    Ok(LogRank {
        chi_square,
        p_value: chi2_1_sf(chi_square),
        observed_a: observed,
        expected_a: expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(prefix: &str, v: &[(f64, bool)]) -> Vec<SurvivalRecord> {
        v.iter()
            .enumerate()
            .map(|(i, &(t, e))| SurvivalRecord::new(format!("{prefix}{i}"), t, e))
            .collect()
    }

    #[test]
    fn identical_groups() {
        let a = recs("a", &[(1.0, true), (3.0, false), (4.0, true), (6.0, true)]);
        let b = recs("b", &[(1.0, true), (3.0, false), (4.0, true), (6.0, true)]);
        let lr = log_rank(&a, &b).unwrap();
        assert!(lr.chi_square.abs() < 1e-12);
        assert!((lr.p_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn swapping_labels_is_symmetric() {
        let a = recs("a", &[(1.0, true), (2.0, true), (5.0, false), (7.0, true)]);
        let b = recs("b", &[(3.0, true), (8.0, true), (9.0, false), (11.0, true), (12.0, false)]);
        let x = log_rank(&a, &b).unwrap();
        let y = log_rank(&b, &a).unwrap();
        assert!((x.chi_square - y.chi_square).abs() < 1e-12);
    }

    #[test]
    fn chi2_tail_reference_points() {
        // 3.841459 is the 95th percentile of chi-square(1)
        assert!((chi2_1_sf(3.841_458_820_694_124) - 0.05).abs() < 1e-9);
        assert_eq!(chi2_1_sf(0.0), 1.0);
    }

    #[test]
    fn empty_group_errors() {
        let a = recs("a", &[(1.0, true)]);
        assert!(log_rank(&a, &[]).is_err());
    }
}
