use crate::data::SurvivalRecord;
use crate::error::{Error, Result};

/// Cumulative-case / dynamic-control ROC at a fixed horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeRoc {
    pub horizon: f64,
    /// Descending; the first point is `+∞` (nothing called positive).
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
    pub n_cases: usize,
    pub n_controls: usize,
}

/// Cases had an event at or before `horizon`; controls were still under
/// observation after it. Subjects censored at or before the horizon are
/// dropped. A subject is called positive when its risk is at least the
/// threshold, and the area comes from the trapezoid rule over the resulting
/// step curve (ties between a case and a control count one half).
pub fn time_dependent_roc(risks: &[f64], records: &[SurvivalRecord], horizon: f64) -> Result<TimeRoc> {
    if risks.len() != records.len() {
        return Err(Error::Shape(format!("{} risks for {} records", risks.len(), records.len())));
    }
    let mut labelled: Vec<(f64, bool)> = risks
        .iter()
        .zip(records)
        .filter_map(|(&r, rec)| {
            if rec.time <= horizon && rec.event {
                Some((r, true))
            } else if rec.time > horizon {
                Some((r, false))
            } else {
                None
            }
        })
        .collect();
    let n_cases = labelled.iter().filter(|x| x.1).count();
    let n_controls = labelled.len() - n_cases;
    if n_cases == 0 || n_controls == 0 {
        return Err(Error::Data(format!(
            "horizon {horizon}: {n_cases} cases and {n_controls} controls, need both"
        )));
    }
    labelled.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut thresholds = vec![f64::INFINITY];
    let mut fpr = vec![0.0];
    let mut tpr = vec![0.0];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area, in units of 1 / (cases · controls)
    let mut area2: u64 = 0;
    let mut i = 0;
    while i < labelled.len() {
        let thr = labelled[i].0;
        let (mut dtp, mut dfp) = (0u64, 0u64);
        while i < labelled.len() && labelled[i].0 == thr {
            if labelled[i].1 {
                dtp += 1;
            } else {
                dfp += 1;
            }
            i += 1;
        }
        area2 += dfp * (2 * tp + dtp);
        tp += dtp;
        fp += dfp;
        thresholds.push(thr);
        tpr.push(tp as f64 / n_cases as f64);
        fpr.push(fp as f64 / n_controls as f64);
    }
    let auc = area2 as f64 / (2 * n_cases as u64 * n_controls as u64) as f64;
    Ok(TimeRoc {
        horizon,
        thresholds,
        fpr,
        tpr,
        auc,
        n_cases,
        n_controls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(v: &[(f64, bool)]) -> Vec<SurvivalRecord> {
        v.iter()
            .enumerate()
            .map(|(i, &(t, e))| SurvivalRecord::new(format!("P{i}"), t, e))
            .collect()
    }

    #[test]
    fn perfect_separation() {
        let r = recs(&[(1.0, true), (2.0, true), (5.0, false), (6.0, true), (1.5, false)]);
        let roc = time_dependent_roc(&[9.0, 8.0, 1.0, 2.0, 100.0], &r, 3.0).unwrap();
        assert_eq!(roc.n_cases, 2);
        assert_eq!(roc.n_controls, 2);
        assert_eq!(roc.auc, 1.0);
        assert_eq!(*roc.tpr.last().unwrap(), 1.0);
        assert_eq!(*roc.fpr.last().unwrap(), 1.0);
    }

    #[test]
    fn constant_risk_is_half() {
        let r = recs(&[(1.0, true), (5.0, false), (6.0, true)]);
        let roc = time_dependent_roc(&[1.0; 3], &r, 3.0).unwrap();
        assert_eq!(roc.auc, 0.5);
        assert_eq!(roc.fpr, vec![0.0, 1.0]);
    }

    #[test]
    fn fpr_is_monotone() {
        let r = recs(&[(1.0, true), (5.0, false), (6.0, true), (2.0, true), (7.0, true), (9.0, false)]);
        let roc = time_dependent_roc(&[0.3, 0.9, 0.1, 0.5, 0.5, 0.2], &r, 3.0).unwrap();
        assert!(roc.fpr.windows(2).all(|w| w[0] <= w[1]));
        assert!(roc.tpr.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn needs_cases_and_controls() {
        let r = recs(&[(1.0, true), (2.0, true)]);
        assert!(time_dependent_roc(&[1.0, 2.0], &r, 3.0).is_err());
    }
}
