use crate::data::SurvivalRecord;
use crate::error::{Error, Result};

/// Product-limit survival estimate evaluated at each distinct event time.
#[derive(Debug, Clone, PartialEq)]
pub struct KmCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
}

impl KmCurve {
    /// `S(t)`; 1 before the first event time.
    pub fn survival_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }
}

/// Kaplan-Meier estimate `S(t) = Π_{t_k <= t} (1 − d_k / r_k)`.
pub fn kaplan_meier(records: &[SurvivalRecord]) -> Result<KmCurve> {
    if records.is_empty() {
        return Err(Error::Data("Kaplan-Meier needs at least one record".into()));
    }
    let mut sorted: Vec<(f64, bool)> = records.iter().map(|r| (r.time, r.event)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    let mut curve = KmCurve {
        times: Vec::new(),
        survival: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
    };
    let mut s = 1.0;
    let mut i = 0;
    while i < n {
        let t = sorted[i].0;
        let at_risk = n - i;
        let mut d = 0;
        while i < n && sorted[i].0 == t {
            d += usize::from(sorted[i].1);
            i += 1;
        }
        if d > 0 {
            s *= (at_risk - d) as f64 / at_risk as f64;
            curve.times.push(t);
            curve.survival.push(s);
            curve.at_risk.push(at_risk);
            curve.events.push(d);
        }
    }
    Ok(curve)
}
