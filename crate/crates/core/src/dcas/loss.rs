use crate::autodiff::{Tape, Var};
use crate::data::SurvivalRecord;
use crate::error::{Error, Result};
use crate::survival::cox::{loss_and_gradient, RiskSets};

/// Cox negative log partial likelihood of the batch risks (Breslow ties,
/// risk sets restricted to the batch), multiplied by `scale`.
fn scaled(tape: &mut Tape, risk: Var, records: &[SurvivalRecord], scale: f64) -> Result<Var> {
    let eta = tape.value(risk).data().to_vec();
    if eta.len() != records.len() {
        return Err(Error::Shape(format!(
            "{} risks for {} records",
            eta.len(),
            records.len()
        )));
    }
    if !records.iter().any(|r| r.event) {
        return Err(Error::Data("batch has no events; resample it".into()));
    }
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite risk in Cox loss".into()));
    }
    let times: Vec<f64> = records.iter().map(|r| r.time).collect();
    let events: Vec<bool> = records.iter().map(|r| r.event).collect();
    let (loss, mut grad) = loss_and_gradient(&RiskSets::new(&times), &eta, &events);
    grad.iter_mut().for_each(|g| *g *= scale);
    tape.custom_scalar(risk, loss * scale, grad)
}

/// Cox loss summed over the batch's events.
pub fn cox_loss(tape: &mut Tape, risk: Var, records: &[SurvivalRecord]) -> Result<Var> {
    scaled(tape, risk, records, 1.0)
}

/// Cox loss divided by the number of events in the batch.
pub fn cox_loss_per_event(tape: &mut Tape, risk: Var, records: &[SurvivalRecord]) -> Result<Var> {
    let d = records.iter().filter(|r| r.event).count().max(1);
    scaled(tape, risk, records, 1.0 / d as f64)
}
