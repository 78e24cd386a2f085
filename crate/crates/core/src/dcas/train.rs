use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::DcasConfig;
use super::loss::cox_loss_per_event;
use super::model::DcasModel;
use crate::autodiff::{Mode, Tape, Tensor};
use crate::data::SurvivalRecord;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DcasModel,
    pub trace: Vec<EpochStat>,
}

/// Splits items into batches of at most `batch_size` such that every batch
/// holds at least one event. Events and censored items are shuffled
/// separately and dealt round-robin.
pub fn stratified_batches(events: &[bool], batch_size: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut ev: Vec<usize> = (0..events.len()).filter(|&i| events[i]).collect();
    let mut ce: Vec<usize> = (0..events.len()).filter(|&i| !events[i]).collect();
    if ev.is_empty() {
        return Err(Error::Data("no events to stratify batches on".into()));
    }
    let mut rng = seed::rng(seed);
    ev.shuffle(&mut rng);
    ce.shuffle(&mut rng);
    let nb = events.len().div_ceil(batch_size.max(1)).min(ev.len()).max(1);
    let mut batches = vec![Vec::new(); nb];
    for (k, i) in ev.into_iter().chain(ce).enumerate() {
        batches[k % nb].push(i);
    }
    Ok(batches)
}

/// Patient-disjoint split: roughly `test_fraction` of the distinct
/// patients (at least one, and at least one left for training) go to the
/// test side. Returns item indices `(train, test)`.
pub fn patient_holdout(patient_ids: &[String], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut patients: Vec<&String> = patient_ids.iter().collect::<BTreeSet<_>>().into_iter().collect();
    if patients.len() < 2 {
        return Err(Error::Data(format!(
            "a patient-disjoint split needs >= 2 patients, got {}",
            patients.len()
        )));
    }
    patients.shuffle(&mut seed::rng(seed));
    let n_test = ((patients.len() as f64 * test_fraction).round() as usize).clamp(1, patients.len() - 1);
    let test: BTreeSet<&String> = patients[..n_test].iter().copied().collect();
    let (mut tr, mut te) = (Vec::new(), Vec::new());
    for (i, p) in patient_ids.iter().enumerate() {
        if test.contains(p) {
            te.push(i);
        } else {
            tr.push(i);
        }
    }
    Ok((tr, te))
}

fn gather(input: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let [_, c, h, w] = input.dims4()?;
    let item = c * h * w;
    let mut data = Vec::with_capacity(idx.len() * item);
    for &i in idx {
        data.extend_from_slice(&input.data()[i * item..(i + 1) * item]);
    }
    Tensor::new(vec![idx.len(), c, h, w], data)
}

/// One SGD step on a batch; returns the batch loss.
pub fn sgd_step(model: &mut DcasModel, batch: Tensor, records: &[SurvivalRecord], lr: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let x = tape.constant(batch);
    let out = model.forward(&mut tape, x, Mode::Train)?;
    let loss = cox_loss_per_event(&mut tape, out.risk, records)?;
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(Error::Numeric("training loss became non-finite".into()));
    }
    let grads = tape.backward(loss)?;
    for ((_, p), v) in model.params.iter_mut().zip(&out.params) {
        if let Some(g) = grads.get_raw(*v) {
            for (w, gi) in p.data_mut().iter_mut().zip(g) {
                *w -= lr * gi;
            }
        }
    }
    Ok(value)
}

/// Plain SGD on the per-event Cox loss with the step schedule of `cfg`.
/// `records[i]` labels patch `i` of `input` (`[N, 3, S, S]`).
pub fn train_cluster_model(input: &Tensor, records: &[SurvivalRecord], cfg: &DcasConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = input.dims4()?[0];
    if n != records.len() {
        return Err(Error::Shape(format!("{n} patches for {} records", records.len())));
    }
    let n_events = records.iter().filter(|r| r.event).count();
    if n_events < 2 {
        return Err(Error::Untrainable(format!(
            "cluster has {n_events} event(s), need >= 2"
        )));
    }
    let mut model = DcasModel::new(cfg, seed::derive(cfg.seed, 0))?;
    let events: Vec<bool> = records.iter().map(|r| r.event).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        let batches = stratified_batches(&events, cfg.batch_size, seed::derive(cfg.seed, 1 + epoch as u64))?;
        let mut total = 0.0;
        for idx in &batches {
            let recs: Vec<SurvivalRecord> = idx.iter().map(|&i| records[i].clone()).collect();
            total += sgd_step(&mut model, gather(input, idx)?, &recs, lr)?;
        }
        trace.push(EpochStat {
            epoch,
            loss: total / batches.len() as f64,
            lr,
        });
    }
    Ok(TrainOutcome { model, trace })
}
