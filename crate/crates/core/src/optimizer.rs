//! Adam and the full-batch training loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diffengine::{Objective, ParamVector};
use crate::error::{contract, Error, Result};
use crate::loss::LossBreakdown;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates and the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grad.len() || state.m.len() != params.len() {
        return Err(contract(format!(
            "Adam shapes differ: params {}, grad {}, state {}",
            params.len(),
            grad.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "gradient component {i} is {} at Adam step {}",
            grad[i],
            state.step + 1
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grad)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
    }
    Ok(())
}

/// A trainable scalar such as the diffusivity of an inverse problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParam {
    pub name: String,
    pub initial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
    pub report_every: usize,
    #[serde(default)]
    pub trainable_physical: Vec<PhysicalParam>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.report_every == 0 {
            return Err(Error::Config("report_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub loss: LossBreakdown,
    pub physical: Vec<f64>,
    /// Seconds since training started.
    pub elapsed: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub entries: Vec<TraceEntry>,
    /// Set when training stopped early on a non-finite loss or gradient.
    pub failure: Option<String>,
}

impl TrainingTrace {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }

    /// Mean total loss over the first and last `fraction` of the entries.
    pub fn window_means(&self, fraction: f64) -> Option<(f64, f64)> {
        let n = self.entries.len();
        if n < 2 {
            return None;
        }
        let w = ((n as f64 * fraction).ceil() as usize).clamp(1, n / 2);
        let mean = |s: &[TraceEntry]| s.iter().map(|e| e.loss.total).sum::<f64>() / s.len() as f64;
        Some((mean(&self.entries[..w]), mean(&self.entries[n - w..])))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The last parameters at which loss and gradient were finite.
    pub params: ParamVector,
    pub trace: TrainingTrace,
}

/// Runs `config.iterations` full-batch Adam steps from `initial`.
///
/// The trace records the loss at iteration 0 and after every
/// `report_every`-th step, plus the final iteration. `observer` sees every
/// recorded entry with the parameters it was computed at. A non-finite loss
/// or gradient stops training and is reported in `trace.failure`.
pub fn train(
    objective: &dyn Objective,
    initial: ParamVector,
    config: &TrainConfig,
    observer: &mut dyn FnMut(&TraceEntry, &ParamVector),
) -> Result<TrainOutcome> {
    config.validate()?;
    if initial.len() != objective.param_count() {
        return Err(contract(format!(
            "initial parameters have {} entries, objective expects {}",
            initial.len(),
            objective.param_count()
        )));
    }
    let n_phys = config.trainable_physical.len();
    let mut params = initial.clone();
    let mut good = initial;
    let mut state = AdamState::new(params.len());
    let mut trace = TrainingTrace::default();
    let start = Instant::now();

    for it in 0..=config.iterations {
        let evaluated = objective
            .evaluate_with_gradient(&params)
            .and_then(|(loss, grad)| loss.check_finite().map(|_| (loss, grad)));
        let (loss, grad) = match evaluated {
            Ok(v) => {
                good = params.clone();
                v
            }
            Err(e @ (Error::NonFinite(_) | Error::NonFiniteLoss { .. })) => {
                trace.failure = Some(format!("iteration {it}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        if it % config.report_every == 0 || it == config.iterations {
            let p = params.as_slice();
            let entry = TraceEntry {
                iteration: it,
                loss,
                physical: p[p.len() - n_phys..].to_vec(),
                elapsed: start.elapsed().as_secs_f64(),
            };
            observer(&entry, &params);
            trace.entries.push(entry);
        }
        if it == config.iterations {
            break;
        }
        let mut next = params.clone();
        if let Err(e) = adam_step(
            next.as_mut_slice(),
            grad.as_slice(),
            &mut state,
            config.learning_rate,
        ) {
            trace.failure = Some(format!("iteration {it}: {e}"));
            break;
        }
        params = next;
    }
    Ok(TrainOutcome {
        params: good,
        trace,
    })
}
