use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{integrate_descent, FlowOptions, FlowStatus, Objective};
use crate::error::Result;
use crate::models::ActionModel;
use crate::quaternionic::{Frame, State};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurveyRun {
    pub index: usize,
    pub status: FlowStatus,
    pub sup_rho: f64,
    pub initial_f: f64,
    pub final_f: f64,
    pub final_time: f64,
    pub steps: usize,
}

/// Empirical flow-closedness evidence: statuses and the largest `ρ` seen
/// along each trajectory. This is evidence, never a proof.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SurveySummary {
    pub runs: Vec<SurveyRun>,
    pub counts: BTreeMap<FlowStatus, usize>,
    pub sup_rho: f64,
}

impl SurveySummary {
    pub fn count(&self, status: FlowStatus) -> usize {
        self.counts.get(&status).copied().unwrap_or(0)
    }

    /// Indices of diverged runs: candidates against flow-closedness.
    pub fn divergent(&self) -> Vec<usize> {
        self.runs
            .iter()
            .filter(|r| r.status == FlowStatus::Diverged)
            .map(|r| r.index)
            .collect()
    }
}

/// Runs one descent per start in parallel; results are kept in start order.
pub fn flow_closedness_survey(
    model: &ActionModel,
    frame: &Frame,
    objective: Objective,
    starts: &[State],
    opts: &FlowOptions,
) -> Result<SurveySummary> {
    let runs: Vec<SurveyRun> = starts
        .par_iter()
        .enumerate()
        .map(|(index, z0)| {
            let tr = integrate_descent(model, frame, objective, z0, opts)?;
            Ok(SurveyRun {
                index,
                status: tr.status,
                sup_rho: tr.sup_rho(),
                initial_f: tr.first().f,
                final_f: tr.last().f,
                final_time: tr.last().t,
                steps: tr.stats.accepted,
            })
        })
        .collect::<Result<_>>()?;
    let mut counts = BTreeMap::new();
    for r in &runs {
        *counts.entry(r.status).or_insert(0) += 1;
    }
    let sup_rho = runs.iter().map(|r| r.sup_rho).fold(0.0, f64::max);
    Ok(SurveySummary { runs, counts, sup_rho })
}
