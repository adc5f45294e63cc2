//! End-to-end planning: offline preprocessing, then per query the
//! polygonal and smooth phases.

use std::time::{Duration, Instant};

use crate::conic::TOL_REPRESENTATIVE;
use crate::error::{PlanError, Result};
use crate::geometry::BoxSet;
use crate::linegraph::LineGraph;
use crate::polygonal::{curve_for_sequence, polygonal_phase, PolygonalCurve, PolygonalStats};
use crate::smooth::{smooth_phase, PlanningQuery, SmoothOutcome, SmoothParams};

/// A safe set with its preprocessed line graph, shared by all queries.
#[derive(Debug, Clone)]
pub struct Planner {
    set: BoxSet,
    graph: LineGraph,
}

impl Planner {
    /// Builds the line graph and optimizes its representative points.
    pub fn preprocess(set: BoxSet) -> Result<Self> {
        let mut graph = LineGraph::build(&set);
        graph.optimize_representative_points(TOL_REPRESENTATIVE)?;
        Ok(Self { set, graph })
    }

    /// Wraps a graph built earlier for the same set.
    pub fn from_graph(set: BoxSet, graph: LineGraph) -> Result<Self> {
        if graph.num_boxes() != set.len() {
            return Err(PlanError::InvalidInput(format!(
                "graph built for {} boxes, scene has {}",
                graph.num_boxes(),
                set.len()
            )));
        }
        Ok(Self { set, graph })
    }

    pub fn set(&self) -> &BoxSet {
        &self.set
    }

    pub fn graph(&self) -> &LineGraph {
        &self.graph
    }

    pub fn plan(&self, query: &PlanningQuery, params: &SmoothParams) -> Result<PlanOutcome> {
        query.validate(self.set.dim())?;
        let started = Instant::now();
        let Some((phase_curve, polygonal_stats)) = polygonal_phase(&self.graph, &self.set, &query.p_init, &query.p_term)? else {
            return Ok(PlanOutcome::Infeasible);
        };
        let polygonal = curve_for_sequence(&self.set, phase_curve.boxes(), &query.p_init, &query.p_term)?;
        let polygonal_time = started.elapsed();

        let started = Instant::now();
        let smooth = smooth_phase(&polygonal, query, &self.set, params)?;
        if !smooth.stats.converged {
            log::warn!("smooth phase stopped at the iteration cap");
        }
        Ok(PlanOutcome::Found(Box::new(Plan {
            polygonal,
            polygonal_stats,
            smooth,
            polygonal_time,
            smooth_time: started.elapsed(),
        })))
    }
}

#[derive(Debug, Clone)]
pub enum PlanOutcome {
    /// No box sequence connects the endpoints.
    Infeasible,
    Found(Box<Plan>),
}

impl PlanOutcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            PlanOutcome::Found(plan) => Some(plan),
            PlanOutcome::Infeasible => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Plan {
    /// Polygonal curve the smooth phase started from.
    pub polygonal: PolygonalCurve,
    pub polygonal_stats: PolygonalStats,
    pub smooth: SmoothOutcome,
    pub polygonal_time: Duration,
    pub smooth_time: Duration,
}

impl Plan {
    pub fn cost(&self) -> f64 {
        self.smooth.cost
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AxisBox;

    #[test]
    fn corridor_and_disconnected() {
        let boxes = vec![
            AxisBox::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap(),
            AxisBox::new(vec![1.5, 0.0], vec![2.5, 3.0]).unwrap(),
            AxisBox::new(vec![5.0, 5.0], vec![6.0, 6.0]).unwrap(),
        ];
        let planner = Planner::preprocess(BoxSet::new(boxes).unwrap()).unwrap();
        let params = SmoothParams::default();
        let query = PlanningQuery::new(vec![0.2, 0.5], vec![2.0, 2.8], 2.0, vec![0.0, 1.0]);
        let outcome = planner.plan(&query, &params).unwrap();
        let plan = outcome.plan().expect("connected");
        assert_eq!(plan.polygonal.boxes(), &[0, 1]);
        assert!(plan.cost() <= plan.smooth.stats.initial_cost);

        let blocked = PlanningQuery::new(vec![0.2, 0.5], vec![5.5, 5.5], 2.0, vec![1.0]);
        assert!(matches!(planner.plan(&blocked, &params).unwrap(), PlanOutcome::Infeasible));

        let bad = PlanningQuery::new(vec![0.2, 0.5], vec![5.5, 5.5], 2.0, vec![0.0]);
        assert!(planner.plan(&bad, &params).is_err());
    }
}
