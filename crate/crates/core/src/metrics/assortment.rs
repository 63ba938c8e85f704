use super::series::{band, completed, SeriesWithBand};
use super::MetricsError;
use crate::game::Action;
use crate::runner::ExperimentResult;
use crate::topology::Graph;

/// Cooperators' mean fraction of cooperating neighbors minus defectors'.
/// `None` when either class is empty.
pub fn assortment(actions: &[Action], graph: &Graph) -> Option<f64> {
    // Per class: sum of cooperating-neighbor fractions and class size.
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    // On regular graphs the fractions share a denominator, so integer sums
    // make the value independent of node order.
    let mut coop_sums = [0usize; 2];
    for (node, action) in actions.iter().enumerate() {
        let neighbors = graph.neighbors_of(node);
        let class = usize::from(!action.is_cooperate());
        counts[class] += 1;
        if neighbors.is_empty() {
            continue;
        }
        let coop = neighbors.iter().filter(|&&m| actions[m].is_cooperate()).count();
        coop_sums[class] += coop;
        sums[class] += coop as f64 / neighbors.len() as f64;
    }
    if counts[0] == 0 || counts[1] == 0 {
        return None;
    }
    if let Some(k) = graph.regular_degree().filter(|&k| k > 0) {
        let mean = |c: usize| coop_sums[c] as f64 / (k * counts[c]) as f64;
        return Some(mean(0) - mean(1));
    }
    Some(sums[0] / counts[0] as f64 - sums[1] / counts[1] as f64)
}

/// Per-round assortment averaged over the completed repetitions in which it
/// is defined.
pub fn assortment_series(result: &ExperimentResult) -> Result<SeriesWithBand, MetricsError> {
    let (reps, rounds) = completed(result)?;
    let points = (0..rounds)
        .filter_map(|r| {
            let round = r as u32 + 1;
            let values: Vec<f64> = reps
                .iter()
                .filter_map(|rep| {
                    let graph = rep.graph_at(round)?;
                    assortment(&rep.records[r].actions, graph)
                })
                .collect();
            band(round, &values)
        })
        .collect();
    Ok(SeriesWithBand { points })
}
