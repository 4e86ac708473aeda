use serde::{Deserialize, Serialize};

/// All metrics for one (method, seed, forget ratio) cell.
///
/// Metrics that need forget edges are `None` when the forget set is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub seed: u64,
    pub forget_ratio: f64,
    pub forget_size: usize,
    pub test_auc: f64,
    pub retain_auc: f64,
    pub forget_auc: Option<f64>,
    pub activation_distance: Option<f64>,
    pub mi_auc_unlearned: Option<f64>,
    pub mi_auc_retrained: Option<f64>,
    pub mi_gap: Option<f64>,
    pub delta_p_mean: f64,
    pub delta_p_negative_fraction: f64,
    /// Set when an iterative method stopped early on a non-finite loss.
    pub diverged: bool,
    pub unlearn_wall_time: f64,
}

impl EvalReport {
    /// Named numeric metrics in a fixed order, for aggregation and tables.
    pub fn metrics(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("test_auc", Some(self.test_auc)),
            ("retain_auc", Some(self.retain_auc)),
            ("forget_auc", self.forget_auc),
            ("activation_distance", self.activation_distance),
            ("mi_auc_unlearned", self.mi_auc_unlearned),
            ("mi_auc_retrained", self.mi_auc_retrained),
            ("mi_gap", self.mi_gap),
            ("delta_p_mean", Some(self.delta_p_mean)),
            ("delta_p_negative_fraction", Some(self.delta_p_negative_fraction)),
            ("unlearn_wall_time", Some(self.unlearn_wall_time)),
        ]
    }

    /// Range and consistency checks on the report's own fields.
    pub fn is_consistent(&self) -> bool {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let opt_unit = |x: Option<f64>| x.is_none_or(unit);
        let gap_ok = match (self.mi_auc_unlearned, self.mi_auc_retrained, self.mi_gap) {
            (Some(u), Some(r), Some(g)) => g == (u - r).abs(),
            (None, None, None) => true,
            _ => false,
        };
        unit(self.test_auc)
            && unit(self.retain_auc)
            && opt_unit(self.forget_auc)
            && opt_unit(self.activation_distance)
            && opt_unit(self.mi_auc_unlearned)
            && opt_unit(self.mi_auc_retrained)
            && unit(self.delta_p_negative_fraction)
            && gap_ok
    }
}
