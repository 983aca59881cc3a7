use crate::factorization::HeadId;

/// One evaluation row of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub step: usize,
    pub gen_loss: Option<f64>,
    /// Most recent loss of every head, in layout order.
    pub head_losses: Vec<(HeadId, f64)>,
    pub dependency_metric: Option<f64>,
    pub frechet_per_part: Vec<Option<f64>>,
    pub ratio_mae: Option<f64>,
    pub wall_time: Option<f64>,
}

/// Column names for a run with the given heads and part count.
pub fn metrics_header(heads: &[HeadId], parts: usize) -> Vec<String> {
    let mut h = vec!["step".to_string(), "gen_loss".to_string()];
    h.extend(heads.iter().map(|id| id.column_name()));
    h.push("d_dep".into());
    h.extend((1..=parts).map(|i| format!("frechet_part_{i}")));
    h.push("ratio_mae".into());
    h.push("wall_time".into());
    h
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsRecord {
    /// Cells matching [`metrics_header`]; missing values are empty strings.
    pub fn cells(&self, heads: &[HeadId]) -> Vec<String> {
        let mut row = vec![self.step.to_string(), cell(self.gen_loss)];
        for id in heads {
            let loss = self.head_losses.iter().find(|(h, _)| h == id).map(|(_, l)| *l);
            row.push(cell(loss));
        }
        row.push(cell(self.dependency_metric));
        row.extend(self.frechet_per_part.iter().map(|f| cell(*f)));
        row.push(cell(self.ratio_mae));
        row.push(cell(self.wall_time));
        row
    }
}
