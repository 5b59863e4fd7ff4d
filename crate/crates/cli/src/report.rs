use serde::Serialize;
use transit_core::designenv::{DesignEnv, Evaluation, RewardTerms};
use transit_core::netmodel::Route;
use transit_core::transitsim::{overlap_ratio, Metrics};

/// Node coverage, overlap and length of a design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Structure {
    pub node_coverage_pct: f64,
    pub overlap_pct: f64,
    pub total_km: f64,
}

pub fn structure(env: &DesignEnv, routes: &[Route]) -> Structure {
    let g = env.graph();
    let mut covered = vec![false; g.node_count()];
    for &v in routes.iter().flatten() {
        covered[v] = true;
    }
    Structure {
        node_coverage_pct: 100.0 * covered.iter().filter(|c| **c).count() as f64 / g.node_count() as f64,
        overlap_pct: 100.0 * overlap_ratio(routes),
        total_km: routes.iter().map(|r| g.route_length(r)).sum::<f64>() / 1000.0,
    }
}

/// Mean and sample standard deviation; the deviation is `None` below two values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: Option<f64>,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.len() >= 2).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    Summary { mean, std }
}

pub const CSV_METRICS: [&str; 7] = [
    "service_rate",
    "wait",
    "transfer",
    "journey",
    "route_eff",
    "fleet",
    "utilization",
];

fn metric_columns(m: &Metrics) -> [f64; 7] {
    [
        m.service_rate,
        m.wait_time,
        m.transfer_rate,
        m.journey_time,
        m.route_efficiency,
        m.fleet_size as f64,
        m.bus_utilization,
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub reward: f64,
    pub metrics: Metrics,
    pub terms: RewardTerms,
    pub structure: Structure,
}

impl SeedResult {
    pub fn new(env: &DesignEnv, seed: u64, routes: &[Route], e: &Evaluation) -> Self {
        Self {
            seed,
            reward: e.reward,
            metrics: e.metrics.clone(),
            terms: e.terms.clone(),
            structure: structure(env, routes),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub method: String,
    pub runs: Vec<SeedResult>,
    pub reward: Summary,
    /// Keyed by the CSV metric names.
    pub metrics: Vec<(String, Summary)>,
    pub node_coverage_pct: Summary,
    pub overlap_pct: Summary,
    pub total_km: Summary,
}

impl MethodReport {
    pub fn new(method: &str, runs: Vec<SeedResult>) -> Self {
        let col = |f: &dyn Fn(&SeedResult) -> f64| summarize(&runs.iter().map(f).collect::<Vec<_>>());
        let metrics = CSV_METRICS
            .iter()
            .enumerate()
            .map(|(i, name)| (name.to_string(), col(&|r| metric_columns(&r.metrics)[i])))
            .collect();
        Self {
            method: method.to_string(),
            reward: col(&|r| r.reward),
            metrics,
            node_coverage_pct: col(&|r| r.structure.node_coverage_pct),
            overlap_pct: col(&|r| r.structure.overlap_pct),
            total_km: col(&|r| r.structure.total_km),
            runs,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodFailure {
    pub method: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodReport>,
    pub failures: Vec<MethodFailure>,
}

impl ComparisonReport {
    pub fn csv_header() -> String {
        let mut cols = vec!["method".to_string()];
        for m in CSV_METRICS {
            cols.push(format!("{m}_mean"));
            cols.push(format!("{m}_std"));
        }
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::csv_header();
        out.push('\n');
        for m in &self.methods {
            let mut row = vec![m.method.clone()];
            for (_, s) in &m.metrics {
                row.push(format!("{}", s.mean));
                row.push(s.std.map(|v| v.to_string()).unwrap_or_default());
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_std_needs_two_values() {
        assert_eq!(summarize(&[3.0]).std, None);
        let s = summarize(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn csv_header_is_fixed() {
        assert_eq!(
            ComparisonReport::csv_header(),
            "method,service_rate_mean,service_rate_std,wait_mean,wait_std,transfer_mean,transfer_std,\
journey_mean,journey_std,route_eff_mean,route_eff_std,fleet_mean,fleet_std,utilization_mean,utilization_std"
        );
    }
}
