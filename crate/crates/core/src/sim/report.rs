use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::SimReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatterySummary {
    pub scenarios: usize,
    /// Means over scenarios where the precision is defined.
    pub mean_precision_algorithm: Option<f64>,
    pub mean_precision_scheduled: Option<f64>,
    pub precision_gap: Option<f64>,
    pub mean_coverage: f64,
    pub min_coverage: f64,
    pub algorithm_triggers: usize,
    pub scheduled_triggers: usize,
    pub expected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub summary: BatterySummary,
    pub scenarios: Vec<SimReport>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.4}"))
}

impl BatteryReport {
    pub fn from_reports(mut scenarios: Vec<SimReport>) -> Self {
        scenarios.sort_by_key(|r| r.seed);
        let n = scenarios.len();
        let alg = mean_defined(scenarios.iter().map(|r| r.precision_algorithm));
        let sched = mean_defined(scenarios.iter().map(|r| r.precision_scheduled));
        let summary = BatterySummary {
            scenarios: n,
            mean_precision_algorithm: alg,
            mean_precision_scheduled: sched,
            precision_gap: alg.zip(sched).map(|(a, s)| a - s),
            mean_coverage: if n == 0 { 1.0 } else { scenarios.iter().map(|r| r.coverage).sum::<f64>() / n as f64 },
            min_coverage: scenarios.iter().map(|r| r.coverage).fold(1.0, f64::min),
            algorithm_triggers: scenarios.iter().map(|r| r.algorithm_triggers).sum(),
            scheduled_triggers: scenarios.iter().map(|r| r.scheduled_triggers).sum(),
            expected: scenarios.iter().map(|r| r.expected).sum(),
        };
        BatteryReport { summary, scenarios }
    }

    /// Fixed-width table, one row per scenario plus a summary block.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>8} {:>8} {:>8} {:>5} {:>5} {:>9} {:>9} {:>9}",
            "seed", "expected", "coverage", "alg", "sched", "prec_alg", "prec_sch", "vad_s"
        );
        for r in &self.scenarios {
            let _ = writeln!(
                out,
                "{:>8} {:>8} {:>8.4} {:>5} {:>5} {:>9} {:>9} {:>9}",
                r.seed,
                r.expected,
                r.coverage,
                r.algorithm_triggers,
                r.scheduled_triggers,
                opt(r.precision_algorithm),
                opt(r.precision_scheduled),
                r.vad_seconds
            );
        }
        let s = &self.summary;
        let _ = writeln!(out);
        let _ = writeln!(out, "scenarios                 {}", s.scenarios);
        let _ = writeln!(out, "mean precision algorithm  {}", opt(s.mean_precision_algorithm));
        let _ = writeln!(out, "mean precision scheduled  {}", opt(s.mean_precision_scheduled));
        let _ = writeln!(out, "precision gap             {}", opt(s.precision_gap));
        let _ = writeln!(out, "mean coverage             {:.4}", s.mean_coverage);
        let _ = writeln!(out, "min coverage              {:.4}", s.min_coverage);
        let _ = writeln!(
            out,
            "triggers                  {} algorithm, {} scheduled, {} expected",
            s.algorithm_triggers, s.scheduled_triggers, s.expected
        );
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "seed,expected,triggered_expected,coverage,algorithm_triggers,scheduled_triggers,\
             algorithm_contained,scheduled_contained,precision_algorithm,precision_scheduled,vad_seconds\n",
        );
        for r in &self.scenarios {
            let o = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.seed,
                r.expected,
                r.triggered_expected,
                r.coverage,
                r.algorithm_triggers,
                r.scheduled_triggers,
                r.algorithm_contained,
                r.scheduled_contained,
                o(r.precision_algorithm),
                o(r.precision_scheduled),
                r.vad_seconds
            );
        }
        out
    }
}
