//! Human-readable separability table: one block per group, one row per
//! threshold, one column per feature, significant p-values marked with `*`.

use coughmap_core::features::FEATURE_NAMES;
use coughmap_core::stats::TestResult;

/// Render the results as a fixed-width table.
///
/// Rows appear in results order, which `compare_groups` sorts by
/// (group, threshold, feature).
pub fn render_report(results: &[TestResult]) -> String {
    let mut out = String::new();
    out.push_str("Separability by comparison group (p-values; * marks p < 0.05)\n");

    let mut groups: Vec<&str> = Vec::new();
    for r in results {
        if !groups.contains(&r.group.as_str()) {
            groups.push(&r.group);
        }
    }
    groups.sort_unstable();

    for group in groups {
        out.push('\n');
        out.push_str(&format!("group {group}\n"));
        out.push_str(&format!("{:>6}", "th"));
        for name in FEATURE_NAMES {
            out.push_str(&format!("{name:>10}"));
        }
        out.push('\n');

        let mut thresholds: Vec<f64> = results
            .iter()
            .filter(|r| r.group == group)
            .map(|r| r.threshold)
            .collect();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();

        for th in thresholds {
            out.push_str(&format!("{th:>6.2}"));
            for name in FEATURE_NAMES {
                let cell = results
                    .iter()
                    .find(|r| r.group == group && r.threshold == th && r.feature == name);
                match cell {
                    Some(r) => {
                        let mark = if r.significant { "*" } else { "" };
                        out.push_str(&format!("{:>10}", format!("{:.4}{mark}", r.p_value)));
                    }
                    None => out.push_str(&format!("{:>10}", "-")),
                }
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use coughmap_core::stats::TestKind;

    fn row(group: &str, feature: &str, th: f64, p: f64) -> TestResult {
        TestResult {
            group: group.into(),
            feature: feature.into(),
            threshold: th,
            test_kind: TestKind::MannWhitneyU,
            statistic: 0.0,
            p_value: p,
            significant: p < 0.05,
        }
    }

    #[test]
    fn renders_one_row_per_threshold_with_marks() {
        let mut results = Vec::new();
        for th in [0.5, 0.6, 0.7, 0.8, 0.9] {
            for feature in FEATURE_NAMES {
                results.push(row("G1", feature, th, if th == 0.7 { 0.01 } else { 0.5 }));
            }
        }
        let report = render_report(&results);
        assert!(report.contains("group G1"));
        let data_rows: Vec<&str> = report
            .lines()
            .filter(|l| l.trim_start().starts_with("0."))
            .collect();
        assert_eq!(data_rows.len(), 5);
        // every feature column is present in the header
        for name in FEATURE_NAMES {
            assert!(report.contains(name));
        }
        // significance marks appear exactly on the 0.7 row
        let starred: Vec<&str> = report.lines().filter(|l| l.contains('*')).collect();
        assert_eq!(starred.len(), 2); // legend line + the 0.70 row
        assert!(starred[1].trim_start().starts_with("0.70"));
        assert_eq!(starred[1].matches('*').count(), 7);
    }
}
