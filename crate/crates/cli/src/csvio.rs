//! CSV and JSON artifact formats.
//!
//! Values are written with shortest round-trip float formatting so repeated
//! runs produce byte-identical files.

use std::path::Path;

use serde::Serialize;

use coughmap_core::features::{SpectralFeatures, FEATURE_NAMES};
use coughmap_core::stats::{BoxplotSummary, FeatureTable, TestKind, TestResult};
use coughmap_core::{Error, Result};

pub const FEATURES_HEADER: &str = "patient_id,threshold,ac,sp_bw,sp_cf,sp_f,sp_fx,sp_re,sp_r";
pub const RESULTS_HEADER: &str = "group,feature,threshold,test,statistic,p_value,significant";

pub fn features_csv_row(patient: &str, threshold: f64, f: &SpectralFeatures) -> String {
    format!(
        "{patient},{threshold},{},{},{},{},{},{},{}",
        f.ac, f.sp_bw, f.sp_cf, f.sp_f, f.sp_fx, f.sp_re, f.sp_r
    )
}

/// Serialize a feature table in (patient, threshold) order.
pub fn write_features_csv(table: &FeatureTable) -> String {
    let mut out = String::from(FEATURES_HEADER);
    out.push('\n');
    for (patient, threshold, features) in table.iter() {
        out.push_str(&features_csv_row(patient, threshold, features));
        out.push('\n');
    }
    out
}

pub fn parse_features_csv(src: &str) -> Result<FeatureTable> {
    let mut lines = src.lines();
    match lines.next() {
        Some(header) if header.trim() == FEATURES_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "features CSV: expected header `{FEATURES_HEADER}`, got {other:?}"
            )))
        }
    }
    let mut table = FeatureTable::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + FEATURE_NAMES.len() {
            return Err(Error::Format(format!(
                "features CSV line {}: expected {} fields, got {}",
                lineno + 2,
                2 + FEATURE_NAMES.len(),
                fields.len()
            )));
        }
        let bad =
            |what: &str| Error::Format(format!("features CSV line {}: bad {what}", lineno + 2));
        let threshold: f64 = fields[1].parse().map_err(|_| bad("threshold"))?;
        let mut nums = [0.0f64; 7];
        for (i, slot) in nums.iter_mut().enumerate() {
            *slot = fields[2 + i].parse().map_err(|_| bad(FEATURE_NAMES[i]))?;
        }
        table.insert(
            fields[0],
            threshold,
            SpectralFeatures {
                ac: nums[0],
                sp_bw: nums[1],
                sp_cf: nums[2],
                sp_f: nums[3],
                sp_fx: nums[4],
                sp_re: nums[5],
                sp_r: nums[6],
            },
        );
    }
    if table.is_empty() {
        return Err(Error::Data("features CSV contains no rows".into()));
    }
    Ok(table)
}

pub fn write_results_csv(results: &[TestResult]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.group,
            r.feature,
            r.threshold,
            r.test_kind.name(),
            r.statistic,
            r.p_value,
            r.significant
        ));
    }
    out
}

pub fn parse_results_csv(src: &str) -> Result<Vec<TestResult>> {
    let mut lines = src.lines();
    match lines.next() {
        Some(header) if header.trim() == RESULTS_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "results CSV: expected header `{RESULTS_HEADER}`, got {other:?}"
            )))
        }
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Format(format!(
                "results CSV line {}: expected 7 fields",
                lineno + 2
            )));
        }
        let bad =
            |what: &str| Error::Format(format!("results CSV line {}: bad {what}", lineno + 2));
        let test_kind = match fields[3] {
            "student_t" => TestKind::StudentT,
            "mann_whitney_u" => TestKind::MannWhitneyU,
            _ => return Err(bad("test kind")),
        };
        out.push(TestResult {
            group: fields[0].to_string(),
            feature: fields[1].to_string(),
            threshold: fields[2].parse().map_err(|_| bad("threshold"))?,
            test_kind,
            statistic: fields[4].parse().map_err(|_| bad("statistic"))?,
            p_value: fields[5].parse().map_err(|_| bad("p_value"))?,
            significant: match fields[6] {
                "true" => true,
                "false" => false,
                _ => return Err(bad("significant flag")),
            },
        });
    }
    if out.is_empty() {
        return Err(Error::Data("results CSV contains no rows".into()));
    }
    Ok(out)
}

/// One boxplot record; `side` is `a` or `b` within the comparison group.
#[derive(Debug, Clone, Serialize)]
pub struct BoxplotEntry {
    pub group: String,
    pub side: String,
    pub feature: String,
    pub threshold: f64,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: Vec<f64>,
}

impl BoxplotEntry {
    pub fn new(
        group: &str,
        side: &str,
        feature: &str,
        threshold: f64,
        n: usize,
        summary: BoxplotSummary,
    ) -> Self {
        Self {
            group: group.to_string(),
            side: side.to_string(),
            feature: feature.to_string(),
            threshold,
            n,
            median: summary.median,
            q1: summary.q1,
            q3: summary.q3,
            whisker_lo: summary.whisker_lo,
            whisker_hi: summary.whisker_hi,
            outliers: summary.outliers,
        }
    }
}

pub fn write_boxplots_json(entries: &[BoxplotEntry]) -> Result<String> {
    serde_json::to_string_pretty(entries)
        .map_err(|e| Error::Data(format!("boxplot serialization failed: {e}")))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_csv_round_trip() {
        let mut table = FeatureTable::new();
        table.insert(
            "P01",
            0.5,
            SpectralFeatures {
                ac: 0.123456789,
                sp_bw: 1e6,
                sp_cf: 3.5,
                sp_f: 0.5,
                sp_fx: -2.25e-3,
                sp_re: 1.0986122886681098,
                sp_r: 2000.0,
            },
        );
        table.insert(
            "P01",
            0.6,
            SpectralFeatures {
                ac: 0.2,
                sp_bw: 2e6,
                sp_cf: 3.0,
                sp_f: 0.4,
                sp_fx: 0.0,
                sp_re: 1.0,
                sp_r: 1500.0,
            },
        );
        let csv = write_features_csv(&table);
        assert!(csv.starts_with(FEATURES_HEADER));
        let parsed = parse_features_csv(&csv).unwrap();
        assert_eq!(
            parsed.get("P01", 0.5).unwrap().ac,
            table.get("P01", 0.5).unwrap().ac
        );
        assert_eq!(
            parsed.get("P01", 0.6).unwrap().sp_re,
            table.get("P01", 0.6).unwrap().sp_re
        );

        assert!(parse_features_csv("nonsense\n").is_err());
    }

    #[test]
    fn results_csv_round_trip() {
        let results = vec![TestResult {
            group: "G1".into(),
            feature: "ac".into(),
            threshold: 0.7,
            test_kind: TestKind::MannWhitneyU,
            statistic: 3.5,
            p_value: 0.047619047619047616,
            significant: true,
        }];
        let csv = write_results_csv(&results);
        let parsed = parse_results_csv(&csv).unwrap();
        assert_eq!(parsed, results);
    }
}
