//! Group comparison protocol: Gaussianity check, then Student's t or
//! Mann-Whitney U, per feature per threshold.
//!
//! Both groups passing Shapiro-Wilk at alpha = 0.05 routes the comparison to
//! the pooled-variance t-test, anything else to Mann-Whitney. Groups smaller
//! than 3 skip the Gaussianity stage entirely and go straight to
//! Mann-Whitney.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::features::{SpectralFeatures, FEATURE_NAMES};
use crate::special::{normal_cdf, normal_quantile, t_two_sided_p};

/// Significance level used both for the Gaussianity gate and the
/// `significant` flag.
pub const ALPHA: f64 = 0.05;

/// Largest combined sample size for which the Mann-Whitney p-value is
/// computed from the exact labeling distribution.
pub const MWU_EXACT_LIMIT: usize = 25;

/// Sample-size bounds of the Shapiro-Wilk coefficient approximation.
pub const SW_MIN_N: usize = 3;
pub const SW_MAX_N: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    StudentT,
    MannWhitneyU,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::StudentT => "student_t",
            TestKind::MannWhitneyU => "mann_whitney_u",
        }
    }
}

/// Outcome of one two-sample test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub kind: TestKind,
    pub statistic: f64,
    pub p_value: f64,
}

impl TestOutcome {
    pub fn significant(&self) -> bool {
        self.p_value < ALPHA
    }

    pub fn into_result(self, group: &str, feature: &str, threshold: f64) -> TestResult {
        TestResult {
            group: group.to_string(),
            feature: feature.to_string(),
            threshold,
            test_kind: self.kind,
            statistic: self.statistic,
            p_value: self.p_value,
            significant: self.significant(),
        }
    }
}

/// One row of the separability table.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub group: String,
    pub feature: String,
    pub threshold: f64,
    pub test_kind: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Shapiro-Wilk statistic and p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapiroWilk {
    pub statistic: f64,
    pub p_value: f64,
}

/// Shapiro-Wilk Gaussianity test for 3 <= n <= 50 samples, using the
/// standard small-sample coefficient approximation with normal-quantile
/// scores.
pub fn shapiro_wilk(x: &[f64]) -> Result<ShapiroWilk> {
    let n = x.len();
    if n < SW_MIN_N {
        return Err(Error::Argument(format!(
            "Shapiro-Wilk needs at least {SW_MIN_N} samples, got {n}"
        )));
    }
    if n > SW_MAX_N {
        return Err(Error::Argument(format!(
            "Shapiro-Wilk supports at most {SW_MAX_N} samples, got {n}"
        )));
    }
    let mut y = x.to_vec();
    y.sort_by(f64::total_cmp);
    if y[n - 1] - y[0] <= 0.0 {
        return Err(Error::Degenerate("constant sample".into()));
    }

    // expected normal order statistics (Blom scores)
    let nf = n as f64;
    let m: Vec<f64> = (1..=n)
        .map(|i| normal_quantile((i as f64 - 0.375) / (nf + 0.25)))
        .collect();
    let ssq_m: f64 = m.iter().map(|v| v * v).sum();

    // polynomial-corrected tail coefficients
    let u = 1.0 / nf.sqrt();
    let mut a = vec![0.0f64; n];
    if n == 3 {
        a[0] = -std::f64::consts::FRAC_1_SQRT_2;
        a[2] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let norm = ssq_m.sqrt();
        let a_n = m[n - 1] / norm + 0.221157 * u - 0.147981 * u.powi(2) - 2.071190 * u.powi(3)
            + 4.434685 * u.powi(4)
            - 2.706056 * u.powi(5);
        if n > 5 {
            let a_n1 = m[n - 2] / norm + 0.042981 * u - 0.293762 * u.powi(2) - 1.752461 * u.powi(3)
                + 5.682633 * u.powi(4)
                - 3.582633 * u.powi(5);
            let phi = (ssq_m - 2.0 * m[n - 1] * m[n - 1] - 2.0 * m[n - 2] * m[n - 2])
                / (1.0 - 2.0 * a_n * a_n - 2.0 * a_n1 * a_n1);
            let scale = phi.sqrt();
            for i in 2..n - 2 {
                a[i] = m[i] / scale;
            }
            a[n - 1] = a_n;
            a[n - 2] = a_n1;
            a[0] = -a_n;
            a[1] = -a_n1;
        } else {
            let phi = (ssq_m - 2.0 * m[n - 1] * m[n - 1]) / (1.0 - 2.0 * a_n * a_n);
            let scale = phi.sqrt();
            for i in 1..n - 1 {
                a[i] = m[i] / scale;
            }
            a[n - 1] = a_n;
            a[0] = -a_n;
        }
    }

    let mean = y.iter().sum::<f64>() / nf;
    let ssq: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let b: f64 = a.iter().zip(&y).map(|(ai, yi)| ai * yi).sum();
    let w = ((b * b) / ssq).min(1.0);

    let p_value = if n == 3 {
        let pi = std::f64::consts::PI;
        let p = 6.0 / pi * (w.sqrt().asin() - 0.75f64.sqrt().asin());
        p.clamp(0.0, 1.0)
    } else if n <= 11 {
        let g = -2.273 + 0.459 * nf;
        let mu = 0.5440 - 0.39978 * nf + 0.025054 * nf.powi(2) - 0.0006714 * nf.powi(3);
        let sigma = (1.3822 - 0.77857 * nf + 0.062767 * nf.powi(2) - 0.0020322 * nf.powi(3)).exp();
        let arg = g - (1.0 - w).ln();
        if arg <= 0.0 {
            0.0
        } else {
            let z = (-arg.ln() - mu) / sigma;
            (1.0 - normal_cdf(z)).clamp(0.0, 1.0)
        }
    } else {
        let ln_n = nf.ln();
        let mu = -1.5861 - 0.31082 * ln_n - 0.083751 * ln_n.powi(2) + 0.0038915 * ln_n.powi(3);
        let sigma = (-0.4803 - 0.082676 * ln_n + 0.0030302 * ln_n.powi(2)).exp();
        let z = ((1.0 - w).ln() - mu) / sigma;
        (1.0 - normal_cdf(z)).clamp(0.0, 1.0)
    };

    Ok(ShapiroWilk {
        statistic: w,
        p_value,
    })
}

/// Two-sided unpaired Student's t-test with pooled variance.
pub fn student_t_unpaired(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Argument(
            "t-test needs at least two samples per group".into(),
        ));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mean_a = a.iter().sum::<f64>() / na;
    let mean_b = b.iter().sum::<f64>() / nb;
    let ss_a: f64 = a.iter().map(|v| (v - mean_a) * (v - mean_a)).sum();
    let ss_b: f64 = b.iter().map(|v| (v - mean_b) * (v - mean_b)).sum();
    let df = na + nb - 2.0;
    let pooled_var = (ss_a + ss_b) / df;
    if pooled_var.is_nan() || pooled_var <= 0.0 {
        return Err(Error::Degenerate(
            "pooled variance is zero (all values identical)".into(),
        ));
    }
    let t = (mean_a - mean_b) / (pooled_var.sqrt() * (1.0 / na + 1.0 / nb).sqrt());
    Ok(TestOutcome {
        kind: TestKind::StudentT,
        statistic: t,
        p_value: t_two_sided_p(t, df),
    })
}

/// Midranks of the combined sample, kept in (a then b) input order,
/// doubled so ties stay integral.
fn doubled_midranks(a: &[f64], b: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let n = a.len() + b.len();
    let mut order: Vec<usize> = (0..n).collect();
    let value = |i: usize| if i < a.len() { a[i] } else { b[i - a.len()] };
    order.sort_by(|&i, &j| value(i).total_cmp(&value(j)));

    let mut doubled = vec![0u64; n];
    let mut at = 0usize;
    while at < n {
        let mut end = at + 1;
        while end < n && value(order[end]) == value(order[at]) {
            end += 1;
        }
        // midrank of positions at..end (1-based) is (at + end + 1) / 2
        let doubled_rank = (at + end + 1) as u64;
        for &idx in &order[at..end] {
            doubled[idx] = doubled_rank;
        }
        at = end;
    }
    let (ra, rb) = doubled.split_at(a.len());
    (ra.to_vec(), rb.to_vec())
}

/// Exact two-sided p: probability mass of labelings whose U deviates from
/// the mean at least as much as observed. Computed from the rank-sum
/// distribution over all C(n, n_a) labelings of the tied midranks.
fn mwu_exact_p(doubled_ranks: &[u64], n_a: usize, u2_obs_dev: u64) -> f64 {
    let n = doubled_ranks.len();
    let max_sum: usize = doubled_ranks.iter().map(|&r| r as usize).sum();
    // count[j][s]: labelings choosing j of the processed ranks with doubled
    // rank sum s
    let mut count = vec![vec![0u128; max_sum + 1]; n_a + 1];
    count[0][0] = 1;
    for &r in doubled_ranks {
        let r = r as usize;
        for j in (0..n_a).rev() {
            for s in 0..=max_sum - r {
                if count[j][s] != 0 {
                    let add = count[j][s];
                    count[j + 1][s + r] += add;
                }
            }
        }
    }
    let n_b = n - n_a;
    // 2U = S - n_a(n_a + 1); its mean (doubled) is n_a * n_b
    let center = (n_a * n_b) as i64;
    let offset = (n_a * (n_a + 1)) as i64;
    let mut extreme = 0u128;
    let mut total = 0u128;
    for (s, &c) in count[n_a].iter().enumerate() {
        if c == 0 {
            continue;
        }
        total += c;
        let u2 = s as i64 - offset;
        if (u2 - center).unsigned_abs() >= u2_obs_dev {
            extreme += c;
        }
    }
    extreme as f64 / total as f64
}

/// Mann-Whitney U test with midrank tie handling.
///
/// Exact two-sided p by enumerating the labeling distribution when the
/// combined size is at most [`MWU_EXACT_LIMIT`]; otherwise the normal
/// approximation with tie and continuity corrections.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument(
            "Mann-Whitney needs non-empty groups".into(),
        ));
    }
    let (n_a, n_b) = (a.len(), b.len());
    let n = n_a + n_b;
    let (ranks_a, ranks_b) = doubled_midranks(a, b);

    let doubled_sum_a: u64 = ranks_a.iter().sum();
    // U_a = R_a - n_a(n_a+1)/2, kept doubled so ties stay integral
    let u2_a = doubled_sum_a as i64 - (n_a * (n_a + 1)) as i64;
    let u_a = u2_a as f64 / 2.0;

    let p_value = if n <= MWU_EXACT_LIMIT {
        let mut all_ranks = ranks_a.clone();
        all_ranks.extend_from_slice(&ranks_b);
        let dev = (u2_a - (n_a * n_b) as i64).unsigned_abs();
        mwu_exact_p(&all_ranks, n_a, dev)
    } else {
        // normal approximation with tie correction
        let mut tie_sizes = BTreeMap::new();
        for &r in ranks_a.iter().chain(&ranks_b) {
            *tie_sizes.entry(r).or_insert(0u64) += 1;
        }
        let tie_term: f64 = tie_sizes
            .values()
            .map(|&t| (t * t * t - t) as f64)
            .sum::<f64>()
            / (n as f64 * (n as f64 - 1.0));
        let mu = (n_a * n_b) as f64 / 2.0;
        let var = (n_a * n_b) as f64 / 12.0 * ((n as f64 + 1.0) - tie_term);
        if var <= 0.0 {
            1.0
        } else {
            let diff = u_a - mu;
            let cc = 0.5 * diff.signum();
            let z = (diff - cc) / var.sqrt();
            (2.0 * (1.0 - normal_cdf(z.abs()))).clamp(0.0, 1.0)
        }
    };

    Ok(TestOutcome {
        kind: TestKind::MannWhitneyU,
        statistic: u_a,
        p_value,
    })
}

/// The routing protocol: Shapiro-Wilk on both groups at alpha = 0.05; both
/// Gaussian routes to the t-test, anything else (including groups too small
/// or too large for Shapiro-Wilk, and constant groups) to Mann-Whitney.
pub fn run_protocol(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    let in_sw_range = |s: &[f64]| s.len() >= SW_MIN_N && s.len() <= SW_MAX_N;
    if in_sw_range(a) && in_sw_range(b) {
        let both_gaussian = match (shapiro_wilk(a), shapiro_wilk(b)) {
            (Ok(ra), Ok(rb)) => ra.p_value >= ALPHA && rb.p_value >= ALPHA,
            // constant samples cannot be treated as Gaussian
            (Err(Error::Degenerate(_)), _) | (_, Err(Error::Degenerate(_))) => false,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        if both_gaussian {
            return student_t_unpaired(a, b);
        }
    }
    mann_whitney_u(a, b)
}

/// Named comparison between two disjoint patient sets.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub name: String,
    pub group_a: BTreeSet<String>,
    pub group_b: BTreeSet<String>,
}

impl GroupSpec {
    pub fn new(name: &str, group_a: BTreeSet<String>, group_b: BTreeSet<String>) -> Result<Self> {
        if group_a.is_empty() || group_b.is_empty() {
            return Err(Error::Validation(format!(
                "group {name}: both sides must be non-empty"
            )));
        }
        if group_a.intersection(&group_b).next().is_some() {
            return Err(Error::Validation(format!(
                "group {name}: sides must be disjoint"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            group_a,
            group_b,
        })
    }
}

/// Patient diagnoses plus the comparison groups resolved to patient sets.
#[derive(Debug, Clone)]
pub struct GroupConfig {
    pub diagnoses: BTreeMap<String, String>,
    pub groups: Vec<GroupSpec>,
}

/// Parse the group configuration text format:
///
/// ```text
/// patient <id> <diagnosis>
/// group <name> <dx,dx,...> vs <dx,dx,...>
/// ```
///
/// Group sides list diagnosis tokens; they resolve to the sets of patients
/// carrying any of those diagnoses.
pub fn parse_group_config(src: &str) -> Result<GroupConfig> {
    let mut diagnoses: BTreeMap<String, String> = BTreeMap::new();
    let mut group_lines: Vec<(String, String, String)> = Vec::new();

    for (lineno, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fail =
            |msg: String| Error::Validation(format!("groups file line {}: {msg}", lineno + 1));
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("patient") => {
                let id = tokens
                    .next()
                    .ok_or_else(|| fail("patient needs `<id> <diagnosis>`".into()))?;
                let dx = tokens
                    .next()
                    .ok_or_else(|| fail("patient needs `<id> <diagnosis>`".into()))?;
                if tokens.next().is_some() {
                    return Err(fail("trailing tokens after diagnosis".into()));
                }
                if diagnoses.insert(id.to_string(), dx.to_string()).is_some() {
                    return Err(fail(format!("patient {id} listed twice")));
                }
            }
            Some("group") => {
                let name = tokens
                    .next()
                    .ok_or_else(|| fail("group needs `<name> <a> vs <b>`".into()))?;
                let a = tokens
                    .next()
                    .ok_or_else(|| fail("group needs two diagnosis lists".into()))?;
                if tokens.next() != Some("vs") {
                    return Err(fail("expected `vs` between the two sides".into()));
                }
                let b = tokens
                    .next()
                    .ok_or_else(|| fail("group needs two diagnosis lists".into()))?;
                group_lines.push((name.to_string(), a.to_string(), b.to_string()));
            }
            Some(other) => {
                return Err(fail(format!("unknown directive `{other}`")));
            }
            None => unreachable!(),
        }
    }

    let resolve = |name: &str, list: &str| -> Result<BTreeSet<String>> {
        let wanted: BTreeSet<&str> = list.split(',').filter(|t| !t.is_empty()).collect();
        let set: BTreeSet<String> = diagnoses
            .iter()
            .filter(|(_, dx)| wanted.contains(dx.as_str()))
            .map(|(id, _)| id.clone())
            .collect();
        if set.is_empty() {
            return Err(Error::Validation(format!(
                "group {name}: no patient matches diagnoses `{list}`"
            )));
        }
        Ok(set)
    };

    let mut groups = Vec::with_capacity(group_lines.len());
    for (name, a, b) in group_lines {
        groups.push(GroupSpec::new(
            &name,
            resolve(&name, &a)?,
            resolve(&name, &b)?,
        )?);
    }

    Ok(GroupConfig { diagnoses, groups })
}

/// Totally ordered f64 key for threshold lookups.
#[derive(Debug, Clone, Copy)]
struct ThKey(f64);

impl PartialEq for ThKey {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0).is_eq()
    }
}

impl Eq for ThKey {}

impl PartialOrd for ThKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ThKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Per-(patient, threshold) feature storage feeding the group comparison.
#[derive(Debug, Clone, Default)]
pub struct FeatureTable {
    rows: BTreeMap<(String, ThKey), SpectralFeatures>,
}

impl FeatureTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, patient: &str, threshold: f64, features: SpectralFeatures) {
        self.rows
            .insert((patient.to_string(), ThKey(threshold)), features);
    }

    pub fn get(&self, patient: &str, threshold: f64) -> Option<&SpectralFeatures> {
        self.rows.get(&(patient.to_string(), ThKey(threshold)))
    }

    pub fn patients(&self) -> BTreeSet<String> {
        self.rows.keys().map(|(p, _)| p.clone()).collect()
    }

    /// Rows in (patient, threshold) order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64, &SpectralFeatures)> {
        self.rows.iter().map(|((p, th), f)| (p.as_str(), th.0, f))
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// One protocol run per (group x threshold x feature), sorted by
/// (group, threshold, feature order).
pub fn compare_groups(
    table: &FeatureTable,
    groups: &[GroupSpec],
    thresholds: &[f64],
) -> Result<Vec<TestResult>> {
    let mut sorted_groups: Vec<&GroupSpec> = groups.iter().collect();
    sorted_groups.sort_by(|a, b| a.name.cmp(&b.name));

    let mut results = Vec::with_capacity(groups.len() * thresholds.len() * FEATURE_NAMES.len());
    for group in sorted_groups {
        for &th in thresholds {
            let collect = |side: &BTreeSet<String>| -> Result<Vec<SpectralFeatures>> {
                side.iter()
                    .map(|pid| {
                        table.get(pid, th).copied().ok_or_else(|| {
                            Error::Data(format!(
                                "group {}: no features for patient {pid} at threshold {th}",
                                group.name
                            ))
                        })
                    })
                    .collect()
            };
            let side_a = collect(&group.group_a)?;
            let side_b = collect(&group.group_b)?;
            for (fi, feature) in FEATURE_NAMES.iter().enumerate() {
                let a: Vec<f64> = side_a.iter().map(|f| f.as_array()[fi]).collect();
                let b: Vec<f64> = side_b.iter().map(|f| f.as_array()[fi]).collect();
                let outcome = run_protocol(&a, &b)?;
                results.push(outcome.into_result(&group.name, feature, th));
            }
        }
    }
    Ok(results)
}

/// Five-number summary with 1.5 IQR whiskers.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxplotSummary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: Vec<f64>,
}

/// Quartiles by linear interpolation of order statistics; whiskers reach the
/// most extreme data within 1.5 IQR of the quartiles, everything beyond is
/// an outlier.
pub fn boxplot_summary(x: &[f64]) -> Result<BoxplotSummary> {
    if x.is_empty() {
        return Err(Error::Argument("boxplot of an empty sample".into()));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantile = |p: f64| -> f64 {
        let h = (sorted.len() as f64 - 1.0) * p;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        if lo + 1 < sorted.len() {
            sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
        } else {
            sorted[lo]
        }
    };
    let q1 = quantile(0.25);
    let median = quantile(0.5);
    let q3 = quantile(0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let whisker_lo = sorted
        .iter()
        .cloned()
        .find(|&v| v >= lo_fence)
        .unwrap_or(sorted[0]);
    let whisker_hi = sorted
        .iter()
        .cloned()
        .rev()
        .find(|&v| v <= hi_fence)
        .unwrap_or(sorted[sorted.len() - 1]);
    let outliers: Vec<f64> = sorted
        .iter()
        .cloned()
        .filter(|&v| v < lo_fence || v > hi_fence)
        .collect();
    Ok(BoxplotSummary {
        median,
        q1,
        q3,
        whisker_lo,
        whisker_hi,
        outliers,
    })
}
