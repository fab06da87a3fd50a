//! The end-to-end run: decode, decimate, chunk, spectrograms, classification,
//! occlusion maps, patient averaging, threshold weighting, features and group
//! statistics, with every intermediate artifact written to disk.
//!
//! Patients are independent and may be processed on several worker threads;
//! every artifact is written to a per-patient path and the aggregation step
//! walks patients in manifest order, so output bytes do not depend on the
//! thread count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use coughmap_core::audio::{decimate_with, decode_wav, segment_chunks};
use coughmap_core::cnn::{load_model, BandEnergyScorer, ClassScore, Scorer};
use coughmap_core::features::{extract_features, SpectralFeatures};
use coughmap_core::spectrogram::{
    compute_spectrogram, log_normalize, SpectrogramMatrix, CHUNK_LEN, FRAME_LEN, K_MAX, N_FRAMES,
};
use coughmap_core::stats::{
    boxplot_summary, compare_groups, parse_group_config, FeatureTable, GroupSpec, TestResult,
};
use coughmap_core::xai::{occlusion_map, weight_spectrogram, OcclusionMap, PatientProfile};
use coughmap_core::{Error, Result};

use crate::config::{PipelineConfig, ScorerSpec};
use crate::csvio::{write_boxplots_json, write_features_csv, write_results_csv, BoxplotEntry};
use crate::report::render_report;

/// Outcome summary of one pipeline run.
#[derive(Debug)]
pub struct RunReport {
    pub processed: Vec<String>,
    pub skipped: Vec<String>,
    pub result_rows: usize,
    pub out_dir: PathBuf,
}

/// Re-wrap an error with patient/file/stage context, preserving its class.
fn stage_context(e: Error, patient: &str, file: &str, stage: &str) -> Error {
    let msg = |m: String| format!("stage {stage}, patient {patient}, file {file}: {m}");
    match e {
        Error::Format(m) => Error::Format(msg(m)),
        Error::Unsupported(m) => Error::Unsupported(msg(m)),
        Error::Argument(m) => Error::Argument(msg(m)),
        Error::Validation(m) => Error::Validation(msg(m)),
        Error::Degenerate(m) => Error::Degenerate(msg(m)),
        Error::Data(m) => Error::Data(msg(m)),
        Error::Io(io) => Error::Data(msg(io.to_string())),
    }
}

enum LoadedScorer {
    Model(Box<coughmap_core::cnn::ClassifierModel>),
    Band(BandEnergyScorer),
}

impl Scorer for LoadedScorer {
    fn score(&self, input: &SpectrogramMatrix) -> Result<ClassScore> {
        match self {
            LoadedScorer::Model(m) => m.score(input),
            LoadedScorer::Band(b) => b.score(input),
        }
    }
}

fn load_scorer(spec: &ScorerSpec) -> Result<LoadedScorer> {
    match spec {
        ScorerSpec::Model(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| Error::Data(format!("cannot read model {}: {e}", path.display())))?;
            Ok(LoadedScorer::Model(Box::new(load_model(&bytes)?)))
        }
        ScorerSpec::Reference {
            band_lo,
            band_hi,
            gain,
        } => Ok(LoadedScorer::Band(
            coughmap_core::cnn::reference_classifier(*band_lo, *band_hi)?.with_gain(*gain),
        )),
    }
}

struct PatientOutput {
    patient_id: String,
    profile: Option<PatientProfile>,
    features: Vec<(f64, SpectralFeatures)>,
    n_chunks: usize,
}

fn process_patient(
    patient_id: &str,
    wavs: &[PathBuf],
    cfg: &PipelineConfig,
    scorer: &dyn Scorer,
    patient_dir: &Path,
) -> Result<PatientOutput> {
    std::fs::create_dir_all(patient_dir)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", patient_dir.display())))?;

    // decode + decimate + chunk every recording, in manifest order
    let mut linear_specs: Vec<SpectrogramMatrix> = Vec::new();
    let mut lognorm_specs: Vec<SpectrogramMatrix> = Vec::new();
    for wav_path in wavs {
        let file = wav_path.display().to_string();
        let bytes = std::fs::read(wav_path)
            .map_err(|e| stage_context(Error::Data(e.to_string()), patient_id, &file, "decode"))?;
        let clip = decode_wav(&bytes).map_err(|e| stage_context(e, patient_id, &file, "decode"))?;
        let decimated = decimate_with(&clip, cfg.decimation, cfg.fir)
            .map_err(|e| stage_context(e, patient_id, &file, "decimate"))?;
        for chunk in segment_chunks(&decimated, CHUNK_LEN) {
            let spec = compute_spectrogram(chunk, f64::from(decimated.sample_rate_hz))
                .map_err(|e| stage_context(e, patient_id, &file, "spectrogram"))?;
            let normed = log_normalize(&spec)
                .map_err(|e| stage_context(e, patient_id, &file, "log-normalize"))?;
            linear_specs.push(spec);
            lognorm_specs.push(normed);
        }
    }

    // score every window and write the chunk artifacts
    let mut scores = Vec::with_capacity(lognorm_specs.len());
    for (i, (lin, log)) in linear_specs.iter().zip(&lognorm_specs).enumerate() {
        lin.save(&patient_dir.join(format!("chunk_{i:03}.linear.txt")))?;
        log.save(&patient_dir.join(format!("chunk_{i:03}.lognorm.txt")))?;
        let score = scorer
            .score(log)
            .map_err(|e| stage_context(e, patient_id, &format!("chunk {i}"), "classify"))?;
        scores.push(score);
    }
    let mut scores_csv = String::from("chunk,p_cough,p_noncough,qualifies\n");
    for (i, s) in scores.iter().enumerate() {
        let qualifies = s.p_cough > cfg.confidence;
        let _ = writeln!(
            scores_csv,
            "{i},{},{},{}",
            s.p_cough, s.p_noncough, qualifies
        );
    }
    std::fs::write(patient_dir.join("scores.csv"), scores_csv)?;

    let qualifying: Vec<usize> = (0..scores.len())
        .filter(|&i| scores[i].p_cough > cfg.confidence)
        .collect();
    if qualifying.is_empty() {
        return Ok(PatientOutput {
            patient_id: patient_id.to_string(),
            profile: None,
            features: Vec::new(),
            n_chunks: linear_specs.len(),
        });
    }

    // occlusion maps for qualifying windows only
    let mut maps: Vec<OcclusionMap> = Vec::with_capacity(qualifying.len());
    let mut kept_specs: Vec<SpectrogramMatrix> = Vec::with_capacity(qualifying.len());
    for &i in &qualifying {
        let map = occlusion_map(scorer, &lognorm_specs[i], &cfg.occlusion)
            .map_err(|e| stage_context(e, patient_id, &format!("chunk {i}"), "occlusion"))?;
        map.save(&patient_dir.join(format!("map_{i:03}.txt")))?;
        maps.push(map);
        kept_specs.push(linear_specs[i].clone());
    }

    let profile = PatientProfile::from_windows(patient_id, &kept_specs, &maps)
        .map_err(|e| stage_context(e, patient_id, "-", "profile"))?;
    profile
        .avg_spectrogram
        .save(&patient_dir.join("avg_spec.txt"))?;
    profile.avg_map.save(&patient_dir.join("avg_map.txt"))?;

    // threshold sweep: weighted spectrogram and features per threshold
    let mut features = Vec::with_capacity(cfg.thresholds.len());
    for &th in &cfg.thresholds {
        let weighted = weight_spectrogram(
            &profile.avg_spectrogram,
            &profile.avg_map,
            th,
            cfg.weight_mode,
        )
        .map_err(|e| stage_context(e, patient_id, "-", "weighting"))?;
        weighted.save(&patient_dir.join(format!("weighted_th{th:.2}.txt")))?;
        let feats = extract_features(&weighted, &cfg.features)
            .map_err(|e| stage_context(e, patient_id, &format!("threshold {th}"), "features"))?;
        features.push((th, feats));
    }

    Ok(PatientOutput {
        patient_id: patient_id.to_string(),
        profile: Some(profile),
        features,
        n_chunks: linear_specs.len(),
    })
}

/// Filter group definitions down to patients that produced features;
/// a side left empty is a data error.
fn filter_groups(
    groups: &[GroupSpec],
    available: &std::collections::BTreeSet<String>,
) -> Result<Vec<GroupSpec>> {
    groups
        .iter()
        .map(|g| {
            let a: std::collections::BTreeSet<String> =
                g.group_a.intersection(available).cloned().collect();
            let b: std::collections::BTreeSet<String> =
                g.group_b.intersection(available).cloned().collect();
            if a.is_empty() || b.is_empty() {
                return Err(Error::Data(format!(
                    "group {}: a side has no remaining patients after excluding windowless ones",
                    g.name
                )));
            }
            GroupSpec::new(&g.name, a, b)
        })
        .collect()
}

fn render_run_meta(cfg: &PipelineConfig, report: &RunReport) -> String {
    let mut meta = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(meta, "{k} = {v}");
    };
    kv("tool", format!("coughmap {}", env!("CARGO_PKG_VERSION")));
    kv("format.matrix", "1".into());
    kv("format.cnnw", "1".into());
    kv("audio.decimation_factor", cfg.decimation.to_string());
    kv("audio.fir_taps", cfg.fir.taps.to_string());
    kv("audio.fir_cutoff_ratio", cfg.fir.cutoff_ratio.to_string());
    kv("spectrogram.k_max", K_MAX.to_string());
    kv("spectrogram.n_frames", N_FRAMES.to_string());
    kv("spectrogram.frame_len", FRAME_LEN.to_string());
    kv("spectrogram.window", "hann".into());
    kv(
        "spectrogram.log_eps",
        coughmap_core::spectrogram::LOG_EPS.to_string(),
    );
    match &cfg.scorer {
        ScorerSpec::Model(path) => kv("scorer", format!("cnnw {}", path.display())),
        ScorerSpec::Reference {
            band_lo,
            band_hi,
            gain,
        } => {
            kv("scorer", "reference".into());
            kv("scorer.band_lo", band_lo.to_string());
            kv("scorer.band_hi", band_hi.to_string());
            kv("scorer.gain", gain.to_string());
        }
    }
    kv("confidence", cfg.confidence.to_string());
    kv("occlusion.patch_h", cfg.occlusion.patch_h.to_string());
    kv("occlusion.patch_w", cfg.occlusion.patch_w.to_string());
    kv("occlusion.stride_h", cfg.occlusion.stride_h.to_string());
    kv("occlusion.stride_w", cfg.occlusion.stride_w.to_string());
    kv(
        "occlusion.baseline",
        match cfg.occlusion.baseline {
            coughmap_core::xai::Baseline::Zero => "zero".into(),
            coughmap_core::xai::Baseline::MapMin => "mapmin".into(),
        },
    );
    kv(
        "weight_mode",
        match cfg.weight_mode {
            coughmap_core::xai::WeightMode::MapValue => "mapvalue".into(),
            coughmap_core::xai::WeightMode::Indicator => "indicator".into(),
        },
    );
    kv(
        "thresholds",
        cfg.thresholds
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    kv("features.renyi_q", cfg.features.renyi_q.to_string());
    kv(
        "features.renyi_form",
        match cfg.features.renyi_form {
            coughmap_core::features::RenyiForm::Normalized => "normalized".into(),
            coughmap_core::features::RenyiForm::Literal => "literal".into(),
        },
    );
    kv(
        "features.rolloff_fraction",
        cfg.features.rolloff_fraction.to_string(),
    );
    kv("features.eps", cfg.features.eps.to_string());
    kv(
        "features.zero_frame_policy",
        match cfg.features.zero_frame_policy {
            coughmap_core::features::ZeroFramePolicy::SkipFrame => "skip".into(),
            coughmap_core::features::ZeroFramePolicy::Error => "error".into(),
        },
    );
    kv("stats.gaussianity_test", "shapiro_wilk".into());
    kv("stats.alpha", coughmap_core::stats::ALPHA.to_string());
    kv(
        "stats.mwu_exact_limit",
        coughmap_core::stats::MWU_EXACT_LIMIT.to_string(),
    );
    kv("patients.processed", report.processed.join(","));
    kv("patients.skipped", report.skipped.join(","));
    kv("results.rows", report.result_rows.to_string());
    meta
}

/// Run the whole pipeline; `threads` controls patient-level parallelism.
pub fn run_pipeline(cfg: &PipelineConfig, threads: usize) -> Result<RunReport> {
    if cfg.manifest.is_empty() {
        return Err(Error::Argument("manifest lists no patients".into()));
    }
    let group_src = std::fs::read_to_string(&cfg.groups_path).map_err(|e| {
        Error::Argument(format!(
            "cannot read groups file {}: {e}",
            cfg.groups_path.display()
        ))
    })?;
    let group_cfg = parse_group_config(&group_src)?;
    let scorer = load_scorer(&cfg.scorer)?;

    let out_dir = &cfg.out_dir;
    std::fs::create_dir_all(out_dir.join("patients"))
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", out_dir.display())))?;

    // per-patient processing, optionally on worker threads
    let n = cfg.manifest.len();
    let workers = threads.max(1).min(n);
    let mut outputs: Vec<Option<Result<PatientOutput>>> = Vec::new();
    outputs.resize_with(n, || None);
    if workers <= 1 {
        for (i, (pid, wavs)) in cfg.manifest.iter().enumerate() {
            let dir = out_dir.join("patients").join(pid);
            outputs[i] = Some(process_patient(pid, wavs, cfg, &scorer, &dir));
        }
    } else {
        let scorer_ref = &scorer;
        let indexed: Vec<(usize, &(String, Vec<PathBuf>))> =
            cfg.manifest.iter().enumerate().collect();
        let chunk = n.div_ceil(workers);
        let slabs: Vec<Vec<(usize, Result<PatientOutput>)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = indexed
                .chunks(chunk)
                .map(|slab| {
                    scope.spawn(move || {
                        slab.iter()
                            .map(|(i, (pid, wavs))| {
                                let dir = out_dir.join("patients").join(pid);
                                (*i, process_patient(pid, wavs, cfg, scorer_ref, &dir))
                            })
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for slab in slabs {
            for (i, result) in slab {
                outputs[i] = Some(result);
            }
        }
    }

    // aggregate in manifest order
    let mut table = FeatureTable::new();
    let mut processed = Vec::new();
    let mut skipped = Vec::new();
    for output in outputs.into_iter().flatten() {
        let output = output?;
        if output.profile.is_none() {
            eprintln!(
                "warning: patient {} has no windows above confidence {} ({} chunks scored); excluded from statistics",
                output.patient_id, cfg.confidence, output.n_chunks
            );
            skipped.push(output.patient_id);
            continue;
        }
        for (th, feats) in &output.features {
            table.insert(&output.patient_id, *th, *feats);
        }
        processed.push(output.patient_id);
    }
    if table.is_empty() {
        return Err(Error::Data(
            "no patient produced any qualifying cough window".into(),
        ));
    }

    let available: std::collections::BTreeSet<String> = processed.iter().cloned().collect();
    // groups may reference patients absent from this run's manifest
    let known: Vec<GroupSpec> = group_cfg
        .groups
        .iter()
        .filter(|g| {
            g.group_a
                .union(&g.group_b)
                .any(|pid| available.contains(pid))
        })
        .cloned()
        .collect();
    let groups = filter_groups(&known, &available)?;
    if groups.is_empty() {
        return Err(Error::Data(
            "no comparison group matches the processed patients".into(),
        ));
    }

    let results = compare_groups(&table, &groups, &cfg.thresholds)?;

    // final artifacts
    std::fs::write(out_dir.join("features.csv"), write_features_csv(&table))?;
    std::fs::write(out_dir.join("results.csv"), write_results_csv(&results))?;
    std::fs::write(
        out_dir.join("boxplots.json"),
        build_boxplots(&table, &groups, &cfg.thresholds)?,
    )?;
    std::fs::write(out_dir.join("report.txt"), render_report(&results))?;

    let report = RunReport {
        processed,
        skipped,
        result_rows: results.len(),
        out_dir: out_dir.clone(),
    };
    std::fs::write(out_dir.join("run_meta.txt"), render_run_meta(cfg, &report))?;
    Ok(report)
}

/// Boxplot summaries for every (group, side, feature, threshold).
fn build_boxplots(
    table: &FeatureTable,
    groups: &[GroupSpec],
    thresholds: &[f64],
) -> Result<String> {
    let mut sorted_groups: Vec<&GroupSpec> = groups.iter().collect();
    sorted_groups.sort_by(|a, b| a.name.cmp(&b.name));
    let mut entries = Vec::new();
    for group in sorted_groups {
        for (side_name, side) in [("a", &group.group_a), ("b", &group.group_b)] {
            for feature in coughmap_core::features::FEATURE_NAMES {
                for &th in thresholds {
                    let values: Vec<f64> = side
                        .iter()
                        .map(|pid| {
                            table
                                .get(pid, th)
                                .and_then(|f| f.get(feature))
                                .ok_or_else(|| {
                                    Error::Data(format!(
                                        "group {}: no features for patient {pid} at threshold {th}",
                                        group.name
                                    ))
                                })
                        })
                        .collect::<Result<_>>()?;
                    let summary = boxplot_summary(&values)?;
                    entries.push(BoxplotEntry::new(
                        &group.name,
                        side_name,
                        feature,
                        th,
                        values.len(),
                        summary,
                    ));
                }
            }
        }
    }
    write_boxplots_json(&entries)
}

/// Stage-composability helper used by tests: the list of stage artifacts a
/// run writes per patient.
pub fn patient_dir(out_dir: &Path, patient_id: &str) -> PathBuf {
    out_dir.join("patients").join(patient_id)
}

/// Collected rows of a results list, grouped per group name in input order.
pub fn group_names(results: &[TestResult]) -> Vec<String> {
    let mut names = Vec::new();
    for r in results {
        if names.last() != Some(&r.group) && !names.contains(&r.group) {
            names.push(r.group.clone());
        }
    }
    names
}
