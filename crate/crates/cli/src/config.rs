//! Pipeline configuration: a plain `key = value` text file plus the patient
//! manifest it points at.
//!
//! Relative paths inside a config or manifest resolve against the directory
//! containing that file, so a fixture directory is self-contained.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use coughmap_core::audio::FirDesign;
use coughmap_core::features::{FeatureConfig, RenyiForm, ZeroFramePolicy};
use coughmap_core::xai::{Baseline, OcclusionConfig, WeightMode};
use coughmap_core::{Error, Result};

/// Which scorer the pipeline uses.
#[derive(Debug, Clone, PartialEq)]
pub enum ScorerSpec {
    /// CNNW weight file.
    Model(PathBuf),
    /// Band-energy reference scorer.
    Reference {
        band_lo: f64,
        band_hi: f64,
        gain: f64,
    },
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Patient id -> WAV paths, in manifest order.
    pub manifest: Vec<(String, Vec<PathBuf>)>,
    pub scorer: ScorerSpec,
    pub confidence: f64,
    pub decimation: usize,
    pub fir: FirDesign,
    pub occlusion: OcclusionConfig,
    pub weight_mode: WeightMode,
    pub thresholds: Vec<f64>,
    pub features: FeatureConfig,
    pub groups_path: PathBuf,
    pub out_dir: PathBuf,
}

fn parse_kv(src: &str, origin: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Argument(format!(
                "{}:{}: expected `key = value`, got `{line}`",
                origin.display(),
                lineno + 1
            ))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::Argument(format!(
                "{}:{}: duplicate key `{key}`",
                origin.display(),
                lineno + 1
            )));
        }
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::Argument(format!("config key `{key}`: bad value `{v}`"))),
    }
}

pub fn parse_weight_mode(s: &str) -> Result<WeightMode> {
    match s {
        "mapvalue" => Ok(WeightMode::MapValue),
        "indicator" => Ok(WeightMode::Indicator),
        other => Err(Error::Argument(format!(
            "weight mode must be `mapvalue` or `indicator`, got `{other}`"
        ))),
    }
}

pub fn parse_renyi_form(s: &str) -> Result<RenyiForm> {
    match s {
        "normalized" => Ok(RenyiForm::Normalized),
        "literal" => Ok(RenyiForm::Literal),
        other => Err(Error::Argument(format!(
            "renyi form must be `normalized` or `literal`, got `{other}`"
        ))),
    }
}

pub fn parse_baseline(s: &str) -> Result<Baseline> {
    match s {
        "zero" => Ok(Baseline::Zero),
        "mapmin" => Ok(Baseline::MapMin),
        other => Err(Error::Argument(format!(
            "baseline must be `zero` or `mapmin`, got `{other}`"
        ))),
    }
}

pub fn parse_zero_frame_policy(s: &str) -> Result<ZeroFramePolicy> {
    match s {
        "skip" => Ok(ZeroFramePolicy::SkipFrame),
        "error" => Ok(ZeroFramePolicy::Error),
        other => Err(Error::Argument(format!(
            "zero_frame_policy must be `skip` or `error`, got `{other}`"
        ))),
    }
}

/// Read a manifest file: one `<patient_id> <wav path>` pair per line, with
/// repeated ids appending more recordings to the same patient.
pub fn load_manifest(path: &Path) -> Result<Vec<(String, Vec<PathBuf>)>> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| Error::Argument(format!("cannot read manifest {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut order: Vec<String> = Vec::new();
    let mut by_id: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for (lineno, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, wav) = line.split_once(char::is_whitespace).ok_or_else(|| {
            Error::Argument(format!(
                "{}:{}: expected `<patient_id> <wav path>`",
                path.display(),
                lineno + 1
            ))
        })?;
        let id = id.trim();
        let wav = wav.trim();
        if !by_id.contains_key(id) {
            order.push(id.to_string());
        }
        by_id
            .entry(id.to_string())
            .or_default()
            .push(base.join(wav));
    }
    if order.is_empty() {
        return Err(Error::Argument(format!(
            "manifest {} lists no patients",
            path.display()
        )));
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let paths = by_id.remove(&id).unwrap();
            (id, paths)
        })
        .collect())
}

/// Load and validate a pipeline config file.
pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| Error::Argument(format!("cannot read config {}: {e}", path.display())))?;
    let map = parse_kv(&src, path)?;
    let base = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();

    let resolve = |key: &str| -> Result<PathBuf> {
        map.get(key)
            .map(|v| base.join(v))
            .ok_or_else(|| Error::Argument(format!("config is missing required key `{key}`")))
    };

    let manifest_path = resolve("manifest")?;
    let manifest = load_manifest(&manifest_path)?;

    let scorer = match map.get("model").map(String::as_str) {
        None => {
            return Err(Error::Argument(
                "config is missing required key `model`".into(),
            ))
        }
        Some("reference") => {
            let band_lo = parse_num(&map, "band_lo", f64::NAN)?;
            let band_hi = parse_num(&map, "band_hi", f64::NAN)?;
            if !band_lo.is_finite() || !band_hi.is_finite() {
                return Err(Error::Argument(
                    "model = reference needs `band_lo` and `band_hi`".into(),
                ));
            }
            ScorerSpec::Reference {
                band_lo,
                band_hi,
                gain: parse_num(&map, "band_gain", coughmap_core::cnn::DEFAULT_BAND_GAIN)?,
            }
        }
        Some(path) => ScorerSpec::Model(base.join(path)),
    };

    let confidence: f64 = parse_num(&map, "confidence", 0.9)?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(Error::Argument(format!(
            "confidence {confidence} outside [0, 1]"
        )));
    }

    let decimation: usize = parse_num(&map, "decimate", 5)?;
    if decimation == 0 {
        return Err(Error::Argument("decimate must be >= 1".into()));
    }

    let fir_defaults = FirDesign::default();
    let fir = FirDesign {
        taps: parse_num(&map, "fir_taps", fir_defaults.taps)?,
        cutoff_ratio: parse_num(&map, "fir_cutoff", fir_defaults.cutoff_ratio)?,
    };
    if fir.taps < 2 || !fir.taps.is_multiple_of(2) {
        return Err(Error::Argument(format!(
            "fir_taps must be even and >= 2, got {}",
            fir.taps
        )));
    }
    if !(fir.cutoff_ratio > 0.0 && fir.cutoff_ratio <= 1.0) {
        return Err(Error::Argument(format!(
            "fir_cutoff must be in (0, 1], got {}",
            fir.cutoff_ratio
        )));
    }

    let defaults = OcclusionConfig::default();
    let occlusion = OcclusionConfig {
        patch_h: parse_num(&map, "patch_h", defaults.patch_h)?,
        patch_w: parse_num(&map, "patch_w", defaults.patch_w)?,
        stride_h: parse_num(&map, "stride_h", defaults.stride_h)?,
        stride_w: parse_num(&map, "stride_w", defaults.stride_w)?,
        baseline: parse_baseline(map.get("baseline").map(String::as_str).unwrap_or("zero"))?,
    };

    let weight_mode = parse_weight_mode(
        map.get("weight_mode")
            .map(String::as_str)
            .unwrap_or("mapvalue"),
    )?;

    let thresholds: Vec<f64> = match map.get("thresholds") {
        None => vec![0.5, 0.6, 0.7, 0.8, 0.9],
        Some(list) => {
            let mut out = Vec::new();
            for tok in list.split(',') {
                let tok = tok.trim();
                if tok.is_empty() {
                    continue;
                }
                out.push(
                    tok.parse()
                        .map_err(|_| Error::Argument(format!("thresholds: bad value `{tok}`")))?,
                );
            }
            out
        }
    };
    if thresholds.is_empty() {
        return Err(Error::Argument("thresholds list is empty".into()));
    }
    for pair in thresholds.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Argument(
                "thresholds must be strictly increasing".into(),
            ));
        }
    }
    if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Argument("thresholds must lie in [0, 1]".into()));
    }

    let feature_defaults = FeatureConfig::default();
    let features = FeatureConfig {
        renyi_q: parse_num(&map, "renyi_q", feature_defaults.renyi_q)?,
        rolloff_fraction: parse_num(&map, "rolloff_fraction", feature_defaults.rolloff_fraction)?,
        eps: parse_num(&map, "eps", feature_defaults.eps)?,
        zero_frame_policy: parse_zero_frame_policy(
            map.get("zero_frame_policy")
                .map(String::as_str)
                .unwrap_or("skip"),
        )?,
        renyi_form: parse_renyi_form(map.get("renyi").map(String::as_str).unwrap_or("normalized"))?,
    };
    features.validate()?;

    let groups_path = resolve("groups")?;
    let out_dir = base.join(map.get("out").map(String::as_str).unwrap_or("out"));

    // reject unknown keys so typos surface as config errors
    const KNOWN: [&str; 21] = [
        "manifest",
        "model",
        "band_lo",
        "band_hi",
        "band_gain",
        "confidence",
        "decimate",
        "fir_taps",
        "fir_cutoff",
        "patch_h",
        "patch_w",
        "stride_h",
        "stride_w",
        "baseline",
        "weight_mode",
        "thresholds",
        "renyi",
        "renyi_q",
        "rolloff_fraction",
        "eps",
        "zero_frame_policy",
    ];
    for key in map.keys() {
        if key != "groups" && key != "out" && !KNOWN.contains(&key.as_str()) {
            return Err(Error::Argument(format!("unknown config key `{key}`")));
        }
    }

    Ok(PipelineConfig {
        manifest,
        scorer,
        confidence,
        decimation,
        fir,
        occlusion,
        weight_mode,
        thresholds,
        features,
        groups_path,
        out_dir,
    })
}
