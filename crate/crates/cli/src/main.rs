//! `coughmap` — cough spectral analysis driven by occlusion maps.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coughmap::config::{
    load_config, parse_baseline, parse_renyi_form, parse_weight_mode, parse_zero_frame_policy,
};
use coughmap::csvio::{
    parse_features_csv, parse_results_csv, write_boxplots_json, write_results_csv, BoxplotEntry,
    FEATURES_HEADER,
};
use coughmap::exit_code;
use coughmap::fixture::gen_fixture;
use coughmap::pipeline::run_pipeline;
use coughmap::report::render_report;
use coughmap_core::audio::{decimate_with, decode_wav, segment_chunks};
use coughmap_core::cnn::{
    classify_windows, load_model, reference_classifier, ClassifierModel, Scorer,
};
use coughmap_core::features::{extract_features, FeatureConfig};
use coughmap_core::spectrogram::{
    compute_spectrogram, log_normalize, SpectrogramMatrix, CHUNK_LEN,
};
use coughmap_core::stats::{boxplot_summary, compare_groups, parse_group_config};
use coughmap_core::xai::{
    average_maps, average_spectrograms, occlusion_map_threaded, weight_spectrogram,
    OcclusionConfig, OcclusionMap,
};
use coughmap_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "coughmap",
    version,
    about = "Cough spectral analysis: spectrograms, CNN scoring, occlusion maps, weighted spectral features and group statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Scorer selection shared by `classify` and `occlude`.
#[derive(Args)]
struct ScorerArgs {
    /// CNNW weight file
    #[arg(long, conflicts_with = "band")]
    model: Option<PathBuf>,
    /// Band-energy reference scorer, as `lo:hi` in Hz
    #[arg(long)]
    band: Option<String>,
    /// Logistic gain of the reference scorer
    #[arg(long, default_value_t = coughmap_core::cnn::DEFAULT_BAND_GAIN)]
    gain: f64,
}

enum AnyScorer {
    Model(Box<ClassifierModel>),
    Band(coughmap_core::cnn::BandEnergyScorer),
}

impl Scorer for AnyScorer {
    fn score(&self, input: &SpectrogramMatrix) -> Result<coughmap_core::cnn::ClassScore> {
        match self {
            AnyScorer::Model(m) => m.score(input),
            AnyScorer::Band(b) => b.score(input),
        }
    }
}

impl ScorerArgs {
    fn load(&self) -> Result<AnyScorer> {
        match (&self.model, &self.band) {
            (Some(path), None) => {
                let bytes = std::fs::read(path).map_err(|e| {
                    Error::Data(format!("cannot read model {}: {e}", path.display()))
                })?;
                Ok(AnyScorer::Model(Box::new(load_model(&bytes)?)))
            }
            (None, Some(band)) => {
                let (lo, hi) = band.split_once(':').ok_or_else(|| {
                    Error::Argument(format!("--band must be `lo:hi`, got `{band}`"))
                })?;
                let lo: f64 = lo
                    .parse()
                    .map_err(|_| Error::Argument(format!("--band: bad low edge `{lo}`")))?;
                let hi: f64 = hi
                    .parse()
                    .map_err(|_| Error::Argument(format!("--band: bad high edge `{hi}`")))?;
                Ok(AnyScorer::Band(
                    reference_classifier(lo, hi)?.with_gain(self.gain),
                ))
            }
            _ => Err(Error::Argument(
                "exactly one of --model or --band is required".into(),
            )),
        }
    }
}

#[derive(Args)]
struct OcclusionArgs {
    /// Patch size as `rows,cols`
    #[arg(long, default_value = "5,10")]
    patch: String,
    /// Stride as `rows,cols`
    #[arg(long, default_value = "5,10")]
    stride: String,
    /// Fill value for occluded patches: `zero` or `mapmin`
    #[arg(long, default_value = "zero")]
    baseline: String,
}

impl OcclusionArgs {
    fn parse(&self) -> Result<OcclusionConfig> {
        let pair = |s: &str, what: &str| -> Result<(usize, usize)> {
            let (a, b) = s
                .split_once(',')
                .ok_or_else(|| Error::Argument(format!("--{what} must be `rows,cols`")))?;
            Ok((
                a.trim()
                    .parse()
                    .map_err(|_| Error::Argument(format!("--{what}: bad rows `{a}`")))?,
                b.trim()
                    .parse()
                    .map_err(|_| Error::Argument(format!("--{what}: bad cols `{b}`")))?,
            ))
        };
        let (patch_h, patch_w) = pair(&self.patch, "patch")?;
        let (stride_h, stride_w) = pair(&self.stride, "stride")?;
        Ok(OcclusionConfig {
            patch_h,
            patch_w,
            stride_h,
            stride_w,
            baseline: parse_baseline(&self.baseline)?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a config file
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Override the config's weighting mode (`mapvalue` or `indicator`)
        #[arg(long)]
        weight_mode: Option<String>,
        /// Override the config's Renyi form (`normalized` or `literal`)
        #[arg(long)]
        renyi: Option<String>,
    },
    /// Decode a WAV, decimate it and write per-chunk spectrogram matrices
    Spectra {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        decimate: usize,
        /// Anti-alias filter length (even tap count)
        #[arg(long, default_value_t = coughmap_core::audio::FIR_TAPS)]
        fir_taps: usize,
        /// Anti-alias cutoff as a fraction of the new Nyquist
        #[arg(long, default_value_t = coughmap_core::audio::FIR_CUTOFF_RATIO)]
        fir_cutoff: f64,
    },
    /// Score spectrogram matrices and report qualifying windows
    Classify {
        #[command(flatten)]
        scorer: ScorerArgs,
        #[arg(long, default_value_t = 0.9)]
        confidence: f64,
        /// Write scores CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Log-normalized matrix files
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Compute occlusion maps for spectrogram matrices
    Occlude {
        #[command(flatten)]
        scorer: ScorerArgs,
        #[command(flatten)]
        occlusion: OcclusionArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Log-normalized matrix files
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Elementwise mean of matrix files (all spectrograms, or all maps)
    Average {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Threshold-weight a spectrogram by an occlusion map
    Weight {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        th: f64,
        #[arg(long, default_value = "mapvalue")]
        mode: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the seven spectral features from a matrix file as a CSV row
    Features {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        patient: String,
        #[arg(long)]
        th: f64,
        #[arg(long, default_value = "normalized")]
        renyi: String,
        #[arg(long, default_value_t = 4.0)]
        renyi_q: f64,
        #[arg(long, default_value_t = 0.85)]
        rolloff: f64,
        #[arg(long, default_value = "skip")]
        zero_frame: String,
        /// Print the CSV header line before the row
        #[arg(long)]
        header: bool,
    },
    /// Run the group comparison protocol over a features CSV
    Stats {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        groups: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write boxplot summaries as JSON
        #[arg(long)]
        boxplots: Option<PathBuf>,
    },
    /// Render a results CSV as the per-group threshold/feature table
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Write the table here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the seeded synthetic corpus and weights
    GenFixture {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", dir.display())))
}

fn load_matrices(paths: &[PathBuf]) -> Result<Vec<SpectrogramMatrix>> {
    paths.iter().map(|p| SpectrogramMatrix::load(p)).collect()
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            out,
            threads,
            weight_mode,
            renyi,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            if let Some(mode) = weight_mode {
                cfg.weight_mode = parse_weight_mode(&mode)?;
            }
            if let Some(form) = renyi {
                cfg.features.renyi_form = parse_renyi_form(&form)?;
            }
            let report = run_pipeline(&cfg, threads)?;
            println!(
                "processed {} patient(s), skipped {}, wrote {} result rows to {}",
                report.processed.len(),
                report.skipped.len(),
                report.result_rows,
                report.out_dir.display()
            );
            Ok(())
        }
        Command::Spectra {
            input,
            out,
            decimate: factor,
            fir_taps,
            fir_cutoff,
        } => {
            ensure_dir(&out)?;
            let bytes = std::fs::read(&input)
                .map_err(|e| Error::Data(format!("cannot read {}: {e}", input.display())))?;
            let clip = decode_wav(&bytes)?;
            let design = coughmap_core::audio::FirDesign {
                taps: fir_taps,
                cutoff_ratio: fir_cutoff,
            };
            let decimated = decimate_with(&clip, factor, design)?;
            let chunks = segment_chunks(&decimated, CHUNK_LEN);
            if chunks.is_empty() {
                return Err(Error::Data(format!(
                    "{}: too short, no complete {CHUNK_LEN}-sample chunk after decimation",
                    input.display()
                )));
            }
            for (i, chunk) in chunks.iter().enumerate() {
                let spec = compute_spectrogram(chunk, f64::from(decimated.sample_rate_hz))?;
                spec.save(&out.join(format!("chunk_{i:03}.linear.txt")))?;
                log_normalize(&spec)?.save(&out.join(format!("chunk_{i:03}.lognorm.txt")))?;
            }
            println!("wrote {} chunk(s) to {}", chunks.len(), out.display());
            Ok(())
        }
        Command::Classify {
            scorer,
            confidence,
            out,
            inputs,
        } => {
            let scorer = scorer.load()?;
            let specs = load_matrices(&inputs)?;
            let qualifying = classify_windows(&scorer, &specs, confidence)?;
            let mut csv = String::from("input,p_cough,p_noncough,qualifies\n");
            for (i, (path, spec)) in inputs.iter().zip(&specs).enumerate() {
                let score = scorer.score(spec)?;
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    path.display(),
                    score.p_cough,
                    score.p_noncough,
                    qualifying.contains(&i)
                ));
            }
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Occlude {
            scorer,
            occlusion,
            out,
            threads,
            inputs,
        } => {
            ensure_dir(&out)?;
            let scorer = scorer.load()?;
            let cfg = occlusion.parse()?;
            for path in &inputs {
                let spec = SpectrogramMatrix::load(path)?;
                let map = occlusion_map_threaded(&scorer, &spec, &cfg, threads)?;
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("input");
                map.save(&out.join(format!("{stem}.map.txt")))?;
            }
            println!("wrote {} map(s) to {}", inputs.len(), out.display());
            Ok(())
        }
        Command::Average { out, inputs } => {
            // maps and spectrograms share the matrix format; decide by trying
            // the map loader first
            if let Ok(maps) = inputs
                .iter()
                .map(|p| OcclusionMap::load(p))
                .collect::<Result<Vec<_>>>()
            {
                average_maps(&maps)?.save(&out)?;
            } else {
                let specs = load_matrices(&inputs)?;
                average_spectrograms(&specs)?.save(&out)?;
            }
            Ok(())
        }
        Command::Weight {
            spec,
            map,
            th,
            mode,
            out,
        } => {
            let spec = SpectrogramMatrix::load(&spec)?;
            let map = OcclusionMap::load(&map)?;
            let weighted = weight_spectrogram(&spec, &map, th, parse_weight_mode(&mode)?)?;
            weighted.save(&out)?;
            Ok(())
        }
        Command::Features {
            input,
            patient,
            th,
            renyi,
            renyi_q,
            rolloff,
            zero_frame,
            header,
        } => {
            let cfg = FeatureConfig {
                renyi_q,
                rolloff_fraction: rolloff,
                zero_frame_policy: parse_zero_frame_policy(&zero_frame)?,
                renyi_form: parse_renyi_form(&renyi)?,
                ..FeatureConfig::default()
            };
            let spec = SpectrogramMatrix::load(&input)?;
            let features = extract_features(&spec, &cfg)?;
            if header {
                println!("{FEATURES_HEADER}");
            }
            println!(
                "{}",
                coughmap::csvio::features_csv_row(&patient, th, &features)
            );
            Ok(())
        }
        Command::Stats {
            features,
            groups,
            out,
            boxplots,
        } => {
            let table = parse_features_csv(&coughmap::csvio::read_to_string(&features)?)?;
            let group_cfg = parse_group_config(&coughmap::csvio::read_to_string(&groups)?)?;
            let mut thresholds: Vec<f64> = table.iter().map(|(_, th, _)| th).collect();
            thresholds.sort_by(f64::total_cmp);
            thresholds.dedup();
            let results = compare_groups(&table, &group_cfg.groups, &thresholds)?;
            std::fs::write(&out, write_results_csv(&results))?;
            if let Some(box_path) = boxplots {
                let mut entries = Vec::new();
                for group in &group_cfg.groups {
                    for (side_name, side) in [("a", &group.group_a), ("b", &group.group_b)] {
                        for feature in coughmap_core::features::FEATURE_NAMES {
                            for &th in &thresholds {
                                let values: Vec<f64> = side
                                    .iter()
                                    .filter_map(|pid| {
                                        table.get(pid, th).and_then(|f| f.get(feature))
                                    })
                                    .collect();
                                if values.is_empty() {
                                    continue;
                                }
                                entries.push(BoxplotEntry::new(
                                    &group.name,
                                    side_name,
                                    feature,
                                    th,
                                    values.len(),
                                    boxplot_summary(&values)?,
                                ));
                            }
                        }
                    }
                }
                std::fs::write(box_path, write_boxplots_json(&entries)?)?;
            }
            println!("wrote {} result rows to {}", results.len(), out.display());
            Ok(())
        }
        Command::Report { results, out } => {
            let rows = parse_results_csv(&coughmap::csvio::read_to_string(&results)?)?;
            let rendered = render_report(&rows);
            match out {
                Some(path) => std::fs::write(path, rendered)?,
                None => print!("{rendered}"),
            }
            Ok(())
        }
        Command::GenFixture { seed, out } => {
            ensure_dir(&out)?;
            let paths = gen_fixture(seed, &out)?;
            println!(
                "fixture written to {} (config: {})",
                paths.root.display(),
                paths.config.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
