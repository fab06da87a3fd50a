//! Seeded synthetic corpus: patients with band-limited "cough" bursts, a
//! manifest, group definitions, a pipeline config and synthetic CNNW
//! weights. Everything derives from one seed, so two generations with the
//! same seed are byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coughmap_core::audio::encode_wav_pcm16;
use coughmap_core::cnn::{default_stack, save_model, synthetic_model};
use coughmap_core::spectrogram::{FRAME_LEN, N_BINS, N_FRAMES, PIPELINE_SAMPLE_RATE_HZ};
use coughmap_core::{Error, Result};

/// Input sampling rate of the generated WAVs.
pub const FIXTURE_RATE: u32 = 44_100;
/// Decimation factor the fixture config uses.
pub const FIXTURE_DECIMATION: usize = 5;
/// Scorer band the fixture "coughs" live in.
pub const FIXTURE_BAND: (f64, f64) = (800.0, 2000.0);

/// Patient roster: id, diagnosis, inclusive bin range of the cough burst.
const PATIENTS: [(&str, &str, usize, usize); 6] = [
    ("P01", "copd", 9, 20),
    ("P02", "copd", 9, 19),
    ("P03", "lung_cancer", 9, 14),
    ("P04", "pneumonia", 14, 20),
    ("P05", "ard", 10, 16),
    ("P06", "asthma", 15, 20),
];

/// Chunks per patient: three cough bursts plus one low-frequency rumble that
/// must stay below the confidence threshold.
const COUGH_CHUNKS: usize = 3;
const TOTAL_CHUNKS: usize = COUGH_CHUNKS + 1;

pub struct FixturePaths {
    pub root: PathBuf,
    pub config: PathBuf,
    pub manifest: PathBuf,
    pub groups: PathBuf,
    pub model: PathBuf,
}

/// Frequency of analysis bin `k` after decimation.
fn bin_freq(k: usize) -> f64 {
    k as f64 * PIPELINE_SAMPLE_RATE_HZ / FRAME_LEN as f64
}

fn synth_chunk(
    rng: &mut ChaCha8Rng,
    bins: std::ops::RangeInclusive<usize>,
    amplitude: f64,
) -> Vec<f64> {
    let chunk_input_len = coughmap_core::spectrogram::CHUNK_LEN * FIXTURE_DECIMATION;
    let bins: Vec<usize> = bins.collect();
    let per_tone = amplitude / bins.len() as f64;
    let phases: Vec<f64> = bins
        .iter()
        .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
        .collect();
    let mut samples = vec![0.0f64; chunk_input_len];
    for (slot, sample) in samples.iter_mut().enumerate() {
        let t = slot as f64 / f64::from(FIXTURE_RATE);
        let mut acc = 0.0;
        for (&k, &phase) in bins.iter().zip(&phases) {
            acc += per_tone * (std::f64::consts::TAU * bin_freq(k) * t + phase).sin();
        }
        // low noise floor keeps the log normalization away from log(0)
        acc += 0.003 * (rng.random::<f64>() * 2.0 - 1.0);
        *sample = acc;
    }
    samples
}

fn to_pcm(samples: &[f64]) -> Vec<i16> {
    samples
        .iter()
        .map(|&s| (s * 32767.0).round().clamp(-32768.0, 32767.0) as i16)
        .collect()
}

/// Generate the corpus under `root`. Returns the paths a caller needs to run
/// the pipeline.
pub fn gen_fixture(seed: u64, root: &Path) -> Result<FixturePaths> {
    let wav_dir = root.join("wavs");
    std::fs::create_dir_all(&wav_dir)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", wav_dir.display())))?;

    let mut manifest = String::new();
    let mut groups = String::new();

    for (pid, diagnosis, lo_bin, hi_bin) in PATIENTS {
        // one rng stream per patient, derived from the seed and the id, so
        // adding patients never reshuffles existing ones
        let patient_seed = seed ^ (pid.bytes().fold(0u64, |acc, b| acc * 257 + u64::from(b)));
        let mut rng = ChaCha8Rng::seed_from_u64(patient_seed);

        let mut samples = Vec::new();
        for chunk_idx in 0..TOTAL_CHUNKS {
            let chunk = if chunk_idx < COUGH_CHUNKS {
                synth_chunk(&mut rng, lo_bin..=hi_bin, 0.7)
            } else {
                // out-of-band rumble: energy in bins 1..=3, far below 800 Hz
                synth_chunk(&mut rng, 1..=3, 0.6)
            };
            samples.extend_from_slice(&chunk);
        }
        let wav = encode_wav_pcm16(&[to_pcm(&samples)], FIXTURE_RATE)?;
        std::fs::write(wav_dir.join(format!("{pid}.wav")), wav)?;

        let _ = writeln!(manifest, "{pid} wavs/{pid}.wav");
        let _ = writeln!(groups, "patient {pid} {diagnosis}");
    }

    groups.push('\n');
    groups.push_str("group G1 copd,lung_cancer,asthma vs pneumonia,ard\n");
    groups.push_str("group G2 copd vs lung_cancer,pneumonia,ard,asthma\n");
    groups.push_str("group G3 copd vs pneumonia,ard,asthma\n");
    groups.push_str("group G4 copd vs ard,pneumonia\n");
    groups.push_str("group G5 copd vs lung_cancer,asthma\n");
    groups.push_str("group G6 copd vs lung_cancer\n");

    let manifest_path = root.join("manifest.txt");
    std::fs::write(&manifest_path, manifest)?;
    let groups_path = root.join("groups.txt");
    std::fs::write(&groups_path, groups)?;

    // synthetic weights for the full-width stack
    let model = synthetic_model(default_stack(), N_BINS, N_FRAMES, seed)?;
    let model_path = root.join("model.cnnw");
    std::fs::write(&model_path, save_model(&model))?;

    let config = format!(
        "# generated fixture configuration (seed {seed})\n\
         manifest = manifest.txt\n\
         model = reference\n\
         band_lo = {}\n\
         band_hi = {}\n\
         confidence = 0.9\n\
         thresholds = 0.5,0.6,0.7,0.8,0.9\n\
         groups = groups.txt\n\
         out = out\n",
        FIXTURE_BAND.0, FIXTURE_BAND.1
    );
    let config_path = root.join("pipeline.cfg");
    std::fs::write(&config_path, config)?;

    Ok(FixturePaths {
        root: root.to_path_buf(),
        config: config_path,
        manifest: manifest_path,
        groups: groups_path,
        model: model_path,
    })
}
