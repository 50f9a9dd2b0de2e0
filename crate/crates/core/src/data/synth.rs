//! Seeded synthetic datasets with the same on-disk layout as real exports.
//!
//! Every class owns a latent prototype built from its super-class direction
//! plus a smaller class-specific offset, so classes of one super-class are
//! closer (cosine) than classes of different super-classes. All three
//! modalities are driven linearly by it:
//!
//! - IMU windows: a posture-dependent offset plus sinusoids whose amplitudes
//!   follow the prototype, with seeded per-sample phases, jitter and noise;
//! - video embeddings: a fixed random projection of the prototype plus noise;
//! - skeletons: a standing stick figure displaced and animated by a motion
//!   latent that shares the prototype's directions but weights the class
//!   offset less, with per-video actor displacement, phase, length and noise
//!   variation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::imu::{write_imu, ImuWindow};
use super::manifest::DatasetManifest;
use super::semantics::format_semantics;
use super::skeleton::{skeleton_filename, write_skeleton_csv, SkeletonSequence, DEFAULT_JOINTS};
use crate::error::{Error, Result};
use crate::nn::{SeededRng, Tensor2};

/// Weight of the class offset in the skeleton latent; smaller than in the
/// prototype so body movement is governed by the super-class.
const MOTION_OFFSET: f64 = 0.1;

/// Per-video displacement of every coordinate (body proportions, camera
/// placement), constant over the clip.
const ACTOR_SCALE: f64 = 0.03;

const SUPER_NAMES: [&str; 6] = ["static", "locomotion", "chores", "sports", "transit", "leisure"];

/// Rest pose for the default 12 joints (x right, y up).
const REST_POSE: [[f64; 2]; DEFAULT_JOINTS] = [
    [-0.25, 0.50],
    [0.25, 0.50],
    [-0.35, 0.20],
    [0.35, 0.20],
    [-0.40, -0.10],
    [0.40, -0.10],
    [-0.15, -0.10],
    [0.15, -0.10],
    [-0.17, -0.50],
    [0.17, -0.50],
    [-0.18, -0.85],
    [0.18, -0.85],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub classes: usize,
    pub super_classes: usize,
    pub samples_per_class: usize,
    pub n: usize,
    pub d: usize,
    /// Nominal skeleton length; individual videos vary around it.
    pub frames: usize,
    pub seed: u64,
    pub embedding_dim: usize,
    pub videos_per_class: usize,
    pub folds: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 8,
            super_classes: 3,
            samples_per_class: 40,
            n: 64,
            d: 6,
            frames: 32,
            seed: 1,
            embedding_dim: 16,
            videos_per_class: 10,
            folds: 4,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.super_classes < 2 {
            return fail(format!("need ≥ 2 super-classes, got {}", self.super_classes));
        }
        if self.classes < 2 * self.super_classes {
            return fail(format!(
                "{} classes cannot give each of {} super-classes ≥ 2 members",
                self.classes, self.super_classes
            ));
        }
        if self.samples_per_class == 0 || self.n == 0 || self.d == 0 {
            return fail("samples_per_class, n and d must be positive".into());
        }
        if self.frames < 2 {
            return fail(format!("skeleton length {} < 2", self.frames));
        }
        if self.embedding_dim == 0 || self.videos_per_class == 0 || self.folds == 0 {
            return fail("embedding_dim, videos_per_class and folds must be positive".into());
        }
        Ok(())
    }

    fn latent_dim(&self) -> usize {
        (self.super_classes + 3).max(6)
    }
}

/// In-memory synthetic dataset, before it is written to disk.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub config: SynthConfig,
    /// Class → unit-norm latent prototype.
    pub prototypes: BTreeMap<String, Vec<f64>>,
    pub superclasses: BTreeMap<String, String>,
    pub windows: Vec<ImuWindow>,
    pub video_embeddings: BTreeMap<String, Vec<Vec<f64>>>,
    pub skeletons: Vec<(usize, SkeletonSequence)>,
}

fn gaussian(rng: &mut SeededRng) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian_matrix(rows: usize, cols: usize, scale: f64, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| scale * gaussian(rng)).collect())
        .collect()
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Rounds to six decimals so written files are compact and re-read exactly.
fn q(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

pub fn super_class_name(g: usize) -> String {
    SUPER_NAMES
        .get(g)
        .map_or_else(|| format!("group{g}"), |s| s.to_string())
}

pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let mut rng = SeededRng::seed_from_u64(config.seed);
    let m = config.latent_dim();
    let g_count = config.super_classes;

    // Orthonormal super-class directions via Gram-Schmidt.
    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(g_count);
    while directions.len() < g_count {
        let mut v: Vec<f64> = (0..m).map(|_| gaussian(&mut rng)).collect();
        for d in &directions {
            let dot: f64 = v.iter().zip(d).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(d).for_each(|(a, b)| *a -= dot * b);
        }
        if v.iter().map(|x| x * x).sum::<f64>() > 1e-6 {
            directions.push(unit(v));
        }
    }

    let mut prototypes = BTreeMap::new();
    let mut motion_latents = BTreeMap::new();
    let mut superclasses = BTreeMap::new();
    let mut class_order = Vec::with_capacity(config.classes);
    for i in 0..config.classes {
        let g = i % g_count;
        let name = format!("{}_{}", super_class_name(g), i / g_count);
        let offset = unit((0..m).map(|_| gaussian(&mut rng)).collect());
        let p = unit(
            directions[g]
                .iter()
                .zip(&offset)
                .map(|(s, r)| s + 0.45 * r)
                .collect(),
        );
        prototypes.insert(name.clone(), p);
        let motion = unit(
            directions[g]
                .iter()
                .zip(&offset)
                .map(|(s, r)| s + MOTION_OFFSET * r)
                .collect(),
        );
        motion_latents.insert(name.clone(), motion);
        superclasses.insert(name.clone(), super_class_name(g));
        class_order.push(name);
    }

    // Shared generative maps.
    let imu_offset = gaussian_matrix(config.d, m, 1.0 / (m as f64).sqrt(), &mut rng);
    let imu_osc = gaussian_matrix(config.d, m, 1.5 / (m as f64).sqrt(), &mut rng);
    let embed = gaussian_matrix(config.embedding_dim, m, 1.0, &mut rng);
    let width = DEFAULT_JOINTS * 2;
    let posture = gaussian_matrix(width, m, 0.12, &mut rng);
    let swing_sin = gaussian_matrix(width, m, 0.10, &mut rng);
    let swing_cos = gaussian_matrix(width, m, 0.10, &mut rng);

    let mut windows = Vec::new();
    let mut sample = 0usize;
    for class in &class_order {
        let p = &prototypes[class];
        for _ in 0..config.samples_per_class {
            let a: Vec<f64> = p.iter().map(|v| v + 0.08 * gaussian(&mut rng)).collect();
            let phases: Vec<f64> = (0..m)
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect();
            let base = mat_vec(&imu_offset, &a);
            let mut values = Tensor2::zeros(config.n, config.d);
            for t in 0..config.n {
                let waves: Vec<f64> = (0..m)
                    .map(|k| {
                        let omega = std::f64::consts::TAU * (2 + 2 * k) as f64 / config.n as f64;
                        a[k] * (omega * t as f64 + phases[k]).sin()
                    })
                    .collect();
                let osc = mat_vec(&imu_osc, &waves);
                for j in 0..config.d {
                    values.set(t, j, q(base[j] + osc[j] + 0.15 * gaussian(&mut rng)));
                }
            }
            windows.push(ImuWindow::new(format!("s{sample:05}"), values, Some(class.clone()))?);
            sample += 1;
        }
    }

    let mut video_embeddings = BTreeMap::new();
    for class in &class_order {
        let centre = mat_vec(&embed, &prototypes[class]);
        let list: Vec<Vec<f64>> = (0..config.videos_per_class)
            .map(|_| centre.iter().map(|c| q(c + 0.15 * gaussian(&mut rng))).collect())
            .collect();
        video_embeddings.insert(class.clone(), list);
    }

    let mut skeletons = Vec::new();
    for class in &class_order {
        let p = &motion_latents[class];
        let offset = mat_vec(&posture, p);
        let amp_sin = mat_vec(&swing_sin, p);
        let amp_cos = mat_vec(&swing_cos, p);
        for idx in 0..config.videos_per_class {
            let spread = (config.frames / 8).max(1) as i64;
            let frames = (config.frames as i64 + rng.random_range(-spread..=spread)).max(2) as usize;
            let shift = rng.random_range(-0.3..0.3);
            let actor: Vec<f64> = (0..width).map(|_| ACTOR_SCALE * gaussian(&mut rng)).collect();
            let mut coords = Tensor2::zeros(frames, width);
            for t in 0..frames {
                let phase = std::f64::consts::TAU * 2.0 * t as f64 / (frames - 1) as f64 + shift;
                for c in 0..width {
                    let rest = REST_POSE[c / 2][c % 2];
                    let v = rest + actor[c] + offset[c] + amp_sin[c] * phase.sin() + amp_cos[c] * phase.cos()
                        + 0.01 * gaussian(&mut rng);
                    coords.set(t, c, q(v.clamp(-1.0, 1.0)));
                }
            }
            skeletons.push((idx, SkeletonSequence::new(coords, DEFAULT_JOINTS, 2, class.clone())?));
        }
    }

    Ok(SynthDataset {
        config: config.clone(),
        prototypes,
        superclasses,
        windows,
        video_embeddings,
        skeletons,
    })
}

impl SynthDataset {
    /// Writes the dataset under `dir` and returns the manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let skel_dir = dir.join("skeletons");
        std::fs::create_dir_all(&skel_dir).map_err(|e| Error::io(&skel_dir, e))?;

        write_imu(&dir.join("imu.csv"), &self.windows)?;

        let sem_path = dir.join("semantics.json");
        let sem = format_semantics(self.config.embedding_dim, &self.video_embeddings);
        std::fs::write(&sem_path, sem).map_err(|e| Error::io(&sem_path, e))?;

        let map_path = dir.join("superclasses.json");
        let map = serde_json::to_string_pretty(&self.superclasses).expect("serialisable") + "\n";
        std::fs::write(&map_path, map).map_err(|e| Error::io(&map_path, e))?;

        for (idx, seq) in &self.skeletons {
            write_skeleton_csv(&skel_dir.join(skeleton_filename(&seq.class, *idx)), seq)?;
        }

        let mut manifest = DatasetManifest::new(
            "synthetic",
            "imu.csv",
            "semantics.json",
            "skeletons",
            "superclasses.json",
            self.config.n,
            self.config.d,
            self.config.folds,
        );
        manifest.seed = Some(self.config.seed);
        let manifest_path = dir.join("manifest.json");
        std::fs::write(&manifest_path, manifest.to_json()).map_err(|e| Error::io(&manifest_path, e))?;
        Ok(manifest_path)
    }
}

/// Generates a dataset from `config` and writes it under `dir`.
pub fn synth_generate(config: &SynthConfig, dir: &Path) -> Result<PathBuf> {
    generate(config)?.write(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn prototypes_cluster_by_super_class() {
        let ds = generate(&SynthConfig::default()).unwrap();
        let names: Vec<&String> = ds.prototypes.keys().collect();
        let mut within = Vec::new();
        let mut across = Vec::new();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                let c = cosine(&ds.prototypes[*a], &ds.prototypes[*b]);
                if ds.superclasses[*a] == ds.superclasses[*b] {
                    within.push(c);
                } else {
                    across.push(c);
                }
            }
        }
        let across_mean = across.iter().sum::<f64>() / across.len() as f64;
        for w in within {
            assert!(w > across_mean, "{w} ≤ {across_mean}");
        }
    }

    #[test]
    fn infeasible_configs() {
        for cfg in [
            SynthConfig { super_classes: 1, ..Default::default() },
            SynthConfig { classes: 5, ..Default::default() },
            SynthConfig { frames: 1, ..Default::default() },
            SynthConfig { d: 0, ..Default::default() },
        ] {
            assert!(matches!(generate(&cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn default_shape() {
        let ds = generate(&SynthConfig::default()).unwrap();
        assert_eq!(ds.windows.len(), 320);
        assert_eq!(ds.prototypes.len(), 8);
        assert_eq!(ds.skeletons.len(), 80);
        let groups: std::collections::BTreeSet<&String> = ds.superclasses.values().collect();
        assert_eq!(groups.len(), 3);
    }
}
