//! Three-stage curriculum: per-stage loss weights, data mixtures, and the
//! cross-stage learning-rate schedule.
//!
//! Stage 1 warms up the classifier on video-level labels alone, stage 2 adds
//! text generation and the text-coordinate GIoU loss on an 80/20 mixture of
//! image-level detection and video-level CoT samples, and stage 3 drops GIoU
//! and trains on CoT data only. Each stage's warmup starts from the cosine
//! endpoint of the previous stage so the learning rate is continuous across
//! stage boundaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cosine decay ends at `peak_lr * COSINE_FLOOR`.
pub const COSINE_FLOOR: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum CurriculumError {
    #[error("stage index {0} out of range ({1} stages)")]
    StageOutOfRange(usize, usize),
    #[error("step {step} exceeds the stage length {total}")]
    StepOutOfRange { step: usize, total: usize },
    #[error("invalid stage config: {0}")]
    InvalidStage(String),
}

/// How a stage's training data is composed, as fractions summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataMixture {
    pub video_label: f64,
    pub image_detection: f64,
    pub cot: f64,
}

impl DataMixture {
    pub const VIDEO_ONLY: DataMixture = DataMixture {
        video_label: 1.0,
        image_detection: 0.0,
        cot: 0.0,
    };
    pub const DETECTION_COT_80_20: DataMixture = DataMixture {
        video_label: 0.0,
        image_detection: 0.8,
        cot: 0.2,
    };
    pub const COT_ONLY: DataMixture = DataMixture {
        video_label: 0.0,
        image_detection: 0.0,
        cot: 1.0,
    };
}

/// One curriculum stage: loss weights, optimizer shape, and data mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub stage: u8,
    pub lambda_bce: f64,
    pub lambda_lm: f64,
    pub lambda_giou: f64,
    pub epochs: u32,
    pub peak_lr: f64,
    pub warmup_ratio: f64,
    pub mixture: DataMixture,
}

impl StageConfig {
    /// The default three-stage configuration:
    /// lambdas (1,0,0) / (1,0.5,1) / (1,0.5,0), epochs 2/3/3,
    /// peak LRs 1e-3 / 5e-4 / 5e-4, warmup 0.1 / 0.05 / 0.05.
    pub fn default_stages() -> Vec<StageConfig> {
        vec![
            StageConfig {
                stage: 1,
                lambda_bce: 1.0,
                lambda_lm: 0.0,
                lambda_giou: 0.0,
                epochs: 2,
                peak_lr: 1e-3,
                warmup_ratio: 0.1,
                mixture: DataMixture::VIDEO_ONLY,
            },
            StageConfig {
                stage: 2,
                lambda_bce: 1.0,
                lambda_lm: 0.5,
                lambda_giou: 1.0,
                epochs: 3,
                peak_lr: 5e-4,
                warmup_ratio: 0.05,
                mixture: DataMixture::DETECTION_COT_80_20,
            },
            StageConfig {
                stage: 3,
                lambda_bce: 1.0,
                lambda_lm: 0.5,
                lambda_giou: 0.0,
                epochs: 3,
                peak_lr: 5e-4,
                warmup_ratio: 0.05,
                mixture: DataMixture::COT_ONLY,
            },
        ]
    }

    pub fn validate(&self) -> Result<(), CurriculumError> {
        if self.peak_lr <= 0.0 {
            return Err(CurriculumError::InvalidStage(format!(
                "peak_lr {} must be > 0",
                self.peak_lr
            )));
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return Err(CurriculumError::InvalidStage(format!(
                "warmup_ratio {} outside [0, 1)",
                self.warmup_ratio
            )));
        }
        for (name, v) in [
            ("lambda_bce", self.lambda_bce),
            ("lambda_lm", self.lambda_lm),
            ("lambda_giou", self.lambda_giou),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(CurriculumError::InvalidStage(format!(
                    "{name} {v} must be finite and >= 0"
                )));
            }
        }
        let mix = self.mixture.video_label + self.mixture.image_detection + self.mixture.cot;
        if (mix - 1.0).abs() > 1e-9 {
            return Err(CurriculumError::InvalidStage(format!(
                "data mixture sums to {mix}, not 1"
            )));
        }
        Ok(())
    }

    /// Learning rate the cosine decay of this stage ends at.
    pub fn endpoint_lr(&self) -> f64 {
        self.peak_lr * COSINE_FLOOR
    }
}

/// Weighted stage loss: `l_bce*bce + l_lm*lm + l_giou*giou`.
pub fn stage_loss(cfg: &StageConfig, bce: f64, lm: f64, giou: f64) -> f64 {
    cfg.lambda_bce * bce + cfg.lambda_lm * lm + cfg.lambda_giou * giou
}

/// Cross-stage learning-rate schedule: linear warmup from the previous
/// stage's cosine endpoint (stage 1 warms from zero), then cosine decay from
/// `peak_lr` down to `peak_lr * 0.01`.
#[derive(Debug, Clone)]
pub struct LrSchedule {
    stages: Vec<StageConfig>,
    steps: Vec<usize>,
}

impl LrSchedule {
    pub fn new(
        stages: Vec<StageConfig>,
        steps_per_stage: Vec<usize>,
    ) -> Result<Self, CurriculumError> {
        if stages.len() != steps_per_stage.len() {
            return Err(CurriculumError::InvalidStage(
                "one step count per stage required".into(),
            ));
        }
        for s in &stages {
            s.validate()?;
        }
        if steps_per_stage.contains(&0) {
            return Err(CurriculumError::InvalidStage(
                "stages must have at least one step".into(),
            ));
        }
        Ok(Self {
            stages,
            steps: steps_per_stage,
        })
    }

    pub fn stages(&self) -> &[StageConfig] {
        &self.stages
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    fn warmup_steps(&self, stage: usize) -> usize {
        let cfg = &self.stages[stage];
        if cfg.warmup_ratio == 0.0 {
            return 0;
        }
        ((cfg.warmup_ratio * self.steps[stage] as f64).round() as usize).clamp(1, self.steps[stage])
    }

    /// Learning rate at `step` within `stage`. `step` ranges over
    /// `0..=steps`; `step == steps` is the stage boundary and returns the
    /// cosine endpoint exactly, which is also where the next stage's warmup
    /// starts.
    pub fn lr_at(&self, stage: usize, step: usize) -> Result<f64, CurriculumError> {
        let n_stages = self.stages.len();
        if stage >= n_stages {
            return Err(CurriculumError::StageOutOfRange(stage, n_stages));
        }
        let total = self.steps[stage];
        if step > total {
            return Err(CurriculumError::StepOutOfRange { step, total });
        }
        let cfg = &self.stages[stage];
        let start = if stage == 0 {
            0.0
        } else {
            self.stages[stage - 1].endpoint_lr()
        };
        let end = cfg.endpoint_lr();
        if step == total {
            return Ok(end);
        }
        let warmup = self.warmup_steps(stage);
        if step < warmup {
            return Ok(start + (cfg.peak_lr - start) * step as f64 / warmup as f64);
        }
        let progress = (step - warmup) as f64 / (total - warmup) as f64;
        Ok(end + (cfg.peak_lr - end) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
    }

    /// Human-readable schedule table: per stage the loss weights, mixture,
    /// and learning-rate samples across the stage.
    pub fn plan_text(&self) -> String {
        let mut out = String::new();
        out.push_str(
            "stage  l_bce  l_lm  l_giou  epochs  peak_lr    warmup  mix(video/image/cot)\n",
        );
        for (i, s) in self.stages.iter().enumerate() {
            out.push_str(&format!(
                "{:<5}  {:<5}  {:<4}  {:<6}  {:<6}  {:<9.1e}  {:<6}  {:.2}/{:.2}/{:.2}\n",
                s.stage,
                s.lambda_bce,
                s.lambda_lm,
                s.lambda_giou,
                s.epochs,
                s.peak_lr,
                s.warmup_ratio,
                s.mixture.video_label,
                s.mixture.image_detection,
                s.mixture.cot,
            ));
            let total = self.steps[i];
            let warmup = self.warmup_steps(i);
            let samples = [0, warmup, total / 4, total / 2, 3 * total / 4, total];
            let mut described: Vec<String> = Vec::new();
            for step in samples {
                let lr = self.lr_at(i, step).expect("sample step in range");
                described.push(format!("lr[{step}]={lr:.3e}"));
            }
            out.push_str(&format!("       steps={total}  {}\n", described.join("  ")));
        }
        out
    }
}
