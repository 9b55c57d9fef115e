//! Subcommand implementations. Every phase reads and writes JSONL files via
//! the store layer; nothing is carried between subcommands in memory.

use crate::errors::AppError;
use serde::{Deserialize, Serialize};
use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;
use vigil_clients::{ArchiveWriter, Clients};
use vigil_core::cot::InstructionItem;
use vigil_core::curriculum::LrSchedule;
use vigil_core::grounding::GroundedSetWire;
use vigil_core::metrics::{self, EvalRecord};
use vigil_core::scene_gate::{EventTag, GateState, SubclipRecord};
use vigil_core::store::{
    self, read_jsonl, write_jsonl, AnnotationSentence, EmbeddingRecord, NarratedSubclip, RunConfig,
    VideoMeta,
};

pub struct Context {
    pub config: RunConfig,
    pub mock: bool,
}

impl Context {
    /// Build the service clients, plus the transcript archive when enabled.
    fn clients(&self, out_hint: &Path) -> Result<(Clients, Option<Arc<ArchiveWriter>>), AppError> {
        let archive = self.config.archive.then(|| {
            Arc::new(ArchiveWriter::new(
                &out_hint.with_extension("transcripts.jsonl"),
            ))
        });
        if self.mock {
            return Ok((vigil_clients::mock_clients(self.config.seed, archive.clone()), archive));
        }
        let clients = vigil_clients::http_clients(&self.config.endpoints, archive.clone())?;
        Ok((clients, archive))
    }

    fn bound(&self) -> usize {
        self.config.endpoints.max_in_flight.max(1)
    }
}

pub fn segment(
    ctx: &Context,
    videos: &Path,
    embeddings: &Path,
    out: &Path,
    subsample: bool,
) -> Result<(), AppError> {
    let videos: Vec<VideoMeta> = read_jsonl(videos)?;
    let embeddings: Vec<EmbeddingRecord> = read_jsonl(embeddings)?;
    let policy = ctx.config.subsample;
    let subsample_arg = subsample.then_some((&policy, ctx.config.seed));
    let subclips =
        vigil_engine::run_segment(&videos, &embeddings, &ctx.config.gate, subsample_arg)?;
    write_jsonl(out, &subclips)?;
    println!(
        "segment: {} subclips from {} videos -> {}",
        subclips.len(),
        videos.len(),
        out.display()
    );
    Ok(())
}

pub async fn narrate(
    ctx: &Context,
    subclips: &Path,
    annotations: &Path,
    out: &Path,
) -> Result<(), AppError> {
    let subclips: Vec<SubclipRecord> = read_jsonl(subclips)?;
    let sentences: Vec<AnnotationSentence> = read_jsonl(annotations)?;
    let (clients, archive) = ctx.clients(out)?;
    let outcome = vigil_engine::run_narrate(
        &subclips,
        &sentences,
        &clients.vlm,
        &ctx.config.narration,
        ctx.bound(),
    )
    .await?;
    write_jsonl(out, &outcome.narrated)?;
    write_jsonl(&out.with_extension("responses.jsonl"), &outcome.archive)?;
    if let Some(archive) = archive {
        archive.finalize()?;
    }
    let flagged = outcome
        .narrated
        .iter()
        .filter(|n| n.flagged.is_some())
        .count();
    println!(
        "narrate: {} subclips narrated ({} flagged) -> {}",
        outcome.narrated.len(),
        flagged,
        out.display()
    );
    Ok(())
}

pub async fn ground(ctx: &Context, narrated: &Path, out: &Path) -> Result<(), AppError> {
    let narrated: Vec<NarratedSubclip> = read_jsonl(narrated)?;
    let (clients, archive) = ctx.clients(out)?;
    let sets = vigil_engine::run_ground(
        &narrated,
        &clients.detector,
        &ctx.config.grounding,
        ctx.bound(),
    )
    .await?;
    write_jsonl(out, &sets)?;
    if let Some(archive) = archive {
        archive.finalize()?;
    }
    let grounded: usize = sets
        .iter()
        .map(|s| s.objects.iter().filter(|o| o.bbox_2d.is_some()).count())
        .sum();
    let total: usize = sets.iter().map(|s| s.objects.len()).sum();
    let rate = if total == 0 {
        0.0
    } else {
        grounded as f64 / total as f64
    };
    println!(
        "ground: {grounded}/{total} objects grounded ({:.1}%) over {} subclips -> {}",
        rate * 100.0,
        sets.len(),
        out.display()
    );
    Ok(())
}

pub async fn synth(
    ctx: &Context,
    grounded: &Path,
    narrated: &Path,
    annotations: &Path,
    out: &Path,
) -> Result<(), AppError> {
    let grounded: Vec<GroundedSetWire> = read_jsonl(grounded)?;
    let narrated: Vec<NarratedSubclip> = read_jsonl(narrated)?;
    let sentences: Vec<AnnotationSentence> = read_jsonl(annotations)?;
    let (clients, archive) = ctx.clients(out)?;
    let outcome = vigil_engine::run_synth(
        &grounded,
        &narrated,
        &sentences,
        &clients.vlm,
        ctx.config.narration.max_parse_retries,
        ctx.config.narration.min_overlap_fraction,
        ctx.bound(),
    )
    .await?;
    write_jsonl(out, &outcome.items)?;
    write_jsonl(&out.with_extension("rejected.jsonl"), &outcome.rejected)?;
    if let Some(archive) = archive {
        archive.finalize()?;
    }
    println!(
        "synth: {} items ({} rejected) -> {}",
        outcome.items.len(),
        outcome.rejected.len(),
        out.display()
    );
    Ok(())
}

pub fn assemble(
    ctx: &Context,
    subclips: &Path,
    grounded: &Path,
    items: &Path,
    out_dir: &Path,
) -> Result<(), AppError> {
    let subclips: Vec<SubclipRecord> = read_jsonl(subclips)?;
    let grounded: Vec<GroundedSetWire> = read_jsonl(grounded)?;
    let items: Vec<InstructionItem> = read_jsonl(items)?;
    let detection_ids: Vec<String> = grounded.iter().map(|g| g.subclip_id.clone()).collect();
    let cot_ids: Vec<(String, EventTag)> = items
        .iter()
        .map(|i| (i.subclip_id.clone(), i.label))
        .collect();
    let manifests = store::assemble(&subclips, &detection_ids, &cot_ids, ctx.config.seed);
    std::fs::create_dir_all(out_dir)?;
    write_jsonl(&out_dir.join("stage1.jsonl"), &manifests.stage1)?;
    write_jsonl(&out_dir.join("stage2.jsonl"), &manifests.stage2)?;
    write_jsonl(&out_dir.join("stage3.jsonl"), &manifests.stage3)?;
    println!(
        "assemble: stage1 {} / stage2 {} / stage3 {} -> {}",
        manifests.stage1.len(),
        manifests.stage2.len(),
        manifests.stage3.len(),
        out_dir.display()
    );
    Ok(())
}

pub fn eval_cls(records: &Path, out: Option<&Path>) -> Result<(), AppError> {
    let records: Vec<EvalRecord> = read_jsonl(records)?;
    let report = metrics::classification_report(&records)?;
    if let Some(out) = out {
        std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
    }
    print!("{}", metrics::render_report(&report));
    Ok(())
}

pub fn eval_grounding(
    ctx: &Context,
    records: &Path,
    penalize_unmatched: Option<bool>,
    threshold: Option<f64>,
    out: Option<&Path>,
) -> Result<(), AppError> {
    let records: Vec<EvalRecord> = read_jsonl(records)?;
    let penalize = penalize_unmatched.unwrap_or(ctx.config.eval.penalize_unmatched);
    let threshold = threshold.unwrap_or(ctx.config.eval.recall_iou_threshold);
    let (mean_iou, recall) = metrics::grounding_report(&records, penalize, threshold)?;
    if let Some(out) = out {
        let doc = serde_json::json!({
            "mean_iou": mean_iou,
            "recall_at": recall,
            "threshold": threshold,
            "penalize_unmatched": penalize,
        });
        std::fs::write(out, serde_json::to_string_pretty(&doc)?)?;
    }
    println!("meanIoU {mean_iou:.4}  R@{threshold:.2} {recall:.4}");
    Ok(())
}

/// One loss fixture on disk; evaluated and printed by `loss-check`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LossFixture {
    Bce {
        logits: Vec<f64>,
        labels: Vec<u8>,
    },
    Lm {
        logits: Vec<Vec<f64>>,
        targets: Vec<usize>,
        mask: Vec<bool>,
    },
    Giou {
        boxes: Vec<vigil_core::loss::DigitLogitBox>,
    },
}

impl store::Validate for LossFixture {
    fn validate(&self) -> Result<(), String> {
        Ok(())
    }
}

pub fn loss_check(ctx: &Context, configs: usize, fixtures: Option<&Path>) -> Result<(), AppError> {
    if let Some(path) = fixtures {
        let fixtures: Vec<LossFixture> = read_jsonl(path)?;
        for (i, fixture) in fixtures.iter().enumerate() {
            match fixture {
                LossFixture::Bce { logits, labels } => {
                    let batch = vigil_core::loss::LogitBatch::new(logits.clone(), labels.clone())?;
                    println!("fixture {i}: bce = {:.6}", vigil_core::loss::bce(&batch));
                }
                LossFixture::Lm {
                    logits,
                    targets,
                    mask,
                } => {
                    let batch = vigil_core::loss::TokenBatch::new(
                        logits.clone(),
                        targets.clone(),
                        mask.clone(),
                    )?;
                    println!(
                        "fixture {i}: masked_lm_ce = {:.6}",
                        vigil_core::loss::masked_lm_ce(&batch)
                    );
                }
                LossFixture::Giou { boxes } => {
                    let result = vigil_core::loss::giou_loss(boxes)?;
                    let rel = vigil_core::loss::gradient_check(boxes)?;
                    println!(
                        "fixture {i}: giou_loss = {:.6} (matched {}), gradient rel err = {:.3e}",
                        result.value, result.matched, rel
                    );
                }
            }
        }
    }
    let worst = vigil_core::loss::gradient_suite(ctx.config.seed, configs)?;
    println!("gradient suite: {configs} configurations, max relative error = {worst:.3e}");
    if worst > 1e-5 {
        return Err(AppError::Other(format!(
            "gradient check failed: {worst:.3e} > 1e-5"
        )));
    }
    Ok(())
}

pub fn plan(ctx: &Context, steps_per_epoch: Option<usize>) -> Result<(), AppError> {
    let mut config = ctx.config.clone();
    if let Some(steps) = steps_per_epoch {
        config.steps_per_epoch = steps;
    }
    let schedule = LrSchedule::new(config.stages.clone(), config.steps_per_stage())?;
    print!("{}", schedule.plan_text());
    for i in 1..schedule.stages().len() {
        let boundary = schedule.lr_at(i - 1, schedule.steps()[i - 1])?;
        let start = schedule.lr_at(i, 0)?;
        println!(
            "stage {} -> {}: lr continuity {:.3e} -> {:.3e}",
            i,
            i + 1,
            boundary,
            start
        );
    }
    Ok(())
}

pub fn stats(
    ctx: &Context,
    subclips: &Path,
    grounded: Option<&Path>,
    items: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), AppError> {
    let subclips: Vec<SubclipRecord> = read_jsonl(subclips)?;
    let phase1 = store::Phase1Stats::compute(&subclips, ctx.config.fps);

    let phase2 = match grounded {
        Some(path) => {
            let sets: Vec<GroundedSetWire> = read_jsonl(path)?;
            let labels: std::collections::HashMap<String, EventTag> =
                subclips.iter().map(|s| (s.subclip_id(), s.label)).collect();
            let labeled: Vec<(EventTag, vigil_core::grounding::GroundedSet)> = sets
                .into_iter()
                .map(|w| {
                    let label = labels
                        .get(&w.subclip_id)
                        .copied()
                        .unwrap_or(EventTag::Normal);
                    w.into_set()
                        .map(|s| (label, s))
                        .map_err(|e| AppError::Schema(format!("grounded set invalid: {e}")))
                })
                .collect::<Result<_, _>>()?;
            Some(store::Phase2Stats::compute(&labeled))
        }
        None => None,
    };

    let phase3 = match items {
        Some(path) => {
            let items: Vec<InstructionItem> = read_jsonl(path)?;
            Some(store::Phase3Stats::compute(&items))
        }
        None => None,
    };

    let stats = store::DatasetStats {
        phase1: Some(phase1),
        phase2,
        phase3,
    };
    let doc = serde_json::to_string_pretty(&stats)?;
    if let Some(out) = out {
        std::fs::write(out, &doc)?;
    }
    println!("{doc}");
    Ok(())
}

pub fn stream(ctx: &Context, embeddings: &Path, videos: &Path) -> Result<(), AppError> {
    let videos: Vec<VideoMeta> = read_jsonl(videos)?;
    let totals: std::collections::HashMap<&str, (u64, EventTag)> = videos
        .iter()
        .map(|v| (v.video_id.as_str(), (v.total_frames, v.label)))
        .collect();

    let reader: Box<dyn BufRead> = if embeddings == Path::new("-") {
        Box::new(std::io::BufReader::new(std::io::stdin()))
    } else {
        Box::new(std::io::BufReader::new(std::fs::File::open(embeddings)?))
    };

    let mut states: std::collections::HashMap<String, GateState> = std::collections::HashMap::new();
    let stdout = std::io::stdout();
    // A closed pipe downstream (e.g. `| head`) ends the stream quietly.
    let emit = |record: &SubclipRecord| -> Result<bool, AppError> {
        use std::io::Write;
        let mut lock = stdout.lock();
        let done = serde_json::to_writer(&mut lock, record)
            .map_err(std::io::Error::from)
            .and_then(|()| writeln!(lock))
            .and_then(|()| lock.flush());
        match done {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(false),
            Err(e) => Err(e.into()),
        }
    };

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EmbeddingRecord = serde_json::from_str(&line)
            .map_err(|e| AppError::Schema(format!("embeddings line {}: {e}", lineno + 1)))?;
        let Some(&(_, label)) = totals.get(record.video_id.as_str()) else {
            return Err(AppError::Schema(format!(
                "embeddings line {}: unknown video {}",
                lineno + 1,
                record.video_id
            )));
        };
        let state = match states.entry(record.video_id.clone()) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(GateState::new(&record.video_id, label, ctx.config.gate)?)
            }
        };
        if let Some(done) = state.push(&record.sample())? {
            if !emit(&done)? {
                return Ok(());
            }
        }
    }

    let mut finals: Vec<(String, GateState)> = states.into_iter().collect();
    finals.sort_by(|a, b| a.0.cmp(&b.0));
    for (video_id, state) in finals {
        let (total, _) = totals[video_id.as_str()];
        for record in state.finish(total)? {
            if !emit(&record)? {
                return Ok(());
            }
        }
    }
    Ok(())
}

pub async fn mock_serve(ctx: &Context, port: u16, fail_first: u32) -> Result<(), AppError> {
    let addr: std::net::SocketAddr = ([127, 0, 0, 1], port).into();
    let (bound, handle) = vigil_clients::server::serve(addr, ctx.config.seed, fail_first)
        .await
        .map_err(|e| AppError::Io(format!("bind {addr}: {e}")))?;
    println!(
        "mock teacher service on http://{bound} (seed {})",
        ctx.config.seed
    );
    println!("routes: POST /generate, POST /detect, POST /embed, GET /health");
    handle.await.map_err(|e| AppError::Other(e.to_string()))?;
    Ok(())
}

pub fn mock_data(ctx: &Context, out_dir: &Path, videos: usize) -> Result<(), AppError> {
    let (videos, embeddings, annotations) =
        vigil_clients::mock::synthetic_world(ctx.config.seed, videos, ctx.config.gate.stride);
    std::fs::create_dir_all(out_dir)?;
    write_jsonl(&out_dir.join("videos.jsonl"), &videos)?;
    write_jsonl(&out_dir.join("embeddings.jsonl"), &embeddings)?;
    write_jsonl(&out_dir.join("annotations.jsonl"), &annotations)?;
    println!(
        "mock-data: {} videos, {} embedding samples, {} annotation sentences -> {}",
        videos.len(),
        embeddings.len(),
        annotations.len(),
        out_dir.display()
    );
    Ok(())
}
