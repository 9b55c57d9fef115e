//! Core logic for the vigil data engine and evaluation harness.
//!
//! The pipeline turns weakly labeled surveillance videos into spatially
//! grounded instruction data and scores the results:
//!
//! * [`geometry`] — boxes, IoU/GIoU, bin coordinates, greedy and Hungarian
//!   matching,
//! * [`scene_gate`] — embedding-gated temporal decomposition (batch and
//!   streaming) plus the training-set subsampling policy,
//! * [`narration`] — the object-centric event narration prompt and the parser
//!   for its structured JSON response,
//! * [`grounding`] — anchor-frame selection and per-frame box assignment,
//! * [`cot`] — instruction-item synthesis, grounded chain-of-thought parsing,
//!   and baseline verdict heuristics,
//! * [`loss`] — classification / masked LM / text-coordinate GIoU losses with
//!   analytic gradients,
//! * [`curriculum`] — stage loss weights and the cross-stage learning-rate
//!   schedule,
//! * [`metrics`] — classification and spatial-grounding evaluation,
//! * [`store`] — JSONL persistence, dataset assembly, statistics, and run
//!   configuration.
//!
//! Everything in this crate is synchronous and deterministic; talking to the
//! external model services lives in `vigil-clients`.

pub mod cot;
pub mod curriculum;
pub mod geometry;
pub mod grounding;
pub mod loss;
pub mod metrics;
pub mod narration;
pub mod scene_gate;
pub mod store;
