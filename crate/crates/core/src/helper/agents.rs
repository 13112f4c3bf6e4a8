//! Responders used as helper conditions.

use std::sync::Arc;

use super::model::HelperModel;
use crate::dialog::{DialogError, HelpRequest, Responder};
use crate::tasks::{oracle_lookahead_response, ResponseStyle};

/// Replays the recorded answer, or computes shortest-path guidance when none exists.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleHelper;

impl Responder for OracleHelper {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn respond(&self, req: &HelpRequest<'_>) -> Result<String, DialogError> {
        if let Some(r) = req.recorded_response {
            return Ok(r.to_string());
        }
        Ok(oracle_lookahead_response(
            req.world,
            req.current,
            req.goal,
            &req.task.target_label,
            req.window,
            &ResponseStyle::plain(),
        )?)
    }
}

/// Always answers with empty text.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmptyHelper;

impl Responder for EmptyHelper {
    fn name(&self) -> String {
        "empty".into()
    }

    fn respond(&self, _req: &HelpRequest<'_>) -> Result<String, DialogError> {
        Ok(String::new())
    }
}

/// Repeats the inquiry back.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoHelper;

impl Responder for EchoHelper {
    fn name(&self) -> String {
        "echo".into()
    }

    fn respond(&self, req: &HelpRequest<'_>) -> Result<String, DialogError> {
        Ok(req.inquiry.to_string())
    }
}

/// A trained model answering from the inquiry and fresh observations.
#[derive(Debug, Clone)]
pub struct ModelHelper {
    pub label: String,
    pub model: Arc<HelperModel<f32>>,
}

impl ModelHelper {
    pub fn new(label: impl Into<String>, model: HelperModel<f32>) -> Self {
        Self { label: label.into(), model: Arc::new(model) }
    }
}

impl Responder for ModelHelper {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn respond(&self, req: &HelpRequest<'_>) -> Result<String, DialogError> {
        self.model.generate_response(req.inquiry, req.observations).map_err(|e| DialogError::Helper(e.to_string()))
    }
}
