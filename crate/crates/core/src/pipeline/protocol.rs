//! Wire messages exchanged with segmentation, depth and outpainting backends.
//!
//! Each request and response is a single JSON object. Over a subprocess pipe
//! they travel one per line; over HTTP one per POST body. Pixel data never
//! travels inline: every path is relative to the request's `workdir`, and
//! backends write their outputs under `output_dir`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: &str = "tabe-wire/1";

/// The frozen JSON schema for every message in this module.
pub const SCHEMA_JSON: &str = include_str!("../../schema/wire_v1.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRequest {
    pub frames: Vec<String>,
    pub frame_indices: Vec<usize>,
    pub query_mask: String,
    pub output_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRequest {
    pub frame: String,
    pub frame_index: usize,
    pub output_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutpaintRequest {
    pub frames: Vec<String>,
    pub frame_indices: Vec<usize>,
    pub visible_masks: Vec<String>,
    pub target_regions: Vec<String>,
    pub prompt: String,
    pub finetune_manifest: String,
    pub output_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RequestBody {
    Health,
    Segment(SegmentRequest),
    Depth(DepthRequest),
    Outpaint(OutpaintRequest),
}

impl RequestBody {
    pub fn kind(&self) -> &'static str {
        match self {
            RequestBody::Health => "health",
            RequestBody::Segment(_) => "segment",
            RequestBody::Depth(_) => "depth",
            RequestBody::Outpaint(_) => "outpaint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub version: String,
    pub id: String,
    pub workdir: String,
    #[serde(flatten)]
    pub body: RequestBody,
}

impl Request {
    pub fn new(id: impl Into<String>, workdir: impl Into<String>, body: RequestBody) -> Self {
        Self {
            version: PROTOCOL_VERSION.to_string(),
            id: id.into(),
            workdir: workdir.into(),
            body,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ResponseBody {
    Health { status: String },
    Segment { masks: Vec<String> },
    Depth { nearness_data: String, nearness_header: String },
    Outpaint { completed_frames: Vec<String> },
    Error { message: String },
}

impl ResponseBody {
    pub fn kind(&self) -> &'static str {
        match self {
            ResponseBody::Health { .. } => "health",
            ResponseBody::Segment { .. } => "segment",
            ResponseBody::Depth { .. } => "depth",
            ResponseBody::Outpaint { .. } => "outpaint",
            ResponseBody::Error { .. } => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub version: String,
    pub id: String,
    #[serde(flatten)]
    pub body: ResponseBody,
}

impl Response {
    pub fn new(id: impl Into<String>, body: ResponseBody) -> Self {
        Self {
            version: PROTOCOL_VERSION.to_string(),
            id: id.into(),
            body,
        }
    }

    pub fn error(id: impl Into<String>, message: impl Into<String>) -> Self {
        Self::new(id, ResponseBody::Error { message: message.into() })
    }

    /// Parses a response line and checks it answers `request`.
    pub fn parse_for(stage: &str, request: &Request, raw: &str) -> Result<ResponseBody> {
        let resp: Response = serde_json::from_str(raw.trim())
            .map_err(|e| Error::backend(stage, format!("malformed response: {e}")))?;
        if resp.version != PROTOCOL_VERSION {
            return Err(Error::backend(
                stage,
                format!("protocol version {:?}, expected {PROTOCOL_VERSION:?}", resp.version),
            ));
        }
        if resp.id != request.id {
            return Err(Error::backend(
                stage,
                format!("response id {:?} does not match request {:?}", resp.id, request.id),
            ));
        }
        if let ResponseBody::Error { message } = &resp.body {
            return Err(Error::backend(stage, format!("backend error: {message}")));
        }
        if resp.body.kind() != request.body.kind() {
            return Err(Error::backend(
                stage,
                format!("{} response to a {} request", resp.body.kind(), request.body.kind()),
            ));
        }
        Ok(resp.body)
    }
}
