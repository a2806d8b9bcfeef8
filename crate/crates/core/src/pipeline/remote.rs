//! JSON-over-HTTP client for an external segmenter ("fcxl/1" protocol).
//!
//! Rasters travel as base64 PNGs (bi-map: positive in R, negative in G);
//! logits come back as base64 little-endian `f32`, row-major.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::backend::{
    BackendError, CoarseRequest, RefineOutput, RefineRequest, SegmenterBackend,
};
use crate::interaction::BiMap;
use crate::mask::io::{encode_mask_png, encode_rgb_png};
use crate::mask::ScoreMap;

pub const PROTOCOL: &str = "fcxl/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub v: String,
    pub op: String,
    pub session: String,
    pub image_png: String,
    pub bimap_png: String,
    pub prev_mask_png: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_logits_f32le: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_token: Option<String>,
    pub out_w: usize,
    pub out_h: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireError {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub v: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits_f32le: Option<String>,
    #[serde(default)]
    pub w: usize,
    #[serde(default)]
    pub h: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_boundary_f32le: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_detail_f32le: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_token: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<WireError>,
}

pub fn encode_bimap_png(b: &BiMap) -> Vec<u8> {
    let (w, h) = b.dims();
    let img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        Rgb([
            if b.positive.get(x, y) { 255 } else { 0 },
            if b.negative.get(x, y) { 255 } else { 0 },
            0,
        ])
    });
    encode_rgb_png(&img)
}

pub fn encode_f32le(m: &ScoreMap) -> String {
    let mut bytes = Vec::with_capacity(m.data().len() * 4);
    for v in m.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    B64.encode(bytes)
}

pub fn decode_f32le(s: &str, w: usize, h: usize) -> Result<ScoreMap, BackendError> {
    let bytes = B64
        .decode(s)
        .map_err(|e| BackendError::Malformed(format!("bad base64: {e}")))?;
    if bytes.len() != w * h * 4 {
        return Err(BackendError::Malformed(format!(
            "{} bytes of logits for {w}x{h}",
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    ScoreMap::from_vec(w, h, data).map_err(|e| BackendError::Malformed(e.to_string()))
}

pub fn coarse_wire_request(req: &CoarseRequest<'_>) -> WireRequest {
    let (out_w, out_h) = req.out_dims();
    WireRequest {
        v: PROTOCOL.into(),
        op: "coarse".into(),
        session: req.session.into(),
        image_png: B64.encode(encode_rgb_png(req.image)),
        bimap_png: B64.encode(encode_bimap_png(req.bimap)),
        prev_mask_png: B64.encode(encode_mask_png(req.prev_mask)),
        coarse_logits_f32le: None,
        context_token: req.context_token.map(str::to_owned),
        out_w,
        out_h,
    }
}

pub fn refine_wire_request(req: &RefineRequest<'_>) -> WireRequest {
    let (out_w, out_h) = req.out_dims();
    WireRequest {
        v: PROTOCOL.into(),
        op: "refine".into(),
        session: req.session.into(),
        image_png: B64.encode(encode_rgb_png(req.image)),
        bimap_png: B64.encode(encode_bimap_png(req.bimap)),
        prev_mask_png: B64.encode(encode_mask_png(&req.coarse_logits.binarize_logits())),
        coarse_logits_f32le: Some(encode_f32le(req.coarse_logits)),
        context_token: req.context_token.map(str::to_owned),
        out_w,
        out_h,
    }
}

/// Client for a model server speaking the wire protocol.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    endpoint: String,
    agent: ureq::Agent,
    refine: bool,
}

/// Response bodies above this size are rejected.
const MAX_BODY: u64 = 256 << 20;

impl RemoteBackend {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Self {
            endpoint: endpoint.into(),
            agent,
            refine: false,
        }
    }

    /// Also route the detail stage to the server.
    pub fn with_refine(mut self, refine: bool) -> Self {
        self.refine = refine;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Checks that something answers HTTP at the endpoint.
    pub fn probe(&self) -> Result<(), BackendError> {
        self.agent
            .get(&self.endpoint)
            .call()
            .map(|_| ())
            .map_err(|e| BackendError::Transport(e.to_string()))
    }

    fn call(&self, req: &WireRequest) -> Result<WireResponse, BackendError> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(req)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .body_mut()
            .with_config()
            .limit(MAX_BODY)
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let parsed: WireResponse = serde_json::from_str(&text).map_err(|e| {
            BackendError::Malformed(format!("HTTP {status}: {e}"))
        })?;
        if let Some(err) = parsed.error {
            return Err(BackendError::Remote {
                code: err.code,
                message: err.message,
            });
        }
        if !status.is_success() {
            return Err(BackendError::Malformed(format!("HTTP {status} without error body")));
        }
        if parsed.v != PROTOCOL {
            return Err(BackendError::Malformed(format!("protocol {:?}", parsed.v)));
        }
        Ok(parsed)
    }

    fn logits(
        resp: &WireResponse,
        field: Option<&String>,
        (want_w, want_h): (usize, usize),
    ) -> Result<ScoreMap, BackendError> {
        if (resp.w, resp.h) != (want_w, want_h) {
            return Err(BackendError::RemoteDims {
                want_w,
                want_h,
                got_w: resp.w,
                got_h: resp.h,
            });
        }
        let s = field.ok_or_else(|| BackendError::Malformed("missing logits".into()))?;
        decode_f32le(s, want_w, want_h)
    }
}

impl SegmenterBackend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn coarse_segment(&self, req: &CoarseRequest<'_>) -> Result<ScoreMap, BackendError> {
        let resp = self.call(&coarse_wire_request(req))?;
        Self::logits(&resp, resp.logits_f32le.as_ref(), req.out_dims())
    }

    fn supports_refine(&self) -> bool {
        self.refine
    }

    fn refine(&self, req: &RefineRequest<'_>) -> Result<RefineOutput, BackendError> {
        let resp = self.call(&refine_wire_request(req))?;
        Ok(RefineOutput {
            detail_logits: Self::logits(&resp, resp.aux_detail_f32le.as_ref(), req.out_dims())?,
            boundary_logits: Self::logits(&resp, resp.aux_boundary_f32le.as_ref(), req.out_dims())?,
        })
    }

    fn context_precompute(
        &self,
        session: &str,
        image: &RgbImage,
    ) -> Result<Option<String>, BackendError> {
        let (w, h) = (image.width() as usize, image.height() as usize);
        let empty = crate::mask::BinaryMask::new(w, h);
        let req = WireRequest {
            v: PROTOCOL.into(),
            op: "context".into(),
            session: session.into(),
            image_png: B64.encode(encode_rgb_png(image)),
            bimap_png: B64.encode(encode_bimap_png(&BiMap::empty(w, h))),
            prev_mask_png: B64.encode(encode_mask_png(&empty)),
            coarse_logits_f32le: None,
            context_token: None,
            out_w: w,
            out_h: h,
        };
        Ok(self.call(&req)?.context_token)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f32le_round_trip() {
        let m = ScoreMap::from_fn(5, 3, |x, y| x as f32 * 0.5 - y as f32);
        let s = encode_f32le(&m);
        assert_eq!(decode_f32le(&s, 5, 3).unwrap(), m);
        assert_eq!(decode_f32le(&s, 4, 3).unwrap_err().code(), "remote-malformed");
        let nan = B64.encode(f32::NAN.to_le_bytes());
        assert!(decode_f32le(&nan, 1, 1).is_err());
    }

    #[test]
    fn dead_endpoint_is_transport_error() {
        let b = RemoteBackend::new("http://127.0.0.1:9/", Duration::from_millis(500));
        assert_eq!(b.probe().unwrap_err().code(), "remote-transport");
    }
}
