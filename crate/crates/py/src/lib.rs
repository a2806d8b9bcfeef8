//! Python bindings.
//!
//! Masks cross the boundary as [`Mask`] objects holding one byte per pixel
//! (row-major, 0/1), so `numpy.frombuffer(m.data(), numpy.uint8)` gives an
//! array view of the same layout. Images are passed as encoded PNG/JPEG
//! bytes or as packed RGB buffers. Long-running calls release the GIL.

use std::path::PathBuf;
use std::sync::Arc;

use fcxl_core::crop::PixelBox;
use fcxl_core::eval::{
    eval_boxes, eval_coarse, eval_interactive, load_dataset, BoxConfig, CoarseConfig, EvalMode,
    InteractiveConfig, StartMode,
};
use fcxl_core::interaction::{
    eval_click, eval_scribble, gen_training_scribble, perturb_mask, simulate_defective_mask,
    Click, DefectSpec, EvalScribbleConfig, Interaction, PerturbLevel, Polarity, ScribbleStyle,
};
use fcxl_core::mask::io::{decode_mask_png, decode_rle, encode_mask_png, encode_rle, Rle};
use fcxl_core::pipeline::{BackendSpec, RoundResult, SegmenterBackend, SessionConfig, SessionState};
use fcxl_core::skeleton::ScribblePath;
use fcxl_core::{BinaryMask, Pixel};
use image::RgbImage;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(fcxl, FcxlError, PyException, "Raised for engine failures; the message starts with a stable error code.");

fn err(e: fcxl_core::Error) -> PyErr {
    FcxlError::new_err(format!("{}: {e}", e.code()))
}

fn polarity(positive: bool) -> Polarity {
    if positive {
        Polarity::Positive
    } else {
        Polarity::Negative
    }
}

fn decode_image(bytes: &[u8]) -> PyResult<RgbImage> {
    image::load_from_memory(bytes)
        .map(|i| i.to_rgb8())
        .map_err(|e| PyValueError::new_err(format!("cannot decode image: {e}")))
}

type BoxTuple = (usize, usize, usize, usize);

fn box_tuple(b: &PixelBox) -> BoxTuple {
    (b.x0, b.y0, b.x1, b.y1)
}

/// A binary mask.
#[pyclass(module = "fcxl", eq, from_py_object)]
#[derive(Clone, PartialEq)]
pub struct Mask {
    inner: BinaryMask,
}

impl From<BinaryMask> for Mask {
    fn from(inner: BinaryMask) -> Self {
        Self { inner }
    }
}

#[pymethods]
impl Mask {
    /// An empty `width` x `height` mask.
    #[new]
    fn new(width: usize, height: usize) -> Self {
        BinaryMask::new(width, height).into()
    }

    /// From row-major bytes; any nonzero byte is foreground.
    #[staticmethod]
    fn from_bytes(width: usize, height: usize, data: &[u8]) -> PyResult<Self> {
        let data = data.iter().map(|&v| (v != 0) as u8).collect();
        BinaryMask::from_vec(width, height, data).map(Into::into).map_err(err)
    }

    #[staticmethod]
    fn from_png(data: &[u8]) -> PyResult<Self> {
        decode_mask_png(data).map(Into::into).map_err(err)
    }

    /// From COCO-style uncompressed RLE: `size` is `[height, width]`, runs
    /// are column-major and start with background.
    #[staticmethod]
    fn from_rle(size: [usize; 2], counts: Vec<u32>) -> PyResult<Self> {
        decode_rle(&Rle { size, counts }).map(Into::into).map_err(err)
    }

    /// Axis-aligned rectangle `[x0, x1) x [y0, y1)`.
    #[staticmethod]
    fn rect(width: usize, height: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        BinaryMask::from_rect(width, height, x0, y0, x1, y1).into()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn count(&self) -> usize {
        self.inner.count()
    }

    fn get(&self, x: usize, y: usize) -> PyResult<bool> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyValueError::new_err(format!("({x}, {y}) outside the mask")));
        }
        Ok(self.inner.get(x, y))
    }

    fn set(&mut self, x: usize, y: usize, value: bool) -> PyResult<()> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyValueError::new_err(format!("({x}, {y}) outside the mask")));
        }
        self.inner.set(x, y, value);
        Ok(())
    }

    /// Row-major 0/1 bytes.
    fn data(&self) -> Vec<u8> {
        self.inner.data().to_vec()
    }

    fn to_png(&self) -> Vec<u8> {
        encode_mask_png(&self.inner)
    }

    /// `(size, counts)` in COCO-style RLE.
    fn to_rle(&self) -> ([usize; 2], Vec<u32>) {
        let r = encode_rle(&self.inner);
        (r.size, r.counts)
    }

    fn iou(&self, other: &Mask) -> PyResult<f64> {
        fcxl_core::iou(&self.inner, &other.inner).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.count()
    }

    fn __repr__(&self) -> String {
        format!(
            "Mask({}x{}, area={})",
            self.inner.width(),
            self.inner.height(),
            self.inner.count()
        )
    }
}

/// One annotation session over a single image.
#[pyclass(module = "fcxl")]
pub struct Session {
    state: SessionState,
    backend: Arc<dyn SegmenterBackend>,
    backend_name: String,
}

impl Session {
    fn build(
        image: RgbImage,
        backend: &str,
        initial_mask: Option<Mask>,
        gt: Option<Mask>,
    ) -> PyResult<Self> {
        let spec: BackendSpec = backend.parse().map_err(err)?;
        let backend = spec.build(gt.as_ref().map(|m| &m.inner)).map_err(err)?;
        let state = SessionState::new(
            "py",
            Arc::new(image),
            initial_mask.map(|m| m.inner),
            SessionConfig::default(),
        )
        .map_err(err)?;
        Ok(Self {
            state,
            backend: Arc::from(backend),
            backend_name: spec.to_string(),
        })
    }

    fn apply<'py>(&mut self, py: Python<'py>, interaction: Interaction) -> PyResult<Bound<'py, PyDict>> {
        let backend = self.backend.clone();
        let state = &mut self.state;
        let r: RoundResult = py
            .detach(|| state.run_round(backend.as_ref(), &interaction))
            .map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("round", r.round)?;
        d.set_item("target_box", box_tuple(&r.target_box))?;
        d.set_item("focus_box", box_tuple(&r.focus_box))?;
        d.set_item("total_ms", r.timings.total_ms)?;
        Ok(d)
    }
}

#[pymethods]
impl Session {
    /// `image` is encoded PNG or JPEG bytes. `backend` takes the same
    /// strings as the command line (`classical`, `oracle:perfect`, ...);
    /// oracles that replay ground truth need `gt`.
    #[new]
    #[pyo3(signature = (image, backend = "classical", initial_mask = None, gt = None))]
    fn new(image: &[u8], backend: &str, initial_mask: Option<Mask>, gt: Option<Mask>) -> PyResult<Self> {
        Self::build(decode_image(image)?, backend, initial_mask, gt)
    }

    /// From packed row-major RGB bytes.
    #[staticmethod]
    #[pyo3(signature = (width, height, rgb, backend = "classical", initial_mask = None, gt = None))]
    fn from_rgb(
        width: u32,
        height: u32,
        rgb: Vec<u8>,
        backend: &str,
        initial_mask: Option<Mask>,
        gt: Option<Mask>,
    ) -> PyResult<Self> {
        let image = RgbImage::from_raw(width, height, rgb)
            .ok_or_else(|| PyValueError::new_err("rgb buffer length must be width*height*3"))?;
        Self::build(image, backend, initial_mask, gt)
    }

    #[getter]
    fn backend(&self) -> &str {
        &self.backend_name
    }

    #[getter]
    fn round(&self) -> usize {
        self.state.round()
    }

    #[getter]
    fn mask(&self) -> Mask {
        self.state.mask().clone().into()
    }

    #[pyo3(signature = (x, y, positive = true))]
    fn click<'py>(&mut self, py: Python<'py>, x: usize, y: usize, positive: bool) -> PyResult<Bound<'py, PyDict>> {
        let mut c = Click::new(x, y, polarity(positive));
        c.round = self.state.round();
        self.apply(py, Interaction::Click(c))
    }

    /// A polyline stroke; the server-side spline passes through `points`.
    #[pyo3(signature = (points, positive = true, thickness = 3))]
    fn scribble<'py>(
        &mut self,
        py: Python<'py>,
        points: Vec<(usize, usize)>,
        positive: bool,
        thickness: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let path = ScribblePath {
            points: points.into_iter().map(|(x, y)| Pixel::new(x, y)).collect(),
            thickness,
        };
        self.apply(py, Interaction::Scribble { path, polarity: polarity(positive) })
    }

    #[pyo3(name = "box")]
    fn bbox<'py>(&mut self, py: Python<'py>, x0: usize, y0: usize, x1: usize, y1: usize) -> PyResult<Bound<'py, PyDict>> {
        let bbox = PixelBox::new(x0, y0, x1, y1).map_err(err)?;
        self.apply(py, Interaction::Box { bbox })
    }

    fn coarse_mask<'py>(&mut self, py: Python<'py>, mask: Mask) -> PyResult<Bound<'py, PyDict>> {
        self.apply(py, Interaction::CoarseMask { mask: mask.inner })
    }

    /// Any interaction in the service's JSON form.
    fn interact<'py>(&mut self, py: Python<'py>, json: &str) -> PyResult<Bound<'py, PyDict>> {
        let i: Interaction = serde_json::from_str(json)
            .map_err(|e| PyValueError::new_err(format!("invalid interaction: {e}")))?;
        self.apply(py, i)
    }

    fn undo(&mut self) -> PyResult<()> {
        self.state.undo().map_err(err)
    }
}

/// The evaluation click: `(x, y, positive)` at the deepest pixel of the
/// largest error region.
#[pyfunction]
fn next_click(gt: &Mask, pred: &Mask) -> PyResult<(usize, usize, bool)> {
    let c = eval_click(&gt.inner, &pred.inner).map_err(err)?;
    Ok((c.x, c.y, c.polarity == Polarity::Positive))
}

/// The evaluation scribble: `(raster, positive, points)`.
#[pyfunction]
fn next_scribble(py: Python<'_>, gt: &Mask, pred: &Mask) -> PyResult<(Mask, bool, Vec<(usize, usize)>)> {
    let s = py
        .detach(|| eval_scribble(&gt.inner, &pred.inner, &EvalScribbleConfig::default()))
        .map_err(err)?;
    let points = s
        .path
        .map(|p| p.points.iter().map(|q| (q.x, q.y)).collect())
        .unwrap_or_default();
    Ok((s.raster.into(), s.polarity == Polarity::Positive, points))
}

/// A coarse mask at perturbation level 1 (mild) to 5 (severe).
#[pyfunction]
fn perturb(py: Python<'_>, gt: &Mask, level: u8, seed: u64) -> PyResult<Mask> {
    let level = PerturbLevel::new(level).map_err(err)?;
    py.detach(|| perturb_mask(&gt.inner, level, seed))
        .map(Into::into)
        .map_err(err)
}

/// A defective mask and its IoU with `gt`.
#[pyfunction]
#[pyo3(signature = (image, gt, seed, min_iou = 0.75, max_iou = 0.85))]
fn defective_mask(
    py: Python<'_>,
    image: &[u8],
    gt: &Mask,
    seed: u64,
    min_iou: f64,
    max_iou: f64,
) -> PyResult<(Mask, f64)> {
    let image = decode_image(image)?;
    let spec = DefectSpec {
        min_iou,
        max_iou,
        seed,
        ..Default::default()
    };
    let out = py
        .detach(|| simulate_defective_mask(&image, &gt.inner, &spec))
        .map_err(err)?;
    Ok((out.mask.into(), out.iou))
}

/// A training scribble in `style` (`bezier`, `axial`, `boundary`, `composed`).
#[pyfunction]
fn training_scribble(mask: &Mask, style: &str, seed: u64) -> PyResult<Mask> {
    let style: ScribbleStyle = style.parse().map_err(err)?;
    gen_training_scribble(&mask.inner, style, seed)
        .map(Into::into)
        .map_err(err)
}

/// Runs an evaluation protocol over a dataset directory and returns the
/// report as JSON.
#[pyfunction]
#[pyo3(signature = (dataset, mode = "clicks", backend = "classical", targets = vec![85, 90, 95], cap = 20, start = "scratch", seed = 0))]
#[allow(clippy::too_many_arguments)]
fn evaluate(
    py: Python<'_>,
    dataset: PathBuf,
    mode: &str,
    backend: &str,
    targets: Vec<u32>,
    cap: usize,
    start: &str,
    seed: u64,
) -> PyResult<String> {
    let mode: EvalMode = mode.parse().map_err(err)?;
    let start: StartMode = start.parse().map_err(err)?;
    let spec: BackendSpec = backend.parse().map_err(err)?;
    let report = py
        .detach(|| {
            let ds = load_dataset(&dataset)?;
            match mode {
                EvalMode::Clicks | EvalMode::Scribbles => {
                    let cfg = InteractiveConfig {
                        mode,
                        targets,
                        cap,
                        start,
                        seed,
                        ..Default::default()
                    };
                    eval_interactive(&spec, &ds, &cfg)
                }
                EvalMode::Boxes => eval_boxes(&spec, &ds, &BoxConfig { seed, ..Default::default() }),
                EvalMode::Coarse => eval_coarse(&spec, &ds, &CoarseConfig { seed, ..Default::default() }),
            }
        })
        .map_err(err)?;
    let bytes = report.to_json().map_err(err)?;
    String::from_utf8(bytes).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Module initializer; embedders register it with `append_to_inittab!`.
#[pymodule]
pub fn fcxl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FcxlError", m.py().get_type::<FcxlError>())?;
    m.add_class::<Mask>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(next_click, m)?)?;
    m.add_function(wrap_pyfunction!(next_scribble, m)?)?;
    m.add_function(wrap_pyfunction!(perturb, m)?)?;
    m.add_function(wrap_pyfunction!(defective_mask, m)?)?;
    m.add_function(wrap_pyfunction!(training_scribble, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add("PROTOCOL", fcxl_core::pipeline::remote::PROTOCOL)?;
    Ok(())
}
