use fcxl::fcxl as module;
use pyo3::prelude::*;

/// Runs the bindings inside an embedded interpreter.
#[test]
fn module_drives_a_session() {
    pyo3::append_to_inittab!(module);
    Python::initialize();
    Python::attach(|py| {
        py.run(
            cr#"
import fcxl
W, H = 48, 40
inside = lambda x, y: 10 <= x < 34 and 8 <= y < 30
gt = fcxl.Mask.from_bytes(W, H, bytes(int(inside(x, y)) for y in range(H) for x in range(W)))
rgb = b"".join(bytes((220, 30, 30) if inside(x, y) else (20, 40, 210)) for y in range(H) for x in range(W))
s = fcxl.Session.from_rgb(W, H, rgb)
info = s.click(20, 20)
assert info["round"] == 1, info
assert s.mask.iou(gt) > 0.9, s.mask.iou(gt)
x, y, positive = fcxl.next_click(gt, fcxl.Mask(W, H))
assert positive and gt.get(x, y)
s.undo()
assert s.round == 0 and len(s.mask) == 0
try:
    s.undo()
    raise AssertionError("undo at round 0 must fail")
except fcxl.FcxlError as e:
    assert str(e).startswith("nothing-to-undo"), e
"#,
            None,
            None,
        )
        .map_err(|e| {
            e.display(py);
            e
        })
        .unwrap();
    });
}
