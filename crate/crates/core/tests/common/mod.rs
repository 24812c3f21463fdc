#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stepplace::context_trace::{generate_synthetic_trace, CellTarget, HandDwell, Segment, TraceScript, WhichHands};
use stepplace::{AnchoringSurface, DocumentProfile, Frame, InstructionStep, KeyObject, Orientation, SpatialProfile, StepSource, Vec3};

pub fn fixture(name: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn vertical(id: &str, top_left: [f64; 3], width: f64, height: f64) -> AnchoringSurface {
    AnchoringSurface::new(id, Vec3::from(top_left), Vec3::x(), Vec3::y(), width, height, Orientation::Vertical).unwrap()
}

/// A cabinet front made of four panels facing the viewer in the plane
/// z = 0: a 50 x 25 centre panel, two 20 x 25 side panels and a 50 x 8
/// strip above, 2650 cells in all.
pub fn cabinet_profile() -> SpatialProfile {
    let surfaces = vec![
        vertical("centre", [-0.75, 1.50, 0.0], 1.50, 0.75),
        vertical("left", [-1.38, 1.50, 0.0], 0.60, 0.75),
        vertical("right", [0.78, 1.50, 0.0], 0.60, 0.75),
        vertical("top", [-0.75, 1.77, 0.0], 1.50, 0.24),
    ];
    let k = KeyObject::new("cabinet", surfaces).unwrap();
    assert_eq!(k.total_cells(), 2650);
    SpatialProfile::new("bench", vec![k]).unwrap()
}

/// One second of steady gaze on the centre panel from 0.6 m away.
pub fn cabinet_script() -> TraceScript {
    TraceScript {
        rate_hz: 90.0,
        eye: [0.0, 1.14, -0.6],
        ipd_m: 0.064,
        segments: vec![Segment {
            duration_s: 1.0,
            gaze: CellTarget { surface: "centre".into(), r: 25, c: 12 },
            saccade_from: None,
            gaze_noise_deg: 0.2,
            hands: None,
        }],
    }
}

/// A single-step document whose step is placed on `label`.
pub fn single_step_doc(label: &str, preferred: Option<[f64; 3]>) -> DocumentProfile {
    let step = InstructionStep {
        id: "s1".into(),
        text: format!("use the {label}"),
        key_object: Some(label.into()),
        confidence: 1.0,
        source: StepSource::Manual,
        preferred_position: preferred,
    };
    DocumentProfile::new("bench", BTreeSet::from([label.to_string()]), vec![step]).unwrap()
}

/// 1 to 3 vertical panels at random offsets with at most 400 cells in all.
pub fn random_profile(rng: &mut ChaCha8Rng) -> SpatialProfile {
    let n = rng.gen_range(1..=3);
    let mut budget = 400usize;
    let mut surfaces = Vec::new();
    for i in 0..n {
        let max_side = ((budget / (n - i)) as f64).sqrt().floor().max(2.0) as usize;
        let w = rng.gen_range(2..=max_side.clamp(2, 20));
        let h = rng.gen_range(2..=(budget / (n - i) / w).clamp(2, 20));
        budget -= w * h;
        let x = -0.3 + 0.4 * i as f64 + rng.gen_range(-0.05..0.05);
        let y = 1.2 + rng.gen_range(-0.1..0.1);
        let z = rng.gen_range(0.0..0.1);
        surfaces.push(vertical(&format!("p{i}"), [x, y, z], w as f64 * 0.03 + 0.001, h as f64 * 0.03 + 0.001));
    }
    let k = KeyObject::new("panel", surfaces).unwrap();
    assert!(k.total_cells() <= 400);
    SpatialProfile::new("random", vec![k]).unwrap()
}

/// A gaze fixation on a random cell, optionally with hands dwelling on a
/// random block.
pub fn random_trace(rng: &mut ChaCha8Rng, profile: &SpatialProfile, seed: u64) -> Vec<Frame> {
    let k = &profile.key_objects()[0];
    let pick = |rng: &mut ChaCha8Rng| {
        let s = &k.surfaces()[rng.gen_range(0..k.surfaces().len())];
        (s.id.clone(), rng.gen_range(0..s.cols()), rng.gen_range(0..s.rows()), s.cols(), s.rows())
    };
    let (gs, gr, gc, _, _) = pick(rng);
    let hands = rng.gen_bool(0.7).then(|| {
        let (hs, hr, hc, w, h) = pick(rng);
        HandDwell {
            surface: hs,
            r: hr.min(w - 2),
            c: hc.min(h - 2),
            cols: 2,
            rows: 2,
            depth: 0.6,
            which: WhichHands::Both,
        }
    });
    let script = TraceScript {
        rate_hz: 90.0,
        eye: [rng.gen_range(-0.2..0.4), rng.gen_range(1.0..1.3), rng.gen_range(-0.8..-0.4)],
        ipd_m: 0.064,
        segments: vec![Segment {
            duration_s: 0.5,
            gaze: CellTarget { surface: gs, r: gr, c: gc },
            saccade_from: None,
            gaze_noise_deg: 0.2,
            hands,
        }],
    };
    generate_synthetic_trace(&script, profile, seed).unwrap()
}
