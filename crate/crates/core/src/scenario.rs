//! JSON scenarios for `rflow run` and the files they produce.

use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::flow::{run_with, EventKind, FlowEvent, RunOptions, StepControls};
use crate::geometry::CurveFamily;
use crate::io::{bounding_box, events_csv, family_csv, read_curve_csv, series_csv, svg, StagedDir};
use crate::shapes::{AnalyticSet, BarrierSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Auto {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threshold {
    Value(f64),
    Auto(Auto),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsSpec {
    pub cfl: f64,
    pub target_vertices: usize,
    pub resample_every: usize,
    pub pinch_threshold: Threshold,
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FileShape {
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSpec {
    Analytic(AnalyticSet),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub shape: ShapeSpec,
    pub r: f64,
    pub t_max: f64,
    pub controls: ControlsSpec,
    pub barrier: Option<BarrierSchedule>,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    shape: Value,
    r: f64,
    t_max: f64,
    controls: ControlsSpec,
    #[serde(default)]
    barrier: Option<BarrierSchedule>,
    #[serde(default)]
    seed: u64,
}

fn schema<E: std::fmt::Display>(e: E) -> Error {
    Error::Schema(e.to_string())
}

impl Scenario {
    /// Parses and validates; file paths are resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let raw: RawScenario = serde_json::from_str(text).map_err(schema)?;
        let shape = if raw.shape.get("kind").and_then(Value::as_str) == Some("file") {
            let FileShape::File { path } = serde_json::from_value(raw.shape).map_err(schema)?;
            ShapeSpec::File(if path.is_absolute() { path } else { base.join(path) })
        } else {
            ShapeSpec::Analytic(serde_json::from_value(raw.shape).map_err(schema)?)
        };
        let sc = Scenario { shape, r: raw.r, t_max: raw.t_max, controls: raw.controls, barrier: raw.barrier, seed: raw.seed };
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::Schema(format!("r must be positive, got {}", self.r)));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::Schema(format!("t_max must be positive, got {}", self.t_max)));
        }
        if let Threshold::Value(v) = self.controls.pinch_threshold {
            if !(v > 0.0) {
                return Err(Error::Schema(format!("pinch_threshold must be positive, got {v}")));
            }
        }
        if let ShapeSpec::Analytic(s) = &self.shape {
            s.validate()?;
        }
        if let Some(b) = &self.barrier {
            b.validate()?;
        }
        Ok(())
    }

    pub fn initial_family(&self) -> Result<CurveFamily> {
        match &self.shape {
            ShapeSpec::Analytic(s) => Ok(CurveFamily::single(s.discretize(self.controls.target_vertices, None)?)),
            ShapeSpec::File(p) => read_curve_csv(p),
        }
    }

    pub fn step_controls(&self, family: &CurveFamily) -> Result<StepControls> {
        let mut c = StepControls::auto(family, self.controls.target_vertices);
        c.cfl = self.controls.cfl;
        c.resample_every = self.controls.resample_every;
        if let Threshold::Value(v) = self.controls.pinch_threshold {
            c.pinch_threshold = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Containment {
    pub min_clearance: f64,
    pub first_violation: Option<f64>,
    pub tolerance: f64,
    pub closing_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub events: Vec<FlowEvent>,
    pub final_time: f64,
    pub steps: usize,
    pub components: usize,
    pub final_area: f64,
    pub final_vertices: usize,
    pub files: Vec<String>,
    pub containment: Option<Containment>,
    pub seed: u64,
    pub wall_clock_seconds: f64,
    pub failure: Option<String>,
}

impl RunReport {
    pub fn has_event(&self, kind: EventKind) -> bool {
        self.events.iter().any(|e| e.kind == kind)
    }
}

/// Runs a scenario and writes `events.csv`, `series.csv`, one
/// `curve_t*.csv` per snapshot, optional SVGs and `run_report.json` into
/// `out`. Invalid input leaves `out` untouched; a numerical failure still
/// writes the partial run before the error is returned.
pub fn run_scenario(sc: &Scenario, out: &Path, write_svg: bool) -> Result<RunReport> {
    let clock = Instant::now();
    let family = sc.initial_family()?;
    let controls = sc.step_controls(&family)?;
    let view = bounding_box(&family);
    let opts = RunOptions::new(sc.t_max, sc.controls.snapshot_stride);
    let mut cont = sc.barrier.map(|b| {
        let c = family.curves().iter().filter_map(|c| b.clearance(c.vertices(), 0.0)).fold(f64::INFINITY, f64::min);
        (b, Containment { min_clearance: c, first_violation: None, tolerance: 1e-3 * sc.r, closing_time: b.closing_time() })
    });
    let traj = run_with(family, sc.r, &controls, &opts, |v| {
        if let Some((b, c)) = cont.as_mut() {
            if v.state.time < c.closing_time {
                let m = v.state.curves().iter().filter_map(|k| b.clearance(k.vertices(), v.state.time)).fold(f64::INFINITY, f64::min);
                c.min_clearance = c.min_clearance.min(m);
                if m < -c.tolerance && c.first_violation.is_none() {
                    c.first_violation = Some(v.state.time);
                }
            }
        }
        ControlFlow::Continue(())
    })?;
    let staged = StagedDir::new(out)?;
    let mut files = vec!["events.csv".to_string(), "series.csv".to_string()];
    staged.write("events.csv", &events_csv(&traj.events))?;
    staged.write("series.csv", &series_csv(&traj.series))?;
    for s in &traj.snapshots {
        let stem = format!("t{:.9e}_{:07}", s.time, s.step);
        let name = format!("curve_{stem}.csv");
        staged.write(&name, &family_csv(&s.family))?;
        files.push(name);
        if write_svg {
            let name = format!("snapshot_{stem}.svg");
            staged.write(&name, &svg(&s.family, view))?;
            files.push(name);
        }
    }
    let st = &traj.final_state;
    let report = RunReport {
        events: traj.events.clone(),
        final_time: st.time,
        steps: st.step_count,
        components: st.family.len(),
        final_area: st.family.area(),
        final_vertices: st.family.vertex_count(),
        files,
        containment: cont.map(|c| c.1),
        seed: sc.seed,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        failure: traj.failure.as_ref().map(|e| e.to_string()),
    };
    staged.write("run_report.json", &serde_json::to_string_pretty(&report).map_err(schema)?)?;
    staged.commit()?;
    match traj.failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CIRCLE: &str = r#"{"shape": {"kind": "circle", "radius": 0.3}, "r": 0.2, "t_max": 0.01,
        "controls": {"cfl": 0.2, "target_vertices": 64, "resample_every": 5, "pinch_threshold": "auto", "snapshot_stride": 10}, "seed": 7}"#;

    #[test]
    fn parses_and_rejects() {
        let sc = Scenario::from_json(CIRCLE, Path::new(".")).unwrap();
        assert_eq!(sc.controls.pinch_threshold, Threshold::Auto(Auto::Auto));
        assert_eq!(sc.seed, 7);
        let bad = CIRCLE.replace("\"seed\"", "\"sead\"");
        assert!(matches!(Scenario::from_json(&bad, Path::new(".")), Err(Error::Schema(_))));
        let bad = CIRCLE.replace("\"auto\"", "\"never\"");
        assert!(matches!(Scenario::from_json(&bad, Path::new(".")), Err(Error::Schema(_))));
        let bad = CIRCLE.replace("\"radius\"", "\"radios\"");
        assert!(Scenario::from_json(&bad, Path::new(".")).is_err());
        let file = CIRCLE.replace(r#"{"kind": "circle", "radius": 0.3}"#, r#"{"kind": "file", "path": "c.csv"}"#);
        let sc = Scenario::from_json(&file, Path::new("/data")).unwrap();
        assert_eq!(sc.shape, ShapeSpec::File(PathBuf::from("/data/c.csv")));
    }

    #[test]
    fn writes_outputs_deterministically() {
        let tmp = tempfile::tempdir().unwrap();
        let sc = Scenario::from_json(CIRCLE, Path::new(".")).unwrap();
        let a = run_scenario(&sc, &tmp.path().join("a"), true).unwrap();
        let b = run_scenario(&sc, &tmp.path().join("b"), false).unwrap();
        assert!(a.has_event(EventKind::MaxTime));
        for f in &a.files {
            assert!(tmp.path().join("a").join(f).exists(), "{f}");
        }
        for f in b.files.iter().filter(|f| f.ends_with(".csv")) {
            let x = std::fs::read(tmp.path().join("a").join(f)).unwrap();
            let y = std::fs::read(tmp.path().join("b").join(f)).unwrap();
            assert_eq!(x, y, "{f}");
        }
    }
}
