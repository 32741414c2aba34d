//! Explicit front tracking: every vertex moves along its outward normal with
//! velocity `-k_r`, the polyline is periodically resampled, thin necks are cut
//! and vanishing components removed.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{polylines_cross, resample_closed, CurveFamily, PlanarCurve, Point2, MIN_VERTICES};
use crate::rcurv::{kappa_r, BallTester, RCurvatureSample};
use crate::shapes::BarrierSchedule;
use crate::spatial::{closest_parameter, SegmentTree};

const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControls {
    pub cfl: f64,
    pub resample_every: usize,
    pub target_vertices: usize,
    pub pinch_threshold: f64,
    pub extinction_area: f64,
    /// Resampling never refines a curve below this spacing; 0 disables the floor.
    #[serde(default)]
    pub min_spacing: f64,
}

impl StepControls {
    /// Defaults derived from the initial family: pinch threshold two mean edge
    /// lengths, extinction area `(10 h_mean)^2`, spacing floor `h_mean / 4`.
    pub fn auto(family: &CurveFamily, target_vertices: usize) -> Self {
        let h = family.perimeter() / target_vertices.max(1) as f64;
        StepControls {
            cfl: 0.2,
            resample_every: 5,
            target_vertices,
            pinch_threshold: 2.0 * h,
            extinction_area: (10.0 * h).powi(2),
            min_spacing: 0.25 * h,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(Error::InvalidParams(format!("cfl must lie in (0, 0.5], got {}", self.cfl)));
        }
        if !(self.pinch_threshold > 0.0 && self.pinch_threshold.is_finite()) {
            return Err(Error::InvalidParams(format!("pinch threshold must be positive, got {}", self.pinch_threshold)));
        }
        if self.resample_every == 0 {
            return Err(Error::InvalidParams("resample_every must be at least 1".into()));
        }
        if self.target_vertices < MIN_VERTICES {
            return Err(Error::InvalidParams(format!("target_vertices must be at least {MIN_VERTICES}")));
        }
        if !(self.min_spacing >= 0.0) {
            return Err(Error::InvalidParams("min_spacing must be nonnegative".into()));
        }
        if !(self.extinction_area >= 0.0) {
            return Err(Error::InvalidParams("extinction area must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub time: f64,
    pub family: CurveFamily,
    pub r: f64,
    pub step_count: usize,
}

impl FlowState {
    pub fn new(family: CurveFamily, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParams(format!("r must be positive, got {r}")));
        }
        Ok(FlowState { time: 0.0, family, r, step_count: 0 })
    }

    pub fn curves(&self) -> &[PlanarCurve] {
        self.family.curves()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Pinch,
    Extinction,
    MaxTime,
    Blowup,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Pinch => "pinch",
            EventKind::Extinction => "extinction",
            EventKind::MaxTime => "max_time",
            EventKind::Blowup => "blowup",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowEvent {
    pub kind: EventKind,
    pub time: f64,
    pub location: Option<Point2>,
}

fn min_edge(curves: &[PlanarCurve]) -> f64 {
    curves.iter().map(|c| c.min_edge()).fold(f64::INFINITY, f64::min)
}

fn max_edge(curves: &[PlanarCurve]) -> f64 {
    curves.iter().flat_map(|c| c.edge_lengths()).fold(0.0, f64::max)
}

/// `cfl * min(h_min^2, 2 r h_min)`.
pub fn cfl_dt(state: &FlowState, controls: &StepControls) -> Result<f64> {
    let h = min_edge(state.curves());
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::DegenerateCurve(format!("minimal edge length {h}")));
    }
    Ok(controls.cfl * (h * h).min(2.0 * state.r * h))
}

/// A near contact between two non-adjacent parts of the boundary: vertex
/// `vertex` of curve `curve` lies within `distance` of edge `edge` of
/// curve `other`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub curve: usize,
    pub vertex: usize,
    pub other: usize,
    pub edge: usize,
    pub param: f64,
    pub distance: f64,
}

impl Contact {
    pub fn midpoint(&self, curves: &[PlanarCurve]) -> Point2 {
        let v = curves[self.curve].vertices();
        let w = curves[self.other].vertices();
        let n = w.len();
        let q = w[self.edge].lerp(w[(self.edge + 1) % n], self.param);
        v[self.vertex].lerp(q, 0.5)
    }
}

/// Arclength separation on a closed curve with cumulative lengths `cum`.
fn arc_sep(cum: &[f64], perimeter: f64, s0: f64, edge: usize, edge_len: f64, t: f64) -> f64 {
    let s1 = cum[edge] + t * edge_len;
    let d = (s0 - s1).abs();
    d.min(perimeter - d)
}

/// Finds every vertex whose distance to a non-adjacent edge is below
/// `radius`. Within one curve two points are non-adjacent when their
/// arclength separation exceeds `min_sep`; points on different curves always
/// are. Only the closest contact of each vertex is reported.
pub fn near_contacts(curves: &[PlanarCurve], radius: f64, min_sep: f64) -> Vec<Contact> {
    let index = SegmentTree::new(curves.iter().map(|c| c.vertices()));
    let cums: Vec<Vec<f64>> = curves.iter().map(|c| c.arclengths()).collect();
    let lens: Vec<Vec<f64>> = curves.iter().map(|c| c.edge_lengths()).collect();
    let pers: Vec<f64> = curves.iter().map(|c| c.perimeter()).collect();
    let mut out = Vec::new();
    for (ci, c) in curves.iter().enumerate() {
        for (i, &p) in c.vertices().iter().enumerate() {
            let mut best: Option<Contact> = None;
            index.for_each_near(p, radius, |_, s| {
                let (oc, e) = (s.curve as usize, s.edge as usize);
                let t = closest_parameter(p, s.a, s.b);
                let d = (s.a.lerp(s.b, t) - p).norm();
                if d >= radius || best.is_some_and(|b| b.distance <= d) {
                    return true;
                }
                if oc == ci && arc_sep(&cums[ci], pers[ci], cums[ci][i], e, lens[ci][e], t) <= min_sep {
                    return true;
                }
                best = Some(Contact { curve: ci, vertex: i, other: oc, edge: e, param: t, distance: d });
                true
            });
            out.extend(best);
        }
    }
    out
}

/// Smallest non-adjacent distance below `radius`, if any.
pub fn neck_width(curves: &[PlanarCurve], radius: f64, min_sep: f64) -> Option<f64> {
    near_contacts(curves, radius, min_sep).into_iter().map(|c| c.distance).fold(None, |a: Option<f64>, d| Some(a.map_or(d, |a| a.min(d))))
}

/// Non-adjacency separation used for contact search on a family.
pub fn contact_separation(curves: &[PlanarCurve], threshold: f64) -> f64 {
    (4.0 * threshold).max(6.0 * max_edge(curves))
}

fn forward_range(n: usize, from: usize, to: usize) -> Vec<usize> {
    let len = (to + n - from) % n + 1;
    (0..len).map(|k| (from + k) % n).collect()
}

fn closed_piece(v: &[Point2], idx: &[usize]) -> Result<PlanarCurve> {
    let pts: Vec<Point2> = idx.iter().map(|&i| v[i]).collect();
    let pts = if pts.len() < MIN_VERTICES { resample_closed(&pts, MIN_VERTICES) } else { pts };
    PlanarCurve::new(pts)
}

/// Cuts one curve at its narrowest non-adjacent contact, removing the whole
/// band of vertices that lie within `threshold` of the opposite arc.
/// Returns `None` when there is no contact; an empty list when the entire
/// curve is thinner than the threshold.
fn cut_curve(curve: &PlanarCurve, threshold: f64, min_sep: f64) -> Result<Option<(Vec<PlanarCurve>, Point2)>> {
    let single = std::slice::from_ref(curve);
    let contacts = near_contacts(single, threshold, min_sep);
    if contacts.is_empty() {
        return Ok(None);
    }
    let n = curve.len();
    let mut partner: Vec<Option<Contact>> = vec![None; n];
    for c in &contacts {
        partner[c.vertex] = Some(*c);
    }
    let waist = *contacts.iter().min_by(|a, b| a.distance.total_cmp(&b.distance)).unwrap();
    let loc = waist.midpoint(single);
    if partner.iter().all(|p| p.is_some()) {
        return Ok(Some((Vec::new(), loc)));
    }
    let i0 = waist.vertex;
    let mut hi = i0;
    while partner[(hi + 1) % n].is_some() {
        hi = (hi + 1) % n;
    }
    let mut lo = i0;
    while partner[(lo + n - 1) % n].is_some() {
        lo = (lo + n - 1) % n;
    }
    let end_vertex = |c: Contact| if c.param < 0.5 { c.edge } else { (c.edge + 1) % n };
    let j_hi = end_vertex(partner[hi].unwrap());
    let j_lo = end_vertex(partner[lo].unwrap());
    let v = curve.vertices();
    // a one-vertex band shares its ends between the two loops
    let first = usize::from(lo == hi || j_lo == j_hi);
    for trim in first..first + 6 {
        let a = forward_range(n, (hi + trim) % n, (j_hi + n - trim) % n);
        let b = forward_range(n, (j_lo + trim) % n, (lo + n - trim) % n);
        if a.len() + b.len() > n || a.len() < 3 || b.len() < 3 {
            break;
        }
        if let (Ok(pa), Ok(pb)) = (closed_piece(v, &a), closed_piece(v, &b)) {
            return Ok(Some((vec![pa, pb], loc)));
        }
    }
    Err(Error::SurgeryFailed(format!("could not split the curve at ({:.6e}, {:.6e})", loc.x, loc.y)))
}

/// Splits every curve that has two non-adjacent arcs closer than
/// `threshold`. Curves thinner than the threshold everywhere are removed and
/// reported as extinct.
pub fn detect_pinch_and_cut(family: &CurveFamily, threshold: f64, time: f64) -> Result<(CurveFamily, Vec<FlowEvent>)> {
    let min_sep = contact_separation(family.curves(), threshold);
    let mut pending: Vec<PlanarCurve> = family.curves().to_vec();
    let mut done = Vec::new();
    let mut events = Vec::new();
    let mut rounds = 0;
    while let Some(c) = pending.pop() {
        rounds += 1;
        if rounds > 64 {
            return Err(Error::SurgeryFailed("too many cuts in one step".into()));
        }
        match cut_curve(&c, threshold, min_sep)? {
            None => done.push(c),
            Some((pieces, loc)) if pieces.is_empty() => {
                events.push(FlowEvent { kind: EventKind::Extinction, time, location: Some(loc) });
            }
            Some((pieces, loc)) => {
                // pieces shorter than the non-adjacency scale are unresolved debris
                let (keep, debris): (Vec<_>, Vec<_>) = pieces.into_iter().partition(|p| p.perimeter() >= 2.0 * min_sep);
                if keep.len() == 2 {
                    events.push(FlowEvent { kind: EventKind::Pinch, time, location: Some(loc) });
                } else {
                    // a snipped tongue or sliver: no change of topology
                    let at = debris.first().map_or(loc, |d| d.centroid());
                    events.push(FlowEvent { kind: EventKind::Extinction, time, location: Some(at) });
                }
                pending.extend(keep);
            }
        }
    }
    done.reverse();
    Ok((CurveFamily::new(done)?, events))
}

/// Splits `total` vertices among curves in proportion to their perimeters,
/// without going below `min_spacing` (when positive) or `MIN_VERTICES`.
pub fn allocate_vertices(curves: &[PlanarCurve], total: usize, min_spacing: f64) -> Vec<usize> {
    let per: f64 = curves.iter().map(|c| c.perimeter()).sum();
    curves
        .iter()
        .map(|c| {
            let mut m = (total as f64 * c.perimeter() / per).round() as usize;
            if min_spacing > 0.0 {
                m = m.min((c.perimeter() / min_spacing).ceil() as usize);
            }
            m.max(MIN_VERTICES)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub min_kappa: f64,
    pub min_kappa_r: f64,
    pub max_kappa_r: f64,
    /// Narrowest non-adjacent distance within the contact search radius, or NaN.
    pub neck_width: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: FlowState,
    pub events: Vec<FlowEvent>,
    pub dt: f64,
    /// Diagnostics of the state the step started from.
    pub stats: StepStats,
    pub halvings: usize,
}

/// r-curvature samples of every curve, tested against the whole family.
pub fn family_kappa_r(curves: &[PlanarCurve], r: f64) -> Vec<Vec<RCurvatureSample>> {
    let t = BallTester::new(curves);
    (0..curves.len()).map(|c| t.samples(c, r)).collect()
}

/// One explicit step of at most `dt_max`.
pub fn step(state: &FlowState, controls: &StepControls, dt_max: f64) -> Result<StepOutcome> {
    controls.validate()?;
    let curves = state.curves();
    if curves.is_empty() {
        return Err(Error::InvalidParams("cannot step an empty family".into()));
    }
    let r = state.r;
    let tester = BallTester::new(curves);
    let samples: Vec<Vec<RCurvatureSample>> = (0..curves.len()).map(|c| tester.samples(c, r)).collect();
    let h_min = min_edge(curves);
    let search = (4.0 * max_edge(curves)).max(2.0 * controls.pinch_threshold);
    let width = neck_width(curves, search, contact_separation(curves, controls.pinch_threshold));
    let flat = samples.iter().flatten();
    let mut stats = StepStats {
        min_kappa: flat.clone().map(|s| s.kappa).fold(f64::INFINITY, f64::min),
        min_kappa_r: flat.clone().map(|s| s.kappa_r).fold(f64::INFINITY, f64::min),
        max_kappa_r: flat.clone().map(|s| s.kappa_r).fold(f64::NEG_INFINITY, f64::max),
        neck_width: f64::NAN,
    };
    let vmax = flat.map(|s| s.kappa_r.abs()).fold(0.0, f64::max);
    let mut dt = cfl_dt(state, controls)?.min(dt_max);
    if let Some(w) = width {
        stats.neck_width = w;
        if vmax > 0.0 {
            // two sides approach each other; keep a closing gap resolved in time
            dt = dt.min(0.25 * w / vmax);
        }
    }
    let mut halvings = 0;
    let moved = loop {
        let disp = dt * vmax;
        let attempt = if disp > h_min {
            Err(Error::BlowupDetected { time: state.time, displacement: disp, limit: h_min })
        } else {
            move_family(&tester, curves, &samples, dt)
        };
        match attempt {
            Ok(c) => break c,
            Err(e) => {
                if halvings == MAX_HALVINGS {
                    return Err(match e {
                        Error::BlowupDetected { .. } => e,
                        other => Error::NumericalInstability(format!("step rejected after {MAX_HALVINGS} halvings: {other}")),
                    });
                }
                halvings += 1;
                dt *= 0.5;
            }
        }
    };
    let time = state.time + dt;
    let step_count = state.step_count + 1;
    let mut curves = moved;
    if step_count % controls.resample_every == 0 {
        let counts = allocate_vertices(&curves, controls.target_vertices, controls.min_spacing);
        curves = curves.iter().zip(counts).map(|(c, m)| c.resample_uniform(m)).collect::<Result<_>>()?;
    }
    let mut events = Vec::new();
    let mut kept = Vec::new();
    for c in curves {
        if c.area() < controls.extinction_area {
            events.push(FlowEvent { kind: EventKind::Extinction, time, location: Some(c.centroid()) });
        } else {
            kept.push(c);
        }
    }
    let family = CurveFamily::new(kept)?;
    let (family, cut_events) = detect_pinch_and_cut(&family, controls.pinch_threshold, time)?;
    events.extend(cut_events);
    Ok(StepOutcome { state: FlowState { time, family, r, step_count }, events, dt, stats, halvings })
}

fn move_family(tester: &BallTester<'_>, curves: &[PlanarCurve], samples: &[Vec<RCurvatureSample>], dt: f64) -> Result<Vec<PlanarCurve>> {
    let moved: Vec<PlanarCurve> = curves
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let nu = tester.normals(ci);
            let pts = c.vertices().iter().zip(nu).zip(&samples[ci]).map(|((p, n), s)| *p - *n * (dt * s.kappa_r)).collect();
            PlanarCurve::new(pts)
        })
        .collect::<Result<_>>()?;
    if moved.len() > 1 {
        CurveFamily::new(moved.clone())?;
    }
    Ok(moved)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub time: f64,
    pub area: f64,
    pub perimeter: f64,
    pub min_kappa: f64,
    pub min_kappa_r: f64,
    pub max_kappa_r: f64,
    pub neck_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub step: usize,
    pub family: CurveFamily,
}

#[derive(Debug)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub events: Vec<FlowEvent>,
    pub series: Vec<SeriesRow>,
    pub final_state: FlowState,
    /// The step error that ended the run early, if any.
    pub failure: Option<Error>,
}

impl Trajectory {
    pub fn first_event(&self, kind: EventKind) -> Option<&FlowEvent> {
        self.events.iter().find(|e| e.kind == kind)
    }

    pub fn into_result(self) -> Result<Trajectory> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub t_max: f64,
    /// Snapshot every this many steps; 0 keeps only the first and last.
    pub snapshot_stride: usize,
    pub max_steps: usize,
}

impl RunOptions {
    pub fn new(t_max: f64, snapshot_stride: usize) -> Self {
        RunOptions { t_max, snapshot_stride, max_steps: usize::MAX }
    }
}

/// Everything an observer may look at after a step.
pub struct StepView<'a> {
    pub state: &'a FlowState,
    pub events: &'a [FlowEvent],
    pub stats: &'a StepStats,
}

pub fn run(initial: CurveFamily, r: f64, controls: &StepControls, opts: &RunOptions) -> Result<Trajectory> {
    run_with(initial, r, controls, opts, |_| ControlFlow::Continue(()))?.into_result()
}

/// Runs the flow and calls `observe` after every accepted step; breaking
/// stops the run. Step failures end the run and are stored in `failure`
/// together with a Blowup event.
pub fn run_with<F>(initial: CurveFamily, r: f64, controls: &StepControls, opts: &RunOptions, mut observe: F) -> Result<Trajectory>
where
    F: FnMut(&StepView<'_>) -> ControlFlow<()>,
{
    controls.validate()?;
    if !(opts.t_max > 0.0 && opts.t_max.is_finite()) {
        return Err(Error::InvalidParams(format!("t_max must be positive, got {}", opts.t_max)));
    }
    let mut state = FlowState::new(initial, r)?;
    let mut snapshots = vec![Snapshot { time: 0.0, step: 0, family: state.family.clone() }];
    let mut events = Vec::new();
    let mut series = Vec::new();
    let mut failure = None;
    let mut last_snap = 0;
    while !state.family.is_empty() && state.time < opts.t_max && state.step_count < opts.max_steps {
        let out = match step(&state, controls, opts.t_max - state.time) {
            Ok(o) => o,
            Err(e) => {
                let loc = state.curves().first().map(|c| c.centroid());
                events.push(FlowEvent { kind: EventKind::Blowup, time: state.time, location: loc });
                failure = Some(e);
                break;
            }
        };
        series.push(SeriesRow {
            time: state.time,
            area: state.family.area(),
            perimeter: state.family.perimeter(),
            min_kappa: out.stats.min_kappa,
            min_kappa_r: out.stats.min_kappa_r,
            max_kappa_r: out.stats.max_kappa_r,
            neck_width: out.stats.neck_width,
        });
        state = out.state;
        events.extend(out.events.iter().copied());
        let flow = observe(&StepView { state: &state, events: &out.events, stats: &out.stats });
        if opts.snapshot_stride > 0 && state.step_count % opts.snapshot_stride == 0 && !state.family.is_empty() {
            snapshots.push(Snapshot { time: state.time, step: state.step_count, family: state.family.clone() });
            last_snap = state.step_count;
        }
        if flow.is_break() {
            break;
        }
    }
    if failure.is_none() && !state.family.is_empty() && state.time >= opts.t_max {
        events.push(FlowEvent { kind: EventKind::MaxTime, time: state.time, location: None });
    }
    if last_snap != state.step_count && !state.family.is_empty() {
        snapshots.push(Snapshot { time: state.time, step: state.step_count, family: state.family.clone() });
    }
    Ok(Trajectory { snapshots, events, series, final_state: state, failure })
}

/// True iff every vertex of `inner` lies strictly inside `outer` and the
/// curves do not cross.
pub fn contains(outer: &PlanarCurve, inner: &PlanarCurve) -> bool {
    if !inner.vertices().iter().all(|&p| outer.signed_distance(p) < 0.0) {
        return false;
    }
    !polylines_cross(outer.vertices(), inner.vertices())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Smallest clearance `half_height - |y|` over all steps before the barrier closes.
    pub min_clearance: f64,
    /// First time the clearance is not positive.
    pub first_touch: Option<f64>,
    /// First time the clearance drops below `-tolerance`.
    pub first_violation: Option<f64>,
    pub tolerance: f64,
    pub pinch_time: Option<f64>,
    pub closing_time: f64,
    pub steps: usize,
}

impl ComparisonReport {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Evolves `inner` and tracks its clearance to the moving barrier until the
/// barrier closes, `t_max`, or the first pinch (when `stop_at_pinch`).
pub fn comparison_experiment(
    inner: CurveFamily,
    barrier: &BarrierSchedule,
    r: f64,
    t_max: f64,
    controls: &StepControls,
    stop_at_pinch: bool,
) -> Result<ComparisonReport> {
    comparison_experiment_with(inner, barrier, r, t_max, controls, stop_at_pinch, |_| {})
}

/// [`comparison_experiment`] that also hands every accepted step to `observe`.
pub fn comparison_experiment_with(
    inner: CurveFamily,
    barrier: &BarrierSchedule,
    r: f64,
    t_max: f64,
    controls: &StepControls,
    stop_at_pinch: bool,
    mut observe: impl FnMut(&StepView<'_>),
) -> Result<ComparisonReport> {
    barrier.validate()?;
    let closing = barrier.closing_time();
    let horizon = t_max.min(closing);
    let tolerance = 1e-3 * r;
    let clearance = |f: &CurveFamily, t: f64| f.curves().iter().filter_map(|c| barrier.clearance(c.vertices(), t)).fold(f64::INFINITY, f64::min);
    let c0 = clearance(&inner, 0.0);
    let mut rep = ComparisonReport {
        min_clearance: c0,
        first_touch: (c0 <= 0.0).then_some(0.0),
        first_violation: (c0 < -tolerance).then_some(0.0),
        tolerance,
        pinch_time: None,
        closing_time: closing,
        steps: 0,
    };
    let opts = RunOptions::new(horizon, 0);
    let traj = run_with(inner, r, controls, &opts, |v| {
        observe(v);
        rep.steps += 1;
        let t = v.state.time;
        if t < closing {
            let c = clearance(&v.state.family, t);
            rep.min_clearance = rep.min_clearance.min(c);
            if c <= 0.0 && rep.first_touch.is_none() {
                rep.first_touch = Some(t);
            }
            if c < -tolerance && rep.first_violation.is_none() {
                rep.first_violation = Some(t);
            }
        }
        if let Some(p) = v.events.iter().find(|e| e.kind == EventKind::Pinch) {
            rep.pinch_time.get_or_insert(p.time);
            if stop_at_pinch {
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    })?;
    traj.into_result()?;
    Ok(rep)
}

/// Where the normal line through `p` meets `curve`, as (edge, parameter),
/// choosing the crossing nearest to `p`.
fn normal_hit(curve: &PlanarCurve, p: Point2, nu: Point2) -> Option<(usize, f64)> {
    let v = curve.vertices();
    let n = v.len();
    let mut best: Option<(usize, f64, f64)> = None;
    for e in 0..n {
        let (a, b) = (v[e], v[(e + 1) % n]);
        let d = b - a;
        let den = nu.cross(d);
        if den.abs() < 1e-300 {
            continue;
        }
        let w = a - p;
        let s = w.cross(d) / den;
        let u = w.cross(nu) / den;
        if (-1e-12..=1.0 + 1e-12).contains(&u) && best.is_none_or(|b| s.abs() < b.2.abs()) {
            best = Some((e, u.clamp(0.0, 1.0), s));
        }
    }
    best.map(|(e, u, _)| (e, u))
}

fn interp(vals: &[f64], e: usize, u: f64) -> f64 {
    vals[e] * (1.0 - u) + vals[(e + 1) % vals.len()] * u
}

/// Largest `|d_t k - (d_ss k_r + k^2 k_r)|` over the interior snapshots of a
/// trajectory of single convex curves. `stride` is the snapshot offset of the
/// central time difference. Up to 64 vertices are sampled per snapshot.
pub fn curvature_evolution_residual(snapshots: &[Snapshot], r: f64, stride: usize) -> Result<f64> {
    let stride = stride.max(1);
    if snapshots.len() < 2 * stride + 1 || snapshots.len() < 3 {
        return Err(Error::InsufficientSnapshots { needed: (2 * stride + 1).max(3), got: snapshots.len() });
    }
    let mut worst: f64 = 0.0;
    for k in stride..snapshots.len() - stride {
        let (prev, cur, next) = (&snapshots[k - stride], &snapshots[k], &snapshots[k + stride]);
        let (Some(cp), Some(cc), Some(cn)) = (prev.family.curves().first(), cur.family.curves().first(), next.family.curves().first()) else {
            continue;
        };
        let kp = cp.curvature();
        let kn = cn.curvature();
        let samples = kappa_r(cc, r)?;
        let kc = cc.curvature();
        let nu = cc.normals();
        let v = cc.vertices();
        let n = v.len();
        let dt = next.time - prev.time;
        for i in (0..n).step_by((n / 64).max(1)) {
            let (Some((ep, up)), Some((en, un))) = (normal_hit(cp, v[i], nu[i]), normal_hit(cn, v[i], nu[i])) else {
                return Err(Error::NumericalInstability(format!("no normal correspondence at vertex {i}")));
            };
            let dkdt = (interp(&kn, en, un) - interp(&kp, ep, up)) / dt;
            let (im, ip) = ((i + n - 1) % n, (i + 1) % n);
            let (hm, hp) = (v[i].dist(v[im]), v[i].dist(v[ip]));
            let (fm, f0, fp) = (samples[im].kappa_r, samples[i].kappa_r, samples[ip].kappa_r);
            let dss = 2.0 * (hm * fp - (hm + hp) * f0 + hp * fm) / (hm * hp * (hm + hp));
            let res = dkdt - (dss + kc[i] * kc[i] * f0);
            worst = worst.max(res.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::{thin_neck_half_height, AnalyticSet};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn circle_at(rad: f64, n: usize, cx: f64) -> PlanarCurve {
        let v = (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                Point2::new(cx + rad * t.cos(), rad * t.sin())
            })
            .collect();
        PlanarCurve::new(v).unwrap()
    }

    fn circle(rad: f64, n: usize) -> CurveFamily {
        CurveFamily::single(circle_at(rad, n, 0.0))
    }

    fn mean_radius(c: &PlanarCurve) -> (f64, f64) {
        let o = c.centroid();
        let d: Vec<f64> = c.vertices().iter().map(|p| p.dist(o)).collect();
        let m = d.iter().sum::<f64>() / d.len() as f64;
        (m, d.iter().map(|x| (x - m).abs()).fold(0.0, f64::max))
    }

    fn controls(f: &CurveFamily, n: usize) -> StepControls {
        let mut c = StepControls::auto(f, n);
        c.extinction_area = 0.0;
        c
    }

    fn rk4(mut y: f64, t: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = t / n as f64;
        for _ in 0..n {
            let k1 = f(y);
            let k2 = f(y + 0.5 * h * k1);
            let k3 = f(y + 0.5 * h * k2);
            let k4 = f(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        y
    }

    #[test]
    fn cfl_formula() {
        let f = circle(1.0, 512);
        let st = FlowState::new(f.clone(), 0.2).unwrap();
        let c = controls(&f, 512);
        let h = f.curves()[0].min_edge();
        let dt = cfl_dt(&st, &c).unwrap();
        assert!((dt - 0.2 * (h * h).min(0.4 * h)).abs() < 1e-18);
        let half = StepControls { cfl: 0.1, ..c };
        assert!((cfl_dt(&st, &half).unwrap() - dt / 2.0).abs() < 1e-18);
        assert!(StepControls { cfl: 0.6, ..c }.validate().is_err());
    }

    #[test]
    fn large_circle_follows_curve_shortening() {
        let f = circle(1.0, 256);
        let c = controls(&f, 256);
        let traj = run(f, 0.2, &c, &RunOptions::new(0.3, 200)).unwrap();
        for s in &traj.snapshots {
            let (m, dev) = mean_radius(&s.family.curves()[0]);
            assert!(dev <= 1e-3 * m);
        }
        let (rad, _) = mean_radius(&traj.final_state.curves()[0]);
        assert!((traj.final_state.time - 0.3).abs() < 1e-12);
        assert!((rad - (1.0f64 - 0.6).sqrt()).abs() < 1e-3, "{rad}");
        assert_eq!(traj.events.last().unwrap().kind, EventKind::MaxTime);
    }

    #[test]
    fn small_circle_matches_scalar_ode() {
        let r = 0.2;
        let f = circle(0.15, 256);
        let c = controls(&f, 256);
        let traj = run(f, r, &c, &RunOptions::new(0.01, 0)).unwrap();
        let (rad, _) = mean_radius(&traj.final_state.curves()[0]);
        let oracle = rk4(0.15, 0.01, 1000, |x| -(1.0 / (2.0 * x) + 1.0 / (2.0 * r)));
        assert!((rad - oracle).abs() < 1e-3, "{rad} vs {oracle}");
    }

    #[test]
    fn wide_stadium_flat_part_stays_put() {
        let (l, len, m) = (0.3, 1.0, 400);
        let mut v = Vec::new();
        for k in 0..m {
            v.push(Point2::new(-len + 2.0 * len * k as f64 / m as f64, -l));
        }
        let h = 2.0 * len / m as f64;
        let arc = (PI * l / h).round() as usize;
        for k in 0..arc {
            let t = -PI / 2.0 + PI * k as f64 / arc as f64;
            v.push(Point2::new(len + l * t.cos(), l * t.sin()));
        }
        for k in 0..m {
            v.push(Point2::new(len - 2.0 * len * k as f64 / m as f64, l));
        }
        for k in 0..arc {
            let t = PI / 2.0 + PI * k as f64 / arc as f64;
            v.push(Point2::new(-len + l * t.cos(), l * t.sin()));
        }
        let f = CurveFamily::single(PlanarCurve::new(v).unwrap());
        let mut c = controls(&f, f.vertex_count());
        c.resample_every = 1000;
        let st = FlowState::new(f.clone(), 0.2).unwrap();
        let out = step(&st, &c, f64::INFINITY).unwrap();
        let before = f.curves()[0].vertices();
        let after = out.state.curves()[0].vertices();
        let mut checked = 0;
        for (p, q) in before.iter().zip(after) {
            if p.x.abs() < len - 3.0 * h {
                assert!(p.dist(*q) <= 1e-12);
                checked += 1;
            }
        }
        assert!(checked > 500);
    }

    #[test]
    fn surgery_on_thin_neck() {
        let r = 0.01;
        let set = AnalyticSet::DumbbellThin { r };
        let curve = set.discretize_spacing(2e-3, None).unwrap();
        let width = 2.0 * thin_neck_half_height(r);
        let threshold = width / 0.9;
        let fam = CurveFamily::single(curve);
        let (cut, ev) = detect_pinch_and_cut(&fam, threshold, 0.5).unwrap();
        assert_eq!(cut.len(), 2);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, EventKind::Pinch);
        assert_eq!(ev[0].time, 0.5);
        let loc = ev[0].location.unwrap();
        assert!(loc.y.abs() < width && loc.x.abs() < 0.5);
        let neck_len = set.dumbbell().unwrap().neck_end() * 2.0;
        assert!(fam.area() - cut.area() <= threshold * neck_len);
        assert!(fam.area() - cut.area() >= 0.0);
        // the lobes are untouched
        for c in cut.curves() {
            assert!(c.inradius() > 0.9 * r / 4.0);
        }
    }

    #[test]
    fn surgery_is_identity_without_contacts() {
        let f = circle(1.0, 256);
        let (g, ev) = detect_pinch_and_cut(&f, 0.01, 0.0).unwrap();
        assert_eq!(g, f);
        assert!(ev.is_empty());
        let st = AnalyticSet::Stadium { half_width: 0.05, half_length: 1.0 }.discretize(2000, None).unwrap();
        let f = CurveFamily::single(st);
        let (g, ev) = detect_pinch_and_cut(&f, 0.05, 0.0).unwrap();
        assert_eq!(g, f);
        assert!(ev.is_empty());
    }

    #[test]
    fn sliver_goes_extinct() {
        let st = AnalyticSet::Stadium { half_width: 0.004, half_length: 1.0 }.discretize(2000, None).unwrap();
        let (g, ev) = detect_pinch_and_cut(&CurveFamily::single(st), 0.01, 0.0).unwrap();
        assert!(g.is_empty());
        assert_eq!(ev[0].kind, EventKind::Extinction);
    }

    #[test]
    fn containment_predicate() {
        let a = circle_at(1.0, 256, 0.0);
        assert!(contains(&a, &circle_at(0.5, 256, 0.0)));
        assert!(!contains(&a, &circle_at(0.5, 256, 0.8)));
        assert!(!contains(&circle_at(0.5, 256, 0.0), &a));
    }

    #[test]
    fn nested_circles_stay_nested() {
        let r = 0.2;
        let outer = circle(1.0, 256);
        let inner = circle(0.5, 256);
        let co = controls(&outer, 256);
        let ci = controls(&inner, 256);
        let mut so = FlowState::new(outer, r).unwrap();
        let mut si = FlowState::new(inner, r).unwrap();
        while si.time < 0.05 {
            let dt = cfl_dt(&so, &co).unwrap().min(cfl_dt(&si, &ci).unwrap());
            let a = step(&so, &co, dt).unwrap();
            let b = step(&si, &ci, dt).unwrap();
            assert_eq!(a.dt, b.dt);
            so = a.state;
            si = b.state;
            assert!(contains(&so.curves()[0], &si.curves()[0]));
        }
    }

    #[test]
    fn curvature_evolution_on_circles() {
        let r = 0.2;
        for (r0, tol) in [(1.0, 1e-2), (0.52, 5e-2)] {
            let f = circle(r0, 256);
            let c = controls(&f, 256);
            let traj = run(f, r, &c, &RunOptions::new(0.02 * r0 * r0, 20)).unwrap();
            assert!(traj.snapshots.len() >= 3);
            let res = curvature_evolution_residual(&traj.snapshots, r, 1).unwrap();
            assert!(res <= tol, "R0={r0}: {res}");
        }
        let one = vec![Snapshot { time: 0.0, step: 0, family: circle(1.0, 64) }];
        assert!(matches!(curvature_evolution_residual(&one, r, 1), Err(Error::InsufficientSnapshots { .. })));
    }

    #[test]
    fn circle_goes_extinct_without_pinch() {
        let r = 0.2;
        let f = circle(1.0, 128);
        let mut c = controls(&f, 128);
        c.extinction_area = PI * 0.01 * 0.01;
        let traj = run(f, r, &c, &RunOptions::new(1.0, 0)).unwrap();
        assert!(traj.first_event(EventKind::Pinch).is_none());
        let ext = traj.first_event(EventKind::Extinction).unwrap().time;
        // phase one: R^2 = 1 - 2t down to R = r; phase two: dR/dt = -(1/(2R) + 1/(2r))
        let t1 = (1.0 - r * r) / 2.0;
        let mut rad = r;
        let mut t2 = 0.0;
        let h = 1e-7;
        while rad > 0.01 {
            let g = |x: f64| -(1.0 / (2.0 * x) + 1.0 / (2.0 * r));
            let k1 = g(rad);
            let k2 = g(rad + 0.5 * h * k1);
            let k3 = g(rad + 0.5 * h * k2);
            let k4 = g(rad + h * k3);
            rad += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t2 += h;
        }
        assert!((ext - (t1 + t2)).abs() < 2e-3, "{ext} vs {}", t1 + t2);
    }

    #[test]
    fn allocation_is_proportional() {
        let cs = [circle_at(1.0, 64, 0.0), circle_at(0.5, 64, 3.0)];
        let a = allocate_vertices(&cs, 300, 0.0);
        assert_eq!(a, vec![200, 100]);
        let tiny = [circle_at(1.0, 64, 0.0), circle_at(0.001, 64, 3.0)];
        assert_eq!(allocate_vertices(&tiny, 300, 0.0)[1], MIN_VERTICES);
        let floored = allocate_vertices(&cs[..1], 1000, 0.1);
        assert_eq!(floored, vec![63]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn area_decreases_on_convex_sets(a in 0.3f64..1.0, b in 0.3f64..1.0) {
            let v = (0..200).map(|i| {
                let t = 2.0 * PI * i as f64 / 200.0;
                Point2::new(a * t.cos(), b * t.sin())
            }).collect();
            let f = CurveFamily::single(PlanarCurve::new(v).unwrap());
            let c = controls(&f, 200);
            let mut st = FlowState::new(f, 0.2).unwrap();
            for _ in 0..30 {
                let out = step(&st, &c, f64::INFINITY).unwrap();
                prop_assert!(out.stats.min_kappa_r > 0.0);
                prop_assert!(out.state.family.area() < st.family.area());
                prop_assert!(out.halvings <= MAX_HALVINGS);
                st = out.state;
            }
        }
    }
}
