//! Flat-file formats: curve and table CSVs, SVG snapshots, staged output directories.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::flow::{FlowEvent, SeriesRow};
use crate::geometry::{CurveFamily, PlanarCurve, Point2};
use crate::rcurv::{RCurvatureSample, SigmaSample};

/// Round-trip exact, locale independent number formatting.
pub fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn curve_csv(curve: &PlanarCurve) -> String {
    let mut s = String::from("x,y\n");
    for p in curve.vertices() {
        let _ = writeln!(s, "{},{}", fmt_f(p.x), fmt_f(p.y));
    }
    s
}

pub fn family_csv(family: &CurveFamily) -> String {
    let mut s = String::from("curve,x,y\n");
    for (k, c) in family.curves().iter().enumerate() {
        for p in c.vertices() {
            let _ = writeln!(s, "{k},{},{}", fmt_f(p.x), fmt_f(p.y));
        }
    }
    s
}

fn parse_num(field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Schema(format!("line {line}: not a number: {field:?}")))
}

/// Reads `x,y` (one curve) or `curve,x,y` (a family) CSV text.
pub fn parse_curve_csv(text: &str) -> Result<CurveFamily> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Schema("empty curve file".into()))?;
    let cols: Vec<&str> = header.split(',').map(|c| c.trim()).collect();
    let tagged = match cols.as_slice() {
        ["x", "y"] => false,
        ["curve", "x", "y"] => true,
        _ => return Err(Error::Schema(format!("expected header x,y or curve,x,y, got {header:?}"))),
    };
    let mut groups: Vec<(usize, Vec<Point2>)> = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(Error::Schema(format!("line {}: expected {} fields", i + 1, cols.len())));
        }
        let (id, x, y) = if tagged {
            let id = f[0].trim().parse::<usize>().map_err(|_| Error::Schema(format!("line {}: bad curve id", i + 1)))?;
            (id, parse_num(f[1], i + 1)?, parse_num(f[2], i + 1)?)
        } else {
            (0, parse_num(f[0], i + 1)?, parse_num(f[1], i + 1)?)
        };
        match groups.last_mut() {
            Some((g, pts)) if *g == id => pts.push(Point2::new(x, y)),
            _ => {
                if groups.iter().any(|(g, _)| *g == id) {
                    return Err(Error::Schema(format!("line {}: rows of curve {id} are not contiguous", i + 1)));
                }
                groups.push((id, vec![Point2::new(x, y)]));
            }
        }
    }
    let curves = groups.into_iter().map(|(_, pts)| PlanarCurve::new(pts)).collect::<Result<Vec<_>>>()?;
    if curves.is_empty() {
        return Err(Error::Schema("curve file has no vertices".into()));
    }
    CurveFamily::new(curves)
}

pub fn read_curve_csv(path: &Path) -> Result<CurveFamily> {
    parse_curve_csv(&fs::read_to_string(path)?)
}

pub fn events_csv(events: &[FlowEvent]) -> String {
    let mut s = String::from("time,kind,x,y\n");
    for e in events {
        let (x, y) = e.location.map_or((String::new(), String::new()), |p| (fmt_f(p.x), fmt_f(p.y)));
        let _ = writeln!(s, "{},{},{x},{y}", fmt_f(e.time), e.kind.as_str());
    }
    s
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut s = String::from("time,area,perimeter,min_kappa,min_kappa_r,max_kappa_r,neck_width\n");
    for r in rows {
        let v = [r.time, r.area, r.perimeter, r.min_kappa, r.min_kappa_r, r.max_kappa_r, r.neck_width];
        let _ = writeln!(s, "{}", v.iter().map(|&x| fmt_f(x)).collect::<Vec<_>>().join(","));
    }
    s
}

/// Axis-aligned box `(min, max)`.
pub fn bounding_box(family: &CurveFamily) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in family.curves().iter().flat_map(|c| c.vertices()) {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

/// Closed polyline paths in a fixed view box; y points up.
pub fn svg(family: &CurveFamily, view: (Point2, Point2)) -> String {
    let (lo, hi) = view;
    let pad = 0.05 * (hi.x - lo.x).max(hi.y - lo.y).max(1e-300);
    let (x0, y0) = (lo.x - pad, lo.y - pad);
    let (w, h) = (hi.x - lo.x + 2.0 * pad, hi.y - lo.y + 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0} {} {w} {h}" width="800" height="{}">"#,
        -(y0 + h),
        (800.0 * h / w).round().max(1.0)
    );
    for c in family.curves() {
        let mut d = String::new();
        for (i, p) in c.vertices().iter().enumerate() {
            let _ = write!(d, "{}{} {} ", if i == 0 { "M" } else { "L" }, p.x, -p.y);
        }
        d.push('Z');
        let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="black" stroke-width="{}"/>"#, w / 800.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Output directory whose files appear only on `commit`.
pub struct StagedDir {
    target: PathBuf,
    staging: PathBuf,
}

impl StagedDir {
    pub fn new(target: &Path) -> Result<Self> {
        let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(parent)?;
        let name = target.file_name().map_or("out".into(), |n| n.to_string_lossy().into_owned());
        let staging = parent.join(format!(".{name}.rflow-tmp-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        Ok(StagedDir { target: target.to_path_buf(), staging })
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        let mut f = fs::File::create(self.staging.join(name))?;
        f.write_all(contents.as_bytes())?;
        Ok(())
    }

    /// Moves the staged files into the target directory.
    pub fn commit(self) -> Result<PathBuf> {
        let empty = fs::read_dir(&self.target).map(|mut d| d.next().is_none()).unwrap_or(false);
        if empty {
            fs::remove_dir(&self.target)?;
        }
        if !self.target.exists() {
            fs::rename(&self.staging, &self.target)?;
        } else {
            for entry in fs::read_dir(&self.staging)? {
                let entry = entry?;
                fs::rename(entry.path(), self.target.join(entry.file_name()))?;
            }
            fs::remove_dir(&self.staging)?;
        }
        Ok(self.target.clone())
    }

    /// Drops the staged files.
    pub fn abort(self) {
        let _ = fs::remove_dir_all(&self.staging);
    }
}

/// Per-vertex r-curvature table; `kappa_f` adds a trailing column.
pub fn kappa_csv(curve: &PlanarCurve, samples: &[RCurvatureSample], kappa_f: Option<&[f64]>) -> String {
    let mut s = String::from("index,x,y,kappa,ext_fits,int_fits,kappa_r_plus,kappa_r_minus,kappa_r");
    s.push_str(if kappa_f.is_some() { ",kappa_f\n" } else { "\n" });
    for (k, q) in samples.iter().enumerate() {
        let p = curve.vertices()[q.vertex_index];
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            q.vertex_index,
            fmt_f(p.x),
            fmt_f(p.y),
            fmt_f(q.kappa),
            u8::from(q.ext_ball_fits),
            u8::from(q.int_ball_fits),
            fmt_f(q.kappa_r_plus),
            fmt_f(q.kappa_r_minus),
            fmt_f(q.kappa_r)
        );
        if let Some(f) = kappa_f {
            let _ = write!(s, ",{}", fmt_f(f[k]));
        }
        s.push('\n');
    }
    s
}

pub fn sigma_csv(profile: &[SigmaSample]) -> String {
    let mut s = String::from("sigma,ext_fits,int_fits,kappa_plus,kappa_minus\n");
    for q in profile {
        let _ = writeln!(s, "{},{},{},{},{}", fmt_f(q.sigma), u8::from(q.ext_fits), u8::from(q.int_fits), fmt_f(q.kappa_plus), fmt_f(q.kappa_minus));
    }
    s
}

/// Two-column table with the given header.
pub fn xy_csv(header: &str, rows: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut s = format!("{header}\n");
    for (x, y) in rows {
        let _ = writeln!(s, "{},{}", fmt_f(x), fmt_f(y));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::EventKind;

    fn square(c: f64) -> PlanarCurve {
        let corners = [Point2::new(c, 0.0), Point2::new(c + 1.0, 0.0), Point2::new(c + 1.0, 1.0), Point2::new(c, 1.0)];
        let pts = (0..16).map(|k| corners[k / 4].lerp(corners[(k / 4 + 1) % 4], (k % 4) as f64 / 4.0 + 0.1)).collect();
        PlanarCurve::new(pts).unwrap()
    }

    #[test]
    fn curve_csv_round_trips() {
        let c = square(0.1);
        let back = parse_curve_csv(&curve_csv(&c)).unwrap();
        assert_eq!(back.curves()[0], c);
        let fam = CurveFamily::new(vec![square(0.0), square(3.0)]).unwrap();
        assert_eq!(parse_curve_csv(&family_csv(&fam)).unwrap(), fam);
    }

    #[test]
    fn malformed_curve_files() {
        assert!(matches!(parse_curve_csv(""), Err(Error::Schema(_))));
        assert!(matches!(parse_curve_csv("a,b\n1,2\n"), Err(Error::Schema(_))));
        assert!(matches!(parse_curve_csv("x,y\n1,zz\n"), Err(Error::Schema(_))));
        assert!(parse_curve_csv("x,y\n0,0\n1,1\n1,0\n0,1\n").is_err());
        assert!(parse_curve_csv("curve,x,y\n0,0,0\n1,1,1\n0,1,0\n").is_err());
    }

    #[test]
    fn event_rows() {
        let ev = [FlowEvent { kind: EventKind::Pinch, time: 0.5, location: Some(Point2::new(1.0, -2.0)) }, FlowEvent { kind: EventKind::MaxTime, time: 1.0, location: None }];
        let s = events_csv(&ev);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "time,kind,x,y");
        assert!(lines[1].contains(",pinch,"));
        assert!(lines[2].ends_with(",max_time,,"));
    }

    #[test]
    fn staged_dir_commits_atomically() {
        let tmp = tempfile::tempdir().unwrap();
        let target = tmp.path().join("out");
        let st = StagedDir::new(&target).unwrap();
        st.write("a.csv", "x\n").unwrap();
        assert!(!target.exists());
        st.commit().unwrap();
        assert_eq!(fs::read_to_string(target.join("a.csv")).unwrap(), "x\n");
        let st = StagedDir::new(&target).unwrap();
        st.write("b.csv", "y\n").unwrap();
        st.abort();
        assert!(!target.join("b.csv").exists());
        assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 1);
    }

    #[test]
    fn svg_has_one_path_per_curve() {
        let fam = CurveFamily::new(vec![square(0.0), square(3.0)]).unwrap();
        let s = svg(&fam, bounding_box(&fam));
        assert_eq!(s.matches("<path").count(), 2);
        assert!(s.starts_with("<svg"));
    }
}
