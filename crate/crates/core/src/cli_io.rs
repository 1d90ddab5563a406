//! Run configuration, geometry selection, file exports and the command
//! line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::density_field::{element_densities, DensityField, LocalVolumeSpec};
use crate::error::{Error, Result};
use crate::fairing::{contours_svg, fair_boundaries, ContourCurve, CurveRecord, FairingConfig};
use crate::mma::MmaConfig;
use crate::opt_driver::{
    run_prepared, Continuation, OptProblem, OptResult, OptSettings, Outcome, Prepared, ProblemKind, Termination,
};
use crate::rm_analysis::{AnalysisModel, Edge, GaussRule, IsoCurve, Load, MaterialParams, Supports};
use crate::scalar::{lit, to_f64, Scalar};
use crate::sensitivities::{
    compliance_gradient, evaluate_compliance, evaluate_local_volume, evaluate_volume, fd_gradient_check,
    local_volume_gradient, volume_gradient, FdReport,
};
use crate::shell_geometry::{build_multilevel, presets, ShellModel};
use crate::splines::{KnotVector, NurbsSurface};

fn d_length() -> f64 {
    100.0
}
fn d_height() -> f64 {
    20.0
}
fn d_radius() -> f64 {
    100.0
}
fn d_angle() -> f64 {
    90.0
}
fn d_degrees() -> [usize; 2] {
    [2, 2]
}
fn d_design() -> [usize; 2] {
    [15, 15]
}
fn d_analysis() -> [usize; 2] {
    [50, 50]
}
fn d_thickness() -> f64 {
    5.0
}
fn d_kappa() -> f64 {
    0.5
}
fn d_output() -> PathBuf {
    PathBuf::from("out")
}
fn d_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    Plate,
    Hypar,
    Cylinder,
    Twisted,
}

/// Mid-surface: a named preset or a control-net file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default)]
    pub preset: Option<PresetName>,
    /// Path to a surface JSON file; relative paths resolve against the
    /// configuration file.
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default = "d_length")]
    pub length: f64,
    #[serde(default = "d_length")]
    pub width: f64,
    /// Hypar edge-midpoint height, twisted-shell rise.
    #[serde(default = "d_height")]
    pub height: f64,
    #[serde(default = "d_radius")]
    pub radius: f64,
    /// Cylinder opening angle in degrees.
    #[serde(default = "d_angle")]
    pub angle: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            preset: None,
            file: None,
            length: d_length(),
            width: d_length(),
            height: d_height(),
            radius: d_radius(),
            angle: d_angle(),
        }
    }
}

/// Control-net file for custom mid-surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceFile {
    pub degrees: [usize; 2],
    pub knots_s: Vec<f64>,
    pub knots_t: Vec<f64>,
    /// Control points row-major with `t` fastest.
    pub control_points: Vec<[f64; 3]>,
    /// Defaults to all ones.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl SurfaceFile {
    pub fn to_surface<T: Scalar>(&self) -> Result<NurbsSurface<T>> {
        let c = |x: &[f64]| x.iter().map(|&a| lit::<T>(a)).collect::<Vec<T>>();
        let ks = KnotVector::clamped(c(&self.knots_s), self.degrees[0])?;
        let kt = KnotVector::clamped(c(&self.knots_t), self.degrees[1])?;
        let net = self.control_points.iter().map(|p| p.map(lit::<T>)).collect();
        let w = match &self.weights {
            Some(w) => c(w),
            None => vec![T::one(); self.control_points.len()],
        };
        NurbsSurface::new(ks, kt, net, w)
    }

    pub fn from_surface<T: Scalar>(s: &NurbsSurface<T>) -> Self {
        let (p, q) = s.degrees();
        let v = |x: &[T]| x.iter().map(|&a| to_f64(a)).collect::<Vec<f64>>();
        Self {
            degrees: [p, q],
            knots_s: v(s.knots_s().knots()),
            knots_t: v(s.knots_t().knots()),
            control_points: s.control_net().iter().map(|p| p.map(to_f64)).collect(),
            weights: Some(v(s.weights())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(default = "d_e0")]
    pub e0: f64,
    #[serde(default = "d_nu")]
    pub nu: f64,
}
fn d_e0() -> f64 {
    2100.0
}
fn d_nu() -> f64 {
    0.3
}
impl Default for MaterialConfig {
    fn default() -> Self {
        Self { e0: d_e0(), nu: d_nu() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeName {
    S0,
    S1,
    T0,
    T1,
}

impl From<EdgeName> for Edge {
    fn from(e: EdgeName) -> Self {
        match e {
            EdgeName::S0 => Edge::S0,
            EdgeName::S1 => Edge::S1,
            EdgeName::T0 => Edge::T0,
            EdgeName::T1 => Edge::T1,
        }
    }
}

/// Clamped edges and clamped points (all five DOFs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportConfig {
    #[serde(default)]
    pub edges: Vec<EdgeName>,
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
}

impl Default for SupportConfig {
    fn default() -> Self {
        Self { edges: vec![EdgeName::S0], points: Vec::new() }
    }
}

/// Loads. Line loads run along `s = const` or `t = const` (give exactly
/// one) and are per unit length; surface loads per unit area; body loads
/// per unit volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum LoadConfig {
    Point {
        at: [f64; 2],
        force: [f64; 3],
    },
    Line {
        #[serde(default)]
        s: Option<f64>,
        #[serde(default)]
        t: Option<f64>,
        force: [f64; 3],
    },
    Surface {
        force: [f64; 3],
    },
    Body {
        force: [f64; 3],
    },
}

fn d_loads() -> Vec<LoadConfig> {
    vec![LoadConfig::Point { at: [1.0, 0.5], force: [0.0, 0.0, -100.0] }]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Volume bounded by `volume_fraction * V_s`.
    Global {
        #[serde(default = "d_vf")]
        volume_fraction: f64,
    },
    /// Aggregated local volume bounded by `alpha`.
    Local {
        alpha: f64,
        /// Radius in mean element lengths.
        radius: f64,
        #[serde(default = "d_gamma")]
        gamma: f64,
    },
}
fn d_vf() -> f64 {
    0.3
}
fn d_gamma() -> f64 {
    16.0
}
impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig::Global { volume_fraction: d_vf() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MmaSection {
    #[serde(rename = "move")]
    pub move_limit: f64,
    pub asyinit: f64,
    pub asyincr: f64,
    pub asydecr: f64,
    pub min_asymptote_gap: f64,
}
impl Default for MmaSection {
    fn default() -> Self {
        let d = MmaConfig::<f64>::default();
        Self {
            move_limit: d.move_limit,
            asyinit: d.asyinit,
            asyincr: d.asyincr,
            asydecr: d.asydecr,
            min_asymptote_gap: d.min_asymptote_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationSection {
    pub start: f64,
    pub max: f64,
    pub interval: usize,
    pub reset_asymptotes: bool,
}
impl Default for ContinuationSection {
    fn default() -> Self {
        let d = Continuation::<f64>::default();
        Self { start: d.start, max: d.max, interval: d.interval, reset_asymptotes: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerminationSection {
    pub max_iterations: usize,
    pub change_tolerance: f64,
    pub patience: usize,
    pub require_final_tau: bool,
}
impl Default for TerminationSection {
    fn default() -> Self {
        let d = Termination::<f64>::default();
        Self {
            max_iterations: d.max_iterations,
            change_tolerance: d.change_tolerance,
            patience: d.patience,
            require_final_tau: d.require_final_tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FairingSection {
    pub enabled: bool,
    pub resolution: [usize; 2],
    pub lambda: f64,
    pub control_points: Option<usize>,
    pub min_points: usize,
    pub physical_samples: usize,
}
impl Default for FairingSection {
    fn default() -> Self {
        let d = FairingConfig::<f64>::default();
        Self {
            enabled: true,
            resolution: [d.resolution.0, d.resolution.1],
            lambda: d.lambda,
            control_points: d.control_points,
            min_points: d.min_points,
            physical_samples: d.physical_samples,
        }
    }
}

impl FairingSection {
    pub fn to_config<T: Scalar>(&self) -> Result<FairingConfig<T>> {
        FairingConfig {
            resolution: (self.resolution[0], self.resolution[1]),
            iso: lit(0.5),
            lambda: lit(self.lambda),
            control_points: self.control_points,
            min_points: self.min_points,
            physical_samples: self.physical_samples,
        }
        .validated()
    }
}

/// Quadrature override; absent counts use `(p + 1) x (q + 1) x 2`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaussSection {
    pub s: Option<usize>,
    pub t: Option<usize>,
    pub zeta: Option<usize>,
}

/// Everything a run needs. Absent keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default = "d_degrees")]
    pub degrees: [usize; 2],
    #[serde(default = "d_design")]
    pub design_spans: [usize; 2],
    #[serde(default = "d_analysis")]
    pub analysis_spans: [usize; 2],
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default = "d_thickness")]
    pub thickness: f64,
    #[serde(default)]
    pub gauss: GaussSection,
    #[serde(default)]
    pub supports: SupportConfig,
    #[serde(default = "d_loads")]
    pub loads: Vec<LoadConfig>,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub mma: MmaSection,
    #[serde(default)]
    pub continuation: ContinuationSection,
    #[serde(default)]
    pub termination: TerminationSection,
    #[serde(default = "d_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub fairing: FairingSection,
    #[serde(default = "d_output")]
    pub output: PathBuf,
    /// Reserved; the pipeline is deterministic.
    #[serde(default)]
    pub seed: u64,
    /// Threads for the parallel kernels; 0 lets the runtime choose.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "d_true")]
    pub write_vtk: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

fn check(ok: bool, key: &str, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, msg))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, resolves relative paths against the file's directory and
    /// validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(f) = cfg.geometry.file.as_mut() {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        if let Some(f) = &cfg.geometry.file {
            check(f.exists(), "geometry.file", &format!("{} does not exist", f.display()))?;
        }
        Ok(cfg)
    }

    /// Range checks that do not need the geometry.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        check(
            g.preset.is_some() as u8 + g.file.is_some() as u8 <= 1,
            "geometry",
            "give either `preset` or `file`, not both",
        )?;
        for (k, v) in [("geometry.length", g.length), ("geometry.width", g.width), ("geometry.radius", g.radius)] {
            check(v > 0.0 && v.is_finite(), k, "must be positive")?;
        }
        check(g.height.is_finite() && g.height >= 0.0, "geometry.height", "must be non-negative")?;
        check(g.angle > 0.0 && g.angle < 180.0, "geometry.angle", "must lie in (0, 180) degrees")?;
        check(self.degrees.iter().all(|&d| (1..=6).contains(&d)), "degrees", "must lie in 1..=6")?;
        check(self.design_spans.iter().all(|&n| n >= 1), "design_spans", "must be at least 1")?;
        check(
            self.analysis_spans[0] >= self.design_spans[0] && self.analysis_spans[1] >= self.design_spans[1],
            "analysis_spans",
            "must be at least design_spans",
        )?;
        MaterialParams::new(self.material.e0, self.material.nu)?;
        check(self.thickness > 0.0 && self.thickness.is_finite(), "thickness", "must be positive")?;
        for l in &self.loads {
            let force = match l {
                LoadConfig::Point { force, .. } | LoadConfig::Surface { force } | LoadConfig::Body { force } => force,
                LoadConfig::Line { s, t, force } => {
                    check(s.is_some() != t.is_some(), "loads.line", "give exactly one of `s` or `t`")?;
                    force
                }
            };
            check(force.iter().all(|v| v.is_finite()), "loads.force", "must be finite")?;
        }
        match self.problem {
            ProblemConfig::Global { volume_fraction } => check(
                volume_fraction > 0.0 && volume_fraction < 1.0,
                "problem.volume_fraction",
                "must lie in (0, 1)",
            )?,
            ProblemConfig::Local { alpha, radius, gamma } => {
                LocalVolumeSpec { radius_multiplier: radius, alpha, gamma }.validated()?;
            }
        }
        self.mma_config::<f64>().validated()?;
        check(self.continuation.start > 0.0, "continuation.start", "must be positive")?;
        check(self.continuation.max >= self.continuation.start, "continuation.max", "must be at least start")?;
        check(self.continuation.interval >= 1, "continuation.interval", "must be at least 1")?;
        check(self.termination.max_iterations >= 1, "termination.max_iterations", "must be at least 1")?;
        check(self.termination.change_tolerance > 0.0, "termination.change_tolerance", "must be positive")?;
        check(self.termination.patience >= 1, "termination.patience", "must be at least 1")?;
        check(self.kappa >= 0.25 && self.kappa <= 0.75, "kappa", "must lie in [0.25, 0.75]")?;
        self.fairing.to_config::<f64>()?;
        Ok(())
    }

    fn mma_config<T: Scalar>(&self) -> MmaConfig<T> {
        MmaConfig {
            move_limit: lit(self.mma.move_limit),
            asyinit: lit(self.mma.asyinit),
            asyincr: lit(self.mma.asyincr),
            asydecr: lit(self.mma.asydecr),
            min_asymptote_gap: lit(self.mma.min_asymptote_gap),
            ..MmaConfig::default()
        }
    }

    /// The CAD mid-surface.
    pub fn surface<T: Scalar>(&self) -> Result<NurbsSurface<T>> {
        let g = &self.geometry;
        let (p, q) = (self.degrees[0], self.degrees[1]);
        if let Some(path) = &g.file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let file: SurfaceFile =
                serde_json::from_str(&text).map_err(|e| Error::config("geometry.file", e.to_string()))?;
            return file.to_surface();
        }
        match g.preset.unwrap_or(PresetName::Plate) {
            PresetName::Plate => presets::plate(lit(g.length), lit(g.width), p, q),
            PresetName::Hypar => presets::hypar(lit(g.length), lit(g.width), lit(g.height), p, q),
            PresetName::Cylinder => presets::cylinder(lit(g.radius), lit(g.length), lit(g.angle), q),
            PresetName::Twisted => presets::twisted(lit(g.length), lit(g.height), p, q),
        }
    }

    pub fn shell<T: Scalar>(&self) -> Result<ShellModel<T>> {
        ShellModel::new(self.surface()?, lit(self.thickness))
    }

    pub fn material<T: Scalar>(&self) -> Result<MaterialParams<T>> {
        MaterialParams::new(lit(self.material.e0), lit(self.material.nu))
    }

    pub fn supports<T: Scalar>(&self) -> Supports<T> {
        Supports {
            edges: self.supports.edges.iter().map(|&e| e.into()).collect(),
            points: self.supports.points.iter().map(|p| (lit(p[0]), lit(p[1]))).collect(),
        }
    }

    pub fn loads<T: Scalar>(&self) -> Vec<Load<T>> {
        let v = |f: &[f64; 3]| f.map(lit::<T>);
        self.loads
            .iter()
            .map(|l| match l {
                LoadConfig::Point { at, force } => Load::Point { at: (lit(at[0]), lit(at[1])), force: v(force) },
                LoadConfig::Line { s, t, force } => Load::Line {
                    curve: match (s, t) {
                        (Some(s), _) => IsoCurve::S(lit(*s)),
                        (_, Some(t)) => IsoCurve::T(lit(*t)),
                        _ => unreachable!("validated"),
                    },
                    force: v(force),
                },
                LoadConfig::Surface { force } => Load::Surface { force: v(force) },
                LoadConfig::Body { force } => Load::Body { force: v(force) },
            })
            .collect()
    }

    pub fn rule<T: Scalar>(&self) -> Result<GaussRule<T>> {
        let (p, q) = match (&self.geometry.file, self.geometry.preset) {
            (None, Some(PresetName::Cylinder)) => (2, self.degrees[1]),
            (None, _) => (self.degrees[0], self.degrees[1]),
            (Some(_), _) => {
                let s = self.surface::<T>()?;
                s.degrees()
            }
        };
        let g = &self.gauss;
        GaussRule::new(g.s.unwrap_or(p + 1), g.t.unwrap_or(q + 1), g.zeta.unwrap_or(2))
    }

    pub fn settings<T: Scalar>(&self) -> OptSettings<T> {
        let kind = match self.problem {
            ProblemConfig::Global { volume_fraction } => ProblemKind::GlobalVolume { volume_fraction: lit(volume_fraction) },
            ProblemConfig::Local { alpha, radius, gamma } => ProblemKind::LocalVolume(LocalVolumeSpec {
                radius_multiplier: lit(radius),
                alpha: lit(alpha),
                gamma: lit(gamma),
            }),
        };
        OptSettings {
            kind,
            mma: self.mma_config(),
            continuation: Continuation {
                start: lit(self.continuation.start),
                max: lit(self.continuation.max),
                interval: self.continuation.interval,
            },
            termination: Termination {
                max_iterations: self.termination.max_iterations,
                change_tolerance: lit(self.termination.change_tolerance),
                patience: self.termination.patience,
                require_final_tau: self.termination.require_final_tau,
            },
            kappa: lit(self.kappa),
            reset_asymptotes_on_tau_change: self.continuation.reset_asymptotes,
        }
    }

    pub fn problem<T: Scalar>(&self) -> Result<OptProblem<T>> {
        let shell = self.shell()?;
        let ml = build_multilevel(
            &shell,
            (self.design_spans[0], self.design_spans[1]),
            (self.analysis_spans[0], self.analysis_spans[1]),
        )?;
        Ok(OptProblem {
            multilevel: ml,
            material: self.material()?,
            rule: self.rule()?,
            supports: self.supports(),
            loads: self.loads(),
            settings: self.settings(),
        })
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Legacy-VTK ASCII unstructured grid of the mid-surface: one quad per
/// element with a `density` cell array, followed by optional polylines
/// (cell `kind` 1, density -1).
pub fn vtk_mesh<T: Scalar>(
    model: &AnalysisModel<T>,
    densities: &[T],
    polylines: &[Vec<[T; 3]>],
    title: &str,
) -> Result<String> {
    let surf = &model.shell.mid_surface;
    let breaks = |kv: &KnotVector<T>| {
        let spans = kv.spans();
        let mut b: Vec<T> = spans.iter().map(|s| s.1).collect();
        b.push(spans.last().map(|s| s.2).unwrap_or_else(T::zero));
        b
    };
    let (sb, tb) = (breaks(surf.knots_s()), breaks(surf.knots_t()));
    let mut points = Vec::with_capacity(sb.len() * tb.len());
    for &s in &sb {
        for &t in &tb {
            points.push(surf.point(s, t)?);
        }
    }
    let pid = |i: usize, j: usize| i * tb.len() + j;
    let find = |b: &[T], v: T| b.iter().position(|&x| x == v).expect("element corner on a knot line");
    let mut cells: Vec<Vec<usize>> = model
        .elements
        .iter()
        .map(|e| {
            let (i0, j0) = (find(&sb, e.span.s.0), find(&tb, e.span.t.0));
            let (i1, j1) = (find(&sb, e.span.s.1), find(&tb, e.span.t.1));
            vec![pid(i0, j0), pid(i1, j0), pid(i1, j1), pid(i0, j1)]
        })
        .collect();
    let n_quads = cells.len();
    for line in polylines {
        let start = points.len();
        points.extend(line.iter().copied());
        cells.push((start..points.len()).collect());
    }

    let mut out = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(250).collect();
    let _ = writeln!(out, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", points.len());
    for p in &points {
        let _ = writeln!(out, "{} {} {}", to_f64(p[0]), to_f64(p[1]), to_f64(p[2]));
    }
    let size: usize = cells.iter().map(|c| c.len() + 1).sum();
    let _ = writeln!(out, "CELLS {} {size}", cells.len());
    for c in &cells {
        let ids: Vec<String> = c.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "{} {}", c.len(), ids.join(" "));
    }
    let _ = writeln!(out, "CELL_TYPES {}", cells.len());
    for k in 0..cells.len() {
        let _ = writeln!(out, "{}", if k < n_quads { 9 } else { 4 });
    }
    let _ = writeln!(out, "CELL_DATA {}\nSCALARS density double 1\nLOOKUP_TABLE default", cells.len());
    for k in 0..cells.len() {
        let v = if k < n_quads { to_f64(densities[k]) } else { -1.0 };
        let _ = writeln!(out, "{v}");
    }
    let _ = writeln!(out, "SCALARS kind int 1\nLOOKUP_TABLE default");
    for k in 0..cells.len() {
        let _ = writeln!(out, "{}", if k < n_quads { 0 } else { 1 });
    }
    Ok(out)
}

/// Writes the fairing outputs (`contours.svg`, `curves.json`).
pub fn write_fairing<T: Scalar>(
    dir: &Path,
    domain: ((T, T), (T, T)),
    curves: &[ContourCurve<T>],
    echo: &serde_json::Value,
) -> Result<()> {
    write_file(&dir.join("contours.svg"), &contours_svg(domain, curves, 400)?)?;
    let records = curves.iter().map(CurveRecord::from_curve).collect::<Result<Vec<_>>>()?;
    let doc = serde_json::json!({ "config": echo, "curves": records });
    write_file(&dir.join("curves.json"), &serde_json::to_string_pretty(&doc)?)
}

/// Summary of an `optimize` run.
#[derive(Debug)]
pub struct RunSummary {
    pub iterations: usize,
    pub outcome: String,
    pub compliance: Option<f64>,
    pub volume_fraction: Option<f64>,
    pub grayscale: Option<f64>,
    pub curves: usize,
}

/// Optimization plus exports: `config.json`, `history.csv`, `field.json`,
/// `mesh.vtk`, and the fairing files when enabled. Checkpoints go to
/// `checkpoint_<iter>.json` every `checkpoint_every` iterations.
pub fn optimize(cfg: &RunConfig, out: &Path, checkpoint_every: Option<usize>) -> Result<(RunSummary, OptResult<f64>)> {
    ensure_dir(out)?;
    let echo = cfg.echo();
    write_file(&out.join("config.json"), &serde_json::to_string_pretty(&echo)?)?;
    let problem = cfg.problem::<f64>()?;
    let prep: Prepared<f64> = problem.prepare()?;
    log::info!(
        "{} elements, {} dofs, {} design coefficients",
        prep.model.num_elements(),
        prep.model.num_dofs(),
        prep.sampling.num_coefficients()
    );
    let mut ckpt_err = None;
    let mut observer = |r: &crate::opt_driver::IterationRecord<f64>, f: &DensityField<f64>| {
        if let Some(k) = checkpoint_every.filter(|&k| k > 0) {
            if r.iteration % k == 0 && ckpt_err.is_none() {
                let path = out.join(format!("checkpoint_{:03}.json", r.iteration));
                if let Err(e) = f.save_json(&path, Some(echo.clone())) {
                    ckpt_err = Some(e);
                }
            }
        }
    };
    let result = run_prepared(&problem, &prep, &mut observer)?;
    if let Some(e) = ckpt_err {
        return Err(e);
    }
    write_file(&out.join("history.csv"), &result.history.to_csv())?;
    result.field.save_json(&out.join("field.json"), Some(echo.clone()))?;

    let mut curves = Vec::new();
    if cfg.fairing.enabled && !matches!(result.outcome, Outcome::Aborted { .. }) {
        let fcfg = cfg.fairing.to_config::<f64>()?;
        let (grid, c) = fair_boundaries(&result.field, &fcfg)?;
        write_fairing(out, grid.domain, &c, &echo)?;
        curves = c;
    }
    if cfg.write_vtk {
        let dens = element_densities(&result.field, &prep.sampling);
        let lines: Vec<Vec<[f64; 3]>> = curves.iter().map(|c| c.physical.clone()).collect();
        write_file(&out.join("mesh.vtk"), &vtk_mesh(&prep.model, &dens.projected, &lines, "isoshell density")?)?;
    }
    let fs = result.final_state.as_ref();
    let summary = RunSummary {
        iterations: result.history.records.len(),
        outcome: match &result.outcome {
            Outcome::Converged => "converged".into(),
            Outcome::IterationLimit => "iteration limit".into(),
            Outcome::Aborted { iteration, error } => format!("aborted at iteration {iteration}: {error}"),
        },
        compliance: fs.map(|s| s.compliance),
        volume_fraction: fs.map(|s| s.volume_fraction),
        grayscale: fs.map(|s| s.grayscale),
        curves: curves.len(),
    };
    Ok((summary, result))
}

/// Fairing of a saved field into `out`.
pub fn fair_field(field_path: &Path, cfg: &RunConfig, out: &Path) -> Result<usize> {
    ensure_dir(out)?;
    let field = DensityField::<f64>::load_json(field_path)?;
    let (grid, curves) = fair_boundaries(&field, &cfg.fairing.to_config()?)?;
    let echo = serde_json::json!({ "field": field_path.display().to_string(), "fairing": cfg.fairing });
    write_fairing(out, grid.domain, &curves, &echo)?;
    Ok(curves.len())
}

/// Finite-difference check of the three gradients at a deterministic
/// non-uniform design.
#[derive(Debug, Clone)]
pub struct GradientReport {
    pub compliance: FdReport<f64>,
    pub volume: FdReport<f64>,
    pub local_volume: FdReport<f64>,
}

pub fn check_gradients(cfg: &RunConfig, samples: usize, step: f64) -> Result<GradientReport> {
    let problem = cfg.problem::<f64>()?;
    let prep = problem.prepare()?;
    let n = prep.sampling.num_coefficients();
    let x: Vec<f64> = (0..n).map(|k| 0.5 + 0.3 * (1.7 * k as f64 + 0.3).sin()).collect();
    let (tau, kappa) = (cfg.continuation.start, cfg.kappa);
    let field = DensityField::new(prep.design_basis.clone(), x.clone(), tau, kappa)?;
    let dens = element_densities(&field, &prep.sampling);
    let samples = samples.clamp(1, n);
    let idx: Vec<usize> = (0..samples).map(|k| (k * n) / samples + (n / samples) / 2).collect();

    let u = prep.model.solve(&dens.projected)?;
    let dc = compliance_gradient(&prep.model, &prep.sampling, &dens, tau, kappa, &u);
    let compliance = fd_gradient_check(
        |y: &[f64]| evaluate_compliance(&prep.model, &prep.sampling, y, tau, kappa),
        &x,
        &dc,
        &idx,
        step,
    )?;
    let dv = volume_gradient(&prep.solid_volumes, &prep.sampling, &dens, tau, kappa);
    let volume = fd_gradient_check(
        |y: &[f64]| Ok(evaluate_volume(&prep.solid_volumes, &prep.sampling, y, tau, kappa)),
        &x,
        &dv,
        &idx,
        step,
    )?;
    let (radius, gamma) = match cfg.problem {
        ProblemConfig::Local { radius, gamma, .. } => (radius, gamma),
        ProblemConfig::Global { .. } => (2.5, d_gamma()),
    };
    let nb = match &prep.neighborhoods {
        Some(nb) => nb.clone(),
        None => {
            let areas: Vec<f64> = prep.solid_volumes.iter().map(|v| v / cfg.thickness).collect();
            let delta = crate::density_field::mean_element_length(&areas);
            let c: Vec<_> = prep.model.elements.iter().map(|e| e.centroid).collect();
            crate::density_field::Neighborhoods::new(&c, &prep.solid_volumes, radius * delta)
        }
    };
    let avg = nb.local_average(&dens.projected);
    let dvb = local_volume_gradient(&nb, &prep.sampling, &dens, &avg, gamma, tau, kappa);
    let local_volume = fd_gradient_check(
        |y: &[f64]| evaluate_local_volume(&nb, &prep.sampling, y, gamma, tau, kappa),
        &x,
        &dvb,
        &idx,
        step,
    )?;
    Ok(GradientReport { compliance, volume, local_volume })
}

/// Writes the analysis mesh (`geometry.vtk`) and the CAD net
/// (`surface.json`) of the configured geometry.
pub fn export_geometry(cfg: &RunConfig, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let problem = cfg.problem::<f64>()?;
    let model = AnalysisModel::new(
        problem.multilevel.analysis_shell(),
        problem.material,
        problem.rule.clone(),
        &problem.supports,
        &problem.loads,
    )?;
    let ones = vec![1.0; model.num_elements()];
    write_file(&out.join("geometry.vtk"), &vtk_mesh(&model, &ones, &[], "isoshell geometry")?)?;
    let net = SurfaceFile::from_surface(&problem.multilevel.cad.mid_surface);
    write_file(&out.join("surface.json"), &serde_json::to_string_pretty(&net)?)?;
    write_file(&out.join("config.json"), &serde_json::to_string_pretty(&cfg.echo())?)
}

#[derive(Debug, Parser)]
#[command(name = "isoshell", version, about = "Isogeometric topology optimization of shells")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Configuration file (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for the parallel kernels.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the optimization and export the results.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Save the density field every K iterations.
        #[arg(long, value_name = "K")]
        checkpoint_every: Option<usize>,
    },
    /// Extract and fair the boundaries of a saved density field.
    Fair {
        #[command(flatten)]
        common: Common,
        /// Density field JSON written by `optimize`.
        #[arg(long)]
        field: PathBuf,
    },
    /// Compare analytic gradients with central finite differences.
    CheckGradients {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
    },
    /// Write the analysis mesh and control net of the configured geometry.
    ExportGeometry {
        #[command(flatten)]
        common: Common,
    },
}

fn init_logging() {
    let env = env_logger::Env::default().filter_or("IGA_TOPOPT_LOG", "info");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn read_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) if !p.exists() => Err(Failure::Usage(format!("config file {} not found", p.display()))),
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Config { .. } => Failure::Usage(e.to_string()),
            other => Failure::Run(other),
        }),
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Optimize { common, checkpoint_every } => {
            let path = common.config.as_deref().ok_or_else(|| Failure::Usage("optimize needs --config".into()))?;
            let cfg = read_config(Some(path))?;
            let out = common.out.unwrap_or_else(|| cfg.output.clone());
            let (s, _) = optimize(&cfg, &out, checkpoint_every)?;
            println!("outcome: {} after {} iterations", s.outcome, s.iterations);
            if let (Some(c), Some(v), Some(g)) = (s.compliance, s.volume_fraction, s.grayscale) {
                println!("compliance {c:.6e}, volume fraction {v:.5}, grayscale {:.2}%", 100.0 * g);
            }
            println!("{} faired curve(s); results in {}", s.curves, out.display());
        }
        Command::Fair { common, field } => {
            if !field.exists() {
                return Err(Failure::Usage(format!("field file {} not found", field.display())));
            }
            let cfg = read_config(common.config.as_deref())?;
            let out = common
                .out
                .unwrap_or_else(|| field.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")));
            let n = fair_field(&field, &cfg, &out)?;
            println!("{n} faired curve(s) written to {}", out.display());
        }
        Command::CheckGradients { common, samples, step } => {
            let path = common
                .config
                .as_deref()
                .ok_or_else(|| Failure::Usage("check-gradients needs --config".into()))?;
            let cfg = read_config(Some(path))?;
            let r = check_gradients(&cfg, samples, step)?;
            println!("compliance   max relative error {:.3e}", r.compliance.max_rel_error);
            println!("volume       max relative error {:.3e}", r.volume.max_rel_error);
            println!("local volume max relative error {:.3e}", r.local_volume.max_rel_error);
        }
        Command::ExportGeometry { common } => {
            let cfg = read_config(common.config.as_deref())?;
            let out = common.out.unwrap_or_else(|| cfg.output.clone());
            export_geometry(&cfg, &out)?;
            println!("geometry written to {}", out.display());
        }
    }
    Ok(())
}

fn threads_of(cmd: &Command) -> Option<usize> {
    match cmd {
        Command::Optimize { common, .. }
        | Command::Fair { common, .. }
        | Command::CheckGradients { common, .. }
        | Command::ExportGeometry { common } => common.threads,
    }
}

/// Entry point of the binary. Returns the process exit code: 0 on
/// success, 2 on usage errors, 1 on run failures.
pub fn run_cli<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads_of(&cli.command) {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nUsage: isoshell <optimize|fair|check-gradients|export-geometry> [OPTIONS]");
            2
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}
