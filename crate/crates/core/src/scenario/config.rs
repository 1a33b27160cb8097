//! Scenario configuration: TOML schema, unit-tagged quantities, validation.
//!
//! Quantities are either bare numbers in SI units or strings such as
//! `"20 mm"`, `"80.59 MPa"` or `"1e-3 s"`, converted at parse time.
//! Temperatures are plain numbers in °C.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{MaxwellBranch, PronySeries, WlfParams};
use crate::so3::Vec3;
use crate::solver::{Schedule, SolverSettings};

use super::presets;

pub const SCHEMA_VERSION: u32 = 1;

const REQUIRED_BLOCKS: [&str; 7] =
    ["schema_version", "name", "geometry", "section", "material", "discretization", "temperature"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Length,
    Time,
    Stress,
    Force,
    Moment,
    Angle,
}

impl Dim {
    fn name(self) -> &'static str {
        match self {
            Dim::Length => "length",
            Dim::Time => "time",
            Dim::Stress => "stress",
            Dim::Force => "force",
            Dim::Moment => "moment",
            Dim::Angle => "angle",
        }
    }

    fn factor(self, unit: &str) -> Option<f64> {
        let f = match (self, unit) {
            (Dim::Length, "m") => 1.0,
            (Dim::Length, "cm") => 1e-2,
            (Dim::Length, "mm") => 1e-3,
            (Dim::Length, "um") => 1e-6,
            (Dim::Time, "s") => 1.0,
            (Dim::Time, "ms") => 1e-3,
            (Dim::Stress, "Pa") => 1.0,
            (Dim::Stress, "kPa") => 1e3,
            (Dim::Stress, "MPa") => 1e6,
            (Dim::Stress, "GPa") => 1e9,
            (Dim::Force, "N") => 1.0,
            (Dim::Force, "kN") => 1e3,
            (Dim::Force, "mN") => 1e-3,
            (Dim::Moment, "N*m" | "N.m" | "Nm" | "N m") => 1.0,
            (Dim::Moment, "N*mm" | "Nmm" | "N mm") => 1e-3,
            (Dim::Angle, "rad") => 1.0,
            (Dim::Angle, "deg") => std::f64::consts::PI / 180.0,
            _ => return None,
        };
        Some(f)
    }
}

/// A scalar quantity: bare SI number or `"<value> <unit>"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Si(f64),
    Tagged(String),
}

impl Quantity {
    pub fn si(&self, dim: Dim, at: &str) -> Result<f64> {
        match self {
            Quantity::Si(v) => Ok(*v),
            Quantity::Tagged(s) => {
                let s = s.trim();
                let split = s
                    .find(|c: char| !(c.is_ascii_digit() || "+-.eE".contains(c)))
                    .ok_or_else(|| Error::Config(format!("{at}: `{s}` has no unit")))?;
                let (num, unit) = s.split_at(split);
                let v: f64 = num
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{at}: cannot read a number from `{s}`")))?;
                let unit = unit.trim();
                let f = dim.factor(unit).ok_or_else(|| {
                    Error::Config(format!("{at}: unit `{unit}` is not a {} unit", dim.name()))
                })?;
                Ok(v * f)
            }
        }
    }
}

impl From<f64> for Quantity {
    fn from(v: f64) -> Self {
        Quantity::Si(v)
    }
}

/// A 3-vector: bare SI numbers or `{ value = [..], unit = ".." }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorQuantity {
    Si([f64; 3]),
    Tagged { value: [f64; 3], unit: String },
}

impl VectorQuantity {
    pub fn si(&self, dim: Dim, at: &str) -> Result<Vec3> {
        match self {
            VectorQuantity::Si(v) => Ok(Vec3::from(*v)),
            VectorQuantity::Tagged { value, unit } => {
                let f = dim.factor(unit.trim()).ok_or_else(|| {
                    Error::Config(format!("{at}: unit `{unit}` is not a {} unit", dim.name()))
                })?;
                Ok(Vec3::from(*value) * f)
            }
        }
    }
}

impl Default for VectorQuantity {
    fn default() -> Self {
        VectorQuantity::Si([0.0; 3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryKind {
    Arch,
    Straight,
    StraightStentQuarter,
    CurvedStentHalf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub kind: GeometryKind,
    // arch
    pub radius: Option<Quantity>,
    pub sweep: Option<Quantity>,
    // straight
    pub length: Option<Quantity>,
    pub direction: Option<[f64; 3]>,
    pub reference: Option<[f64; 3]>,
    // stents
    pub crown_radius: Option<Quantity>,
    pub half_height: Option<Quantity>,
    pub wires: Option<usize>,
    pub crown_spacing: Option<Quantity>,
    pub crowns: Option<usize>,
    pub bridge_height: Option<Quantity>,
    pub bridges_per_pair: Option<usize>,
    pub fit_samples: Option<usize>,
    pub axis_radius: Option<Quantity>,
    pub axis_center: Option<VectorQuantity>,
    pub axis_sweep: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionBlock {
    pub diameter: Quantity,
    #[serde(default = "one")]
    pub shear_correction: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchBlock {
    pub modulus: Quantity,
    pub tau: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WlfBlock {
    pub c1: f64,
    pub c2: f64,
    pub t_g: f64,
}

/// Either a built-in material by `name` or explicit Prony/WLF tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialBlock {
    pub name: Option<String>,
    pub e_inf: Option<Quantity>,
    pub poisson: Option<f64>,
    pub wlf: Option<WlfBlock>,
    #[serde(default)]
    pub branches: Vec<BranchBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationBlock {
    pub degree: usize,
    pub control_points: usize,
    pub h: Quantity,
    pub total_time: Quantity,
}

/// Piecewise-linear temperature: `points = [[t_s, T_C], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureBlock {
    pub points: Vec<[f64; 2]>,
}

/// End loads at a named node (`"tip"` for single-patch beams), scaled by
/// a piecewise-linear profile `[[t_s, factor], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadBlock {
    pub node: String,
    #[serde(default)]
    pub force: VectorQuantity,
    #[serde(default)]
    pub moment: VectorQuantity,
    pub profile: Vec<[f64; 2]>,
}

/// Shape programming of stent assemblies: prescribed contraction ramp at
/// the interface nodes, hold, then release to free ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgrammingBlock {
    pub radial_contraction: Quantity,
    pub ramp_end: Quantity,
    pub release_time: Quantity,
    /// Translation components imposed at the nodes (default `radial`).
    #[serde(default)]
    pub prescribe: Option<Prescribe>,
    /// Also fix node rotations during the Dirichlet phase.
    #[serde(default)]
    pub clamp_rotations: bool,
    /// Curved devices: straighten the axis in the temporary shape.
    #[serde(default)]
    pub straighten_axis: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prescribe {
    /// Only the component normal to the axis of the temporary shape; axial
    /// and tangential motion stay free.
    Radial,
    /// All three translation components.
    Full,
}

/// Displacement probe at parameter `u` of a patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeBlock {
    pub name: String,
    pub patch: usize,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples_per_patch: usize,
}

fn default_samples() -> usize {
    17
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { snapshot_times: vec![], samples_per_patch: default_samples() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub tol_residual: Option<f64>,
    pub tol_increment: Option<f64>,
    pub max_iter: Option<usize>,
    pub max_halvings: Option<usize>,
    pub max_continuation_stages: Option<usize>,
}

/// Arch convergence-study defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceBlock {
    pub degrees: Vec<usize>,
    pub control_points: Vec<usize>,
    pub reference_degree: usize,
    pub reference_control_points: usize,
    pub time: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub long_running: bool,
    pub geometry: GeometryBlock,
    pub section: SectionBlock,
    pub material: MaterialBlock,
    pub discretization: DiscretizationBlock,
    pub temperature: TemperatureBlock,
    #[serde(default)]
    pub loads: Vec<LoadBlock>,
    pub programming: Option<ProgrammingBlock>,
    #[serde(default)]
    pub probes: Vec<ProbeBlock>,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    pub convergence: Option<ConvergenceBlock>,
    /// Free-form notes on interpretation choices, copied to the metadata.
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Parses a preset name or TOML text and validates it.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    if let Some(p) = presets::preset_text(text.trim()) {
        return parse_toml(p);
    }
    parse_toml(text)
}

fn parse_toml(text: &str) -> Result<ScenarioConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let missing: Vec<&str> = REQUIRED_BLOCKS.iter().copied().filter(|k| !table.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!("missing required blocks: {}", missing.join(", "))));
    }
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn schedule(points: &[[f64; 2]], at: &str) -> Result<Schedule> {
    Schedule::new(points.iter().map(|p| (p[0], p[1])).collect())
        .map_err(|e| Error::Config(format!("{at}: {e}")))
}

impl ScenarioConfig {
    /// Checks every block and collects all violations.
    pub fn validate(&self) -> Result<()> {
        let mut errs: Vec<String> = vec![];
        let mut check = |r: Result<()>| {
            if let Err(e) = r {
                errs.push(match e {
                    Error::Config(s) => s,
                    other => other.to_string(),
                });
            }
        };
        if self.schema_version != SCHEMA_VERSION {
            check(Err(Error::Config(format!(
                "schema_version: expected {SCHEMA_VERSION}, found {}",
                self.schema_version
            ))));
        }
        check(self.check_geometry());
        check(self.section.diameter.si(Dim::Length, "section.diameter").and_then(|d| {
            positive(d, "section.diameter")?;
            positive(self.section.shear_correction, "section.shear_correction")
        }));
        check(self.material().map(|_| ()));
        check(self.check_discretization());
        check(self.temperature_schedule().and_then(|t| {
            let m = self.material()?;
            let (lo, hi) = t.min_max();
            m.wlf.shift_factor(lo).and(m.wlf.shift_factor(hi)).map(|_| ())
        }));
        for (i, l) in self.loads.iter().enumerate() {
            let at = format!("loads[{i}]");
            check(l.force.si(Dim::Force, &format!("{at}.force")).map(|_| ()));
            check(l.moment.si(Dim::Moment, &format!("{at}.moment")).map(|_| ()));
            check(schedule(&l.profile, &format!("{at}.profile")).map(|_| ()));
            let known = match self.geometry.kind {
                GeometryKind::Arch | GeometryKind::Straight => l.node == "tip",
                _ => false,
            };
            if !known {
                check(Err(Error::Config(format!("{at}.node: unknown node `{}`", l.node))));
            }
        }
        if self.loads.len() > 1 {
            check(Err(Error::Config("loads: at most one load block (at `tip`)".into())));
        }
        let stent = matches!(self.geometry.kind, GeometryKind::StraightStentQuarter | GeometryKind::CurvedStentHalf);
        match (&self.programming, stent) {
            (Some(p), true) => check(check_programming(p)),
            (None, true) => check(Err(Error::Config("programming: required for stent geometries".into()))),
            (Some(_), false) => {
                check(Err(Error::Config("programming: only valid for stent geometries".into())))
            }
            (None, false) => {}
        }
        for (i, p) in self.probes.iter().enumerate() {
            if !(0.0..=1.0).contains(&p.u) {
                check(Err(Error::Config(format!("probes[{i}].u: {} outside [0, 1]", p.u))));
            }
        }
        if self.output.samples_per_patch < 2 {
            check(Err(Error::Config("output.samples_per_patch: needs at least 2".into())));
        }
        if let Some(c) = &self.convergence {
            check(c.time.si(Dim::Time, "convergence.time").and_then(|t| positive(t, "convergence.time")));
            if c.degrees.iter().any(|&p| p < 2) || c.reference_degree < 2 {
                check(Err(Error::Config("convergence: degrees must be ≥ 2".into())));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs.join("; ")))
        }
    }

    fn check_geometry(&self) -> Result<()> {
        let g = &self.geometry;
        let need = |q: &Option<Quantity>, dim: Dim, key: &str| -> Result<f64> {
            let at = format!("geometry.{key}");
            let v = q.as_ref().ok_or_else(|| Error::Config(format!("{at}: required for this kind")))?.si(dim, &at)?;
            positive(v, &at)?;
            Ok(v)
        };
        match g.kind {
            GeometryKind::Arch => {
                need(&g.radius, Dim::Length, "radius")?;
                need(&g.sweep, Dim::Angle, "sweep")?;
            }
            GeometryKind::Straight => {
                need(&g.length, Dim::Length, "length")?;
                let d = Vec3::from(g.direction.unwrap_or([0.0, 1.0, 0.0]));
                let r = Vec3::from(g.reference.unwrap_or([1.0, 0.0, 0.0]));
                if d.norm() == 0.0 || d.normalize().cross(&r).norm() < 1e-6 {
                    return Err(Error::Config("geometry.reference: must not be parallel to direction".into()));
                }
            }
            GeometryKind::StraightStentQuarter | GeometryKind::CurvedStentHalf => {
                self.stent_layout()?.validate().map_err(|e| Error::Config(format!("geometry: {e}")))?;
            }
        }
        Ok(())
    }

    fn check_discretization(&self) -> Result<()> {
        let d = &self.discretization;
        if d.degree < 2 {
            return Err(Error::Config(format!("discretization.degree: p = {} < 2", d.degree)));
        }
        if d.control_points < (d.degree + 1).max(3) {
            return Err(Error::Config(format!(
                "discretization.control_points: n = {} < max(p + 1, 3)",
                d.control_points
            )));
        }
        let h = d.h.si(Dim::Time, "discretization.h")?;
        if h.is_nan() || h <= 0.0 {
            return Err(Error::Config(format!("discretization.h: h = {h} must be > 0")));
        }
        positive(d.total_time.si(Dim::Time, "discretization.total_time")?, "discretization.total_time")
    }

    pub fn h(&self) -> f64 {
        self.discretization.h.si(Dim::Time, "discretization.h").unwrap_or(f64::NAN)
    }

    pub fn total_time(&self) -> f64 {
        self.discretization.total_time.si(Dim::Time, "discretization.total_time").unwrap_or(f64::NAN)
    }

    pub fn diameter(&self) -> f64 {
        self.section.diameter.si(Dim::Length, "section.diameter").unwrap_or(f64::NAN)
    }

    pub fn temperature_schedule(&self) -> Result<Schedule> {
        schedule(&self.temperature.points, "temperature.points")
    }

    pub fn load_schedules(&self) -> Result<Vec<(String, Vec3, Vec3, Schedule)>> {
        self.loads
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let at = format!("loads[{i}]");
                Ok((
                    l.node.clone(),
                    l.force.si(Dim::Force, &format!("{at}.force"))?,
                    l.moment.si(Dim::Moment, &format!("{at}.moment"))?,
                    schedule(&l.profile, &format!("{at}.profile"))?,
                ))
            })
            .collect()
    }

    pub fn material(&self) -> Result<PronySeries> {
        let m = &self.material;
        let explicit = m.e_inf.is_some() || m.wlf.is_some() || !m.branches.is_empty() || m.poisson.is_some();
        let series = match (&m.name, explicit) {
            (Some(name), false) => {
                PronySeries::by_name(name).map_err(|e| Error::Config(format!("material.name: {e}")))?
            }
            (Some(_), true) => {
                return Err(Error::Config("material: give either `name` or explicit tables, not both".into()))
            }
            (None, true) => {
                let e_inf = m
                    .e_inf
                    .as_ref()
                    .ok_or_else(|| Error::Config("material.e_inf: required".into()))?
                    .si(Dim::Stress, "material.e_inf")?;
                let w = m.wlf.as_ref().ok_or_else(|| Error::Config("material.wlf: required".into()))?;
                let branches = m
                    .branches
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        Ok(MaxwellBranch {
                            modulus: b.modulus.si(Dim::Stress, &format!("material.branches[{i}].modulus"))?,
                            tau_g: b.tau.si(Dim::Time, &format!("material.branches[{i}].tau"))?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                PronySeries {
                    name: "custom".into(),
                    e_inf,
                    branches,
                    wlf: WlfParams::new(w.c1, w.c2, w.t_g).map_err(|e| Error::Config(format!("material.wlf: {e}")))?,
                    poisson: m.poisson.ok_or_else(|| Error::Config("material.poisson: required".into()))?,
                }
            }
            (None, false) => return Err(Error::Config("material: give `name` or explicit tables".into())),
        };
        series.validate().map_err(|e| Error::Config(format!("material: {e}")))?;
        Ok(series)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        let d = SolverSettings::default();
        SolverSettings {
            tol_residual: self.solver.tol_residual.unwrap_or(d.tol_residual),
            tol_increment: self.solver.tol_increment.unwrap_or(d.tol_increment),
            max_iter: self.solver.max_iter.unwrap_or(d.max_iter),
            max_halvings: self.solver.max_halvings.unwrap_or(d.max_halvings),
            max_continuation_stages: self.solver.max_continuation_stages.unwrap_or(d.max_continuation_stages),
        }
    }

    /// Stent layout from the geometry block (stent kinds only).
    pub fn stent_layout(&self) -> Result<crate::geometry::StentLayout> {
        let g = &self.geometry;
        let len = |q: &Option<Quantity>, key: &str| -> Result<f64> {
            let at = format!("geometry.{key}");
            q.as_ref().ok_or_else(|| Error::Config(format!("{at}: required for stents")))?.si(Dim::Length, &at)
        };
        let count = |v: Option<usize>, key: &str| -> Result<usize> {
            v.ok_or_else(|| Error::Config(format!("geometry.{key}: required for stents")))
        };
        let axis = match g.kind {
            GeometryKind::CurvedStentHalf => Some(crate::geometry::CurvedAxis {
                radius: len(&g.axis_radius, "axis_radius")?,
                center: g
                    .axis_center
                    .as_ref()
                    .ok_or_else(|| Error::Config("geometry.axis_center: required".into()))?
                    .si(Dim::Length, "geometry.axis_center")?,
                sweep: g
                    .axis_sweep
                    .as_ref()
                    .ok_or_else(|| Error::Config("geometry.axis_sweep: required".into()))?
                    .si(Dim::Angle, "geometry.axis_sweep")?,
            }),
            _ => None,
        };
        Ok(crate::geometry::StentLayout {
            crown_radius: len(&g.crown_radius, "crown_radius")?,
            half_height: len(&g.half_height, "half_height")?,
            wires: count(g.wires, "wires")?,
            crown_spacing: len(&g.crown_spacing, "crown_spacing")?,
            crowns: count(g.crowns, "crowns")?,
            bridge_height: g
                .bridge_height
                .as_ref()
                .map(|q| q.si(Dim::Length, "geometry.bridge_height"))
                .transpose()?
                .unwrap_or(0.0),
            bridges_per_pair: g.bridges_per_pair.unwrap_or(4),
            degree: self.discretization.degree,
            control_points: self.discretization.control_points,
            fit_samples: g.fit_samples.unwrap_or(4 * self.discretization.control_points),
            axis,
        })
    }

    /// Programming times and contraction in SI units.
    pub fn programming_si(&self) -> Result<Option<(f64, f64, f64)>> {
        self.programming
            .as_ref()
            .map(|p| {
                Ok((
                    p.radial_contraction.si(Dim::Length, "programming.radial_contraction")?,
                    p.ramp_end.si(Dim::Time, "programming.ramp_end")?,
                    p.release_time.si(Dim::Time, "programming.release_time")?,
                ))
            })
            .transpose()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn check_programming(p: &ProgrammingBlock) -> Result<()> {
    let dr = p.radial_contraction.si(Dim::Length, "programming.radial_contraction")?;
    let ramp = p.ramp_end.si(Dim::Time, "programming.ramp_end")?;
    let rel = p.release_time.si(Dim::Time, "programming.release_time")?;
    if dr < 0.0 {
        return Err(Error::Config("programming.radial_contraction: must be ≥ 0".into()));
    }
    positive(ramp, "programming.ramp_end")?;
    if rel < ramp {
        return Err(Error::Config("programming.release_time: earlier than ramp_end".into()));
    }
    Ok(())
}

fn positive(v: f64, at: &str) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{at}: {v} must be positive")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantities_convert_to_si() {
        let q = Quantity::Tagged("20 mm".into());
        assert_eq!(q.si(Dim::Length, "x").unwrap(), 0.02);
        let q = Quantity::Tagged("80.59MPa".into());
        assert!((q.si(Dim::Stress, "x").unwrap() - 80.59e6).abs() < 1e-6);
        assert_eq!(Quantity::Tagged("1e-3 s".into()).si(Dim::Time, "x").unwrap(), 1e-3);
        assert!(Quantity::Tagged("3 N".into()).si(Dim::Length, "x").is_err());
        assert!(Quantity::Tagged("abc".into()).si(Dim::Length, "x").is_err());
        assert_eq!(Quantity::Si(2.5).si(Dim::Force, "x").unwrap(), 2.5);
    }

    #[test]
    fn empty_text_lists_required_blocks() {
        let err = parse_config("").unwrap_err().to_string();
        for b in REQUIRED_BLOCKS {
            assert!(err.contains(b), "{err}");
        }
    }

    #[test]
    fn nonpositive_step_is_rejected() {
        let mut cfg = parse_config("arch-90").unwrap();
        cfg.discretization.h = Quantity::Si(0.0);
        assert!(cfg.validate().unwrap_err().to_string().contains("discretization.h"));
        cfg.discretization.h = Quantity::Tagged("-1 ms".into());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_reported_with_location() {
        let text = presets::preset_text("arch-90").unwrap().replace("[section]", "[section]\ncolour = 3");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("colour") && err.contains("line"), "{err}");
    }

    #[test]
    fn unit_violations_are_reported() {
        let text = presets::preset_text("arch-90").unwrap().replace("\"0.05 m\"", "\"0.05 s\"");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("section.diameter"), "{err}");
    }

    #[test]
    fn round_trip_through_toml() {
        for name in presets::PRESETS {
            let cfg = parse_config(name).unwrap();
            let again = parse_config(&cfg.to_toml()).unwrap();
            assert_eq!(cfg, again);
        }
    }
}
