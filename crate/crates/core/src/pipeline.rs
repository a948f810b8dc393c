//! Structure → aligned surface cloud.

use serde::{Deserialize, Serialize};

use crate::alignment::{apply_frame, canonical_frame_weighted, CanonicalFrame, SurfaceCloud};
use crate::chemio::{assign_charges, derive_bonds, ChargeScheme, Molecule, DEFAULT_BOND_TOLERANCE};
use crate::error::{Error, Result};
use crate::fieldgen::{
    build_density_on, build_esp_grid, build_fukui_dual_grid, GridGeometry, DEFAULT_FUKUI_DELTA, DEFAULT_PADDING,
    DEFAULT_SPACING, DEFAULT_VOXEL_BUDGET,
};
use crate::numeric::Vec3;
use crate::surface::{
    annotate_scalars, farthest_point_sample, marching_cubes, normalize_in_place, SurfaceMesh,
    DEFAULT_ISOVALUE_FACTOR, DEFAULT_POINT_COUNT,
};
use crate::topology::{TopologyContext, TopologyFlags, DEFAULT_GEODESIC_CUTOFF, DEFAULT_RADII};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarKind {
    #[default]
    Esp,
    FukuiDual,
}

impl std::str::FromStr for ScalarKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "esp" => Ok(ScalarKind::Esp),
            "fukui" | "fukui_dual" => Ok(ScalarKind::FukuiDual),
            other => Err(Error::invalid(format!("unknown scalar kind {other:?}"))),
        }
    }
}

impl ScalarKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScalarKind::Esp => "esp",
            ScalarKind::FukuiDual => "fukui_dual",
        }
    }
}

/// Settings for turning one molecule into an aligned cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudConfig {
    pub spacing: f64,
    pub padding: f64,
    pub voxel_budget: usize,
    /// Isovalue as a fraction of the density maximum.
    pub isovalue_factor: f64,
    pub n_points: usize,
    pub scalar: ScalarKind,
    pub fukui_delta: f64,
    /// Applied when the input carries no partial charges.
    pub charges: ChargeScheme,
    pub radii: Vec<f64>,
    pub geodesic_cutoff: f64,
    pub sample_seed: u64,
}

impl Default for CloudConfig {
    fn default() -> Self {
        CloudConfig {
            spacing: DEFAULT_SPACING,
            padding: DEFAULT_PADDING,
            voxel_budget: DEFAULT_VOXEL_BUDGET,
            isovalue_factor: DEFAULT_ISOVALUE_FACTOR,
            n_points: DEFAULT_POINT_COUNT,
            scalar: ScalarKind::Esp,
            fukui_delta: DEFAULT_FUKUI_DELTA,
            charges: ChargeScheme::Electronegativity,
            radii: DEFAULT_RADII.to_vec(),
            geodesic_cutoff: DEFAULT_GEODESIC_CUTOFF,
            sample_seed: 0,
        }
    }
}

impl CloudConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0) || !(self.padding >= 0.0) {
            return Err(Error::invalid("spacing must be positive and padding non-negative"));
        }
        if !(self.isovalue_factor > 0.0 && self.isovalue_factor < 1.0) {
            return Err(Error::invalid("isovalue_factor must lie in (0, 1)"));
        }
        if self.n_points == 0 {
            return Err(Error::invalid("n_points must be positive"));
        }
        if self.radii.is_empty() || self.radii.windows(2).any(|w| w[0] >= w[1]) || self.radii[0] <= 0.0 {
            return Err(Error::invalid("radii must be positive and strictly ascending"));
        }
        if self.radii[self.radii.len() - 1] > self.geodesic_cutoff {
            return Err(Error::invalid("radii must not exceed geodesic_cutoff"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Warning {
    AmbiguousAlignment,
    EmptyRings(usize),
    CurvatureFailures(usize),
    ZeroCharge,
}

#[derive(Debug, Clone)]
pub struct BuiltCloud {
    /// Annotated, normalized mesh in the input frame.
    pub mesh: SurfaceMesh<f64>,
    pub frame: CanonicalFrame<f64>,
    /// Aligned cloud.
    pub cloud: SurfaceCloud<f64>,
    pub source_vertex: Vec<usize>,
    pub flags: TopologyFlags,
    pub warnings: Vec<Warning>,
}

/// Prepares bonds and charges the way [`build_cloud`] does.
pub fn prepare_molecule(mol: &Molecule<f64>, scheme: ChargeScheme) -> Result<Molecule<f64>> {
    let bonded = if mol.bonds().is_empty() {
        derive_bonds(mol, DEFAULT_BOND_TOLERANCE)
    } else {
        mol.clone()
    };
    if bonded.atoms().iter().any(|a| a.partial_charge != 0.0) {
        return Ok(bonded);
    }
    assign_charges(&bonded, scheme)
}

/// parse output → charges → grids → mesh → scalars → sample → topology → frame.
pub fn build_cloud(mol: &Molecule<f64>, config: &CloudConfig) -> Result<BuiltCloud> {
    config.validate()?;
    let mol = prepare_molecule(mol, config.charges)?;
    let geom = GridGeometry::enclosing(&mol, config.spacing, config.padding, config.voxel_budget)?;
    let density = build_density_on(&mol, &geom)?;
    let (_, max) = density.min_max();
    let mesh = marching_cubes(&density, config.isovalue_factor * max)?;
    let property = match config.scalar {
        ScalarKind::Esp => build_esp_grid(&mol, &geom)?,
        ScalarKind::FukuiDual => build_fukui_dual_grid(&mol, &geom, config.fukui_delta)?,
    };
    let mut warnings = Vec::new();
    if property.zero_charge_warning {
        warnings.push(Warning::ZeroCharge);
    }
    let mut mesh = annotate_scalars(&mesh, &property)?;
    normalize_in_place(&mut mesh.vertex_scalars);

    let sample = farthest_point_sample(&mesh, config.n_points, config.sample_seed)?;
    let ctx = TopologyContext::new(&mesh, &config.radii, config.geodesic_cutoff)?;
    let topo = ctx.descriptors(&sample.source_vertex);
    let flags = TopologyFlags::tally(&topo);
    if flags.empty_rings > 0 {
        warnings.push(Warning::EmptyRings(flags.empty_rings));
    }
    if flags.curvature_failures > 0 {
        warnings.push(Warning::CurvatureFailures(flags.curvature_failures));
    }
    let raw = SurfaceCloud {
        positions: sample.positions,
        scalars: sample.scalars,
        topo,
    };
    // Frame from area-weighted moments of the whole mesh, so it does not
    // depend on which vertices the sampler picked.
    let frame = match canonical_frame_weighted(&mesh.vertices, &mesh.vertex_scalars, &mesh.vertex_areas()) {
        Ok(f) => f,
        Err(Error::AmbiguousAlignment(_)) => {
            warnings.push(Warning::AmbiguousAlignment);
            CanonicalFrame {
                rotation: crate::numeric::Mat3::identity(),
                translation: -raw.centroid(),
            }
        }
        Err(e) => return Err(e),
    };
    let cloud = apply_frame(&raw, &frame);
    Ok(BuiltCloud {
        mesh,
        frame,
        cloud,
        source_vertex: sample.source_vertex,
        flags,
        warnings,
    })
}

/// Bounding radius of a point set about its centroid.
pub fn bounding_radius(points: &[Vec3<f64>]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let c = points.iter().fold(Vec3::zero(), |a, p| a + *p) / points.len() as f64;
    points.iter().fold(0.0, |m, p| m.max(p.dist(&c)))
}
