//! Planning instance: fields, depots, crops and the travel-cost coefficients
//! derived from them.
//!
//! Travel costs come in three families per crop `k`:
//!
//! * base costs per harvester, `c̃_ij^k` between fields and `c̃_dj^k` between a
//!   depot and a field,
//! * group costs scaled by the crop's whole fleet, `c_ij^k = N^k · c̃_ij^k` and
//!   `c_dj^k = N^k · c̃_dj^k` with `N^k = Σ_d N_d^k`,
//! * assembly costs `Σ_d N_d^k · c̃_dj^k` for a tour whose harvesters come from
//!   (or return to) every depot they are stationed at.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when checking the triangle inequality.
pub const TRIANGLE_TOLERANCE: f64 = 1e-9;

/// Crop labels in harvest order (index 0 is harvested first) and the fixed
/// cost charged for every crop that is planted at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropCatalog {
    pub names: Vec<String>,
    pub fixed_cost_eur: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Depot {
    pub id: usize,
    pub x_km: f64,
    pub y_km: f64,
    pub maintenance_eur: f64,
    /// Harvesters stationed here, one count per crop.
    pub harvesters: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub id: usize,
    pub x_km: f64,
    pub y_km: f64,
    pub size_ha: f64,
    /// Expected return of each crop on this field.
    pub revenue_eur: Vec<f64>,
}

impl Field {
    pub fn position(&self) -> [f64; 2] {
        [self.x_km, self.y_km]
    }
}

/// Per-crop explicit base-cost matrices (`c̃`), used instead of planar distances
/// when a real path network is available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitMatrices {
    /// `field_field[k][i][j]`, symmetric with zero diagonal.
    pub field_field: Vec<Vec<Vec<f64>>>,
    /// `depot_field[k][d][j]`.
    pub depot_field: Vec<Vec<Vec<f64>>>,
}

/// Where base travel costs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostSpec {
    /// Euclidean distance between planar positions times a uniform €/km rate,
    /// plus an optional per-crop offset for crop-specific machinery.
    Rate {
        rate_eur_per_km: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        crop_offset_eur: Option<Vec<f64>>,
    },
    Matrices {
        matrices: ExplicitMatrices,
    },
}

impl CostSpec {
    pub fn rate(rate_eur_per_km: f64) -> Self {
        CostSpec::Rate {
            rate_eur_per_km,
            crop_offset_eur: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub crops: CropCatalog,
    pub depots: Vec<Depot>,
    pub fields: Vec<Field>,
    pub cost: CostSpec,
    /// Generator record (parameters and RNG identity) for replay.
    #[serde(rename = "_gen", default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<serde_json::Value>,
}

impl Instance {
    pub fn num_crops(&self) -> usize {
        self.crops.names.len()
    }

    pub fn num_depots(&self) -> usize {
        self.depots.len()
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    /// `N^{harv,k}`: harvesters for crop `k` summed over all depots.
    pub fn fleet_size(&self, crop: usize) -> u32 {
        self.depots.iter().map(|d| d.harvesters[crop]).sum()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Checks every invariant and fails with the full report if anything is off.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_instance(self);
        if report.is_empty() {
            Ok(())
        } else {
            let lines: Vec<String> = report.iter().map(|d| d.to_string()).collect();
            Err(Error::Validation(lines.join("; ")))
        }
    }

    /// Restricts the instance to `keep` (ids into `self.fields`), renumbering the
    /// kept fields `0..keep.len()` in the given order.
    pub fn subset(&self, keep: &[usize]) -> Result<Instance> {
        let l = self.num_fields();
        if let Some(&bad) = keep.iter().find(|&&f| f >= l) {
            return Err(Error::Validation(format!("unknown field id {bad}")));
        }
        let fields = keep
            .iter()
            .enumerate()
            .map(|(new_id, &old)| Field {
                id: new_id,
                ..self.fields[old].clone()
            })
            .collect();
        let cost = match &self.cost {
            CostSpec::Rate { .. } => self.cost.clone(),
            CostSpec::Matrices { matrices } => CostSpec::Matrices {
                matrices: ExplicitMatrices {
                    field_field: matrices
                        .field_field
                        .iter()
                        .map(|m| {
                            keep.iter()
                                .map(|&i| keep.iter().map(|&j| m[i][j]).collect())
                                .collect()
                        })
                        .collect(),
                    depot_field: matrices
                        .depot_field
                        .iter()
                        .map(|m| {
                            m.iter()
                                .map(|row| keep.iter().map(|&j| row[j]).collect())
                                .collect()
                        })
                        .collect(),
                },
            },
        };
        Ok(Instance {
            crops: self.crops.clone(),
            depots: self.depots.clone(),
            fields,
            cost,
            generation: None,
        })
    }
}

/// One violated invariant found by [`validate_instance`].
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    NoCrops,
    NegativeFixedCost(f64),
    FieldIdMismatch {
        position: usize,
        id: usize,
    },
    DepotIdMismatch {
        position: usize,
        id: usize,
    },
    NonPositiveSize {
        field: usize,
        size: f64,
    },
    BadPosition {
        what: &'static str,
        index: usize,
    },
    RevenueShape {
        field: usize,
        expected: usize,
        found: usize,
    },
    NonFiniteRevenue {
        field: usize,
        crop: usize,
    },
    NegativeMaintenance {
        depot: usize,
        value: f64,
    },
    HarvesterShape {
        depot: usize,
        expected: usize,
        found: usize,
    },
    NoHarvesters {
        crop: usize,
    },
    NegativeRate(f64),
    OffsetShape {
        expected: usize,
        found: usize,
    },
    NegativeOffset {
        crop: usize,
    },
    MatrixShape(String),
    NegativeCost {
        crop: usize,
        row: String,
        col: usize,
    },
    Asymmetric {
        crop: usize,
        i: usize,
        j: usize,
    },
    /// `c̃(a,c) > c̃(a,b) + c̃(b,c)`; vertices are labelled `d<i>` / `f<i>`.
    Triangle {
        crop: usize,
        a: String,
        b: String,
        c: String,
        direct: f64,
        detour: f64,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Diagnostic::*;
        match self {
            NoCrops => write!(f, "at least one crop is required"),
            NegativeFixedCost(m) => write!(f, "fixed crop cost {m} is negative"),
            FieldIdMismatch { position, id } => {
                write!(f, "field at position {position} has id {id}")
            }
            DepotIdMismatch { position, id } => {
                write!(f, "depot at position {position} has id {id}")
            }
            NonPositiveSize { field, size } => write!(f, "field {field} has size {size} <= 0"),
            BadPosition { what, index } => write!(f, "{what} {index} has a non-finite position"),
            RevenueShape {
                field,
                expected,
                found,
            } => write!(f, "field {field} has {found} revenues, expected {expected}"),
            NonFiniteRevenue { field, crop } => {
                write!(f, "field {field} has a non-finite revenue for crop {crop}")
            }
            NegativeMaintenance { depot, value } => {
                write!(f, "depot {depot} has negative maintenance {value}")
            }
            HarvesterShape {
                depot,
                expected,
                found,
            } => write!(f, "depot {depot} has {found} harvester counts, expected {expected}"),
            NoHarvesters { crop } => write!(f, "no depot holds a harvester for crop {crop}"),
            NegativeRate(r) => write!(f, "travel rate {r} is negative"),
            OffsetShape { expected, found } => {
                write!(f, "{found} crop offsets given, expected {expected}")
            }
            NegativeOffset { crop } => write!(f, "crop {crop} has a negative cost offset"),
            MatrixShape(msg) => write!(f, "cost matrix shape: {msg}"),
            NegativeCost { crop, row, col } => {
                write!(f, "negative cost for crop {crop} at {row}->f{col}")
            }
            Asymmetric { crop, i, j } => {
                write!(f, "cost matrix for crop {crop} is asymmetric at ({i},{j})")
            }
            Triangle {
                crop,
                a,
                b,
                c,
                direct,
                detour,
            } => write!(
                f,
                "triangle inequality violated for crop {crop}: {a}->{c} costs {direct} > {detour} via {b}"
            ),
        }
    }
}

/// Lists every violated invariant; an empty report means the instance is valid.
pub fn validate_instance(inst: &Instance) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let k = inst.num_crops();
    if k == 0 {
        out.push(Diagnostic::NoCrops);
    }
    if inst.crops.fixed_cost_eur < 0.0 || !inst.crops.fixed_cost_eur.is_finite() {
        out.push(Diagnostic::NegativeFixedCost(inst.crops.fixed_cost_eur));
    }
    for (pos, field) in inst.fields.iter().enumerate() {
        if field.id != pos {
            out.push(Diagnostic::FieldIdMismatch {
                position: pos,
                id: field.id,
            });
        }
        if !(field.size_ha > 0.0) {
            out.push(Diagnostic::NonPositiveSize {
                field: pos,
                size: field.size_ha,
            });
        }
        if !field.x_km.is_finite() || !field.y_km.is_finite() {
            out.push(Diagnostic::BadPosition {
                what: "field",
                index: pos,
            });
        }
        if field.revenue_eur.len() != k {
            out.push(Diagnostic::RevenueShape {
                field: pos,
                expected: k,
                found: field.revenue_eur.len(),
            });
        }
        for (crop, r) in field.revenue_eur.iter().enumerate() {
            if !r.is_finite() {
                out.push(Diagnostic::NonFiniteRevenue { field: pos, crop });
            }
        }
    }
    let mut harvester_shapes_ok = true;
    for (pos, depot) in inst.depots.iter().enumerate() {
        if depot.id != pos {
            out.push(Diagnostic::DepotIdMismatch {
                position: pos,
                id: depot.id,
            });
        }
        if !(depot.maintenance_eur >= 0.0) {
            out.push(Diagnostic::NegativeMaintenance {
                depot: pos,
                value: depot.maintenance_eur,
            });
        }
        if !depot.x_km.is_finite() || !depot.y_km.is_finite() {
            out.push(Diagnostic::BadPosition {
                what: "depot",
                index: pos,
            });
        }
        if depot.harvesters.len() != k {
            harvester_shapes_ok = false;
            out.push(Diagnostic::HarvesterShape {
                depot: pos,
                expected: k,
                found: depot.harvesters.len(),
            });
        }
    }
    if harvester_shapes_ok {
        for crop in 0..k {
            if inst.fleet_size(crop) == 0 {
                out.push(Diagnostic::NoHarvesters { crop });
            }
        }
    }
    match &inst.cost {
        CostSpec::Rate {
            rate_eur_per_km,
            crop_offset_eur,
        } => {
            if !(*rate_eur_per_km >= 0.0) || !rate_eur_per_km.is_finite() {
                out.push(Diagnostic::NegativeRate(*rate_eur_per_km));
            }
            if let Some(offsets) = crop_offset_eur {
                if offsets.len() != k {
                    out.push(Diagnostic::OffsetShape {
                        expected: k,
                        found: offsets.len(),
                    });
                }
                for (crop, o) in offsets.iter().enumerate() {
                    if !(*o >= 0.0) {
                        out.push(Diagnostic::NegativeOffset { crop });
                    }
                }
            }
        }
        CostSpec::Matrices { matrices } => {
            let shape_ok = check_matrix_shapes(inst, matrices, &mut out);
            if shape_ok {
                check_matrix_values(inst, matrices, &mut out);
            }
        }
    }
    // Triangle check needs a well-formed cost model; skip it when earlier checks failed.
    if out.is_empty() {
        if let Ok(model) = CostModel::from_instance(inst) {
            check_triangles(inst, &model, &mut out);
        }
    }
    out
}

fn check_matrix_shapes(inst: &Instance, m: &ExplicitMatrices, out: &mut Vec<Diagnostic>) -> bool {
    let (k, d, l) = (inst.num_crops(), inst.num_depots(), inst.num_fields());
    let before = out.len();
    if m.field_field.len() != k {
        out.push(Diagnostic::MatrixShape(format!(
            "field_field has {} crop layers, expected {k}",
            m.field_field.len()
        )));
    }
    if m.depot_field.len() != k {
        out.push(Diagnostic::MatrixShape(format!(
            "depot_field has {} crop layers, expected {k}",
            m.depot_field.len()
        )));
    }
    for (crop, layer) in m.field_field.iter().enumerate() {
        if layer.len() != l || layer.iter().any(|row| row.len() != l) {
            out.push(Diagnostic::MatrixShape(format!(
                "field_field[{crop}] is not {l}x{l}"
            )));
        }
    }
    for (crop, layer) in m.depot_field.iter().enumerate() {
        if layer.len() != d || layer.iter().any(|row| row.len() != l) {
            out.push(Diagnostic::MatrixShape(format!(
                "depot_field[{crop}] is not {d}x{l}"
            )));
        }
    }
    out.len() == before
}

fn check_matrix_values(inst: &Instance, m: &ExplicitMatrices, out: &mut Vec<Diagnostic>) {
    let l = inst.num_fields();
    for (crop, layer) in m.field_field.iter().enumerate() {
        for i in 0..l {
            for j in 0..l {
                let v = layer[i][j];
                if !(v >= 0.0) || !v.is_finite() {
                    out.push(Diagnostic::NegativeCost {
                        crop,
                        row: format!("f{i}"),
                        col: j,
                    });
                }
                if j > i && (layer[i][j] - layer[j][i]).abs() > TRIANGLE_TOLERANCE {
                    out.push(Diagnostic::Asymmetric { crop, i, j });
                }
            }
        }
    }
    for (crop, layer) in m.depot_field.iter().enumerate() {
        for (d, row) in layer.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !(v >= 0.0) || !v.is_finite() {
                    out.push(Diagnostic::NegativeCost {
                        crop,
                        row: format!("d{d}"),
                        col: j,
                    });
                }
            }
        }
    }
}

/// Every triple over depots and fields, except those needing a depot-depot cost
/// (which the model never uses).
fn check_triangles(inst: &Instance, model: &CostModel, out: &mut Vec<Diagnostic>) {
    let (d, l) = (inst.num_depots(), inst.num_fields());
    let n = d + l;
    let label = |v: usize| {
        if v < d {
            format!("d{v}")
        } else {
            format!("f{}", v - d)
        }
    };
    for crop in 0..inst.num_crops() {
        let cost = |a: usize, b: usize| -> Option<f64> {
            match (a < d, b < d) {
                (true, true) => None,
                (true, false) => Some(model.base_depot(crop, a, b - d)),
                (false, true) => Some(model.base_depot(crop, b, a - d)),
                (false, false) => Some(model.base_field(crop, a - d, b - d)),
            }
        };
        for a in 0..n {
            for c in (a + 1)..n {
                let Some(direct) = cost(a, c) else { continue };
                for b in 0..n {
                    if b == a || b == c {
                        continue;
                    }
                    let (Some(ab), Some(bc)) = (cost(a, b), cost(b, c)) else {
                        continue;
                    };
                    let detour = ab + bc;
                    if direct > detour + TRIANGLE_TOLERANCE * direct.max(1.0) {
                        out.push(Diagnostic::Triangle {
                            crop,
                            a: label(a),
                            b: label(b),
                            c: label(c),
                            direct,
                            detour,
                        });
                    }
                }
            }
        }
    }
}

/// Travel-cost coefficients for every crop, in all the families the integer
/// programs need. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    crops: usize,
    depots: usize,
    fields: usize,
    fleet: Vec<f64>,
    base_ff: Vec<f64>,
    base_df: Vec<f64>,
    ff: Vec<f64>,
    df: Vec<f64>,
    first_leg: Vec<f64>,
    last_leg: Vec<f64>,
}

/// Builds the cost model of `inst` from an explicit cost source (`source` may
/// differ from `inst.cost`, e.g. to re-cost an instance at a different rate).
pub fn build_cost_model(inst: &Instance, source: &CostSpec) -> Result<CostModel> {
    let (k, d, l) = (inst.num_crops(), inst.num_depots(), inst.num_fields());
    if k == 0 {
        return Err(Error::Shape("instance has no crops".into()));
    }
    for depot in &inst.depots {
        if depot.harvesters.len() != k {
            return Err(Error::Shape(format!(
                "depot {} lists {} harvester counts for {k} crops",
                depot.id,
                depot.harvesters.len()
            )));
        }
    }
    let mut base_ff = vec![0.0; k * l * l];
    let mut base_df = vec![0.0; k * d * l];
    match source {
        CostSpec::Rate {
            rate_eur_per_km,
            crop_offset_eur,
        } => {
            let rate = *rate_eur_per_km;
            if !(rate >= 0.0) || !rate.is_finite() {
                return Err(Error::Validation(format!("travel rate {rate} is negative")));
            }
            let offsets = match crop_offset_eur {
                Some(o) if o.len() != k => {
                    return Err(Error::Shape(format!(
                        "{} crop offsets given for {k} crops",
                        o.len()
                    )))
                }
                Some(o) => {
                    if o.iter().any(|v| !(*v >= 0.0)) {
                        return Err(Error::Validation("negative crop cost offset".into()));
                    }
                    o.clone()
                }
                None => vec![0.0; k],
            };
            for crop in 0..k {
                for i in 0..l {
                    for j in 0..l {
                        if i != j {
                            let dist = euclid(inst.fields[i].position(), inst.fields[j].position());
                            base_ff[(crop * l + i) * l + j] = rate * dist + offsets[crop];
                        }
                    }
                }
                for (di, depot) in inst.depots.iter().enumerate() {
                    for j in 0..l {
                        let dist = euclid([depot.x_km, depot.y_km], inst.fields[j].position());
                        base_df[(crop * d + di) * l + j] = rate * dist + offsets[crop];
                    }
                }
            }
        }
        CostSpec::Matrices { matrices } => {
            let mut diag = Vec::new();
            if !check_matrix_shapes(inst, matrices, &mut diag) {
                let msg: Vec<String> = diag.iter().map(|x| x.to_string()).collect();
                return Err(Error::Shape(msg.join("; ")));
            }
            check_matrix_values(inst, matrices, &mut diag);
            if !diag.is_empty() {
                let msg: Vec<String> = diag.iter().map(|x| x.to_string()).collect();
                return Err(Error::Validation(msg.join("; ")));
            }
            for crop in 0..k {
                for i in 0..l {
                    for j in 0..l {
                        base_ff[(crop * l + i) * l + j] = matrices.field_field[crop][i][j];
                    }
                }
                for di in 0..d {
                    for j in 0..l {
                        base_df[(crop * d + di) * l + j] = matrices.depot_field[crop][di][j];
                    }
                }
            }
        }
    }

    let fleet: Vec<f64> = (0..k).map(|crop| inst.fleet_size(crop) as f64).collect();
    let ff: Vec<f64> = base_ff
        .iter()
        .enumerate()
        .map(|(idx, c)| fleet[idx / (l * l).max(1)] * c)
        .collect();
    let df: Vec<f64> = base_df
        .iter()
        .enumerate()
        .map(|(idx, c)| fleet[idx / (d * l).max(1)] * c)
        .collect();
    let mut first_leg = vec![0.0; k * l];
    for crop in 0..k {
        for j in 0..l {
            first_leg[crop * l + j] = inst
                .depots
                .iter()
                .enumerate()
                .map(|(di, depot)| depot.harvesters[crop] as f64 * base_df[(crop * d + di) * l + j])
                .sum();
        }
    }
    // Base costs are symmetric, so dispersing back to every home depot costs the
    // same as assembling from them.
    let last_leg = first_leg.clone();
    Ok(CostModel {
        crops: k,
        depots: d,
        fields: l,
        fleet,
        base_ff,
        base_df,
        ff,
        df,
        first_leg,
        last_leg,
    })
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl CostModel {
    /// Builds from the instance's own cost source.
    pub fn from_instance(inst: &Instance) -> Result<Self> {
        build_cost_model(inst, &inst.cost)
    }

    pub fn num_crops(&self) -> usize {
        self.crops
    }

    pub fn num_depots(&self) -> usize {
        self.depots
    }

    pub fn num_fields(&self) -> usize {
        self.fields
    }

    /// `N^{harv,k}`.
    pub fn fleet(&self, crop: usize) -> f64 {
        self.fleet[crop]
    }

    /// `c̃_ij^k`.
    pub fn base_field(&self, crop: usize, i: usize, j: usize) -> f64 {
        self.base_ff[(crop * self.fields + i) * self.fields + j]
    }

    /// `c̃_dj^k`.
    pub fn base_depot(&self, crop: usize, depot: usize, field: usize) -> f64 {
        self.base_df[(crop * self.depots + depot) * self.fields + field]
    }

    /// `c_ij^k = N^k c̃_ij^k`.
    pub fn field(&self, crop: usize, i: usize, j: usize) -> f64 {
        self.ff[(crop * self.fields + i) * self.fields + j]
    }

    /// `c_dj^k = N^k c̃_dj^k`.
    pub fn depot_to_field(&self, crop: usize, depot: usize, field: usize) -> f64 {
        self.df[(crop * self.depots + depot) * self.fields + field]
    }

    /// `c_jd^k`; equal to `c_dj^k` because base costs are symmetric.
    pub fn field_to_depot(&self, crop: usize, field: usize, depot: usize) -> f64 {
        self.depot_to_field(crop, depot, field)
    }

    /// `c_dj^{k,kmin}`: all harvesters of crop `k` travel from their own depots to `field`.
    pub fn first_leg(&self, crop: usize, field: usize) -> f64 {
        self.first_leg[crop * self.fields + field]
    }

    /// `c_jd^{k,kmax}`: all harvesters of crop `k` return from `field` to their own depots.
    pub fn last_leg(&self, crop: usize, field: usize) -> f64 {
        self.last_leg[crop * self.fields + field]
    }
}
