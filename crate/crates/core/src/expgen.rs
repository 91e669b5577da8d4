//! Seeded random instances.
//!
//! Draws come from `ChaCha8Rng::seed_from_u64(seed)` in this order: depot
//! positions, one uniform per depot for the harvester count (shared by all
//! crops), field positions, one normal per field for its size, and in revenue
//! setting 2 one normal per field and crop. The RNG name, seed and parameters
//! are stored in the instance's `_gen` block.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{CostSpec, CropCatalog, Depot, Field, Instance};

pub const RNG_NAME: &str = "ChaCha8Rng";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub seed: u64,
    pub fields: usize,
    pub depots: usize,
    pub crops: usize,
    pub sigma_depot_km: f64,
    pub sigma_field_km: f64,
    pub rate_eur_per_km: f64,
    pub fixed_cost_eur: f64,
    pub maintenance_eur: f64,
    /// Normalised return per ha and crop.
    pub return_eur_per_ha: Vec<f64>,
    /// 1: revenue proportional to field size; 2: independent draw per field and crop.
    pub revenue_setting: u8,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            seed: 0,
            fields: 50,
            depots: 3,
            crops: 3,
            sigma_depot_km: 10.0,
            sigma_field_km: 15.0,
            rate_eur_per_km: 30.0,
            fixed_cost_eur: 1000.0,
            maintenance_eur: 0.0,
            return_eur_per_ha: vec![570.0, 600.0, 750.0],
            revenue_setting: 2,
        }
    }
}

impl GenParams {
    pub fn with_seed(seed: u64) -> Self {
        GenParams {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("fields", self.fields as f64),
            ("depots", self.depots as f64),
            ("crops", self.crops as f64),
            ("sigma_depot_km", self.sigma_depot_km),
            ("sigma_field_km", self.sigma_field_km),
            ("rate_eur_per_km", self.rate_eur_per_km),
            ("fixed_cost_eur", self.fixed_cost_eur),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.maintenance_eur >= 0.0) {
            return Err(Error::Validation(
                "maintenance_eur must be non-negative".into(),
            ));
        }
        if self.return_eur_per_ha.len() != self.crops {
            return Err(Error::Shape(format!(
                "{} returns for {} crops",
                self.return_eur_per_ha.len(),
                self.crops
            )));
        }
        if self
            .return_eur_per_ha
            .iter()
            .any(|r| !(*r > 0.0 && r.is_finite()))
        {
            return Err(Error::Validation("returns per ha must be positive".into()));
        }
        if !matches!(self.revenue_setting, 1 | 2) {
            return Err(Error::Validation(format!(
                "revenue setting {} is not 1 or 2",
                self.revenue_setting
            )));
        }
        Ok(())
    }
}

fn crop_names(k: usize) -> Vec<String> {
    const KNOWN: [&str; 3] = ["rapeseed", "barley", "wheat"];
    if k == KNOWN.len() {
        KNOWN.iter().map(|s| s.to_string()).collect()
    } else {
        (0..k).map(|i| format!("crop{i}")).collect()
    }
}

fn size_draw(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = StandardNormal.sample(rng);
    (20.0 + 10.0 * u).max(1.0)
}

pub fn generate_instance(params: &GenParams) -> Result<Instance> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let depot_pos =
        Normal::new(0.0, params.sigma_depot_km).map_err(|e| Error::Validation(e.to_string()))?;
    let field_pos =
        Normal::new(0.0, params.sigma_field_km).map_err(|e| Error::Validation(e.to_string()))?;

    let positions: Vec<(f64, f64)> = (0..params.depots)
        .map(|_| (depot_pos.sample(&mut rng), depot_pos.sample(&mut rng)))
        .collect();
    let depots = positions
        .into_iter()
        .enumerate()
        .map(|(id, (x, y))| {
            let u: f64 = rng.random();
            let n = ((5.0 * u).floor() as u32).max(1);
            Depot {
                id,
                x_km: x,
                y_km: y,
                maintenance_eur: params.maintenance_eur,
                harvesters: vec![n; params.crops],
            }
        })
        .collect();

    let positions: Vec<(f64, f64)> = (0..params.fields)
        .map(|_| (field_pos.sample(&mut rng), field_pos.sample(&mut rng)))
        .collect();
    let sizes: Vec<f64> = (0..params.fields).map(|_| size_draw(&mut rng)).collect();
    let fields = positions
        .into_iter()
        .zip(sizes)
        .enumerate()
        .map(|(id, ((x, y), size))| {
            let revenue = params
                .return_eur_per_ha
                .iter()
                .map(|r| match params.revenue_setting {
                    1 => size * r,
                    _ => size_draw(&mut rng) * r,
                })
                .collect();
            Field {
                id,
                x_km: x,
                y_km: y,
                size_ha: size,
                revenue_eur: revenue,
            }
        })
        .collect();

    let inst = Instance {
        crops: CropCatalog {
            names: crop_names(params.crops),
            fixed_cost_eur: params.fixed_cost_eur,
        },
        depots,
        fields,
        cost: CostSpec::rate(params.rate_eur_per_km),
        generation: Some(serde_json::json!({
            "rng": RNG_NAME,
            "seed": params.seed,
            "params": params,
        })),
    };
    Ok(inst)
}

/// Parameters recorded in an instance's `_gen` block, if any.
pub fn recorded_params(inst: &Instance) -> Option<GenParams> {
    let gen = inst.generation.as_ref()?;
    serde_json::from_value(gen.get("params")?.clone()).ok()
}
