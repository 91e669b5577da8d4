use crate::instance::{CostSpec, CropCatalog, Depot, Field, Instance};

/// Planar instance: `depots[d] = (x, y, harvesters per crop)`, `fields[l] = (x, y, revenue per crop)`.
pub fn planar(
    depots: &[(f64, f64, Vec<u32>)],
    fields: &[(f64, f64, Vec<f64>)],
    rate: f64,
    fixed: f64,
) -> Instance {
    let k = depots[0].2.len();
    Instance {
        crops: CropCatalog {
            names: (0..k).map(|i| format!("crop{i}")).collect(),
            fixed_cost_eur: fixed,
        },
        depots: depots
            .iter()
            .enumerate()
            .map(|(id, (x, y, h))| Depot {
                id,
                x_km: *x,
                y_km: *y,
                maintenance_eur: 0.0,
                harvesters: h.clone(),
            })
            .collect(),
        fields: fields
            .iter()
            .enumerate()
            .map(|(id, (x, y, r))| Field {
                id,
                x_km: *x,
                y_km: *y,
                size_ha: 1.0,
                revenue_eur: r.clone(),
            })
            .collect(),
        cost: CostSpec::rate(rate),
        generation: None,
    }
}
