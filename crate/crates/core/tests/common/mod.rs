#![allow(dead_code)]

use harvestplan::{CostSpec, CropCatalog, Depot, Field, Instance};
use proptest::prelude::*;

/// Planar instance with unit field sizes and no maintenance cost.
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

/// Random planar instance with `k` crops, `d` depots and `l` fields.
pub fn arb_instance(
    k: usize,
    d: std::ops::RangeInclusive<usize>,
    l: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = Instance> {
    (d, l).prop_flat_map(move |(d, l)| {
        let depot = (
            0.0..10.0f64,
            0.0..10.0f64,
            prop::collection::vec(1u32..=3, k),
        );
        let field = (
            0.0..10.0f64,
            0.0..10.0f64,
            prop::collection::vec(200.0..900.0f64, k),
        );
        (
            prop::collection::vec(depot, d),
            prop::collection::vec(field, l),
        )
            .prop_map(|(ds, fs)| planar(&ds, &fs, 30.0, 100.0))
    })
}
