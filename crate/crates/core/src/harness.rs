//! Benchmark sweeps, metric tables and SVG rendering of plans.
//!
//! CPU times are wall-clock seconds around the solver calls.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::capr::{plan, HarvestPlan, PlanOptions, DEFAULT_MAX_SEC_ITERATIONS};
use crate::error::{Error, Result};
use crate::expgen::{generate_instance, GenParams};
use crate::instance::Instance;
use crate::milp::SolveLimits;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    #[serde(rename = "N_z")]
    pub n_z: usize,
    #[serde(rename = "N_eq")]
    pub n_eq: usize,
    #[serde(rename = "N_ineq_nosec")]
    pub n_ineq_nosec: usize,
    #[serde(rename = "N_ineq_final")]
    pub n_ineq_final: usize,
    /// IP solves of the SEC loop, the initial one included.
    pub iter_sec: usize,
    pub cpu_s: f64,
    pub tsp_iter: usize,
    pub tsp_cpu_s: f64,
    pub converged: bool,
    #[serde(rename = "J_eur")]
    pub j_eur: f64,
}

pub const CSV_HEADER: [&str; 13] = [
    "seed",
    "n",
    "k_tilde",
    "N_z",
    "N_eq",
    "N_ineq_nosec",
    "N_ineq_final",
    "iter_sec",
    "cpu_s",
    "tsp_iter",
    "tsp_cpu_s",
    "converged",
    "J_eur",
];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub seed: u64,
    pub n: u8,
    pub k_tilde: usize,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub seeds: Vec<u64>,
    pub variants: Vec<u8>,
    pub k_tildes: Vec<usize>,
    pub max_sec_iterations: usize,
    /// Generator template; the seed is replaced per run.
    pub gen: GenParams,
    pub limits: SolveLimits,
    /// Designated depot of variants 1 and 5.
    pub depot: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seeds: (1..=10).collect(),
            variants: (1..=8).collect(),
            k_tildes: vec![10, 20],
            max_sec_iterations: DEFAULT_MAX_SEC_ITERATIONS,
            gen: GenParams::default(),
            limits: SolveLimits::default(),
            depot: 0,
        }
    }
}

/// Runs every (seed, n, k̃) combination in that order. `observe` sees each
/// successful plan with its instance. A failed run becomes a row with
/// `converged = false` and `J_eur = NaN`.
pub fn run_benchmark_with(
    config: &BenchConfig,
    mut observe: impl FnMut(&Instance, &HarvestPlan),
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    if config.variants.is_empty() || config.k_tildes.is_empty() {
        return Ok(rows);
    }
    for &seed in &config.seeds {
        let inst = generate_instance(&GenParams {
            seed,
            ..config.gen.clone()
        })?;
        for &n in &config.variants {
            for &k_tilde in &config.k_tildes {
                let options = PlanOptions {
                    depot: Some(config.depot),
                    max_sec_iterations: config.max_sec_iterations,
                    limits: config.limits,
                    ..Default::default()
                };
                let metrics = match plan(&inst, n, k_tilde, seed, &options) {
                    Ok(p) => {
                        observe(&inst, &p);
                        p.metrics
                    }
                    Err(e) => {
                        log::warn!("seed {seed}, CApR-{n}, k_tilde {k_tilde} failed: {e}");
                        RunMetrics {
                            converged: false,
                            j_eur: f64::NAN,
                            ..Default::default()
                        }
                    }
                };
                log::info!(
                    "seed {seed} CApR-{n} k={k_tilde}: J={:.2} iter={} cpu={:.2}s",
                    metrics.j_eur,
                    metrics.iter_sec,
                    metrics.cpu_s
                );
                rows.push(BenchRow {
                    seed,
                    n,
                    k_tilde,
                    metrics,
                });
            }
        }
    }
    Ok(rows)
}

pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    run_benchmark_with(config, |_, _| {})
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.seed.to_string(),
            r.n.to_string(),
            r.k_tilde.to_string(),
            m.n_z.to_string(),
            m.n_eq.to_string(),
            m.n_ineq_nosec.to_string(),
            m.n_ineq_final.to_string(),
            m.iter_sec.to_string(),
            m.cpu_s.to_string(),
            m.tsp_iter.to_string(),
            m.tsp_cpu_s.to_string(),
            m.converged.to_string(),
            m.j_eur.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Validation(format!("bad {} value {:?}", CSV_HEADER[i], rec.get(i))))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Validation(format!("unexpected header {header:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(BenchRow {
                seed: field(&rec, 0)?,
                n: field(&rec, 1)?,
                k_tilde: field(&rec, 2)?,
                metrics: RunMetrics {
                    n_z: field(&rec, 3)?,
                    n_eq: field(&rec, 4)?,
                    n_ineq_nosec: field(&rec, 5)?,
                    n_ineq_final: field(&rec, 6)?,
                    iter_sec: field(&rec, 7)?,
                    cpu_s: field(&rec, 8)?,
                    tsp_iter: field(&rec, 9)?,
                    tsp_cpu_s: field(&rec, 10)?,
                    converged: field(&rec, 11)?,
                    j_eur: field(&rec, 12)?,
                },
            })
        })
        .collect()
}

/// Means over the runs of one (n, k̃) cell; `p_conv` in percent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: u8,
    pub k_tilde: usize,
    pub runs: usize,
    pub n_z: f64,
    pub n_eq: f64,
    pub n_ineq_nosec: f64,
    pub n_ineq_final: f64,
    pub iter_sec: f64,
    pub cpu_s: f64,
    pub tsp_iter: f64,
    pub tsp_cpu_s: f64,
    pub p_conv: f64,
    /// Mean profit over runs that produced a plan.
    pub j_eur: f64,
}

pub fn p_conv(rows: &[BenchRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    100.0 * rows.iter().filter(|r| r.metrics.converged).count() as f64 / rows.len() as f64
}

pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryRow> {
    let mut cells: Vec<(u8, usize)> = rows.iter().map(|r| (r.n, r.k_tilde)).collect();
    cells.sort_unstable();
    cells.dedup();
    cells
        .into_iter()
        .map(|(n, k_tilde)| {
            let cell: Vec<BenchRow> = rows
                .iter()
                .filter(|r| r.n == n && r.k_tilde == k_tilde)
                .cloned()
                .collect();
            let mean = |f: &dyn Fn(&RunMetrics) -> f64| {
                cell.iter().map(|r| f(&r.metrics)).sum::<f64>() / cell.len() as f64
            };
            let solved: Vec<f64> = cell
                .iter()
                .map(|r| r.metrics.j_eur)
                .filter(|j| j.is_finite())
                .collect();
            SummaryRow {
                n,
                k_tilde,
                runs: cell.len(),
                n_z: mean(&|m| m.n_z as f64),
                n_eq: mean(&|m| m.n_eq as f64),
                n_ineq_nosec: mean(&|m| m.n_ineq_nosec as f64),
                n_ineq_final: mean(&|m| m.n_ineq_final as f64),
                iter_sec: mean(&|m| m.iter_sec as f64),
                cpu_s: mean(&|m| m.cpu_s),
                tsp_iter: mean(&|m| m.tsp_iter as f64),
                tsp_cpu_s: mean(&|m| m.tsp_cpu_s),
                p_conv: p_conv(&cell),
                j_eur: if solved.is_empty() {
                    f64::NAN
                } else {
                    solved.iter().sum::<f64>() / solved.len() as f64
                },
            }
        })
        .collect()
}

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];
const UNSERVED: &str = "#bbbbbb";

fn crop_color(k: usize) -> &'static str {
    PALETTE[k % PALETTE.len()]
}

/// SVG drawing of depots (squares), fields (discs coloured by crop) and one
/// polyline per crop tour, anchored at the basis depot when there is one.
pub fn render_plan(plan: Option<&HarvestPlan>, inst: &Instance) -> String {
    const SIZE: f64 = 800.0;
    const MARGIN: f64 = 40.0;
    let pts: Vec<[f64; 2]> = inst
        .depots
        .iter()
        .map(|d| [d.x_km, d.y_km])
        .chain(inst.fields.iter().map(|f| f.position()))
        .collect();
    let (mut x0, mut y0, mut x1, mut y1) = (
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    );
    for p in &pts {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    if pts.is_empty() {
        (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let px = |p: [f64; 2]| {
        (
            MARGIN + (p[0] - x0) * scale,
            SIZE - MARGIN - (p[1] - y0) * scale,
        )
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(plan) = plan {
        for tour in &plan.tours {
            let mut route: Vec<[f64; 2]> = tour
                .fields
                .iter()
                .map(|&l| inst.fields[l].position())
                .collect();
            if let Some(d) = plan.depot {
                let dp = [inst.depots[d].x_km, inst.depots[d].y_km];
                route.insert(0, dp);
                route.push(dp);
            }
            let coords: Vec<String> = route
                .iter()
                .map(|&p| {
                    let (x, y) = px(p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline class="tour" data-crop="{}" fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
                tour.crop,
                crop_color(tour.crop),
                coords.join(" ")
            );
        }
    }
    for (l, f) in inst.fields.iter().enumerate() {
        let (x, y) = px(f.position());
        let crop = plan.and_then(|p| p.assignment.get(l).copied().flatten());
        let fill = crop.map_or(UNSERVED, crop_color);
        let _ = writeln!(
            s,
            r#"<circle class="field" data-field="{l}" cx="{x:.2}" cy="{y:.2}" r="5" fill="{fill}" stroke="black" stroke-width="0.5"/>"#
        );
    }
    for d in &inst.depots {
        let (x, y) = px([d.x_km, d.y_km]);
        let basis = plan.is_some_and(|p| p.depot == Some(d.id));
        let _ = writeln!(
            s,
            r#"<rect class="depot" data-depot="{}" x="{:.2}" y="{:.2}" width="12" height="12" fill="{}" stroke="black"/>"#,
            d.id,
            x - 6.0,
            y - 6.0,
            if basis { "black" } else { "white" }
        );
    }
    s.push_str("</svg>\n");
    s
}
