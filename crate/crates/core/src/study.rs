//! Convergence and noise-consistency studies: perturb, reconstruct, and
//! tabulate over a grid of direction counts, orders and seeds.
//!
//! A convergence study is a noise study with the `none` schedule; the two
//! share this runner so their noiseless rows agree bit for bit. Each row
//! records the realized noise, the reached objective, the Nikodym and
//! Hausdorff distances to a polygonal stand-in for the truth, and the
//! theoretical envelope
//!
//! ```text
//! sqrt(2) max_i tan(gap_i / 2) + 6 sum_eps2 + a1 / (N + 1)
//! ```
//!
//! which reduces to the noiseless stability bound when no noise is drawn.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimator::{bound_stability2, reconstruct_with, BoundConfig, SolverConfig};
use crate::geometry::{ConvexPolygon, DirectionSet, ShapeModel};
use crate::moments::{shape_legendre_moments, MomentPolynomials};
use crate::noise::{perturb_detailed, NoisySpec};
use crate::{Error, Result};

/// Full description of a study run. `n_values` and `order_values` form the
/// cell grid; `pairs`, when given, overrides it with explicit `(n, N)`
/// cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub truth: ShapeModel,
    #[serde(default)]
    pub n_values: Vec<usize>,
    #[serde(rename = "N_values", default)]
    pub order_values: Vec<usize>,
    #[serde(default)]
    pub pairs: Option<Vec<[usize; 2]>>,
    pub seeds: Vec<u64>,
    pub noise: NoisySpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub bounds: BoundConfig,
    /// Boundary sample count when the truth is not a polygon; distances are
    /// measured against this inscribed polygon.
    #[serde(default = "default_truth_samples")]
    pub truth_samples: usize,
}

fn default_truth_samples() -> usize {
    1024
}

impl StudyConfig {
    /// The `(n, N)` cells in run order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        match &self.pairs {
            Some(pairs) => pairs.iter().map(|p| (p[0], p[1])).collect(),
            None => self
                .n_values
                .iter()
                .flat_map(|&n| self.order_values.iter().map(move |&order| (n, order)))
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let cells = self.cells();
        if cells.is_empty() {
            return Err(Error::InvalidConfig("study has no (n, N) cells".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("study has no seeds".into()));
        }
        if self.truth_samples < 3 {
            return Err(Error::InvalidConfig("truth_samples must be at least 3".into()));
        }
        self.truth.validate_in_unit_square()
    }

    fn truth_polygon(&self) -> Result<ConvexPolygon> {
        match &self.truth {
            ShapeModel::Polygon(p) => Ok(p.clone()),
            shape => {
                let poly = shape.to_fine_polygon(self.truth_samples);
                if poly.is_degenerate() {
                    return Err(Error::DegeneratePolygon);
                }
                Ok(poly)
            }
        }
    }
}

/// One `(n, N, seed)` outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    #[serde(rename = "N")]
    pub order: usize,
    pub seed: u64,
    pub sigma2: f64,
    pub sum_eps2: f64,
    pub objective: f64,
    pub nikodym: f64,
    pub hausdorff: f64,
    pub bound_envelope: f64,
}

/// Runs every `(cell, seed)` job and returns rows ordered by cell, then
/// seed. Jobs run in parallel; the ordering is restored afterwards, so the
/// output never depends on scheduling.
pub fn run_study(config: &StudyConfig) -> Result<Vec<StudyRow>> {
    config.validate()?;
    let truth_poly = config.truth_polygon()?;
    let cells = config.cells();
    // one shared moment family per cell, with the exact target and the
    // noiseless part of the envelope computed once per cell
    let mut families = Vec::with_capacity(cells.len());
    let mut jobs = Vec::new();
    for (cell_idx, &(n, order)) in cells.iter().enumerate() {
        let directions = DirectionSet::equidistant(n)?;
        let exact = shape_legendre_moments(&config.truth, order)?;
        let stability = bound_stability2(&directions, order, &config.bounds)?;
        families.push(MomentPolynomials::new(directions, order)?);
        for (seed_idx, &seed) in config.seeds.iter().enumerate() {
            jobs.push((cell_idx, seed_idx, n, order, seed, exact.clone(), stability));
        }
    }
    let mut rows: Vec<(usize, usize, StudyRow)> = jobs
        .par_iter()
        .map(|(cell_idx, seed_idx, n, order, seed, exact, stability)| {
            let noisy =
                perturb_detailed(exact, &NoisySpec { seed: *seed, ..config.noise })?;
            let solver = SolverConfig { seed: *seed, ..config.solver };
            let res =
                reconstruct_with(&families[*cell_idx], &noisy.grid, &solver, Some(&truth_poly))?;
            let errs = res.truth_errors.expect("truth requested");
            let row = StudyRow {
                n: *n,
                order: *order,
                seed: *seed,
                sigma2: noisy.sigma2,
                sum_eps2: noisy.sum_eps2,
                objective: res.objective,
                nikodym: errs.nikodym,
                hausdorff: errs.hausdorff,
                bound_envelope: stability + 6.0 * noisy.sum_eps2,
            };
            Ok((*cell_idx, *seed_idx, row))
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|(cell, seed, _)| (*cell, *seed));
    Ok(rows.into_iter().map(|(_, _, row)| row).collect())
}

/// CSV with the fixed column set the plots consume.
pub fn rows_to_csv(rows: &[StudyRow]) -> String {
    let mut out =
        String::from("n,N,seed,sigma2,sum_eps2,objective,nikodym,hausdorff,bound_envelope\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.order,
            r.seed,
            r.sigma2,
            r.sum_eps2,
            r.objective,
            r.nikodym,
            r.hausdorff,
            r.bound_envelope
        ));
    }
    out
}

/// Per-cell medians over seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellMedian {
    pub n: usize,
    #[serde(rename = "N")]
    pub order: usize,
    pub seeds: usize,
    pub median_objective: f64,
    pub median_nikodym: f64,
    pub median_hausdorff: f64,
    pub median_envelope: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Groups rows by `(n, N)` in first-appearance order and takes medians.
pub fn cell_medians(rows: &[StudyRow]) -> Vec<CellMedian> {
    let mut order_of_cells: Vec<(usize, usize)> = Vec::new();
    for r in rows {
        if !order_of_cells.contains(&(r.n, r.order)) {
            order_of_cells.push((r.n, r.order));
        }
    }
    order_of_cells
        .into_iter()
        .map(|(n, order)| {
            let cell: Vec<&StudyRow> =
                rows.iter().filter(|r| r.n == n && r.order == order).collect();
            CellMedian {
                n,
                order,
                seeds: cell.len(),
                median_objective: median(cell.iter().map(|r| r.objective).collect()),
                median_nikodym: median(cell.iter().map(|r| r.nikodym).collect()),
                median_hausdorff: median(cell.iter().map(|r| r.hausdorff).collect()),
                median_envelope: median(cell.iter().map(|r| r.bound_envelope).collect()),
            }
        })
        .collect()
}

pub fn medians_to_csv(medians: &[CellMedian]) -> String {
    let mut out = String::from(
        "n,N,seeds,median_objective,median_nikodym,median_hausdorff,median_envelope\n",
    );
    for m in medians {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            m.n,
            m.order,
            m.seeds,
            m.median_objective,
            m.median_nikodym,
            m.median_hausdorff,
            m.median_envelope
        ));
    }
    out
}
