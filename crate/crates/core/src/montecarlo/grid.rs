use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scenario::{CostFunction, DecisionSpace, ObjectSpace, Prior, Scenario};

/// Fixed-point scale for histogram weights; integer sums make merges exactly associative.
const FIXED_SCALE: f64 = 18_446_744_073_709_551_616.0; // 2^64

fn to_fixed(w: f64) -> u128 {
    // `as` saturates at the u128 range
    (w * FIXED_SCALE).round() as u128
}

fn from_fixed(x: u128) -> f64 {
    x as f64 / FIXED_SCALE
}

/// One axis of a performance grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Axis {
    /// `bins` equal-width bins over `[lo, hi]`.
    Bins { lo: f64, hi: f64, bins: usize },
    /// Exact values (discrete spaces).
    Points { points: Vec<f64> },
}

impl Axis {
    pub fn bins(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || bins == 0 {
            return Err(invalid(format!("axis needs finite lo < hi and bins > 0, got [{lo}, {hi}] x {bins}")));
        }
        Ok(Axis::Bins { lo, hi, bins })
    }

    pub fn len(&self) -> usize {
        match self {
            Axis::Bins { bins, .. } => *bins,
            Axis::Points { points } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Axis::Points { .. })
    }

    pub fn locate(&self, x: f64) -> Option<usize> {
        match self {
            Axis::Bins { lo, hi, bins } => {
                if !(x >= *lo && x <= *hi) {
                    return None;
                }
                Some((((x - lo) / (hi - lo) * *bins as f64) as usize).min(bins - 1))
            }
            Axis::Points { points } => points.binary_search_by(|p| p.total_cmp(&x)).ok(),
        }
    }

    pub fn center(&self, i: usize) -> f64 {
        match self {
            Axis::Bins { lo, hi, bins } => lo + (i as f64 + 0.5) * (hi - lo) / *bins as f64,
            Axis::Points { points } => points[i],
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.center(i)).collect()
    }

    /// Bin width, or 1 for point axes.
    pub fn width(&self) -> f64 {
        match self {
            Axis::Bins { lo, hi, bins } => (hi - lo) / *bins as f64,
            Axis::Points { .. } => 1.0,
        }
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        match self {
            Axis::Bins { lo, .. } => {
                let w = self.width();
                (lo + i as f64 * w, lo + (i + 1) as f64 * w)
            }
            Axis::Points { points } => (points[i], points[i]),
        }
    }
}

/// Decision (column) and object (row) axes of a performance grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub decision: Axis,
    pub object: Axis,
}

pub const DEFAULT_DECISION_BINS: usize = 200;
pub const DEFAULT_OBJECT_BINS: usize = 64;
/// Prior tail mass left outside an unbounded object axis, per side.
const OBJECT_TAIL: f64 = 1e-3;

fn prior_quantile(prior: &Prior, p: f64) -> f64 {
    let (mut a, mut b) = (-1.0, 1.0);
    while prior.cdf(a) > p {
        a *= 2.0;
    }
    while prior.cdf(b) < p {
        b *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if prior.cdf(m) < p {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

impl GridSpec {
    /// Discrete spaces use their points; continuous ones use equal bins over the bounded hull,
    /// with unbounded object ends cut at the prior's 0.1% tails and unbounded decision ends
    /// taken from the object axis.
    pub fn for_scenario(scenario: &Scenario, decision_bins: usize, object_bins: usize) -> Result<Self> {
        let object = match scenario.object() {
            ObjectSpace::Points(p) => Axis::Points { points: p.clone() },
            ObjectSpace::Interval { lo, hi } => {
                let lo = if lo.is_finite() { *lo } else { prior_quantile(scenario.prior(), OBJECT_TAIL) };
                let hi = if hi.is_finite() { *hi } else { prior_quantile(scenario.prior(), 1.0 - OBJECT_TAIL) };
                Axis::bins(lo, hi, object_bins)?
            }
        };
        let (olo, ohi) = match &object {
            Axis::Bins { lo, hi, .. } => (*lo, *hi),
            Axis::Points { points } => (points[0], points[points.len() - 1]),
        };
        let decision = match scenario.decision() {
            DecisionSpace::Points(p) => Axis::Points { points: p.clone() },
            k => {
                let (lo, hi) = k.hull();
                let lo = if lo.is_finite() { lo } else { olo };
                let hi = if hi.is_finite() { hi } else { ohi };
                Axis::bins(lo, hi, decision_bins)?
            }
        };
        Ok(Self { decision, object })
    }
}

/// Weighted 2-D histogram over (object, decision) with exact integer accumulation.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramAccumulator {
    spec: GridSpec,
    cells: Vec<u128>,
    row_weight: Vec<u128>,
    row_weight_sq: Vec<u128>,
    row_count: Vec<u64>,
    row_outside: Vec<u128>,
    outside_object: u64,
    saturated: bool,
}

impl HistogramAccumulator {
    pub fn new(spec: GridSpec) -> Self {
        let (r, c) = (spec.object.len(), spec.decision.len());
        Self {
            spec,
            cells: vec![0; r * c],
            row_weight: vec![0; r],
            row_weight_sq: vec![0; r],
            row_count: vec![0; r],
            row_outside: vec![0; r],
            outside_object: 0,
            saturated: false,
        }
    }

    pub fn add(&mut self, h: f64, c: f64, w: f64) {
        let Some(r) = self.spec.object.locate(h) else {
            self.outside_object += 1;
            return;
        };
        let fw = to_fixed(w);
        let fw2 = to_fixed(w * w);
        self.saturated |= fw == u128::MAX || fw2 == u128::MAX;
        self.row_count[r] += 1;
        self.row_weight[r] = self.row_weight[r].saturating_add(fw);
        self.row_weight_sq[r] = self.row_weight_sq[r].saturating_add(fw2);
        match self.spec.decision.locate(c) {
            Some(k) => {
                let cell = &mut self.cells[r * self.spec.decision.len() + k];
                *cell = cell.saturating_add(fw);
            }
            None => self.row_outside[r] = self.row_outside[r].saturating_add(fw),
        }
    }

    pub fn merge(&mut self, other: &HistogramAccumulator) -> Result<()> {
        if self.spec != other.spec {
            return Err(invalid("cannot merge histograms over different grids"));
        }
        let add = |a: &mut [u128], b: &[u128]| a.iter_mut().zip(b).for_each(|(x, y)| *x = x.saturating_add(*y));
        add(&mut self.cells, &other.cells);
        add(&mut self.row_weight, &other.row_weight);
        add(&mut self.row_weight_sq, &other.row_weight_sq);
        add(&mut self.row_outside, &other.row_outside);
        self.row_count.iter_mut().zip(&other.row_count).for_each(|(x, y)| *x += y);
        self.outside_object += other.outside_object;
        self.saturated |= other.saturated;
        Ok(())
    }

    /// Row-normalized density estimate.
    pub fn finish(&self) -> PerformanceGrid {
        let (rows, cols) = (self.spec.object.len(), self.spec.decision.len());
        let width = self.spec.decision.width();
        let mut density = vec![0.0; rows * cols];
        let mut integrals = Vec::with_capacity(rows);
        let mut empty_rows = Vec::new();
        let mut outside = Vec::with_capacity(rows);
        let mut effective = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &self.cells[r * cols..(r + 1) * cols];
            let inside: u128 = row.iter().fold(0u128, |a, b| a.saturating_add(*b));
            let total = from_fixed(self.row_weight[r]);
            outside.push(if total > 0.0 { from_fixed(self.row_outside[r]) / total } else { 0.0 });
            let w2 = from_fixed(self.row_weight_sq[r]);
            effective.push(if w2 > 0.0 { total * total / w2 } else { 0.0 });
            if inside == 0 {
                empty_rows.push(r);
                integrals.push(None);
                continue;
            }
            let inside = inside as f64;
            let out = &mut density[r * cols..(r + 1) * cols];
            for (d, &cell) in out.iter_mut().zip(row) {
                *d = cell as f64 / inside / width;
            }
            integrals.push(Some(out.iter().sum::<f64>() * width));
        }
        let max_deviation = integrals.iter().flatten().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
        PerformanceGrid {
            spec: self.spec.clone(),
            density,
            row_samples: self.row_count.clone(),
            effective_samples: effective,
            report: NormalizationReport {
                row_integrals: integrals,
                empty_rows,
                max_deviation,
                outside_decision_fraction: outside,
                outside_object_samples: self.outside_object,
                saturated: self.saturated,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizationReport {
    /// `Σ_c density·Δc` per row; `None` for rows without in-range samples.
    pub row_integrals: Vec<Option<f64>>,
    pub empty_rows: Vec<usize>,
    pub max_deviation: f64,
    /// Weight fraction per row whose decision fell outside the decision axis.
    pub outside_decision_fraction: Vec<f64>,
    pub outside_object_samples: u64,
    /// Some weight exceeded the fixed-point range and was clamped.
    pub saturated: bool,
}

/// Estimated `d_{C|H}(c, h)`: rows are object bins, columns decision bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceGrid {
    pub spec: GridSpec,
    pub density: Vec<f64>,
    pub row_samples: Vec<u64>,
    pub effective_samples: Vec<f64>,
    pub report: NormalizationReport,
}

impl PerformanceGrid {
    pub fn rows(&self) -> usize {
        self.spec.object.len()
    }

    pub fn cols(&self) -> usize {
        self.spec.decision.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.density[r * self.cols()..(r + 1) * self.cols()]
    }

    pub fn is_empty_row(&self, r: usize) -> bool {
        self.report.row_integrals[r].is_none()
    }

    /// Mean and standard deviation of the decision under row `r`, using bin centers.
    pub fn row_moments(&self, r: usize) -> Option<(f64, f64)> {
        if self.is_empty_row(r) {
            return None;
        }
        let w = self.spec.decision.width();
        let centers = self.spec.decision.centers();
        let mean: f64 = self.row(r).iter().zip(&centers).map(|(d, c)| d * w * c).sum();
        let var: f64 = self.row(r).iter().zip(&centers).map(|(d, c)| d * w * (c - mean) * (c - mean)).sum();
        Some((mean, var.max(0.0).sqrt()))
    }

    /// Total estimated probability mass on decisions above `c` (bins whose lower edge is ≥ `c`).
    pub fn mass_above(&self, r: usize, c: f64) -> f64 {
        let w = self.spec.decision.width();
        (0..self.cols())
            .filter(|&k| self.spec.decision.edges(k).0 >= c)
            .map(|k| self.row(r)[k] * w)
            .sum()
    }
}

/// Bayes risk integrated from a performance grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRisk {
    /// Risk over rows with samples, renormalized by their prior mass.
    pub value: f64,
    /// Prior mass of the rows that contributed.
    pub covered_mass: f64,
    pub warnings: Vec<String>,
}

pub fn risk_from_grid(grid: &PerformanceGrid, prior: &Prior, cost: &CostFunction) -> GridRisk {
    let centers = grid.spec.decision.centers();
    let w = grid.spec.decision.width();
    let mut value = 0.0;
    let mut covered = 0.0;
    let mut missing = 0.0;
    let mut warnings = Vec::new();
    for r in 0..grid.rows() {
        let (a, b) = grid.spec.object.edges(r);
        let mass = prior.mass(a, b);
        if grid.is_empty_row(r) {
            if mass > 0.0 {
                missing += mass;
                warnings.push(format!("object row {r} has prior mass {mass:.3e} but no samples"));
            }
            continue;
        }
        let h = grid.spec.object.center(r);
        let row_risk: f64 = grid.row(r).iter().zip(&centers).map(|(d, c)| d * w * cost.cost(*c, h)).sum();
        value += mass * row_risk;
        covered += mass;
    }
    if covered < 1.0 - 1e-9 {
        warnings.push(format!(
            "grid rows cover prior mass {covered:.6}; {missing:.3e} lies in empty rows, the rest outside the object axis"
        ));
    }
    GridRisk { value: if covered > 0.0 { value / covered } else { f64::NAN }, covered_mass: covered, warnings }
}
