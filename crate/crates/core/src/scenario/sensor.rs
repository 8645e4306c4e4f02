use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::spaces::{Domain, FeatureSpace};
use crate::error::{invalid, Result};
use crate::math::{ln_factorial, logsumexp, open_unit, LN_SQRT_2PI};

/// Lower-triangular factor `V` of a covariance `V·Vᵀ`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CholFactor {
    n: usize,
    l: Vec<f64>,
    diagonal: bool,
    log_det: f64,
}

impl CholFactor {
    pub fn from_lower(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(invalid("covariance factor must be a non-empty square matrix"));
        }
        let mut l = vec![0.0; n * n];
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if j > i && x != 0.0 {
                    return Err(invalid("covariance factor must be lower triangular"));
                }
                if !x.is_finite() {
                    return Err(invalid("covariance factor entries must be finite"));
                }
                l[i * n + j] = x;
            }
            if !(row[i] > 0.0) {
                return Err(invalid("covariance factor needs a strictly positive diagonal"));
            }
        }
        Ok(Self::build(n, l))
    }

    /// Factor a full symmetric positive-definite covariance matrix.
    pub fn from_covariance(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(invalid("covariance must be a non-empty square matrix"));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        if (&m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(1.0) {
            return Err(invalid("covariance must be symmetric"));
        }
        let chol = m.cholesky().ok_or_else(|| invalid("covariance is not positive definite"))?;
        let lower = chol.l();
        let l = (0..n * n).map(|k| lower[(k / n, k % n)]).collect();
        Ok(Self::build(n, l))
    }

    pub fn diagonal(sds: &[f64]) -> Result<Self> {
        let n = sds.len();
        if n == 0 || sds.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(invalid("standard deviations must be positive"));
        }
        let mut l = vec![0.0; n * n];
        for (i, s) in sds.iter().enumerate() {
            l[i * n + i] = *s;
        }
        Ok(Self::build(n, l))
    }

    fn build(n: usize, l: Vec<f64>) -> Self {
        let diagonal = (0..n).all(|i| (0..i).all(|j| l[i * n + j] == 0.0));
        let log_det = (0..n).map(|i| l[i * n + i].ln()).sum();
        Self { n, l, diagonal, log_det }
    }

    pub fn dims(&self) -> usize {
        self.n
    }

    /// `Σ ln V_ii`, i.e. half the log-determinant of the covariance.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// In-place `r ← V⁻¹ r`.
    pub fn solve_lower(&self, r: &mut [f64]) {
        let n = self.n;
        if self.diagonal {
            for i in 0..n {
                r[i] /= self.l[i * n + i];
            }
            return;
        }
        for i in 0..n {
            let mut acc = r[i];
            for j in 0..i {
                acc -= self.l[i * n + j] * r[j];
            }
            r[i] = acc / self.l[i * n + i];
        }
    }

    /// In-place `r ← V⁻ᵀ r`.
    pub fn solve_upper_transposed(&self, r: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut acc = r[i];
            for j in i + 1..n {
                acc -= self.l[j * n + i] * r[j];
            }
            r[i] = acc / self.l[i * n + i];
        }
    }

    /// `out ← V g`.
    pub fn apply(&self, g: &[f64], out: &mut [f64]) {
        let n = self.n;
        if self.diagonal {
            for i in 0..n {
                out[i] = self.l[i * n + i] * g[i];
            }
            return;
        }
        for i in 0..n {
            out[i] = (0..=i).map(|j| self.l[i * n + j] * g[j]).sum();
        }
    }

    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| self.l[i * n + k] * self.l[j * n + k]).sum()).collect())
            .collect()
    }
}

/// Mean vector as a function of the object value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeanLaw {
    /// `offset + slope · h`.
    Affine { offset: Vec<f64>, slope: Vec<f64> },
    /// One mean vector per object point (discrete object spaces only).
    Table { points: Vec<f64>, values: Vec<Vec<f64>> },
}

/// Covariance factor as a function of the object value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovLaw {
    Fixed(CholFactor),
    /// Factor scaled by `1 / |h|`.
    InverseObject(CholFactor),
    /// One factor per object point (discrete object spaces only).
    Table { points: Vec<f64>, factors: Vec<CholFactor> },
}

/// Conditional density family `d_{A|H}(·, h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Gaussian { mean: MeanLaw, cov: CovLaw },
    /// Exponential with rate `h`.
    Exponential,
    /// Poisson with rate `h`.
    Poisson,
    /// Uniform on `[0, h]`.
    UniformToObject,
    /// Discrete outcomes with a conditional probability table per object point.
    Categorical { objects: Vec<f64>, outcomes: Vec<f64>, probs: Vec<Vec<f64>> },
    /// Weighted mixture; weights must sum to one.
    Mixture { weights: Vec<f64>, components: Vec<Family> },
}

fn table_index(points: &[f64], h: f64) -> Option<usize> {
    points.binary_search_by(|p| p.total_cmp(&h)).ok()
}

impl Family {
    fn dims(&self) -> usize {
        match self {
            Family::Gaussian { mean, .. } => match mean {
                MeanLaw::Affine { offset, .. } => offset.len(),
                MeanLaw::Table { values, .. } => values.first().map_or(0, Vec::len),
            },
            Family::Mixture { components, .. } => components.first().map_or(0, Family::dims),
            _ => 1,
        }
    }

    fn validate(&self, space: &FeatureSpace) -> Result<()> {
        let n = space.dims();
        if self.dims() != n {
            return Err(invalid(format!(
                "family has {} dimensions but feature space has {n}",
                self.dims()
            )));
        }
        let all = |pred: fn(&Domain) -> bool| space.domains().iter().all(pred);
        match self {
            Family::Gaussian { mean, cov } => {
                if !all(|d| matches!(d, Domain::Real)) {
                    return Err(invalid("gaussian sensors need real-line feature domains"));
                }
                match mean {
                    MeanLaw::Affine { offset, slope } => {
                        if slope.len() != n || offset.iter().chain(slope).any(|x| !x.is_finite()) {
                            return Err(invalid("affine mean needs finite offset and slope of equal length"));
                        }
                    }
                    MeanLaw::Table { points, values } => {
                        if points.len() != values.len() || values.iter().any(|v| v.len() != n) {
                            return Err(invalid("mean table needs one vector per object point"));
                        }
                    }
                }
                match cov {
                    CovLaw::Fixed(f) | CovLaw::InverseObject(f) if f.dims() != n => {
                        return Err(invalid("covariance factor dimension mismatch"))
                    }
                    CovLaw::Table { points, factors } => {
                        if points.len() != factors.len() || factors.iter().any(|f| f.dims() != n) {
                            return Err(invalid("covariance table needs one factor per object point"));
                        }
                    }
                    _ => {}
                }
            }
            Family::Exponential | Family::UniformToObject => {
                if !all(|d| matches!(d, Domain::NonNegative)) {
                    return Err(invalid("exponential/uniform sensors need a half-line feature domain"));
                }
            }
            Family::Poisson => {
                if !all(|d| matches!(d, Domain::NonNegativeIntegers)) {
                    return Err(invalid("poisson sensors need a nonnegative-integer feature domain"));
                }
            }
            Family::Categorical { objects, outcomes, probs } => {
                if space.domains() != [Domain::Finite(outcomes.clone())] {
                    return Err(invalid("categorical sensors need a finite feature domain of their outcomes"));
                }
                if probs.len() != objects.len() || probs.iter().any(|row| row.len() != outcomes.len()) {
                    return Err(invalid("categorical table shape mismatch"));
                }
                for row in probs {
                    if row.iter().any(|p| !(*p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                        return Err(invalid("categorical rows must be probability vectors"));
                    }
                }
            }
            Family::Mixture { weights, components } => {
                if weights.len() != components.len() || weights.is_empty() {
                    return Err(invalid("mixture needs one weight per component"));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(invalid("mixture weights must be nonnegative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(invalid(format!("mixture weights sum to {total}, not 1")));
                }
                for c in components {
                    c.validate(space)?;
                }
            }
        }
        Ok(())
    }

    /// Whether the family is defined at object value `h`.
    fn accepts_object(&self, h: f64) -> bool {
        match self {
            Family::Gaussian { mean, cov } => {
                let mean_ok = match mean {
                    MeanLaw::Affine { .. } => h.is_finite(),
                    MeanLaw::Table { points, .. } => table_index(points, h).is_some(),
                };
                let cov_ok = match cov {
                    CovLaw::Fixed(_) => true,
                    CovLaw::InverseObject(_) => h != 0.0 && h.is_finite(),
                    CovLaw::Table { points, .. } => table_index(points, h).is_some(),
                };
                mean_ok && cov_ok
            }
            Family::Exponential | Family::UniformToObject => h > 0.0 && h.is_finite(),
            Family::Poisson => h >= 0.0 && h.is_finite(),
            Family::Categorical { objects, .. } => table_index(objects, h).is_some(),
            Family::Mixture { components, .. } => components.iter().all(|c| c.accepts_object(h)),
        }
    }

    fn gaussian_parts<'a>(mean: &'a MeanLaw, cov: &'a CovLaw, h: f64, mu: &mut [f64]) -> (&'a CholFactor, f64) {
        match mean {
            MeanLaw::Affine { offset, slope } => {
                for i in 0..mu.len() {
                    mu[i] = offset[i] + slope[i] * h;
                }
            }
            MeanLaw::Table { points, values } => {
                let idx = table_index(points, h).expect("object value in mean table");
                mu.copy_from_slice(&values[idx]);
            }
        }
        match cov {
            CovLaw::Fixed(f) => (f, 1.0),
            CovLaw::InverseObject(f) => (f, 1.0 / h.abs()),
            CovLaw::Table { points, factors } => {
                (&factors[table_index(points, h).expect("object value in covariance table")], 1.0)
            }
        }
    }

    fn log_density(&self, a: &[f64], h: f64) -> f64 {
        if !self.accepts_object(h) {
            return f64::NEG_INFINITY;
        }
        match self {
            Family::Gaussian { mean, cov } => {
                let n = a.len();
                let mut r = [0.0f64; 8];
                let mut heap;
                let buf: &mut [f64] = if n <= 8 {
                    &mut r[..n]
                } else {
                    heap = vec![0.0; n];
                    &mut heap
                };
                let (factor, scale) = Self::gaussian_parts(mean, cov, h, buf);
                for i in 0..n {
                    buf[i] = a[i] - buf[i];
                }
                factor.solve_lower(buf);
                let quad: f64 = buf.iter().map(|z| z * z).sum::<f64>() / (scale * scale);
                -0.5 * quad - factor.log_det() - n as f64 * (scale.ln() + LN_SQRT_2PI)
            }
            Family::Exponential => {
                if a[0] < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    h.ln() - h * a[0]
                }
            }
            Family::Poisson => {
                let k = a[0];
                if k < 0.0 || k.fract() != 0.0 {
                    f64::NEG_INFINITY
                } else if h == 0.0 {
                    if k == 0.0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    k * h.ln() - h - ln_factorial(k)
                }
            }
            Family::UniformToObject => {
                if a[0] >= 0.0 && a[0] <= h {
                    -h.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::Categorical { objects, outcomes, probs } => {
                let i = table_index(objects, h).expect("accepted object");
                match table_index(outcomes, a[0]) {
                    Some(k) => probs[i][k].ln(),
                    None => f64::NEG_INFINITY,
                }
            }
            Family::Mixture { weights, components } => {
                let terms: Vec<f64> =
                    weights.iter().zip(components).map(|(w, c)| w.ln() + c.log_density(a, h)).collect();
                logsumexp(&terms)
            }
        }
    }

    /// Density evaluated directly in linear space.
    fn density(&self, a: &[f64], h: f64) -> f64 {
        if !self.accepts_object(h) {
            return 0.0;
        }
        match self {
            Family::Gaussian { mean, cov } => {
                let n = a.len();
                let mut mu = vec![0.0; n];
                let (factor, scale) = Self::gaussian_parts(mean, cov, h, &mut mu);
                let mut r: Vec<f64> = a.iter().zip(&mu).map(|(x, m)| x - m).collect();
                factor.solve_lower(&mut r);
                let quad: f64 = r.iter().map(|z| z * z).sum::<f64>() / (scale * scale);
                let det: f64 = (0..n).map(|i| factor.entry(i, i) * scale).product();
                (-0.5 * quad).exp() / (det * (2.0 * std::f64::consts::PI).powf(n as f64 / 2.0))
            }
            Family::Exponential => {
                if a[0] < 0.0 {
                    0.0
                } else {
                    h * (-h * a[0]).exp()
                }
            }
            Family::Poisson => {
                let k = a[0];
                if k < 0.0 || k.fract() != 0.0 {
                    return 0.0;
                }
                let mut p = (-h).exp();
                for j in 1..=(k as u64) {
                    p *= h / j as f64;
                }
                p
            }
            Family::UniformToObject => {
                if a[0] >= 0.0 && a[0] <= h {
                    1.0 / h
                } else {
                    0.0
                }
            }
            Family::Categorical { objects, outcomes, probs } => {
                let i = table_index(objects, h).expect("accepted object");
                table_index(outcomes, a[0]).map_or(0.0, |k| probs[i][k])
            }
            Family::Mixture { weights, components } => {
                weights.iter().zip(components).map(|(w, c)| w * c.density(a, h)).sum()
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, h: f64, rng: &mut R, out: &mut [f64]) {
        match self {
            Family::Gaussian { mean, cov } => {
                let n = out.len();
                let g: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let mut mu = vec![0.0; n];
                let (factor, scale) = Self::gaussian_parts(mean, cov, h, &mut mu);
                factor.apply(&g, out);
                for i in 0..n {
                    out[i] = mu[i] + scale * out[i];
                }
            }
            Family::Exponential => out[0] = Exp::new(h).expect("positive rate").sample(rng),
            Family::Poisson => {
                out[0] = if h == 0.0 { 0.0 } else { Poisson::new(h).expect("positive rate").sample(rng) };
            }
            Family::UniformToObject => out[0] = open_unit(rng) * h,
            Family::Categorical { objects, outcomes, probs } => {
                let row = &probs[table_index(objects, h).expect("accepted object")];
                out[0] = outcomes[pick(row, open_unit(rng))];
            }
            Family::Mixture { weights, components } => {
                let k = pick(weights, open_unit(rng));
                components[k].sample(h, rng, out);
            }
        }
    }

    fn effective_range(&self, h: f64) -> (f64, f64) {
        match self {
            Family::Gaussian { mean, cov } => {
                let mut mu = [0.0];
                let (factor, scale) = Self::gaussian_parts(mean, cov, h, &mut mu);
                let sd = factor.entry(0, 0) * scale;
                (mu[0] - 12.0 * sd, mu[0] + 12.0 * sd)
            }
            Family::Exponential => (0.0, 40.0 / h),
            Family::UniformToObject => (0.0, h),
            Family::Poisson => (0.0, h + 12.0 * h.sqrt() + 30.0),
            Family::Categorical { outcomes, .. } => (outcomes[0], outcomes[outcomes.len() - 1]),
            Family::Mixture { components, .. } => components.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, c| {
                let (lo, hi) = c.effective_range(h);
                (acc.0.min(lo), acc.1.max(hi))
            }),
        }
    }
}

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

/// A sensor: its feature space and conditional density family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    space: FeatureSpace,
    family: Family,
}

/// View of an affine-mean Gaussian with fixed covariance, whose log-likelihood is quadratic in `h`.
pub struct AffineGaussian<'a> {
    pub offset: &'a [f64],
    pub slope: &'a [f64],
    pub factor: &'a CholFactor,
}

impl SensorModel {
    pub fn new(space: FeatureSpace, family: Family) -> Result<Self> {
        family.validate(&space)?;
        Ok(Self { space, family })
    }

    pub fn gaussian_affine(offset: Vec<f64>, slope: Vec<f64>, factor: CholFactor) -> Result<Self> {
        let n = offset.len();
        Self::new(
            FeatureSpace::uniform(Domain::Real, n)?,
            Family::Gaussian { mean: MeanLaw::Affine { offset, slope }, cov: CovLaw::Fixed(factor) },
        )
    }

    /// `dims` independent features, each with mean `slope·h` and variance `variance`.
    pub fn gaussian_iid(dims: usize, slope: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(invalid("variance must be positive"));
        }
        Self::gaussian_affine(
            vec![0.0; dims],
            vec![slope; dims],
            CholFactor::diagonal(&vec![variance.sqrt(); dims])?,
        )
    }

    /// Scalar Gaussian with a mean and standard deviation per object point.
    pub fn gaussian_table(points: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        let factors = sds.iter().map(|s| CholFactor::diagonal(&[*s])).collect::<Result<Vec<_>>>()?;
        Self::new(
            FeatureSpace::uniform(Domain::Real, 1)?,
            Family::Gaussian {
                mean: MeanLaw::Table { points: points.clone(), values: means.into_iter().map(|m| vec![m]).collect() },
                cov: CovLaw::Table { points, factors },
            },
        )
    }

    pub fn exponential() -> Self {
        Self::new(FeatureSpace::uniform(Domain::NonNegative, 1).expect("1-d"), Family::Exponential)
            .expect("valid exponential sensor")
    }

    pub fn poisson() -> Self {
        Self::new(FeatureSpace::uniform(Domain::NonNegativeIntegers, 1).expect("1-d"), Family::Poisson)
            .expect("valid poisson sensor")
    }

    /// `½·h e^{−ha} + ½·(1/h)·χ_[0,h](a)` on `[0, ∞)`.
    pub fn exponential_uniform_mixture() -> Self {
        Self::new(
            FeatureSpace::uniform(Domain::NonNegative, 1).expect("1-d"),
            Family::Mixture { weights: vec![0.5, 0.5], components: vec![Family::Exponential, Family::UniformToObject] },
        )
        .expect("valid mixture")
    }

    /// Equal mixture of `N(h, 0.01)` and `N(0.7, 9/h²)` on the real line.
    pub fn narrow_wide_gaussian_mixture() -> Self {
        let narrow = Family::Gaussian {
            mean: MeanLaw::Affine { offset: vec![0.0], slope: vec![1.0] },
            cov: CovLaw::Fixed(CholFactor::diagonal(&[0.1]).expect("positive")),
        };
        let wide = Family::Gaussian {
            mean: MeanLaw::Affine { offset: vec![0.7], slope: vec![0.0] },
            cov: CovLaw::InverseObject(CholFactor::diagonal(&[3.0]).expect("positive")),
        };
        Self::new(
            FeatureSpace::uniform(Domain::Real, 1).expect("1-d"),
            Family::Mixture { weights: vec![0.5, 0.5], components: vec![narrow, wide] },
        )
        .expect("valid mixture")
    }

    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dims(&self) -> usize {
        self.space.dims()
    }

    pub fn is_discrete(&self) -> bool {
        self.space.domains().iter().all(Domain::is_discrete)
    }

    pub fn accepts_object(&self, h: f64) -> bool {
        self.family.accepts_object(h)
    }

    pub fn affine_gaussian(&self) -> Option<AffineGaussian<'_>> {
        match &self.family {
            Family::Gaussian { mean: MeanLaw::Affine { offset, slope }, cov: CovLaw::Fixed(factor) } => {
                Some(AffineGaussian { offset, slope, factor })
            }
            _ => None,
        }
    }

    fn check(&self, a: &[f64], h: f64) -> Result<()> {
        if !self.space.contains(a) {
            return Err(invalid(format!("feature vector {a:?} outside the sensor feature space")));
        }
        if !self.family.accepts_object(h) {
            return Err(invalid(format!("object value {h} outside the sensor's parameter domain")));
        }
        Ok(())
    }

    /// `d_{A|H}(a, h)`.
    pub fn density(&self, a: &[f64], h: f64) -> Result<f64> {
        self.check(a, h)?;
        Ok(self.family.density(a, h))
    }

    /// `ln d_{A|H}(a, h)`.
    pub fn log_density(&self, a: &[f64], h: f64) -> Result<f64> {
        self.check(a, h)?;
        Ok(self.family.log_density(a, h))
    }

    /// Log density without domain checks; `-inf` where the family has no mass.
    pub fn log_density_unchecked(&self, a: &[f64], h: f64) -> f64 {
        self.family.log_density(a, h)
    }

    /// Draw one feature vector from `d_{A|H}(·, h)` into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, h: f64, rng: &mut R, out: &mut [f64]) -> Result<()> {
        if !self.family.accepts_object(h) {
            return Err(invalid(format!("cannot sample sensor at object value {h}")));
        }
        if out.len() != self.dims() {
            return Err(invalid("output buffer has the wrong dimension"));
        }
        self.family.sample(h, rng, out);
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, h: f64, rng: &mut R) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dims()];
        self.sample_into(h, rng, &mut out)?;
        Ok(out)
    }

    /// Interval holding all but a negligible fraction of the mass of a scalar sensor at `h`.
    pub fn effective_range(&self, h: f64) -> (f64, f64) {
        let (lo, hi) = self.family.effective_range(h);
        match &self.space.domains()[0] {
            Domain::Interval(a, b) => (lo.max(*a), hi.min(*b)),
            Domain::NonNegative | Domain::NonNegativeIntegers => (lo.max(0.0), hi),
            _ => (lo, hi),
        }
    }
}
