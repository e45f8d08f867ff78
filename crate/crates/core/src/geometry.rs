//! Metric fields on parameter grids and their scalar curvature.
//!
//! For a 2D metric `g` on coordinates `(x¹, x²) = (k, λ)` the scalar
//! curvature is evaluated as `R = (𝒜 + ℬ)/√g` with
//! `𝒜 = ∂₁[ (g₁₂/(g₁₁√g)) ∂₂g₁₁ − (1/√g) ∂₁g₂₂ ]` and
//! `ℬ = ∂₂[ (2/√g) ∂₁g₁₂ − (1/√g) ∂₂g₁₁ − (g₁₂/(g₁₁√g)) ∂₁g₁₁ ]`,
//! the derivatives applied to the composite brackets exactly as written.
//! Finite differences are 4th order in the interior and fall back to 2nd
//! order near and on the edges; nodes whose stencil touches a masked node
//! are masked in turn.

use serde::{Deserialize, Serialize};

use crate::qmt::MetricValue;
use crate::{Error, Result};

/// Determinant floor below which curvature is masked rather than evaluated.
pub const DET_FLOOR: f64 = 1e-18;

const SPACING_TOL: f64 = 1e-12;

/// Rectangular, uniformly spaced parameter grid (axes ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    k: Vec<f64>,
    lambda: Vec<f64>,
}

impl ParamGrid {
    pub fn new(k: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        check_axis("k", &k)?;
        check_axis("lambda", &lambda)?;
        Ok(Self { k, lambda })
    }

    /// Builds axes from inclusive ranges with the given point counts.
    pub fn from_ranges(
        k_min: f64,
        k_max: f64,
        nk: usize,
        lambda_min: f64,
        lambda_max: f64,
        nl: usize,
    ) -> Result<Self> {
        let axis = |lo: f64, hi: f64, n: usize| -> Result<Vec<f64>> {
            if n < 1 || (n == 1 && hi != lo) || (n > 1 && hi <= lo) {
                return Err(Error::Grid(format!("bad axis range [{lo}, {hi}] with {n} points")));
            }
            if n == 1 {
                return Ok(vec![lo]);
            }
            let h = (hi - lo) / (n - 1) as f64;
            Ok((0..n).map(|i| lo + i as f64 * h).collect())
        };
        Self::new(axis(k_min, k_max, nk)?, axis(lambda_min, lambda_max, nl)?)
    }

    pub fn k_values(&self) -> &[f64] {
        &self.k
    }

    pub fn lambda_values(&self) -> &[f64] {
        &self.lambda
    }

    pub fn nk(&self) -> usize {
        self.k.len()
    }

    pub fn nl(&self) -> usize {
        self.lambda.len()
    }

    pub fn k_step(&self) -> f64 {
        if self.k.len() > 1 {
            self.k[1] - self.k[0]
        } else {
            0.0
        }
    }

    pub fn lambda_step(&self) -> f64 {
        if self.lambda.len() > 1 {
            self.lambda[1] - self.lambda[0]
        } else {
            0.0
        }
    }

    /// Row-major index of node `(i, j)` = (k index, λ index).
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.lambda.len() + j
    }

    pub fn len(&self) -> usize {
        self.k.len() * self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_axis(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Grid(format!("{name} axis is empty")));
    }
    if xs.len() == 1 {
        return Ok(());
    }
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Grid(format!("{name} axis must be ascending")));
    }
    let scale = xs.iter().fold(h.abs(), |a, &x| a.max(x.abs()));
    for i in 0..xs.len() - 1 {
        if ((xs[i + 1] - xs[i]) - h).abs() > SPACING_TOL * scale {
            return Err(Error::Grid(format!("{name} axis spacing is not uniform at index {i}")));
        }
    }
    Ok(())
}

/// Metric components sampled on a grid. `mask[idx] = true` marks nodes with
/// no valid value (their stored components are NaN).
#[derive(Debug, Clone)]
pub struct MetricField {
    pub grid: ParamGrid,
    pub g11: Vec<f64>,
    pub g12: Vec<f64>,
    pub g22: Vec<f64>,
    pub mask: Vec<bool>,
}

impl MetricField {
    /// Fills a field by evaluating `f` at every node; `None` masks the node.
    pub fn evaluate<F>(grid: ParamGrid, mut f: F) -> Self
    where
        F: FnMut(f64, f64) -> Option<MetricValue>,
    {
        let n = grid.len();
        let mut out = Self {
            g11: vec![f64::NAN; n],
            g12: vec![f64::NAN; n],
            g22: vec![f64::NAN; n],
            mask: vec![true; n],
            grid,
        };
        for i in 0..out.grid.nk() {
            for j in 0..out.grid.nl() {
                let idx = out.grid.idx(i, j);
                if let Some(m) = f(out.grid.k_values()[i], out.grid.lambda_values()[j]) {
                    out.g11[idx] = m.g11;
                    out.g12[idx] = m.g12;
                    out.g22[idx] = m.g22;
                    out.mask[idx] = false;
                }
            }
        }
        out
    }

    pub fn value(&self, i: usize, j: usize) -> Option<MetricValue> {
        let idx = self.grid.idx(i, j);
        if self.mask[idx] {
            None
        } else {
            Some(MetricValue { g11: self.g11[idx], g12: self.g12[idx], g22: self.g22[idx] })
        }
    }
}

/// Pointwise determinant `g₁₁g₂₂ − g₁₂²` (NaN on masked nodes).
pub fn metric_determinant(field: &MetricField) -> Vec<f64> {
    (0..field.grid.len())
        .map(|idx| {
            if field.mask[idx] {
                f64::NAN
            } else {
                field.g11[idx] * field.g22[idx] - field.g12[idx] * field.g12[idx]
            }
        })
        .collect()
}

/// Scalar curvature field with its validity mask.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub grid: ParamGrid,
    pub r: Vec<f64>,
    pub mask: Vec<bool>,
}

#[derive(Clone, Copy)]
enum Axis {
    K,
    Lambda,
}

/// First derivative along one axis; masks any node whose stencil touches a
/// masked node. 4th-order five-point stencil in the interior, 2nd-order
/// central one node from the edge, 2nd-order one-sided on the edge.
fn derivative(
    values: &[f64],
    mask: &[bool],
    grid: &ParamGrid,
    axis: Axis,
) -> (Vec<f64>, Vec<bool>) {
    let (n_along, h) = match axis {
        Axis::K => (grid.nk(), grid.k_step()),
        Axis::Lambda => (grid.nl(), grid.lambda_step()),
    };
    let mut out = vec![f64::NAN; values.len()];
    let mut out_mask = vec![true; values.len()];

    let at = |i: usize, j: usize, t: usize| match axis {
        Axis::K => grid.idx(t, j),
        Axis::Lambda => grid.idx(i, t),
    };

    for i in 0..grid.nk() {
        for j in 0..grid.nl() {
            let pos = match axis {
                Axis::K => i,
                Axis::Lambda => j,
            };
            let idx = grid.idx(i, j);
            let (offsets, weights): (&[isize], &[f64]) = if pos >= 2 && pos + 2 < n_along {
                (&[-2, -1, 1, 2], &[1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0])
            } else if pos >= 1 && pos + 1 < n_along {
                (&[-1, 1], &[-0.5, 0.5])
            } else if pos == 0 {
                (&[0, 1, 2], &[-1.5, 2.0, -0.5])
            } else {
                (&[0, -1, -2], &[1.5, -2.0, 0.5])
            };
            let mut acc = 0.0;
            let mut ok = true;
            for (&off, &w) in offsets.iter().zip(weights) {
                let t = (pos as isize + off) as usize;
                let src = at(i, j, t);
                if mask[src] {
                    ok = false;
                    break;
                }
                acc += w * values[src];
            }
            if ok {
                out[idx] = acc / h;
                out_mask[idx] = false;
            }
        }
    }
    (out, out_mask)
}

fn union(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(&x, &y)| x || y).collect()
}

/// Evaluates the scalar curvature of a metric field. Nodes with determinant
/// below `det_floor` (or non-positive `g₁₁`) are masked before
/// differentiation. Errors if either axis has fewer than 5 points or if the
/// k axis contains both signs (a stencil would straddle the `k = 0`
/// structural boundary).
pub fn scalar_curvature(field: &MetricField, det_floor: f64) -> Result<CurvatureField> {
    let grid = &field.grid;
    if grid.nk() < 5 || grid.nl() < 5 {
        return Err(Error::Grid(format!(
            "curvature needs at least 5 points per axis, grid is {}x{}",
            grid.nk(),
            grid.nl()
        )));
    }
    let ks = grid.k_values();
    if ks[0] < 0.0 && ks[ks.len() - 1] > 0.0 {
        return Err(Error::Grid("curvature stencil would straddle k = 0".into()));
    }

    let n = grid.len();
    let mut mask = field.mask.clone();
    let mut sqrt_det = vec![f64::NAN; n];
    for idx in 0..n {
        if mask[idx] {
            continue;
        }
        let det = field.g11[idx] * field.g22[idx] - field.g12[idx] * field.g12[idx];
        if !(det.is_finite() && det >= det_floor && field.g11[idx] > 0.0) {
            mask[idx] = true;
        } else {
            sqrt_det[idx] = det.sqrt();
        }
    }

    let (d1g11, m1) = derivative(&field.g11, &mask, grid, Axis::K);
    let (d2g11, m2) = derivative(&field.g11, &mask, grid, Axis::Lambda);
    let (d1g12, m3) = derivative(&field.g12, &mask, grid, Axis::K);
    let (d1g22, m4) = derivative(&field.g22, &mask, grid, Axis::K);

    let inner_mask = union(&union(&m1, &m2), &union(&m3, &m4));
    let mut inner1 = vec![f64::NAN; n];
    let mut inner2 = vec![f64::NAN; n];
    for idx in 0..n {
        if inner_mask[idx] {
            continue;
        }
        let sg = sqrt_det[idx];
        let ratio = field.g12[idx] / (field.g11[idx] * sg);
        inner1[idx] = ratio * d2g11[idx] - d1g22[idx] / sg;
        inner2[idx] = 2.0 * d1g12[idx] / sg - d2g11[idx] / sg - ratio * d1g11[idx];
    }

    let (term_a, ma) = derivative(&inner1, &inner_mask, grid, Axis::K);
    let (term_b, mb) = derivative(&inner2, &inner_mask, grid, Axis::Lambda);
    let out_mask = union(&ma, &mb);

    let mut r = vec![f64::NAN; n];
    for idx in 0..n {
        if !out_mask[idx] {
            r[idx] = (term_a[idx] + term_b[idx]) / sqrt_det[idx];
        }
    }
    Ok(CurvatureField { grid: grid.clone(), r, mask: out_mask })
}

/// Kind of a detected interior extremum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtremumKind {
    Maximum,
    Minimum,
}

/// An interior extremum of a sampled 1D slice, with its 3-point quadratic
/// refinement.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Extremum {
    pub kind: ExtremumKind,
    /// Index of the grid node at which the raw extremum was detected.
    pub index: usize,
    /// Quadratically refined abscissa.
    pub location: f64,
    /// Quadratically refined value.
    pub value: f64,
}

/// Finds strict interior local extrema of `ys` over `xs`, skipping any
/// triple touching a masked node. Locations and values are refined by the
/// parabola through the three neighboring samples.
pub fn find_extrema(xs: &[f64], ys: &[f64], mask: Option<&[bool]>) -> Vec<Extremum> {
    assert_eq!(xs.len(), ys.len());
    let masked = |i: usize| mask.map(|m| m[i]).unwrap_or(false) || !ys[i].is_finite();
    let mut out = Vec::new();
    for i in 1..ys.len().saturating_sub(1) {
        if masked(i - 1) || masked(i) || masked(i + 1) {
            continue;
        }
        let kind = if ys[i] > ys[i - 1] && ys[i] > ys[i + 1] {
            ExtremumKind::Maximum
        } else if ys[i] < ys[i - 1] && ys[i] < ys[i + 1] {
            ExtremumKind::Minimum
        } else {
            continue;
        };
        let h = xs[i + 1] - xs[i];
        let denom = ys[i - 1] - 2.0 * ys[i] + ys[i + 1];
        let (location, value) = if denom != 0.0 {
            let shift = 0.5 * h * (ys[i - 1] - ys[i + 1]) / denom;
            (xs[i] + shift, ys[i] - (ys[i - 1] - ys[i + 1]).powi(2) / (8.0 * denom))
        } else {
            (xs[i], ys[i])
        };
        out.push(Extremum { kind, index: i, location, value });
    }
    out
}
