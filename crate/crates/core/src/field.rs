//! Analytic scalar and vector fields with optional derivative callbacks.
//!
//! These carry manufactured solutions, loads and boundary data. Callbacks are
//! reference counted so that fields are cheap to clone and share across threads.

use std::sync::Arc;

use crate::error::{FemError, Result};
use crate::mesh::Point2;

pub type ScalarFn = Arc<dyn Fn(Point2) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(Point2) -> [f64; 2] + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(Point2) -> [[f64; 2]; 2] + Send + Sync>;

/// Relative central-difference step used when no exact Hessian is supplied.
pub const HESSIAN_FD_STEP: f64 = 1e-5;

#[derive(Clone)]
pub struct ScalarField {
    value: ScalarFn,
    gradient: Option<GradientFn>,
    laplacian: Option<ScalarFn>,
    hessian: Option<HessianFn>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("gradient", &self.gradient.is_some())
            .field("laplacian", &self.laplacian.is_some())
            .field("hessian", &self.hessian.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(value: impl Fn(Point2) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            gradient: None,
            laplacian: None,
            hessian: None,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(Point2) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_laplacian(mut self, l: impl Fn(Point2) -> f64 + Send + Sync + 'static) -> Self {
        self.laplacian = Some(Arc::new(l));
        self
    }

    pub fn with_hessian(
        mut self,
        h: impl Fn(Point2) -> [[f64; 2]; 2] + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Arc::new(h));
        self
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
            .with_gradient(|_| [0.0, 0.0])
            .with_laplacian(|_| 0.0)
            .with_hessian(|_| [[0.0; 2]; 2])
    }

    /// `c + a x + b y`.
    pub fn affine(c: f64, a: f64, b: f64) -> Self {
        Self::new(move |p| c + a * p.x + b * p.y)
            .with_gradient(move |_| [a, b])
            .with_laplacian(|_| 0.0)
            .with_hessian(|_| [[0.0; 2]; 2])
    }

    /// The field multiplied by `s`, derivatives included.
    pub fn scaled(&self, s: f64) -> Self {
        let v = self.value.clone();
        let mut out = Self::new(move |p| s * v(p));
        if let Some(g) = self.gradient.clone() {
            out = out.with_gradient(move |p| g(p).map(|c| s * c));
        }
        if let Some(l) = self.laplacian.clone() {
            out = out.with_laplacian(move |p| s * l(p));
        }
        if let Some(h) = self.hessian.clone() {
            out = out.with_hessian(move |p| h(p).map(|r| r.map(|c| s * c)));
        }
        out
    }

    pub fn value(&self, p: Point2) -> f64 {
        (self.value)(p)
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn has_laplacian(&self) -> bool {
        self.laplacian.is_some() || self.hessian.is_some()
    }

    pub fn gradient(&self, p: Point2) -> Result<[f64; 2]> {
        self.gradient
            .as_ref()
            .map(|g| g(p))
            .ok_or(FemError::MissingCallback("gradient"))
    }

    /// Exact Laplacian, or the trace of an exact Hessian.
    pub fn laplacian(&self, p: Point2) -> Result<f64> {
        if let Some(l) = &self.laplacian {
            return Ok(l(p));
        }
        if let Some(h) = &self.hessian {
            let h = h(p);
            return Ok(h[0][0] + h[1][1]);
        }
        Err(FemError::MissingCallback("laplacian"))
    }

    /// Exact Hessian if supplied, otherwise central differences of the gradient.
    pub fn hessian(&self, p: Point2) -> Result<[[f64; 2]; 2]> {
        if let Some(h) = &self.hessian {
            return Ok(h(p));
        }
        let g = self
            .gradient
            .as_ref()
            .ok_or(FemError::MissingCallback("gradient"))?;
        let mut out = [[0.0; 2]; 2];
        for k in 0..2 {
            let coord = if k == 0 { p.x } else { p.y };
            let step = HESSIAN_FD_STEP * coord.abs().max(1.0);
            let e = if k == 0 {
                Point2::new(step, 0.0)
            } else {
                Point2::new(0.0, step)
            };
            let (gp, gm) = (g(p + e), g(p - e));
            for (i, row) in out.iter_mut().enumerate() {
                row[k] = (gp[i] - gm[i]) / (2.0 * step);
            }
        }
        // symmetrise the difference quotient
        let off = 0.5 * (out[0][1] + out[1][0]);
        out[0][1] = off;
        out[1][0] = off;
        Ok(out)
    }

    /// Largest relative deviation between the gradient callback and central
    /// differences of the value (step `h`) over the given points.
    pub fn gradient_consistency(&self, points: &[Point2], h: f64) -> Result<f64> {
        let mut worst = 0.0f64;
        for &p in points {
            let g = self.gradient(p)?;
            let fd = [
                (self.value(p + Point2::new(h, 0.0)) - self.value(p - Point2::new(h, 0.0)))
                    / (2.0 * h),
                (self.value(p + Point2::new(0.0, h)) - self.value(p - Point2::new(0.0, h)))
                    / (2.0 * h),
            ];
            let scale = g[0].hypot(g[1]).max(1.0);
            worst = worst.max((g[0] - fd[0]).hypot(g[1] - fd[1]) / scale);
        }
        Ok(worst)
    }
}

/// Two-component vector field.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub components: [ScalarField; 2],
}

impl VectorField {
    pub fn new(x: ScalarField, y: ScalarField) -> Self {
        Self { components: [x, y] }
    }

    pub fn constant(a: f64, b: f64) -> Self {
        Self::new(ScalarField::constant(a), ScalarField::constant(b))
    }

    pub fn value(&self, p: Point2) -> [f64; 2] {
        [self.components[0].value(p), self.components[1].value(p)]
    }

    pub fn value_point(&self, p: Point2) -> Point2 {
        Point2::new(self.components[0].value(p), self.components[1].value(p))
    }

    pub fn divergence(&self, p: Point2) -> Result<f64> {
        Ok(self.components[0].gradient(p)?[0] + self.components[1].gradient(p)?[1])
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.components[0].scaled(s), self.components[1].scaled(s))
    }
}
