//! Coefficient and data callbacks.

use std::fmt;
use std::sync::Arc;

pub type Point3 = [f64; 3];

type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Fn3 = Arc<dyn Fn(Point3) -> f64 + Send + Sync>;

/// Scalar function of arclength along a segment, with an optional
/// closed-form derivative.
#[derive(Clone)]
pub struct ScalarFn {
    value: Fn1,
    derivative: Option<Fn1>,
    constant: Option<f64>,
}

impl ScalarFn {
    pub fn constant(c: f64) -> Self {
        Self {
            value: Arc::new(move |_| c),
            derivative: Some(Arc::new(|_| 0.0)),
            constant: Some(c),
        }
    }

    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(f),
            derivative: None,
            constant: None,
        }
    }

    pub fn with_derivative(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(f),
            derivative: Some(Arc::new(df)),
            constant: None,
        }
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        (self.value)(s)
    }

    pub fn derivative(&self, s: f64) -> Option<f64> {
        self.derivative.as_ref().map(|d| d(s))
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    /// `s ↦ self(s + offset)`; used when a segment is split so children keep
    /// the parent's arclength parametrization.
    pub fn shifted(&self, offset: f64) -> Self {
        if offset == 0.0 || self.constant.is_some() {
            return self.clone();
        }
        let f = self.value.clone();
        let derivative = self.derivative.clone().map(|d| {
            let g: Fn1 = Arc::new(move |s| d(s + offset));
            g
        });
        Self {
            value: Arc::new(move |s| f(s + offset)),
            derivative,
            constant: None,
        }
    }

    /// `s ↦ self(offset − s)`; parametrization of a reversed segment.
    pub fn reversed(&self, length: f64) -> Self {
        if self.constant.is_some() {
            return self.clone();
        }
        let f = self.value.clone();
        let derivative = self.derivative.clone().map(|d| {
            let g: Fn1 = Arc::new(move |s| -d(length - s));
            g
        });
        Self {
            value: Arc::new(move |s| f(length - s)),
            derivative,
            constant: None,
        }
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constant {
            Some(c) => write!(f, "ScalarFn::constant({c})"),
            None => write!(f, "ScalarFn(<closure>)"),
        }
    }
}

/// Scalar field on ℝ³.
#[derive(Clone)]
pub struct Field3 {
    f: Fn3,
    constant: Option<f64>,
}

impl Field3 {
    pub fn constant(c: f64) -> Self {
        Self {
            f: Arc::new(move |_| c),
            constant: Some(c),
        }
    }

    pub fn new(f: impl Fn(Point3) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            constant: None,
        }
    }

    #[inline]
    pub fn eval(&self, p: Point3) -> f64 {
        (self.f)(p)
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }
}

impl fmt::Debug for Field3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constant {
            Some(c) => write!(f, "Field3::constant({c})"),
            None => write!(f, "Field3(<closure>)"),
        }
    }
}

/// Vector field on ℝ³ (gradients of exact solutions).
#[derive(Clone)]
pub struct VectorField3(Arc<dyn Fn(Point3) -> Point3 + Send + Sync>);

impl VectorField3 {
    pub fn new(f: impl Fn(Point3) -> Point3 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, p: Point3) -> Point3 {
        (self.0)(p)
    }
}

impl fmt::Debug for VectorField3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField3(<closure>)")
    }
}
