use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Möbius map `z ↦ (a z + b)/(c z + d)`, stored as the matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomographicMap {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl HomographicMap {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Self { a, b, c, d }
    }

    pub fn identity() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Self::new(o, z, z, o)
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    /// `self ∘ other`, the matrix product `self · other`.
    pub fn compose(&self, o: &Self) -> Self {
        Self::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    /// The same map with determinant 1.
    pub fn normalized(&self) -> Self {
        let s = self.det().sqrt();
        Self::new(self.a / s, self.b / s, self.c / s, self.d / s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn composition_is_application_order() {
        let f = HomographicMap::new(c(1.0, 0.5), c(0.2, 0.0), c(-0.3, 0.1), c(2.0, 0.0));
        let g = HomographicMap::new(c(0.7, 0.0), c(0.0, 1.0), c(0.4, 0.0), c(1.5, -0.2));
        let z = c(0.3, -0.6);
        assert!((f.compose(&g).apply(z) - f.apply(g.apply(z))).norm() < 1e-14);
        assert!((f.compose(&HomographicMap::identity()).apply(z) - f.apply(z)).norm() < 1e-15);
    }

    #[test]
    fn normalisation_keeps_the_map() {
        let f = HomographicMap::new(c(3.0, 0.5), c(0.2, 0.0), c(-0.3, 0.1), c(2.0, 1.0));
        let n = f.normalized();
        assert!((n.det() - 1.0).norm() < 1e-14);
        let z = c(-0.2, 0.1);
        assert!((n.apply(z) - f.apply(z)).norm() < 1e-14);
    }
}
