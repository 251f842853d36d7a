//! Sampled (x, u, u') traces on uniform grids, with cubic Hermite evaluation.

use serde::Serialize;

/// A function sampled on a uniform grid together with its first derivative.
#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

impl Trace {
    pub fn new(x: Vec<f64>, u: Vec<f64>, du: Vec<f64>) -> Self {
        assert!(x.len() == u.len() && u.len() == du.len() && x.len() >= 2);
        Trace { x, u, du }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn step(&self) -> f64 {
        (self.x[self.len() - 1] - self.x[0]) / (self.len() - 1) as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    pub fn slope_sup_norm(&self) -> f64 {
        self.du.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// sup|u| + sup|u'| over the grid.
    pub fn c1_norm(&self) -> f64 {
        self.sup_norm() + self.slope_sup_norm()
    }

    fn cell_of(&self, r: f64) -> usize {
        let h = self.step();
        let i = ((r - self.x[0]) / h).floor() as isize;
        i.clamp(0, self.len() as isize - 2) as usize
    }

    /// Cubic Hermite evaluation of (u, u') at an arbitrary point inside the span.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let i = self.cell_of(r);
        let h = self.x[i + 1] - self.x[i];
        let t = ((r - self.x[i]) / h).clamp(0.0, 1.0);
        let (u0, u1) = (self.u[i], self.u[i + 1]);
        let (d0, d1) = (self.du[i], self.du[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let u = h00 * u0 + h * (h10 * d0 + h11 * d1) + h01 * u1;
        // derivative of the Hermite basis
        let g00 = (6.0 * t2 - 6.0 * t) / h;
        let g10 = 3.0 * t2 - 4.0 * t + 1.0;
        let g01 = (-6.0 * t2 + 6.0 * t) / h;
        let g11 = 3.0 * t2 - 2.0 * t;
        let du = g00 * u0 + g10 * d0 + g01 * u1 + g11 * d1;
        (u, du)
    }

    /// Composite Simpson of `f(x, u, u')` over the trace, with midpoint values
    /// reconstructed by cubic Hermite interpolation.
    pub fn integrate<F: FnMut(f64, f64, f64) -> f64>(&self, mut f: F) -> f64 {
        let mut total = 0.0;
        for i in 0..self.len() - 1 {
            let h = self.x[i + 1] - self.x[i];
            let xm = 0.5 * (self.x[i] + self.x[i + 1]);
            let (um, dum) = self.eval(xm);
            let f0 = f(self.x[i], self.u[i], self.du[i]);
            let fm = f(xm, um, dum);
            let f1 = f(self.x[i + 1], self.u[i + 1], self.du[i + 1]);
            total += h / 6.0 * (f0 + 4.0 * fm + f1);
        }
        total
    }
}
