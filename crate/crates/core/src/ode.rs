//! Dormand-Prince 5(4) integration for the two-dimensional shooting system,
//! with dense output used for event location and trace sampling.

use crate::error::{Error, Result};

pub type State = [f64; 2];

#[derive(Debug, Clone, Copy)]
pub struct OdeCfg {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Escape ceiling on |v| and |v'|.
    pub ceiling: f64,
}

impl Default for OdeCfg {
    fn default() -> Self {
        OdeCfg { abs_tol: 1e-11, rel_tol: 1e-10, h_max: 0.05, max_steps: 2_000_000, ceiling: 1e8 }
    }
}

/// One accepted step with the order-5 continuous extension. The polynomial is
/// parameterized over the original step length `h`; `span` (<= h) is the part
/// of the step that remains valid after truncation at an event.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    pub span: f64,
    cont: [State; 5],
}

impl DenseStep {
    /// Evaluate the dense output at t in [t0, t0 + span].
    pub fn eval(&self, t: f64) -> State {
        let th = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        let mut y = [0.0; 2];
        for i in 0..2 {
            y[i] = self.cont[0][i]
                + th * (self.cont[1][i]
                    + th1 * (self.cont[2][i] + th * (self.cont[3][i] + th1 * self.cont[4][i])));
        }
        y
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.span
    }

    /// Restrict the valid window to [t0, t_end] (the polynomial is unchanged).
    pub fn truncated(mut self, t_end: f64) -> Self {
        self.span = (t_end - self.t0).clamp(0.0, self.h);
        self
    }
}

/// Piecewise dense solution over consecutive accepted steps.
#[derive(Debug, Clone, Default)]
pub struct DenseSolution {
    pub steps: Vec<DenseStep>,
}

impl DenseSolution {
    pub fn t_end(&self) -> f64 {
        self.steps.last().map(|s| s.t1()).unwrap_or(0.0)
    }

    pub fn eval(&self, t: f64) -> State {
        if self.steps.is_empty() {
            return [0.0, 0.0];
        }
        let i = self.steps.partition_point(|s| s.t1() < t).min(self.steps.len() - 1);
        self.steps[i].eval(t)
    }
}

const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

pub struct Dopri5<'a> {
    f: &'a dyn Fn(f64, &State) -> State,
    pub t: f64,
    pub y: State,
    h: f64,
    k1: State,
    cfg: OdeCfg,
    pub steps_taken: usize,
}

impl<'a> Dopri5<'a> {
    pub fn new(f: &'a dyn Fn(f64, &State) -> State, t0: f64, y0: State, cfg: OdeCfg) -> Self {
        let k1 = f(t0, &y0);
        // modest initial step; the controller adapts within a few steps
        let scale = (y0[0].abs() + y0[1].abs()).max(1.0);
        let rate = (k1[0].abs() + k1[1].abs()).max(1e-10);
        let h = (0.01 * scale / rate).min(cfg.h_max).max(1e-10);
        Dopri5 { f, t: t0, y: y0, h, k1, cfg, steps_taken: 0 }
    }

    /// Reset the state (used when restarting on a located zero crossing).
    pub fn restart(&mut self, t: f64, y: State) {
        self.t = t;
        self.y = y;
        self.k1 = (self.f)(t, &y);
    }

    /// Advance one accepted step, not exceeding `t_limit`. Returns the dense
    /// record of the step.
    pub fn step(&mut self, t_limit: f64) -> Result<DenseStep> {
        let f = self.f;
        loop {
            self.steps_taken += 1;
            if self.steps_taken > self.cfg.max_steps {
                return Err(Error::Numerics("integrator exceeded the step budget".into()));
            }
            let h = self.h.min(t_limit - self.t).max(1e-14);
            let (t, y) = (self.t, self.y);
            let k1 = self.k1;
            let y2 = add(&y, h, &[(A21, &k1)]);
            let k2 = f(t + 0.2 * h, &y2);
            let y3 = add(&y, h, &[(A31, &k1), (A32, &k2)]);
            let k3 = f(t + 0.3 * h, &y3);
            let y4 = add(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            let k4 = f(t + 0.8 * h, &y4);
            let y5 = add(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            let k5 = f(t + 8.0 / 9.0 * h, &y5);
            let y6 = add(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            let k6 = f(t + h, &y6);
            let y1 = add(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(t + h, &y1);

            let mut err = 0.0_f64;
            for i in 0..2 {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sc = self.cfg.abs_tol + self.cfg.rel_tol * y[i].abs().max(y1[i].abs());
                err += (e / sc) * (e / sc);
            }
            err = (err / 2.0).sqrt();

            let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            if err <= 1.0 {
                let mut cont = [[0.0; 2]; 5];
                for i in 0..2 {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    cont[0][i] = y[i];
                    cont[1][i] = ydiff;
                    cont[2][i] = bspl;
                    cont[3][i] = ydiff - h * k7[i] - bspl;
                    cont[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                let record = DenseStep { t0: t, h, span: h, cont };
                self.t = t + h;
                self.y = y1;
                self.k1 = k7; // FSAL
                self.h = (self.h * factor).min(self.cfg.h_max);
                return Ok(record);
            }
            self.h = (h * factor).max(1e-14);
        }
    }
}

fn add(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for i in 0..2 {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}
