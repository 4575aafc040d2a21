//! Dormand-Prince 5(4) integration with cubic Hermite dense output.

use crate::geom::dist;

/// One accepted integration node: time, state and `dx/dt` at the state.
#[derive(Debug, Clone)]
pub struct Node {
    pub t: f64,
    pub x: Vec<f64>,
    pub dx: Vec<f64>,
}

/// Cubic Hermite interpolation between two nodes at time `t`.
pub fn hermite(a: &Node, b: &Node, t: f64) -> Vec<f64> {
    let h = b.t - a.t;
    if h == 0.0 {
        return a.x.clone();
    }
    let s = (t - a.t) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    (0..a.x.len())
        .map(|i| h00 * a.x[i] + h10 * h * a.dx[i] + h01 * b.x[i] + h11 * h * b.dx[i])
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rel: f64,
    pub abs: f64,
    /// Largest distance in space covered by one step.
    pub max_displacement: f64,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive integrator over an autonomous field `rhs(x, out)`.
pub struct Dopri5<F> {
    rhs: F,
    ctl: StepControl,
    h: f64,
}

impl<F, E> Dopri5<F>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<(), E>,
{
    pub fn new(rhs: F, ctl: StepControl) -> Self {
        Dopri5 { rhs, ctl, h: 0.0 }
    }

    pub fn start(&mut self, x: &[f64]) -> Result<Node, E> {
        let mut dx = vec![0.0; x.len()];
        (self.rhs)(x, &mut dx)?;
        let speed = dx.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        self.h = self.ctl.max_displacement / speed;
        Ok(Node {
            t: 0.0,
            x: x.to_vec(),
            dx,
        })
    }

    /// Takes one accepted step from `node`.
    pub fn step(&mut self, node: &Node) -> Result<Node, E> {
        let n = node.x.len();
        let mut k = vec![vec![0.0; n]; 7];
        k[0].copy_from_slice(&node.dx);
        loop {
            let speed = node.dx.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let h = self.h.min(self.ctl.max_displacement / speed);
            let mut y = vec![0.0; n];
            for s in 1..7 {
                for i in 0..n {
                    y[i] = node.x[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
                }
                (self.rhs)(&y, &mut k[s])?;
            }
            // y now holds the fifth-order solution (row 6 of A equals B5).
            let mut err = 0.0;
            for i in 0..n {
                let e = h * (0..7).map(|j| (B5[j] - B4[j]) * k[j][i]).sum::<f64>();
                let sc = self.ctl.abs + self.ctl.rel * node.x[i].abs().max(y[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / n as f64).sqrt();
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 || h < 1e-14 {
                self.h = h * factor;
                let dx = k[6].clone();
                return Ok(Node {
                    t: node.t + h * C[6],
                    x: y,
                    dx,
                });
            }
            self.h = h * factor;
        }
    }
}

/// Length of a polyline through the node states.
pub fn arc_length(nodes: &[Node]) -> f64 {
    nodes.windows(2).map(|w| dist(&w[0].x, &w[1].x)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl() -> StepControl {
        StepControl {
            rel: 1e-10,
            abs: 1e-12,
            max_displacement: 0.05,
        }
    }

    #[test]
    fn rotation_stays_on_the_circle() {
        let mut solver = Dopri5::new(
            |x: &[f64], out: &mut [f64]| -> Result<(), ()> {
                out[0] = -x[1];
                out[1] = x[0];
                Ok(())
            },
            ctl(),
        );
        let mut node = solver.start(&[1.0, 0.0]).unwrap();
        while node.t < std::f64::consts::PI {
            node = solver.step(&node).unwrap();
        }
        let r = (node.x[0].powi(2) + node.x[1].powi(2)).sqrt();
        assert!((r - 1.0).abs() < 1e-9);
        assert!((node.x[0] - node.t.cos()).abs() < 1e-8);
    }

    #[test]
    fn exponential_growth() {
        let mut solver = Dopri5::new(
            |x: &[f64], out: &mut [f64]| -> Result<(), ()> {
                out[0] = x[0];
                Ok(())
            },
            ctl(),
        );
        let mut node = solver.start(&[1.0]).unwrap();
        let mut prev = node.clone();
        while node.t < 1.0 {
            prev = node.clone();
            node = solver.step(&node).unwrap();
        }
        let mid = hermite(&prev, &node, 1.0);
        assert!((mid[0] - 1f64.exp()).abs() < 1e-7);
    }
}
