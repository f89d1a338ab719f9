//! Fixed-step classical Runge-Kutta (order 4) over small state arrays.

/// Advance `y` by one RK4 step of size `dt` under the vector field `f`.
///
/// Inputs held by `f` are treated as constant over the step (zero-order hold),
/// which keeps the integration deterministic and replayable.
pub(crate) fn rk4_step<const N: usize>(
    y: [f64; N],
    dt: f64,
    f: impl Fn(&[f64; N]) -> [f64; N],
) -> [f64; N] {
    let k1 = f(&y);

    let mut y2 = y;
    for i in 0..N {
        y2[i] += 0.5 * dt * k1[i];
    }
    let k2 = f(&y2);

    let mut y3 = y;
    for i in 0..N {
        y3[i] += 0.5 * dt * k2[i];
    }
    let k3 = f(&y3);

    let mut y4 = y;
    for i in 0..N {
        y4[i] += dt * k3[i];
    }
    let k4 = f(&y4);

    let mut out = y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_cubic_polynomials() {
        // RK4 integrates polynomials up to degree 4 in t exactly; dy/dt = 3t^2
        // realized autonomously via an auxiliary clock state.
        let f = |y: &[f64; 2]| [3.0 * y[1] * y[1], 1.0];
        let mut y = [0.0, 0.0];
        for _ in 0..100 {
            y = rk4_step(y, 0.01, f);
        }
        assert!((y[0] - 1.0).abs() < 1e-12, "got {}", y[0]);
    }

    #[test]
    fn fourth_order_on_exponential_decay() {
        let f = |y: &[f64; 1]| [-2.0 * y[0]];
        let run = |dt: f64| {
            let mut y = [1.0];
            let n = (1.0 / dt).round() as usize;
            for _ in 0..n {
                y = rk4_step(y, dt, f);
            }
            y[0]
        };
        let exact = (-2.0f64).exp();
        let e1 = (run(1e-2) - exact).abs();
        let e2 = (run(5e-3) - exact).abs();
        let ratio = e1 / e2;
        assert!((8.0..32.0).contains(&ratio), "order-4 ratio was {ratio}");
    }
}
