//! Fine-grid finite difference solve of `w_t = w_xx - (w^2/2)_x` from step
//! data, shared by the integration tests.

/// Second-order central differences, classical RK4, far-field Dirichlet data.
/// Returns `(x_i, w_i)` at time `t_end`.
pub fn fd_viscous_burgers(um: f64, up: f64, left: f64, right: f64, h: f64, t_end: f64) -> Vec<(f64, f64)> {
    let n = ((right - left) / h).round() as usize + 1;
    let xs: Vec<f64> = (0..n).map(|i| left + i as f64 * h).collect();
    let mut w: Vec<f64> = xs
        .iter()
        .map(|&x| if x.abs() < 0.5 * h { 0.5 * (um + up) } else if x < 0.0 { um } else { up })
        .collect();
    let rhs = |w: &[f64], out: &mut [f64]| {
        let g = |i: isize| -> f64 {
            if i < 0 {
                um
            } else if i as usize >= w.len() {
                up
            } else {
                w[i as usize]
            }
        };
        for i in 0..w.len() as isize {
            let (a, b, c) = (g(i - 1), g(i), g(i + 1));
            out[i as usize] = (a - 2.0 * b + c) / (h * h) - (c * c - a * a) / (4.0 * h);
        }
    };
    let steps = (t_end / (0.2 * h * h)).ceil() as usize;
    let dt = t_end / steps as f64;
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        rhs(&w, &mut k1);
        for i in 0..n {
            tmp[i] = w[i] + 0.5 * dt * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = w[i] + 0.5 * dt * k2[i];
        }
        rhs(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = w[i] + dt * k3[i];
        }
        rhs(&tmp, &mut k4);
        for i in 0..n {
            w[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    xs.into_iter().zip(w).collect()
}

/// Richardson extrapolation of the `h` and `h/2` solutions on the coarse nodes.
pub fn extrapolated(um: f64, up: f64, h: f64) -> Vec<(f64, f64)> {
    let coarse = fd_viscous_burgers(um, up, -16.0, 18.0, h, 1.0);
    let fine = fd_viscous_burgers(um, up, -16.0, 18.0, 0.5 * h, 1.0);
    coarse
        .iter()
        .enumerate()
        .map(|(i, &(x, wc))| (x, (4.0 * fine[2 * i].1 - wc) / 3.0))
        .collect()
}
