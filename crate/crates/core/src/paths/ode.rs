use super::PathError;

/// Step-size policy for [`dopri5`].
#[derive(Clone, Debug, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on |h|.
    pub h_max: f64,
    /// Take exactly this many equal steps per call instead of adapting.
    pub fixed_steps: Option<usize>,
}

impl StepControl {
    pub fn adaptive(tol: f64) -> Self {
        StepControl {
            rtol: tol,
            atol: tol,
            h_max: f64::INFINITY,
            fixed_steps: None,
        }
    }

    pub fn fixed(steps: usize) -> Self {
        StepControl {
            rtol: 0.0,
            atol: 0.0,
            h_max: f64::INFINITY,
            fixed_steps: Some(steps),
        }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights (equal to the last row of A).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
/// Embedded fourth-order weights.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step; returns the fifth-order solution and the error estimate.
pub fn dopri_step<F>(
    f: &mut F,
    t: f64,
    y: &[f64],
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>), PathError>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, PathError>,
{
    let n = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    for s in 0..7 {
        let mut ys = y.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..n {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k.push(f(t + C[s] * h, &ys)?);
    }
    let mut y5 = y.to_vec();
    let mut err = vec![0.0; n];
    for s in 0..7 {
        for i in 0..n {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    Ok((y5, err))
}

/// Integrates y' = f(t, y) from `t0` to `t1` (either direction). `post` runs after every
/// accepted step and may project the state. Returns the accepted points, starting at t0.
pub fn dopri5<F, P>(
    mut f: F,
    mut post: P,
    t0: f64,
    y0: &[f64],
    t1: f64,
    ctrl: &StepControl,
) -> Result<Vec<(f64, Vec<f64>)>, PathError>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, PathError>,
    P: FnMut(f64, &mut Vec<f64>) -> Result<(), PathError>,
{
    let span = t1 - t0;
    let dir = span.signum();
    let mut out = vec![(t0, y0.to_vec())];
    if span == 0.0 {
        return Ok(out);
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    if let Some(steps) = ctrl.fixed_steps {
        let h = span / steps as f64;
        for i in 0..steps {
            let (mut y5, _) = dopri_step(&mut f, t, &y, h)?;
            t = if i + 1 == steps {
                t1
            } else {
                t0 + h * (i + 1) as f64
            };
            post(t, &mut y5)?;
            y = y5;
            out.push((t, y.clone()));
        }
        return Ok(out);
    }
    let mut h = (span.abs() / 16.0).min(ctrl.h_max) * dir;
    let h_min = span.abs() * 1e-12;
    while (t1 - t) * dir > 0.0 {
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        let (mut y5, err) = dopri_step(&mut f, t, &y, h)?;
        let e = err
            .iter()
            .zip(y.iter().zip(&y5))
            .map(|(e, (a, b))| {
                let sc = ctrl.atol + ctrl.rtol * a.abs().max(b.abs());
                (e / sc).powi(2)
            })
            .sum::<f64>();
        let e = (e / y.len() as f64).sqrt();
        if !e.is_finite() {
            return Err(PathError::StepFailure { t });
        }
        if e <= 1.0 {
            t = if (t + h - t1) * dir >= 0.0 { t1 } else { t + h };
            post(t, &mut y5)?;
            y = y5;
            out.push((t, y.clone()));
        }
        let factor = if e == 0.0 {
            5.0
        } else {
            (0.9 * e.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h.abs() * factor).min(ctrl.h_max) * dir;
        if h.abs() < h_min {
            return Err(PathError::StepFailure { t });
        }
    }
    Ok(out)
}

/// Integrates through every point of `grid` (monotone, starting at the initial time)
/// and returns the state at each grid point.
pub fn integrate_on_grid<F, P>(
    mut f: F,
    mut post: P,
    grid: &[f64],
    y0: &[f64],
    ctrl: &StepControl,
) -> Result<Vec<Vec<f64>>, PathError>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, PathError>,
    P: FnMut(f64, &mut Vec<f64>) -> Result<(), PathError>,
{
    let mut out = vec![y0.to_vec()];
    let mut y = y0.to_vec();
    for w in grid.windows(2) {
        let seg = dopri5(&mut f, &mut post, w[0], &y, w[1], ctrl)?;
        y = seg.last().expect("nonempty").1.clone();
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let f = |_t: f64, y: &[f64]| Ok(vec![-y[0]]);
        let out = dopri5(
            f,
            |_, _| Ok(()),
            0.0,
            &[1.0],
            2.0,
            &StepControl::adaptive(1e-10),
        )
        .unwrap();
        let (t, y) = out.last().unwrap();
        assert_eq!(*t, 2.0);
        assert!((y[0] - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn fixed_step_order_is_five() {
        let f = |t: f64, y: &[f64]| Ok(vec![y[0] * t.cos()]);
        let exact = 1.0f64.sin().exp();
        let err = |n| {
            let out = dopri5(f, |_, _| Ok(()), 0.0, &[1.0], 1.0, &StepControl::fixed(n)).unwrap();
            (out.last().unwrap().1[0] - exact).abs()
        };
        let order = (err(8) / err(16)).log2();
        assert!(order > 4.5, "{order}");
    }

    #[test]
    fn backward_integration() {
        let f = |_t: f64, _y: &[f64]| Ok(vec![1.0]);
        let out = dopri5(
            f,
            |_, _| Ok(()),
            1.0,
            &[0.0],
            0.0,
            &StepControl::adaptive(1e-9),
        )
        .unwrap();
        assert!((out.last().unwrap().1[0] + 1.0).abs() < 1e-12);
    }
}
