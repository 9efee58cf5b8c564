//! Dormand–Prince 5(4) integrator with adaptive step control and dense output.

/// Step-size control settings.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-6,
            atol: 1e-8,
            max_steps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OdeFailure {
    StepUnderflow { t: f64 },
    MaxSteps { t: f64 },
    NonFinite { t: f64 },
}

impl OdeFailure {
    pub fn time(&self) -> f64 {
        match *self {
            OdeFailure::StepUnderflow { t } | OdeFailure::MaxSteps { t } | OdeFailure::NonFinite { t } => t,
        }
    }

    pub fn reason(&self) -> &'static str {
        match self {
            OdeFailure::StepUnderflow { .. } => "step size underflow",
            OdeFailure::MaxSteps { .. } => "step budget exhausted",
            OdeFailure::NonFinite { .. } => "non-finite state",
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

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

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// Integrate `dy/dt = f(t, y)` from `(t0, y0)` and sample the solution at each
/// of `outputs` (sorted, all `>= t0`) via the continuous extension.
pub fn integrate_dense<const N: usize, F>(
    f: F,
    t0: f64,
    y0: [f64; N],
    outputs: &[f64],
    tol: Tolerances,
) -> Result<Vec<[f64; N]>, OdeFailure>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut result = Vec::with_capacity(outputs.len());
    let mut next = 0;
    while next < outputs.len() && outputs[next] <= t0 {
        result.push(y0);
        next += 1;
    }
    if next == outputs.len() {
        return Ok(result);
    }
    let t_end = outputs[outputs.len() - 1];

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = initial_step(&f, t, &y, &k1, tol, t_end - t0);
    let h_max = t_end - t0;
    let mut steps = 0usize;
    let mut last_rejected = false;

    while next < outputs.len() {
        if steps >= tol.max_steps {
            return Err(OdeFailure::MaxSteps { t });
        }
        steps += 1;
        // `t + (t_end - t)` can round to just below `t_end`; remember to land exactly.
        let landing = t + h >= t_end;
        if landing {
            h = t_end - t;
        }
        if h <= f64::EPSILON * t.abs().max(1.0) * 4.0 {
            return Err(OdeFailure::StepUnderflow { t });
        }

        let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(
            t + h,
            &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + h, &y_new);

        let mut err_sq = 0.0;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / scale).powi(2);
        }
        let err = (err_sq / N as f64).sqrt();
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            // Treat as a rejection with a sharp cut, unless the step is already tiny.
            h *= 0.1;
            last_rejected = true;
            continue;
        }

        if err <= 1.0 {
            let t_new = if landing { t_end } else { t + h };
            // Dense output coefficients for the accepted step.
            let mut r1 = [0.0; N];
            let mut r2 = [0.0; N];
            let mut r3 = [0.0; N];
            let mut r4 = [0.0; N];
            let mut r5 = [0.0; N];
            for i in 0..N {
                let dy = y_new[i] - y[i];
                let bspl = h * k1[i] - dy;
                r1[i] = y[i];
                r2[i] = dy;
                r3[i] = bspl;
                r4[i] = dy - h * k7[i] - bspl;
                r5[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            while next < outputs.len() && outputs[next] <= t_new {
                let out_t = outputs[next];
                if out_t == t_new {
                    result.push(y_new);
                } else {
                    let s = (out_t - t) / h;
                    let s1 = 1.0 - s;
                    let mut v = [0.0; N];
                    for i in 0..N {
                        v[i] = r1[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i])));
                    }
                    result.push(v);
                }
                next += 1;
            }

            t = t_new;
            y = y_new;
            k1 = k7;

            let mut factor = 0.9 * err.max(1e-10).powf(-0.2);
            factor = factor.clamp(0.2, 10.0);
            if last_rejected {
                factor = factor.min(1.0);
            }
            h = (h * factor).min(h_max);
            last_rejected = false;
        } else {
            let factor = (0.9 * err.powf(-0.2)).max(0.2);
            h *= factor;
            last_rejected = true;
        }
    }

    if result.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(OdeFailure::NonFinite { t });
    }
    Ok(result)
}

/// Hairer–Nørsett–Wanner starting step heuristic.
fn initial_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], k1: &[f64; N], tol: Tolerances, span: f64) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let scale: Vec<f64> = y.iter().map(|v| tol.atol + tol.rtol * v.abs()).collect();
    let d0 = (y.iter().zip(&scale).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d1 = (k1.iter().zip(&scale).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / N as f64).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let y1 = axpy(y, h0, &[(1.0, k1)]);
    let k2 = f(t + h0, &y1);
    let d2 = (k2
        .iter()
        .zip(k1)
        .zip(&scale)
        .map(|((a, b), s)| ((a - b) / s).powi(2))
        .sum::<f64>()
        / N as f64)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span).max(1e-10)
}
