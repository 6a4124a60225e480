//! Offline control design: operating-point (trim) solving, numeric
//! linearization of the reduced 4-state model, continuous algebraic Riccati
//! solution with a residual certificate, and LQR gain assembly.
//!
//! The reduced state is (elevation, airspeed, flight path, pitch); azimuth
//! is dropped because nothing depends on it and it is not controlled.

use nalgebra::{Complex, DMatrix, DVector, SMatrix};

use crate::airframe::aero_forces;
use crate::control::LqrLaw;
use crate::dynamics::{rhs_airborne, ControlInput, FlightState, V_MIN_AIRBORNE};
use crate::error::SynthesisError;
use crate::sim::Models;

/// Residual norm below which a trim is accepted as exact.
pub const EXACT_TRIM_RESIDUAL: f64 = 1e-9;

/// CARE residual certificate bound (Frobenius).
pub const CARE_RESIDUAL_BOUND: f64 = 1e-8;

/// How the trim airspeed is treated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AirspeedTarget {
    /// Solve for the airspeed, starting from the guess.
    Free { guess: f64 },
    /// Hold the airspeed at a published reference and balance what can be
    /// balanced with thrust alone.
    Pinned(f64),
}

/// Steady-state specification for one phase: elevation, flight path, and
/// angle-of-attack are fixed; pitch follows from theta = gamma + alpha;
/// the pitch-rate reference is zero since theta must hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimSpec {
    pub elevation: f64,
    pub flight_path: f64,
    pub alpha: f64,
    pub airspeed: AirspeedTarget,
}

/// A solved (or best-effort) operating point with an honest residual.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    /// (beta, V_a, gamma, theta) [rad, m/s, rad, rad].
    pub state: [f64; 4],
    /// (F_p, omega_q) [N, rad/s].
    pub control: [f64; 2],
    /// Norm of the (airspeed-rate, flight-path-rate) residual held at zero.
    pub residual: f64,
    /// Thrust ended clamped at an actuator bound.
    pub thrust_saturated: bool,
    /// For a pinned airspeed: the thrust that the path-rate balance alone
    /// would demand. Reported so an out-of-range demand is visible.
    pub balancing_thrust_demand: Option<f64>,
}

impl OperatingPoint {
    pub fn is_exact(&self) -> bool {
        self.residual <= EXACT_TRIM_RESIDUAL
    }

    pub fn flight_state(&self) -> FlightState {
        FlightState {
            azimuth: 0.0,
            elevation: self.state[0],
            airspeed: self.state[1],
            flight_path: self.state[2],
            pitch: self.state[3],
            grounded: false,
        }
    }

    pub fn control_input(&self) -> ControlInput {
        ControlInput {
            thrust: self.control[0],
            pitch_rate: self.control[1],
        }
    }
}

/// Airborne right-hand side restricted to the reduced state.
/// Returns (beta_rate, airspeed_rate, flight_path_rate, pitch_rate).
pub fn reduced_rhs(
    x: &[f64; 4],
    u: &[f64; 2],
    models: &Models,
) -> Result<[f64; 4], SynthesisError> {
    let state = FlightState {
        azimuth: 0.0,
        elevation: x[0],
        airspeed: x[1],
        flight_path: x[2],
        pitch: x[3],
        grounded: false,
    };
    let control = ControlInput {
        thrust: u[0],
        pitch_rate: u[1],
    };
    let dot = rhs_airborne(
        &state,
        &control,
        models.aircraft,
        models.env,
        models.polar,
        models.tether,
    )?;
    Ok([
        dot.elevation_rate,
        dot.airspeed_rate,
        dot.flight_path_rate,
        dot.pitch_rate,
    ])
}

/// Central-difference Jacobian of `f` at `x` with per-coordinate steps.
/// Exact on affine maps up to roundoff, so adding a constant to `f` leaves
/// the result unchanged.
pub fn central_jacobian<F>(
    f: &mut F,
    x: &[f64],
    steps: &[f64],
) -> Result<DMatrix<f64>, SynthesisError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, SynthesisError>,
{
    assert_eq!(x.len(), steps.len());
    let rows = f(x)?.len();
    let mut jac = DMatrix::zeros(rows, x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = steps[j];
        probe[j] = x[j] + h;
        let plus = f(&probe).map_err(|e| probe_error(j, e))?;
        probe[j] = x[j] - h;
        let minus = f(&probe).map_err(|e| probe_error(j, e))?;
        probe[j] = x[j];
        for i in 0..rows {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn probe_error(coordinate: usize, e: SynthesisError) -> SynthesisError {
    match e {
        SynthesisError::Residual(source) => SynthesisError::ProbeFailed { coordinate, source },
        other => other,
    }
}

fn fd_step(x: f64) -> f64 {
    (1e-6_f64).max(1e-6 * x.abs())
}

/// Linear model about an operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: SMatrix<f64, 4, 4>,
    pub b: SMatrix<f64, 4, 2>,
}

/// Central finite-difference linearization of the reduced model at an
/// operating point, with optional step scaling for convergence checks.
pub fn linearize_scaled(
    point: &OperatingPoint,
    models: &Models,
    step_scale: f64,
) -> Result<LinearModel, SynthesisError> {
    let x0 = point.state;
    let u0 = point.control;
    let steps_x: Vec<f64> = x0.iter().map(|&v| fd_step(v) * step_scale).collect();
    let steps_u: Vec<f64> = u0.iter().map(|&v| fd_step(v) * step_scale).collect();

    let mut fx = |x: &[f64]| -> Result<Vec<f64>, SynthesisError> {
        let xx = [x[0], x[1], x[2], x[3]];
        Ok(reduced_rhs(&xx, &u0, models)?.to_vec())
    };
    let a = central_jacobian(&mut fx, &x0, &steps_x)?;

    let mut fu = |u: &[f64]| -> Result<Vec<f64>, SynthesisError> {
        let uu = [u[0], u[1]];
        Ok(reduced_rhs(&x0, &uu, models)?.to_vec())
    };
    let b = central_jacobian(&mut fu, &u0, &steps_u)?;

    Ok(LinearModel {
        a: SMatrix::<f64, 4, 4>::from_iterator(a.iter().copied()),
        b: SMatrix::<f64, 4, 2>::from_iterator(b.iter().copied()),
    })
}

/// Linearize at the default finite-difference step.
pub fn linearize(point: &OperatingPoint, models: &Models) -> Result<LinearModel, SynthesisError> {
    linearize_scaled(point, models, 1.0)
}

/// Thrust that zeroes the airspeed-rate balance at the given flight
/// condition: `F_p = (F_D + m g cos(beta) sin(gamma)) / cos(alpha)`.
fn speed_balance_thrust(
    beta: f64,
    airspeed: f64,
    gamma: f64,
    alpha: f64,
    models: &Models,
) -> Result<f64, SynthesisError> {
    let (_, drag) = aero_forces(models.aircraft, models.env, models.polar, airspeed, alpha)
        .map_err(SynthesisError::Residual)?;
    let m = models.aircraft.mass;
    let g = models.env.gravity;
    Ok((drag + m * g * beta.cos() * gamma.sin()) / alpha.cos())
}

/// Thrust that the flight-path balance alone would demand at a pinned
/// airspeed; unbounded as alpha approaches zero.
fn path_balance_thrust(
    beta: f64,
    airspeed: f64,
    gamma: f64,
    alpha: f64,
    models: &Models,
) -> Result<Option<f64>, SynthesisError> {
    let sin_a = alpha.sin();
    if sin_a.abs() < 1e-9 {
        return Ok(None);
    }
    let (lift, _) = aero_forces(models.aircraft, models.env, models.polar, airspeed, alpha)
        .map_err(SynthesisError::Residual)?;
    let m = models.aircraft.mass;
    let g = models.env.gravity;
    let r = models.tether.length;
    let needed = m * g * beta.cos() * gamma.cos()
        + m * airspeed * airspeed / r * beta.tan() * gamma.cos()
        - lift;
    Ok(Some(needed / sin_a))
}

fn trim_residual(
    spec: &TrimSpec,
    airspeed: f64,
    thrust: f64,
    models: &Models,
) -> Result<[f64; 2], SynthesisError> {
    let x = [
        spec.elevation,
        airspeed,
        spec.flight_path,
        spec.flight_path + spec.alpha,
    ];
    let u = [thrust, 0.0];
    let dot = reduced_rhs(&x, &u, models)?;
    Ok([dot[1], dot[2]])
}

/// Solve the steady-state conditions of one phase.
///
/// With a free airspeed this is a damped Newton iteration over
/// `(V_a, F_p)` zeroing the airspeed-rate and flight-path-rate equations,
/// with the thrust projected onto its actuator range. With a pinned
/// airspeed only the thrust remains; it is set from the airspeed-rate
/// balance (clamped to range) and the remaining flight-path residual is
/// reported rather than hidden.
pub fn solve_operating_point(
    spec: &TrimSpec,
    models: &Models,
) -> Result<OperatingPoint, SynthesisError> {
    let theta = spec.flight_path + spec.alpha;
    let (t_min, t_max) = (models.aircraft.thrust_min, models.aircraft.thrust_max);

    match spec.airspeed {
        AirspeedTarget::Pinned(v) => {
            let raw =
                speed_balance_thrust(spec.elevation, v, spec.flight_path, spec.alpha, models)?;
            let thrust = raw.clamp(t_min, t_max);
            let demand =
                path_balance_thrust(spec.elevation, v, spec.flight_path, spec.alpha, models)?;
            let res = trim_residual(spec, v, thrust, models)?;
            let saturated =
                raw < t_min || raw > t_max || demand.is_some_and(|d| d < t_min || d > t_max);
            Ok(OperatingPoint {
                state: [spec.elevation, v, spec.flight_path, theta],
                control: [thrust, 0.0],
                residual: res[0].hypot(res[1]),
                thrust_saturated: saturated,
                balancing_thrust_demand: demand,
            })
        }
        AirspeedTarget::Free { guess } => {
            let mut v = guess.max(V_MIN_AIRBORNE + 0.1);
            let mut thrust =
                speed_balance_thrust(spec.elevation, v, spec.flight_path, spec.alpha, models)?
                    .clamp(t_min, t_max);
            let mut res = trim_residual(spec, v, thrust, models)?;
            let mut norm = res[0].hypot(res[1]);
            const MAX_ITER: usize = 80;
            for _ in 0..MAX_ITER {
                if norm <= 1e-13 {
                    break;
                }
                let z = [v, thrust];
                let steps = [fd_step(v), fd_step(thrust)];
                let mut f = |zz: &[f64]| -> Result<Vec<f64>, SynthesisError> {
                    Ok(trim_residual(spec, zz[0], zz[1], models)?.to_vec())
                };
                let jac = central_jacobian(&mut f, &z, &steps)?;
                let rhs = DVector::from_column_slice(&res);
                let delta = jac
                    .lu()
                    .solve(&(-rhs))
                    .ok_or(SynthesisError::TrimNotConverged {
                        residual: norm,
                        iterations: MAX_ITER,
                    })?;
                // Backtracking line search with projection onto bounds.
                let mut scale = 1.0;
                let mut improved = false;
                for _ in 0..12 {
                    let v_try = (v + scale * delta[0]).max(V_MIN_AIRBORNE + 1e-3);
                    let t_try = (thrust + scale * delta[1]).clamp(t_min, t_max);
                    let res_try = trim_residual(spec, v_try, t_try, models)?;
                    let norm_try = res_try[0].hypot(res_try[1]);
                    if norm_try < norm {
                        v = v_try;
                        thrust = t_try;
                        res = res_try;
                        norm = norm_try;
                        improved = true;
                        break;
                    }
                    scale *= 0.5;
                }
                if !improved {
                    break;
                }
            }
            let saturated = thrust <= t_min + 1e-12 || thrust >= t_max - 1e-12;
            if norm > EXACT_TRIM_RESIDUAL && !saturated {
                return Err(SynthesisError::TrimNotConverged {
                    residual: norm,
                    iterations: MAX_ITER,
                });
            }
            Ok(OperatingPoint {
                state: [spec.elevation, v, spec.flight_path, theta],
                control: [thrust, 0.0],
                residual: norm,
                thrust_saturated: saturated,
                balancing_thrust_demand: None,
            })
        }
    }
}

/// Solve `M X + X M^T = C` by Kronecker vectorization and dense LU. Sized
/// for the small models handled here.
pub fn solve_continuous_lyapunov(
    m: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>, SynthesisError> {
    let n = m.nrows();
    if m.ncols() != n || c.nrows() != n || c.ncols() != n {
        return Err(SynthesisError::Dimensions(
            "Lyapunov operands must be square and matching".into(),
        ));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let op = eye.kronecker(m) + m.kronecker(&eye);
    let rhs = DVector::from_column_slice(c.as_slice());
    let x = op.lu().solve(&rhs).ok_or_else(|| SynthesisError::Riccati {
        reason: "Lyapunov operator is singular".into(),
        history: vec![],
    })?;
    Ok(DMatrix::from_column_slice(n, n, x.as_slice()))
}

fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn care_residual_norm(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r_inv: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    (a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q).norm()
}

/// Result of a continuous algebraic Riccati solve.
#[derive(Debug, Clone)]
pub struct CareSolution {
    /// Stabilizing solution, symmetric positive semidefinite.
    pub riccati: DMatrix<f64>,
    /// Feedback gain `K = R^-1 B^T P`.
    pub gain: DMatrix<f64>,
    /// Eigenvalues of `A - B K`, sorted by real then imaginary part.
    pub closed_loop_eigenvalues: Vec<Complex<f64>>,
    /// Frobenius norm of the Riccati equation residual at the solution.
    pub residual: f64,
    pub iterations: usize,
}

/// Solve `A^T P + P A - P B R^-1 B^T P + Q = 0` for the stabilizing `P`.
///
/// A stabilizing initial gain comes from the Lyapunov-based pole-shifting
/// construction (solve `(A + mu I) Z + Z (A + mu I)^T = 2 B B^T` with `mu`
/// beyond the spectrum and take `K0 = B^T Z^-1`); the gain is then refined
/// by Newton iterations, each a Lyapunov solve on the closed-loop matrix.
/// The returned residual is the certificate; callers hold it to
/// [`CARE_RESIDUAL_BOUND`].
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<CareSolution, SynthesisError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n
        || b.nrows() != n
        || q.nrows() != n
        || q.ncols() != n
        || r.nrows() != m
        || r.ncols() != m
    {
        return Err(SynthesisError::Dimensions(format!(
            "A {}x{}, B {}x{}, Q {}x{}, R {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            q.nrows(),
            q.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    for i in 0..n {
        if q[(i, i)] < 0.0 {
            return Err(SynthesisError::Weights(format!(
                "Q[{i},{i}] = {} is negative",
                q[(i, i)]
            )));
        }
    }
    let r_chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| SynthesisError::Weights("R must be positive definite".into()))?;
    let r_inv = r_chol.inverse();

    // Stabilizing initial gain. If A is already Hurwitz a zero gain works.
    let mut gain = DMatrix::<f64>::zeros(m, n);
    if spectral_abscissa(&(a - b * &gain)) >= -1e-12 {
        let mut mu = 1.0 + a.norm();
        let mut stabilized = false;
        for _ in 0..6 {
            let shifted = a + DMatrix::<f64>::identity(n, n) * mu;
            let z = solve_continuous_lyapunov(&shifted, &(2.0 * b * b.transpose()))?;
            if let Some(z_inv) = z.clone().try_inverse() {
                let k0 = b.transpose() * z_inv;
                if spectral_abscissa(&(a - b * &k0)) < 0.0 {
                    gain = k0;
                    stabilized = true;
                    break;
                }
            }
            mu *= 4.0;
        }
        if !stabilized {
            return Err(SynthesisError::Riccati {
                reason: "no stabilizing initial gain found; (A, B) may not be stabilizable".into(),
                history: vec![],
            });
        }
    }

    // Newton refinement: each iterate solves the closed-loop Lyapunov
    // equation  (A - B K)^T P + P (A - B K) = -(Q + K^T R K).
    let mut history = Vec::new();
    let mut best: Option<(DMatrix<f64>, DMatrix<f64>, f64)> = None;
    for iteration in 0..60 {
        let a_cl = a - b * &gain;
        let rhs = -(q + gain.transpose() * r * &gain);
        let mut p = solve_continuous_lyapunov(&a_cl.transpose(), &rhs)?;
        p = (&p + p.transpose()) * 0.5;
        let residual = care_residual_norm(a, b, q, &r_inv, &p);
        history.push(residual);
        if best.as_ref().is_none_or(|(_, _, r0)| residual < *r0) {
            best = Some((p.clone(), gain.clone(), residual));
        }
        gain = &r_inv * b.transpose() * &p;
        if residual <= 1e-11 * (1.0 + q.norm()) && iteration >= 1 {
            break;
        }
    }
    let (p, _, residual) = best.expect("at least one iteration ran");
    let gain = &r_inv * b.transpose() * &p;

    // Certificates: symmetry is enforced above; verify spectrum and PSD.
    let closed = a - b * &gain;
    let mut eigs: Vec<Complex<f64>> = closed
        .clone()
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect();
    eigs.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    if eigs.iter().any(|e| e.re >= 0.0) {
        return Err(SynthesisError::Riccati {
            reason: format!("closed loop not strictly stable: eigenvalues {eigs:?}"),
            history,
        });
    }
    let sym_eigs = nalgebra::SymmetricEigen::new(p.clone()).eigenvalues;
    let min_eig = sym_eigs.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig < -1e-8 * (1.0 + p.norm()) {
        return Err(SynthesisError::Riccati {
            reason: format!("solution not positive semidefinite: min eigenvalue {min_eig:.3e}"),
            history,
        });
    }

    Ok(CareSolution {
        riccati: p,
        gain,
        closed_loop_eigenvalues: eigs,
        residual,
        iterations: history.len(),
    })
}

/// State scale for the diagonal weight initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BrysonScale {
    /// Largest acceptable deviation; weight is its inverse square.
    Limit(f64),
    /// State left out of the objective; weight is zero.
    Ignored,
}

/// Diagonal weight initialization from largest acceptable deviations:
/// `Q_ii = 1 / max_dev_i^2`, `R_jj = 1 / max_u_j^2`.
pub fn bryson_init(
    state_scales: &[BrysonScale],
    control_scales: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>), SynthesisError> {
    let mut q = DMatrix::zeros(state_scales.len(), state_scales.len());
    for (i, s) in state_scales.iter().enumerate() {
        q[(i, i)] = match s {
            BrysonScale::Ignored => 0.0,
            BrysonScale::Limit(d) => {
                if *d <= 0.0 {
                    return Err(SynthesisError::Weights(format!(
                        "state scale {i} must be positive, got {d}"
                    )));
                }
                1.0 / (d * d)
            }
        };
    }
    let mut r = DMatrix::zeros(control_scales.len(), control_scales.len());
    for (j, d) in control_scales.iter().enumerate() {
        if *d <= 0.0 {
            return Err(SynthesisError::Weights(format!(
                "control scale {j} must be positive, got {d} (R must stay positive definite)"
            )));
        }
        r[(j, j)] = 1.0 / (d * d);
    }
    Ok((q, r))
}

/// A complete LQR design for one phase.
#[derive(Debug, Clone)]
pub struct LqrDesign {
    pub operating_point: OperatingPoint,
    pub model: LinearModel,
    pub state_weights: [f64; 4],
    pub control_weights: [f64; 2],
    pub riccati: SMatrix<f64, 4, 4>,
    pub gain: SMatrix<f64, 2, 4>,
    pub closed_loop_eigenvalues: Vec<Complex<f64>>,
    pub care_residual: f64,
}

impl LqrDesign {
    pub fn law(&self) -> LqrLaw {
        LqrLaw {
            x_ref: self.operating_point.state,
            u_ref: self.operating_point.control,
            gain: self.gain,
        }
    }
}

/// Linearize at the operating point and synthesize the feedback gain for
/// the given diagonal weights.
pub fn design_lqr(
    point: &OperatingPoint,
    state_weights: [f64; 4],
    control_weights: [f64; 2],
    models: &Models,
) -> Result<LqrDesign, SynthesisError> {
    let model = linearize(point, models)?;
    let a = DMatrix::from_iterator(4, 4, model.a.iter().copied());
    let b = DMatrix::from_iterator(4, 2, model.b.iter().copied());
    let q = DMatrix::from_diagonal(&DVector::from_column_slice(&state_weights));
    let r = DMatrix::from_diagonal(&DVector::from_column_slice(&control_weights));
    let care = solve_care(&a, &b, &q, &r)?;
    Ok(LqrDesign {
        operating_point: point.clone(),
        model,
        state_weights,
        control_weights,
        riccati: SMatrix::<f64, 4, 4>::from_iterator(care.riccati.iter().copied()),
        gain: SMatrix::<f64, 2, 4>::from_iterator(care.gain.iter().copied()),
        closed_loop_eigenvalues: care.closed_loop_eigenvalues,
        care_residual: care.residual,
    })
}
