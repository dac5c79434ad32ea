//! Time integration of KdV, scaled ILW, ILW and BO in interaction representation.
//!
//! With `ω` the phase of the linear flow, the profile `v` and its interaction
//! representation `𝐯̂(t, ξ) = e^{−itω(ξ)} v̂(t, ξ)` satisfy
//!
//! ```text
//! ∂_t 𝐯̂(ξ) = e^{−itω(ξ)} iξ (v²)^(ξ),   v̂ = e^{itω} 𝐯̂,
//! ```
//!
//! where the square is the 2/3-rule dealiased product. Classical RK4 is applied to
//! this ODE over each step in the frame of the step's start time (Lawson form),
//! which is the same scheme as RK4 on the global interaction variable but only
//! needs the phase factors `e^{±iωΔt/2}` and `e^{±iωΔt}`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{truncate_band, Grid, SpectralField, Transformer};
use crate::symbols::{DispersionSymbol, MultiplierTable};

/// Coefficient magnitude treated as blow-up.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

/// Threshold of the nonlinear CFL indicator `dt · M · max|v|` above which a warning is
/// recorded.
pub const NONLINEAR_CFL_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    /// `∂_x(v²)`
    Quadratic,
    /// Linear flow only; the integrating factor then makes every step exact.
    Off,
}

#[derive(Debug, Clone)]
pub struct EvolutionProblem {
    pub symbol: DispersionSymbol,
    pub initial: SpectralField,
    pub horizon: f64,
    pub dt: f64,
    pub record_every: usize,
    pub nonlinearity: Nonlinearity,
}

impl EvolutionProblem {
    pub fn new(
        symbol: DispersionSymbol,
        initial: SpectralField,
        horizon: f64,
        dt: f64,
        record_every: usize,
    ) -> Result<Self> {
        let p = Self {
            symbol,
            initial,
            horizon,
            dt,
            record_every,
            nonlinearity: Nonlinearity::Quadratic,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_nonlinearity(mut self, nonlinearity: Nonlinearity) -> Self {
        self.nonlinearity = nonlinearity;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.initial.is_mean_zero() {
            return Err(Error::Config(
                "initial data must be mean-zero (apply galilean_reduce first)".into(),
            ));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be >= 0, got {}", self.horizon)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.horizon > 0.0 && self.dt > self.horizon * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "dt = {} exceeds horizon {}",
                self.dt, self.horizon
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps and the step actually taken (`T/n`, within round-off of `dt`).
    pub fn step_count(&self) -> (usize, f64) {
        if self.horizon == 0.0 {
            return (0, self.dt);
        }
        let n = (self.horizon / self.dt - 1e-9).ceil().max(1.0) as usize;
        (n, self.horizon / n as f64)
    }
}

/// Per-snapshot conservation record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedRecord {
    pub l2_norm: f64,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub problem: EvolutionProblem,
    pub times: Vec<f64>,
    /// Profile variables `v(t)` (not interaction variables).
    pub states: Vec<SpectralField>,
    pub conserved: Vec<ConservedRecord>,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &SpectralField {
        self.states.last().expect("trajectory has the initial snapshot")
    }

    /// `max_k |‖v(t_k)‖ − ‖v(0)‖| / ‖v(0)‖` (0 for zero data).
    pub fn relative_l2_drift(&self) -> f64 {
        let n0 = self.conserved[0].l2_norm;
        if n0 == 0.0 {
            return self.conserved.iter().map(|c| c.l2_norm).fold(0.0, f64::max);
        }
        self.conserved
            .iter()
            .map(|c| (c.l2_norm - n0).abs() / n0)
            .fold(0.0, f64::max)
    }

    /// Interaction representation `𝐯(t_k) = S(−t_k) v(t_k)` of snapshot `k`.
    pub fn interaction(&self, k: usize) -> SpectralField {
        to_interaction(&self.states[k], self.times[k], &self.problem.symbol)
    }

    /// Index of the snapshot recorded at time `t` (within a relative tolerance).
    pub fn snapshot_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.problem.horizon.max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }
}

/// `S(−t) v`: multiplies `v̂(ξ)` by `e^{−itω(ξ)}`.
pub fn to_interaction(v: &SpectralField, t: f64, symbol: &DispersionSymbol) -> SpectralField {
    v.map_coeffs(|xi, c| c * Complex64::from_polar(1.0, -t * symbol.phase(xi as f64)))
}

/// `S(t) 𝐯`: multiplies `𝐯̂(ξ)` by `e^{itω(ξ)}`.
pub fn from_interaction(w: &SpectralField, t: f64, symbol: &DispersionSymbol) -> SpectralField {
    w.map_coeffs(|xi, c| c * Complex64::from_polar(1.0, t * symbol.phase(xi as f64)))
}

/// Fixed-step integrating-factor RK4 integrator for one grid, step and symbol.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    transformer: Transformer,
    table: MultiplierTable,
    dt: f64,
    half_fwd: Vec<Complex64>,
    half_bwd: Vec<Complex64>,
    full_fwd: Vec<Complex64>,
    full_bwd: Vec<Complex64>,
    deriv: Vec<Complex64>,
    nonlinearity: Nonlinearity,
}

impl Stepper {
    pub fn new(grid: Grid, symbol: DispersionSymbol, dt: f64, nonlinearity: Nonlinearity) -> Self {
        let table = MultiplierTable::new(grid, symbol);
        let phases = |s: f64| -> Vec<Complex64> {
            table
                .omega()
                .iter()
                .map(|&w| Complex64::from_polar(1.0, s * w))
                .collect()
        };
        let half_fwd = phases(0.5 * dt);
        let half_bwd = phases(-0.5 * dt);
        let full_fwd = phases(dt);
        let full_bwd = phases(-dt);
        let kc = grid.dealias_cut();
        // iξ on the dealiased band, zero elsewhere.
        let deriv = grid
            .frequencies()
            .map(|xi| {
                if xi.abs() <= kc {
                    Complex64::new(0.0, xi as f64)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        Self {
            grid,
            transformer: Transformer::new(grid),
            table,
            dt,
            half_fwd,
            half_bwd,
            full_fwd,
            full_bwd,
            deriv,
            nonlinearity,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn table(&self) -> &MultiplierTable {
        &self.table
    }

    /// `iξ (v²)^` on the dealiased band; the profile right-hand side without the
    /// linear term.
    pub fn nonlinear_term(&self, v: &[Complex64]) -> Vec<Complex64> {
        match self.nonlinearity {
            Nonlinearity::Off => vec![Complex64::new(0.0, 0.0); v.len()],
            Nonlinearity::Quadratic => {
                let mut p = self.transformer.dealiased_product(v, v);
                for (c, d) in p.iter_mut().zip(&self.deriv) {
                    *c *= *d;
                }
                p
            }
        }
    }

    /// One RK4 step of the local interaction ODE, profile in, profile out.
    pub fn advance(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = v.len();
        let mul = |a: &[Complex64], b: &[Complex64]| -> Vec<Complex64> {
            a.iter().zip(b).map(|(x, y)| x * y).collect()
        };
        let h = self.dt;

        // F(τ, w) = e^{−iτω} N(e^{iτω} w), w(0) = v.
        let k1 = self.nonlinear_term(v);
        let mut stage = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            stage[i] = v[i] + 0.5 * h * k1[i];
        }
        let k2 = mul(&self.nonlinear_term(&mul(&stage, &self.half_fwd)), &self.half_bwd);
        for i in 0..n {
            stage[i] = v[i] + 0.5 * h * k2[i];
        }
        let k3 = mul(&self.nonlinear_term(&mul(&stage, &self.half_fwd)), &self.half_bwd);
        for i in 0..n {
            stage[i] = v[i] + h * k3[i];
        }
        let k4 = mul(&self.nonlinear_term(&mul(&stage, &self.full_fwd)), &self.full_bwd);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let w = v[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            out[i] = w * self.full_fwd[i];
        }
        out[0] = Complex64::new(0.0, 0.0);
        out
    }

    /// Advances a field, checking for blow-up. `t` is only used to report the time of
    /// failure.
    pub fn step_field(&self, state: &SpectralField, t: f64) -> Result<SpectralField> {
        assert_eq!(state.grid(), self.grid, "state grid differs from stepper grid");
        let out = self.advance(state.coeffs());
        if out.iter().any(|c| !c.re.is_finite() || !c.im.is_finite() || c.norm() > BLOW_UP_THRESHOLD) {
            return Err(Error::BlowUp { time: t + self.dt });
        }
        SpectralField::from_coeffs(self.grid, out)
    }
}

/// Single integrating-factor RK4 step of size `dt` from time `t`.
pub fn step(state: &SpectralField, t: f64, dt: f64, symbol: &DispersionSymbol) -> Result<SpectralField> {
    if !state.is_mean_zero() {
        return Err(Error::Config("step requires a mean-zero state".into()));
    }
    Stepper::new(state.grid(), *symbol, dt, Nonlinearity::Quadratic).step_field(state, t)
}

fn record(state: &SpectralField) -> ConservedRecord {
    ConservedRecord {
        l2_norm: state.l2_norm(),
        mean: state.coeff(0).re,
    }
}

/// Outcome of a solve that may have stopped early.
#[derive(Debug, Clone)]
pub struct SolveFailure {
    pub error: Error,
    pub partial: Trajectory,
}

/// Integrates `problem` over `[0, T]`, returning the partial trajectory on failure.
pub fn solve_partial(problem: &EvolutionProblem) -> std::result::Result<Trajectory, Box<SolveFailure>> {
    let grid = problem.initial.grid();
    let (n_steps, dt) = problem.step_count();
    let stepper = Stepper::new(grid, problem.symbol, dt, problem.nonlinearity);

    // Start from the dealiased band so the semi-discrete system is a Galerkin one.
    let mut initial = problem.initial.coeffs().to_vec();
    truncate_band(grid, &mut initial, grid.dealias_cut());
    let initial = SpectralField::from_coeffs(grid, initial).expect("same grid");

    let mut traj = Trajectory {
        problem: problem.clone(),
        times: vec![0.0],
        states: vec![initial.clone()],
        conserved: vec![record(&initial)],
        warnings: Vec::new(),
    };
    let mut state = initial;
    let mut cfl_warned = false;
    for k in 1..=n_steps {
        let t = (k - 1) as f64 * dt;
        if !cfl_warned {
            let vmax = state.to_samples().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            let cfl = dt * grid.modes() as f64 * vmax;
            if cfl >= NONLINEAR_CFL_LIMIT {
                let msg = format!("nonlinear CFL indicator dt*M*max|v| = {cfl:.3} at t = {t:.6}");
                log::warn!("{msg}");
                traj.warnings.push(msg);
                cfl_warned = true;
            }
        }
        state = match stepper.step_field(&state, t) {
            Ok(s) => s,
            Err(error) => return Err(Box::new(SolveFailure { error, partial: traj })),
        };
        if k % problem.record_every == 0 || k == n_steps {
            traj.times.push(k as f64 * dt);
            traj.conserved.push(record(&state));
            traj.states.push(state.clone());
        }
    }
    Ok(traj)
}

/// Integrates `problem` over `[0, T]`.
pub fn solve(problem: &EvolutionProblem) -> Result<Trajectory> {
    problem.validate()?;
    solve_partial(problem).map_err(|f| f.error)
}

/// Empirical order `log2(‖u_dt − u_{dt/2}‖ / ‖u_{dt/2} − u_{dt/4}‖)` at time `T`.
pub fn measured_order(
    symbol: DispersionSymbol,
    initial: &SpectralField,
    horizon: f64,
    dt: f64,
) -> Result<f64> {
    let finals: Vec<SpectralField> = [dt, dt / 2.0, dt / 4.0]
        .iter()
        .map(|&h| {
            let p = EvolutionProblem::new(symbol, initial.clone(), horizon, h, usize::MAX)?;
            Ok(solve(&p)?.final_state().clone())
        })
        .collect::<Result<_>>()?;
    let e1 = finals[0].sub(&finals[1]).l2_norm();
    let e2 = finals[1].sub(&finals[2]).l2_norm();
    Ok((e1 / e2).log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_field(m: usize) -> SpectralField {
        SpectralField::from_fn(Grid::new(m).unwrap(), f64::cos)
            .galilean_reduce()
            .0
    }

    #[test]
    fn zero_state_is_fixed() {
        let g = Grid::new(32).unwrap();
        let z = SpectralField::zeros(g);
        let out = step(&z, 0.0, 0.01, &DispersionSymbol::kdv()).unwrap();
        assert_eq!(out.l2_norm(), 0.0);
    }

    #[test]
    fn step_keeps_mean_zero() {
        let u = cos_field(32);
        let out = step(&u, 0.0, 0.01, &DispersionSymbol::kdv()).unwrap();
        assert!(out.is_mean_zero());
    }

    #[test]
    fn step_rejects_nonzero_mean() {
        let g = Grid::new(16).unwrap();
        let f = SpectralField::from_fn(g, |x| 1.0 + x.cos());
        assert!(matches!(
            step(&f, 0.0, 0.01, &DispersionSymbol::kdv()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn problem_validation() {
        let u = cos_field(16);
        let kdv = DispersionSymbol::kdv();
        assert!(EvolutionProblem::new(kdv, u.clone(), 1.0, 2.0, 1).is_err());
        assert!(EvolutionProblem::new(kdv, u.clone(), 1.0, 0.0, 1).is_err());
        assert!(EvolutionProblem::new(kdv, u.clone(), 1.0, 0.1, 0).is_err());
        let g = Grid::new(16).unwrap();
        let with_mean = SpectralField::from_fn(g, |x| 1.0 + x.cos());
        assert!(EvolutionProblem::new(kdv, with_mean, 1.0, 0.1, 1).is_err());
    }

    #[test]
    fn zero_horizon_gives_single_snapshot() {
        let u = cos_field(16);
        let p = EvolutionProblem::new(DispersionSymbol::kdv(), u.clone(), 0.0, 0.1, 1).unwrap();
        let tr = solve(&p).unwrap();
        assert_eq!(tr.len(), 1);
        assert!(tr.states[0].sub(&u).l2_norm() < 1e-15);
    }

    #[test]
    fn linear_flow_is_exact() {
        let u = cos_field(32).axpy(0.5, &SpectralField::from_fn(Grid::new(32).unwrap(), |x| (3.0 * x).sin()))
            .galilean_reduce()
            .0;
        let sym = DispersionSymbol::scaled_ilw(0.4).unwrap();
        let p = EvolutionProblem::new(sym, u.clone(), 1.0, 0.1, 1)
            .unwrap()
            .with_nonlinearity(Nonlinearity::Off);
        let tr = solve(&p).unwrap();
        let exact = from_interaction(&u, 1.0, &sym);
        assert!(tr.final_state().sub(&exact).l2_norm() < 1e-13);
    }

    #[test]
    fn blow_up_is_reported() {
        let g = Grid::new(16).unwrap();
        let big = SpectralField::from_fn(g, |x| 1e6 * x.cos()).galilean_reduce().0;
        let p = EvolutionProblem::new(DispersionSymbol::kdv(), big, 1.0, 0.1, 1).unwrap();
        let err = solve_partial(&p).unwrap_err();
        assert!(matches!(err.error, Error::BlowUp { .. }));
        assert!(!err.partial.is_empty());
        assert!(!err.partial.warnings.is_empty());
    }
}
