//! Ordered trees and the tree-indexed multilinear operators of the Poincaré–Dulac
//! normal form reduction for KdV in the interaction representation, evaluated by
//! exact summation on a truncated lattice.
//!
//! A tree of `J` generations is grown from the root by `J` expansions. The
//! chronicle records, for generations `2..=J`, which terminal node (counted left to
//! right among the `j` terminals present before the expansion) is split. Each
//! expansion of a node with frequency `ξ` into children `(ξ₁, ξ₂)` contributes the
//! resonance `μ = −3ξξ₁ξ₂`, and `μ̃_j = μ₁ + … + μ_j`.
//!
//! Every convolution carries `(2π)^{-1/2}`, so a `j`-generation operator carries
//! `(2π)^{-j/2}`. All node frequencies are nonzero and bounded by
//! [`NfParams::lattice_cut`] in absolute value; on a Galerkin trajectory with the
//! cut equal to the dealiasing band the normal form identities hold exactly.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::{solve, EvolutionProblem, Trajectory};
use crate::spectral::{Grid, SpectralField};
use crate::symbols::{h_delta, phi_from_gap, SymbolKind};

/// Largest tree depth [`enumerate_trees`] accepts.
pub const MAX_ENUMERATED_GENERATIONS: usize = 6;

/// Hard cap on the depth of evaluated operators.
pub const MAX_EVALUATED_GENERATIONS: usize = 4;

/// Estimated summand count above which evaluation is refused.
pub const COST_LIMIT: f64 = 1e9;

/// Exponent used by [`measure_bounds`].
pub const REPORT_THETA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeNode {
    pub parent: Option<usize>,
    /// `(left, right)` for non-terminal nodes.
    pub children: Option<(usize, usize)>,
    /// Generation in which a non-terminal node was expanded.
    pub generation: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderedTree {
    chronicle: Vec<usize>,
    nodes: Vec<TreeNode>,
    terminals: Vec<usize>,
    expanded: Vec<usize>,
}

impl OrderedTree {
    /// Builds the tree with `chronicle.len() + 1` generations. `chronicle[i]` is the
    /// position of the terminal split in generation `i + 2` and must be `< i + 2`.
    pub fn from_chronicle(chronicle: &[usize]) -> Result<Self> {
        let mut nodes = vec![TreeNode {
            parent: None,
            children: None,
            generation: None,
        }];
        let mut terminals = vec![0usize];
        let mut expanded = Vec::with_capacity(chronicle.len() + 1);
        for (g, &pos) in std::iter::once(&0).chain(chronicle.iter()).enumerate() {
            if pos >= terminals.len() {
                return Err(Error::Config(format!(
                    "chronicle entry {pos} at generation {} exceeds {} terminals",
                    g + 1,
                    terminals.len()
                )));
            }
            let a = terminals[pos];
            let (l, r) = (nodes.len(), nodes.len() + 1);
            for _ in 0..2 {
                nodes.push(TreeNode {
                    parent: Some(a),
                    children: None,
                    generation: None,
                });
            }
            nodes[a].children = Some((l, r));
            nodes[a].generation = Some(g + 1);
            terminals.splice(pos..=pos, [l, r]);
            expanded.push(a);
        }
        Ok(Self {
            chronicle: chronicle.to_vec(),
            nodes,
            terminals,
            expanded,
        })
    }

    pub fn generations(&self) -> usize {
        self.chronicle.len() + 1
    }

    pub fn chronicle(&self) -> &[usize] {
        &self.chronicle
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Terminal nodes, left to right.
    pub fn terminals(&self) -> &[usize] {
        &self.terminals
    }

    /// Non-terminal nodes in order of expansion: entry `k − 1` is `p^{(k)}`.
    pub fn expanded(&self) -> &[usize] {
        &self.expanded
    }

    pub fn sibling(&self, a: usize) -> Option<usize> {
        let p = self.nodes[a].parent?;
        let (l, r) = self.nodes[p].children.expect("parent has children");
        Some(if l == a { r } else { l })
    }

    pub fn generation_of(&self, a: usize) -> Option<usize> {
        self.nodes[a].generation
    }
}

/// All `J!` trees of `J` generations in lexicographic chronicle order.
pub fn enumerate_trees(j: usize) -> Result<Vec<OrderedTree>> {
    if j == 0 {
        return Err(Error::Config("trees need at least one generation".into()));
    }
    if j > MAX_ENUMERATED_GENERATIONS {
        let count: f64 = (1..=j).map(|k| k as f64).product();
        return Err(Error::CostGuard {
            estimate: count,
            limit: (1..=MAX_ENUMERATED_GENERATIONS).map(|k| k as f64).product(),
        });
    }
    let mut out = Vec::new();
    let mut chron = vec![0usize; j - 1];
    loop {
        out.push(OrderedTree::from_chronicle(&chron)?);
        // Odometer: digit i ranges over 0..i+2.
        let mut i = chron.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            chron[i] += 1;
            if chron[i] < i + 2 {
                break;
            }
            chron[i] = 0;
        }
    }
}

/// Parameters of the normal form evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NfParams {
    /// Threshold `K ≥ 1` of the first nearly resonant set `|μ₁| ≤ (3K)⁴`.
    pub k: f64,
    /// Depth parameter for `E_δ`.
    pub delta: Option<f64>,
    /// Every node frequency satisfies `|ξ_a| ≤ lattice_cut`.
    pub lattice_cut: i64,
    pub max_gen: usize,
}

impl NfParams {
    pub fn new(k: f64, lattice_cut: i64) -> Result<Self> {
        let p = Self {
            k,
            delta: None,
            lattice_cut,
            max_gen: 3,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = Some(delta);
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_gen(mut self, max_gen: usize) -> Result<Self> {
        self.max_gen = max_gen;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 1.0 && self.k.is_finite()) {
            return Err(Error::Config(format!("K must be >= 1, got {}", self.k)));
        }
        if self.lattice_cut < 1 {
            return Err(Error::Config(format!(
                "lattice cut must be positive, got {}",
                self.lattice_cut
            )));
        }
        if self.max_gen == 0 || self.max_gen > MAX_EVALUATED_GENERATIONS {
            return Err(Error::Config(format!(
                "max generation must lie in 1..={MAX_EVALUATED_GENERATIONS}, got {}",
                self.max_gen
            )));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!("delta must be positive, got {d}")));
            }
        }
        Ok(())
    }

    fn first_threshold(&self) -> f64 {
        (3.0 * self.k).powi(4)
    }
}

/// Frequencies on every node of a tree, fixed by the terminal frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexAssignment {
    tree: OrderedTree,
    freqs: Vec<i64>,
}

impl IndexAssignment {
    /// `leaf_freqs` are given left to right; internal frequencies are sums.
    pub fn new(tree: &OrderedTree, leaf_freqs: &[i64]) -> Result<Self> {
        if leaf_freqs.len() != tree.terminals().len() {
            return Err(Error::Config(format!(
                "{} leaf frequencies for {} terminals",
                leaf_freqs.len(),
                tree.terminals().len()
            )));
        }
        let mut freqs = vec![0i64; tree.nodes().len()];
        for (&a, &f) in tree.terminals().iter().zip(leaf_freqs) {
            freqs[a] = f;
        }
        // Children always carry larger indices than their parent.
        for a in (0..tree.nodes().len()).rev() {
            if let Some((l, r)) = tree.nodes()[a].children {
                freqs[a] = freqs[l] + freqs[r];
            }
        }
        Ok(Self {
            tree: tree.clone(),
            freqs,
        })
    }

    pub fn tree(&self) -> &OrderedTree {
        &self.tree
    }

    pub fn freq(&self, a: usize) -> i64 {
        self.freqs[a]
    }

    pub fn output(&self) -> i64 {
        self.freqs[0]
    }

    pub fn all_nonzero(&self) -> bool {
        self.freqs.iter().all(|&f| f != 0)
    }

    pub fn max_abs(&self) -> i64 {
        self.freqs.iter().map(|f| f.abs()).max().unwrap_or(0)
    }

    /// `(ξ^{(k)}, ξ₁^{(k)}, ξ₂^{(k)})` for generation `k ≥ 1`.
    pub fn triple(&self, k: usize) -> (i64, i64, i64) {
        let a = self.tree.expanded()[k - 1];
        let (l, r) = self.tree.nodes()[a].children.expect("expanded node");
        (self.freqs[a], self.freqs[l], self.freqs[r])
    }

    /// `μ_k = −3 ξ^{(k)} ξ₁^{(k)} ξ₂^{(k)}`.
    pub fn mu(&self, k: usize) -> f64 {
        let (x, a, b) = self.triple(k);
        -3.0 * x as f64 * a as f64 * b as f64
    }

    /// `μ̃_k = μ₁ + … + μ_k`; `μ̃₀ = 0`.
    pub fn mu_tilde(&self, k: usize) -> f64 {
        (1..=k).map(|i| self.mu(i)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    /// Nearly resonant set `A_j`.
    Resonant,
    /// Complement `A_j^c`.
    NonResonant,
}

fn member(j: usize, mu_tilde: f64, mu_tilde_prev: f64, first_threshold: f64) -> Membership {
    let inside = if j == 1 {
        mu_tilde.abs() <= first_threshold
    } else {
        mu_tilde.abs() <= ((j + 2) as f64).powi(4) * mu_tilde_prev.abs()
    };
    if inside {
        Membership::Resonant
    } else {
        Membership::NonResonant
    }
}

/// Membership of an assignment in `A_j` or its complement.
pub fn set_membership(assignment: &IndexAssignment, j: usize, params: &NfParams) -> Result<Membership> {
    let gens = assignment.tree().generations();
    if j == 0 || j > gens {
        return Err(Error::Domain(format!("generation {j} outside 1..={gens}")));
    }
    Ok(member(
        j,
        assignment.mu_tilde(j),
        assignment.mu_tilde(j - 1),
        params.first_threshold(),
    ))
}

/// Coefficients on `{−cut, …, cut}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeVector {
    cut: i64,
    values: Vec<Complex64>,
}

impl LatticeVector {
    pub fn zeros(cut: i64) -> Self {
        Self {
            cut,
            values: vec![Complex64::new(0.0, 0.0); (2 * cut + 1) as usize],
        }
    }

    /// Restriction of a field to `|ξ| ≤ cut`.
    pub fn from_field(u: &SpectralField, cut: i64) -> Self {
        let mut v = Self::zeros(cut);
        for xi in -cut..=cut {
            v.values[(xi + cut) as usize] = u.coeff(xi);
        }
        v
    }

    pub fn cut(&self) -> i64 {
        self.cut
    }

    pub fn get(&self, xi: i64) -> Complex64 {
        if xi.abs() > self.cut {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[(xi + self.cut) as usize]
        }
    }

    pub fn set(&mut self, xi: i64, value: Complex64) {
        self.values[(xi + self.cut) as usize] = value;
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `(Σ_ξ |c_ξ|²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    fn zip(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let cut = self.cut.max(other.cut);
        let mut out = Self::zeros(cut);
        for xi in -cut..=cut {
            out.set(xi, f(self.get(xi), other.get(xi)));
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            cut: self.cut,
            values: self.values.iter().map(|c| c * a).collect(),
        }
    }
}

/// `𝒩^{(1)}(t)(u)(ξ) = (2π)^{-1/2} Σ_{ξ₁+ξ₂=ξ, ξξ₁ξ₂≠0} e^{itΞ_KdV} iξ û(ξ₁)û(ξ₂)` over all
/// pairs on the field's lattice, for `|ξ| ≤ M`.
pub fn eval_bilinear(t: f64, u: &SpectralField) -> LatticeVector {
    let g = u.grid();
    let (lo, hi) = (-g.nyquist() + 1, g.nyquist());
    let cut = g.modes() as i64;
    let s = 1.0 / (2.0 * PI).sqrt();
    let mut out = LatticeVector::zeros(cut);
    for xi in -cut..=cut {
        if xi == 0 {
            continue;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for x1 in lo..=hi {
            let x2 = xi - x1;
            if x1 == 0 || x2 == 0 || x2 < lo || x2 > hi {
                continue;
            }
            let mu = -3.0 * (xi * x1 * x2) as f64;
            acc += Complex64::from_polar(1.0, t * mu) * u.coeff(x1) * u.coeff(x2);
        }
        out.set(xi, acc * Complex64::new(0.0, xi as f64 * s));
    }
    out
}

/// Which tree-indexed operator to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    /// `𝒩₀^{(j)}`: boundary term, on `∩_{k≤j} A_k^c`, denominators `Π_{k≤j} μ̃_k`.
    N0,
    /// `𝒩₁^{(j)}`: on `A_j ∩ ∩_{k<j} A_k^c`.
    N1,
    /// `𝒩₂^{(j)}`: on `∩_{k≤j} A_k^c`.
    N2,
    /// `𝒩^{(j)}`: on `∩_{k<j} A_k^c`, the operator produced by the previous step.
    Full,
    /// `E_δ^{(j)}`: as `Full` with `φ_δ(t, ·)e^{itμ̃_{j−1}}` in place of `e^{itμ̃_j}`.
    Edelta,
}

struct Evaluator<'a> {
    kind: OperatorKind,
    j: usize,
    t: f64,
    u: &'a SpectralField,
    cut: i64,
    first_threshold: f64,
    // ξ³h(δ, ξ) at ξ + cut, for E_δ.
    cubic_h: Vec<f64>,
}

impl Evaluator<'_> {
    fn coeff(&self, xi: i64) -> Complex64 {
        self.u.coeff(xi)
    }

    fn required(&self, g: usize) -> Option<Membership> {
        use OperatorKind::*;
        if g < self.j {
            return Some(Membership::NonResonant);
        }
        match self.kind {
            N0 | N2 => Some(Membership::NonResonant),
            N1 => Some(Membership::Resonant),
            Full | Edelta => None,
        }
    }

    /// Sum over all assignments of one tree with root frequency `xi`.
    fn tree_sum(&self, chronicle: &[usize], xi: i64) -> Complex64 {
        let mut terminals = Vec::with_capacity(self.j + 1);
        terminals.push(xi);
        self.walk(chronicle, 1, &mut terminals, 1.0, 0.0, 1.0)
    }

    fn walk(
        &self,
        chronicle: &[usize],
        g: usize,
        terminals: &mut Vec<i64>,
        numer: f64,
        mu_prev: f64,
        denom: f64,
    ) -> Complex64 {
        let pos = if g == 1 { 0 } else { chronicle[g - 2] };
        let p = terminals[pos];
        let numer = numer * p as f64;
        let need = self.required(g);
        let mut acc = Complex64::new(0.0, 0.0);
        let lo = (-self.cut).max(p - self.cut);
        let hi = self.cut.min(p + self.cut);
        for x1 in lo..=hi {
            let x2 = p - x1;
            if x1 == 0 || x2 == 0 {
                continue;
            }
            let mu = -3.0 * p as f64 * x1 as f64 * x2 as f64;
            let mu_t = mu_prev + mu;
            let m = member(g, mu_t, mu_prev, self.first_threshold);
            if need.is_some_and(|n| n != m) {
                continue;
            }
            let den = if g < self.j || self.kind == OperatorKind::N0 {
                debug_assert!(mu_t != 0.0, "non-resonant sets exclude mu = 0");
                denom * mu_t
            } else {
                denom
            };
            terminals.splice(pos..=pos, [x1, x2]);
            if g == self.j {
                let leaves: Complex64 = terminals.iter().map(|&f| self.coeff(f)).product();
                if leaves != Complex64::new(0.0, 0.0) {
                    let phase = if self.kind == OperatorKind::Edelta {
                        let gap = self.cubic_h[(p + self.cut) as usize]
                            - self.cubic_h[(x1 + self.cut) as usize]
                            - self.cubic_h[(x2 + self.cut) as usize];
                        phi_from_gap(self.t, mu, gap) * Complex64::from_polar(1.0, self.t * mu_prev)
                    } else {
                        Complex64::from_polar(1.0, self.t * mu_t)
                    };
                    acc += phase * leaves * (numer / den);
                }
            } else {
                acc += self.walk(chronicle, g + 1, terminals, numer, mu_t, den);
            }
            terminals.splice(pos..pos + 2, [p]);
        }
        acc
    }
}

/// Estimated number of summands for `eval_multilinear` at depth `j`.
pub fn cost_estimate(j: usize, cut: i64) -> f64 {
    let trees: f64 = (1..=j).map(|k| k as f64).product();
    trees * cut as f64 * ((2 * cut + 1) as f64).powi(j as i32)
}

/// Evaluates a `(j+1)`-linear operator at time `t` on the interaction variable `u`,
/// for `|ξ| ≤ params.lattice_cut`.
pub fn eval_multilinear(
    kind: OperatorKind,
    j: usize,
    t: f64,
    u: &SpectralField,
    params: &NfParams,
) -> Result<LatticeVector> {
    params.validate()?;
    if j == 0 || j > params.max_gen {
        return Err(Error::Config(format!(
            "generation {j} outside 1..={}",
            params.max_gen
        )));
    }
    let cut = params.lattice_cut;
    let estimate = cost_estimate(j, cut);
    if estimate > COST_LIMIT {
        return Err(Error::CostGuard {
            estimate,
            limit: COST_LIMIT,
        });
    }
    let cubic_h = if kind == OperatorKind::Edelta {
        let delta = params
            .delta
            .ok_or_else(|| Error::Config("E_delta needs params.delta".into()))?;
        (-cut..=cut)
            .map(|x| {
                let x = x as f64;
                h_delta(x, delta).map(|h| x * x * x * h)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let ev = Evaluator {
        kind,
        j,
        t,
        u,
        cut,
        first_threshold: params.first_threshold(),
        cubic_h,
    };
    let trees = enumerate_trees(j)?;
    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
    let norm = sign * (2.0 * PI).powf(-(j as f64) / 2.0);
    let unit = match kind {
        OperatorKind::N0 => Complex64::new(norm, 0.0),
        _ => Complex64::new(0.0, norm),
    };
    // Per-tree sums for ξ = 1..=cut, reduced in tree order.
    let per_tree: Vec<Vec<Complex64>> = trees
        .par_iter()
        .map(|tree| (1..=cut).map(|xi| ev.tree_sum(tree.chronicle(), xi)).collect())
        .collect();
    let mut out = LatticeVector::zeros(cut);
    for xi in 1..=cut {
        let v: Complex64 = per_tree.iter().map(|s| s[(xi - 1) as usize]).sum::<Complex64>() * unit;
        out.set(xi, v);
        // Real inputs give Hermitian outputs.
        out.set(-xi, v.conj());
    }
    Ok(out)
}

/// `Ñ₂^{(j)} = ξ^{-1} 𝒩₂^{(j)}` off the origin.
pub fn n2_tilde(j: usize, t: f64, u: &SpectralField, params: &NfParams) -> Result<LatticeVector> {
    let mut v = eval_multilinear(OperatorKind::N2, j, t, u, params)?;
    for xi in -params.lattice_cut..=params.lattice_cut {
        if xi != 0 {
            let c = v.get(xi) / xi as f64;
            v.set(xi, c);
        }
    }
    Ok(v)
}

fn require_kdv(traj: &Trajectory) -> Result<()> {
    if traj.problem.symbol.kind() != SymbolKind::KdV {
        return Err(Error::Config(format!(
            "normal form checks need a KdV trajectory, got {:?}",
            traj.problem.symbol.kind()
        )));
    }
    Ok(())
}

fn snapshot(traj: &Trajectory, t: f64) -> Result<usize> {
    traj.snapshot_index(t)
        .ok_or_else(|| Error::Domain(format!("t = {t} is not a recorded time")))
}

/// `‖𝒩₂^{(1)}(t) − [𝒩₀^{(1)}(t+h) − 𝒩₀^{(1)}(t−h)]/(2h) − 𝒩^{(2)}(t)‖` along a KdV
/// trajectory, with `h` the snapshot spacing.
pub fn verify_step1(traj: &Trajectory, params: &NfParams, t: f64) -> Result<f64> {
    require_kdv(traj)?;
    let k = snapshot(traj, t)?;
    if k == 0 || k + 1 >= traj.len() {
        return Err(Error::Domain(format!(
            "t = {t} needs a snapshot on both sides"
        )));
    }
    let (tm, t0, tp) = (traj.times[k - 1], traj.times[k], traj.times[k + 1]);
    if ((tp - t0) - (t0 - tm)).abs() > 1e-9 * (tp - tm) {
        return Err(Error::Domain(format!("uneven snapshot spacing around t = {t}")));
    }
    let p = params.with_max_gen(params.max_gen.max(2))?;
    let n2 = eval_multilinear(OperatorKind::N2, 1, t0, &traj.interaction(k), &p)?;
    let n0p = eval_multilinear(OperatorKind::N0, 1, tp, &traj.interaction(k + 1), &p)?;
    let n0m = eval_multilinear(OperatorKind::N0, 1, tm, &traj.interaction(k - 1), &p)?;
    let next = eval_multilinear(OperatorKind::Full, 2, t0, &traj.interaction(k), &p)?;
    let dn0 = n0p.sub(&n0m).scale(1.0 / (tp - tm));
    Ok(n2.sub(&dn0).sub(&next).norm())
}

/// Outcome of [`reconstruct`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reconstruction {
    /// `‖RHS − 𝐯̂(t)‖` on `|ξ| ≤ lattice_cut`.
    pub residual: f64,
    /// `|I_h − I_{2h}|/3` for the trapezoid integrals.
    pub quadrature_estimate: f64,
    /// Difference at `t` between the trajectory and a re-solve at half the step.
    pub solver_estimate: f64,
}

impl Reconstruction {
    pub fn budget(&self) -> f64 {
        self.quadrature_estimate + self.solver_estimate
    }
}

fn trapezoid(times: &[f64], values: &[LatticeVector], idx: &[usize]) -> LatticeVector {
    let mut acc = LatticeVector::zeros(values[0].cut());
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = times[b] - times[a];
        acc = acc.add(&values[a].add(&values[b]).scale(0.5 * h));
    }
    acc
}

/// Evaluates the right side of the `J`-step normal form
/// `𝐯̂(t) = 𝐯̂(0) + Σ_{j<J} 𝒩₀^{(j)}|₀ᵗ + ∫₀ᵗ Σ_{j≤J} 𝒩₁^{(j)} + ∫₀ᵗ 𝒩₂^{(J)}`
/// along a KdV trajectory, with trapezoid time integrals over the snapshots, and
/// compares it with the recorded `𝐯̂(t)`. `J = 1` is the plain Duhamel formula.
pub fn reconstruct(traj: &Trajectory, j_max: usize, params: &NfParams, t: f64) -> Result<Reconstruction> {
    require_kdv(traj)?;
    let p = params.with_max_gen(params.max_gen.max(j_max))?;
    let k = snapshot(traj, t)?;
    let cut = p.lattice_cut;
    let w0 = traj.interaction(0);
    let wk = traj.interaction(k);
    if k == 0 {
        return Ok(Reconstruction {
            residual: 0.0,
            quadrature_estimate: 0.0,
            solver_estimate: 0.0,
        });
    }
    let integrands: Vec<LatticeVector> = (0..=k)
        .into_par_iter()
        .map(|s| -> Result<LatticeVector> {
            let w = traj.interaction(s);
            let ts = traj.times[s];
            let mut acc = eval_multilinear(OperatorKind::N2, j_max, ts, &w, &p)?;
            for j in 1..=j_max {
                acc = acc.add(&eval_multilinear(OperatorKind::N1, j, ts, &w, &p)?);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let times = &traj.times[..=k];
    let fine: Vec<usize> = (0..=k).collect();
    let mut coarse: Vec<usize> = (0..=k).step_by(2).collect();
    if *coarse.last().unwrap() != k {
        coarse.push(k);
    }
    let integral = trapezoid(times, &integrands, &fine);
    let quadrature_estimate = if k >= 2 {
        integral.sub(&trapezoid(times, &integrands, &coarse)).norm() / 3.0
    } else {
        0.0
    };

    let mut rhs = LatticeVector::from_field(&w0, cut).add(&integral);
    for j in 1..j_max {
        let at_t = eval_multilinear(OperatorKind::N0, j, t, &wk, &p)?;
        let at_0 = eval_multilinear(OperatorKind::N0, j, 0.0, &w0, &p)?;
        rhs = rhs.add(&at_t.sub(&at_0));
    }
    let residual = rhs.sub(&LatticeVector::from_field(&wk, cut)).norm();

    let pr = &traj.problem;
    let fine_problem = EvolutionProblem::new(
        pr.symbol,
        pr.initial.clone(),
        pr.horizon,
        pr.dt / 2.0,
        pr.record_every.saturating_mul(2),
    )?;
    let refined = solve(&fine_problem)?;
    let solver_estimate = match refined.snapshot_index(t) {
        Some(r) => LatticeVector::from_field(&refined.interaction(r), cut)
            .sub(&LatticeVector::from_field(&wk, cut))
            .norm(),
        None => {
            return Err(Error::Domain(format!(
                "t = {t} is not recorded by the refined solve"
            )))
        }
    };
    Ok(Reconstruction {
        residual,
        quadrature_estimate,
        solver_estimate,
    })
}

/// Empirical constants for the multilinear bounds at one depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    pub j: usize,
    pub k: f64,
    pub theta: f64,
    pub samples: usize,
    /// `max ‖𝒩₀^{(j)}(u)‖ · K^{4jθ}`.
    pub n0_ratio: f64,
    /// `max ‖𝒩₁^{(j)}(u)‖ · K^{4jθ−6}`.
    pub n1_ratio: f64,
    /// `max sup_ξ |Ñ₂^{(j)}(u)(ξ)|`.
    pub n2_tilde_sup: f64,
}

/// [`measure_bounds`] on caller-supplied fields, evaluated at `t = 0`.
pub fn measure_bounds_on(j: usize, params: &NfParams, fields: &[SpectralField]) -> Result<BoundsReport> {
    let theta = REPORT_THETA;
    let kk = params.k;
    let mut rep = BoundsReport {
        j,
        k: kk,
        theta,
        samples: fields.len(),
        n0_ratio: 0.0,
        n1_ratio: 0.0,
        n2_tilde_sup: 0.0,
    };
    for u in fields {
        let n0 = eval_multilinear(OperatorKind::N0, j, 0.0, u, params)?.norm();
        let n1 = eval_multilinear(OperatorKind::N1, j, 0.0, u, params)?.norm();
        let n2 = n2_tilde(j, 0.0, u, params)?.sup();
        rep.n0_ratio = rep.n0_ratio.max(n0 * kk.powf(4.0 * j as f64 * theta));
        rep.n1_ratio = rep.n1_ratio.max(n1 * kk.powf(4.0 * j as f64 * theta - 6.0));
        rep.n2_tilde_sup = rep.n2_tilde_sup.max(n2);
    }
    Ok(rep)
}

/// Measures the bound constants over `samples` random mean-zero unit-norm fields
/// supported on `1 ≤ |ξ| ≤ lattice_cut`, seeded by `seed`.
pub fn measure_bounds(j: usize, params: &NfParams, samples: usize, seed: u64) -> Result<BoundsReport> {
    let cut = params.lattice_cut;
    let grid = Grid::new((2 * cut + 2).max(8) as usize)?;
    let fields = (0..samples as u64)
        .map(|s| SpectralField::random_band_limited(grid, cut, seed.wrapping_add(s)))
        .collect::<Result<Vec<_>>>()?;
    measure_bounds_on(j, params, &fields)
}

/// Term-wise majorant `‖(2π)^{-1/2} Σ |t (Ξ_δ − Ξ_KdV)| |ξ| |û(ξ₁)||û(ξ₂)|‖` of
/// `E_δ^{(1)}(u)(t)`, from `|φ_δ| ≤ |t||Ξ_δ − Ξ_KdV|`.
pub fn edelta_majorant(t: f64, u: &SpectralField, params: &NfParams) -> Result<f64> {
    let delta = params
        .delta
        .ok_or_else(|| Error::Config("E_delta needs params.delta".into()))?;
    let cut = params.lattice_cut;
    let ch: Vec<f64> = (-cut..=cut)
        .map(|x| {
            let x = x as f64;
            h_delta(x, delta).map(|h| x * x * x * h)
        })
        .collect::<Result<_>>()?;
    let s = 1.0 / (2.0 * PI).sqrt();
    let mut total = 0.0;
    for xi in -cut..=cut {
        if xi == 0 {
            continue;
        }
        let mut acc = 0.0;
        for x1 in (-cut).max(xi - cut)..=cut.min(xi + cut) {
            let x2 = xi - x1;
            if x1 == 0 || x2 == 0 {
                continue;
            }
            let gap = ch[(xi + cut) as usize] - ch[(x1 + cut) as usize] - ch[(x2 + cut) as usize];
            acc += (t * gap).abs() * (xi.abs() as f64) * u.coeff(x1).norm() * u.coeff(x2).norm();
        }
        total += (acc * s).powi(2);
    }
    Ok(total.sqrt())
}
