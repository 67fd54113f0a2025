//! Master-equation generator and steady-state solver.
//!
//! `dρ/dt = −i[H′_S + H_ct, ρ] + K(ρ) + (γ/2) D_σ(ρ) + Σ_m (Γ_m/2) D_{ς_m}(ρ)`
//! where `K(ρ) = −[A, Zρ] + [A, ρZ†]` and `H_ct = −δ_P A` cancels the Lamb
//! shift that `K` carries, keeping the drive resonant with the polaron-shifted
//! transition.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bath::{self, BathKernel};
use crate::error::{Error, Result};
use crate::linalg::{
    self, devec, hamiltonian_superop, hermitian_eig, hermitian_part, hermiticity_defect, jacobi_block_reduce, jacobi_eig_split, left_superop, max_norm,
    right_superop, sandwich_superop, vec_op, EigenDecomposition, Operator, SuperOperator, C64,
};
use crate::model::{lift, sensor_bit, CompositeModel};

/// Minimum steady-state eigenvalue tolerated before warning.
pub const POSITIVITY_FLOOR: f64 = -1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhononMode {
    /// Phonon dissipator built in the eigenbasis of the joint H′_S.
    Joint,
    /// Dissipator built from the bare emitter H_S and lifted onto the sensors.
    Additive,
    /// No phonons.
    Off,
}

impl PhononMode {
    pub const ALL: [PhononMode; 3] = [PhononMode::Joint, PhononMode::Additive, PhononMode::Off];

    pub fn as_str(&self) -> &'static str {
        match self {
            PhononMode::Joint => "joint",
            PhononMode::Additive => "additive",
            PhononMode::Off => "off",
        }
    }
}

impl fmt::Display for PhononMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhononMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "joint" => Ok(PhononMode::Joint),
            "additive" => Ok(PhononMode::Additive),
            "off" => Ok(PhononMode::Off),
            other => Err(format!("unknown phonon mode `{other}` (expected joint, additive or off)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateOperator {
    pub z: Operator,
}

/// `(rate/2) (2cρc† − c†cρ − ρc†c)`.
pub fn lindblad_dissipator(c: &Operator, rate: f64) -> Result<SuperOperator> {
    if rate < 0.0 {
        return Err(Error::NegativeRate(rate));
    }
    let d = c.nrows();
    if rate == 0.0 {
        return Ok(SuperOperator::zeros(d));
    }
    let n = c.adjoint() * c;
    let mut s = sandwich_superop(c, &c.adjoint())?.scale(C64::new(rate, 0.0));
    let mut anti = left_superop(&n)?;
    anti.add_assign(&right_superop(&n)?);
    s.sub_assign(&anti.scale(C64::new(rate / 2.0, 0.0)));
    Ok(s)
}

/// `Z = Σ_αβ ⟨ψ_α|A|ψ_β⟩ F(−λ_αβ) |ψ_α⟩⟨ψ_β|`.
pub fn rate_operator(decomp: &EigenDecomposition, a: &Operator, kernel: &BathKernel) -> Result<RateOperator> {
    let n = decomp.dim();
    if a.nrows() != n {
        return Err(Error::DimensionMismatch { left: a.nrows(), right: n });
    }
    if !kernel.params().is_coupled() {
        return Ok(RateOperator { z: Operator::zeros(n, n) });
    }
    // F(0)·A is split off exactly; the eigenbasis sum then only carries
    // F(−λ) − F(0), which keeps rounding out of the weak inter-sensor elements.
    let f0 = kernel.half_fourier(0.0)?;
    let mut in_basis = decomp.to_eigenbasis(a);
    for beta in 0..n {
        for alpha in 0..n {
            in_basis[(alpha, beta)] *= kernel.half_fourier_increment(-decomp.gap(alpha, beta))?;
        }
    }
    Ok(RateOperator { z: decomp.from_eigenbasis(&in_basis) + a.map(|v| v * f0) })
}

/// `K(ρ) = −[A, Zρ] + [A, ρZ†]`.
pub fn phonon_dissipator(a: &Operator, z: &RateOperator) -> Result<SuperOperator> {
    let defect = hermiticity_defect(a);
    if defect > 1e-12 * max_norm(a).max(1.0) {
        return Err(Error::NonHermitianCoupling(defect));
    }
    let zd = z.z.adjoint();
    let mut k = sandwich_superop(&z.z, a)?;
    k.add_assign(&sandwich_superop(a, &zd)?);
    k.sub_assign(&left_superop(&(a * &z.z))?);
    k.sub_assign(&right_superop(&(&zd * a))?);
    Ok(k)
}

/// `ρ ↦ −i[−δ_P A, ρ]`.
pub fn polaron_counter_term(a: &Operator, polaron_shift: f64) -> Result<SuperOperator> {
    hamiltonian_superop(&a.scale(-polaron_shift))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian {
    matrix: SuperOperator,
    mode: PhononMode,
    fingerprint: u64,
    excitation_scales: Vec<f64>,
}

impl Liouvillian {
    pub fn matrix(&self) -> &SuperOperator {
        &self.matrix
    }

    pub fn mode(&self) -> PhononMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Stable hash of the model, bath and mode this generator was built from.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Wrap an arbitrary generator; the steady-state solver then runs unscaled.
    pub fn from_superoperator(matrix: SuperOperator, mode: PhononMode) -> Self {
        let dim = matrix.dim();
        Self { matrix, mode, fingerprint: 0, excitation_scales: vec![1.0; dim] }
    }

    pub fn apply(&self, rho: &Operator) -> Operator {
        self.matrix.apply(rho)
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, x: u64) {
        for b in x.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

fn fingerprint(model: &CompositeModel, kernel: &BathKernel, mode: PhononMode) -> u64 {
    let mut h = Fnv::new();
    let e = &model.emitter;
    for x in [e.detuning, e.rabi, e.gamma] {
        h.write(x.to_bits());
    }
    for s in &model.sensors {
        for x in [s.detuning, s.linewidth, s.coupling] {
            h.write(x.to_bits());
        }
    }
    let p = kernel.params();
    for x in [p.alpha, p.nu_c, p.temperature, kernel.config().tau_max, kernel.config().tolerance] {
        h.write(x.to_bits());
    }
    h.write(mode as u64);
    h.0
}

/// Eigenbasis of H′_S.
///
/// The ε = 0 Hamiltonian is diagonal in dressed-emitter ⊗ sensor-occupation
/// states; the sensor exchange is then removed by Jacobi rotations. Eigenvector
/// admixtures of order (ε/Ω)² come out with relative rather than absolute
/// accuracy, and the weak two-sensor moments depend on exactly those.
pub fn joint_eigenbasis(model: &CompositeModel) -> Result<EigenDecomposition> {
    let (u0, base, h1) = dressed_frame(model)?;
    Ok(jacobi_eig_split(&base, &h1)?.rotated(&u0))
}

/// Dressed-emitter ⊗ sensor-occupation frame: the rotation, the ε = 0 energies
/// and the sensor exchange written in that frame.
fn dressed_frame(model: &CompositeModel) -> Result<(Operator, Vec<f64>, Operator)> {
    let n = model.sensor_count();
    let dressed = hermitian_eig(&model.h_emitter)?;
    let u0 = lift(&dressed.vectors, 0, n + 1);
    let mut exchange = Operator::zeros(model.dim, model.dim);
    for (vs, s) in model.sensor_lowering.iter().zip(&model.sensors) {
        exchange += (model.sigma.adjoint() * vs + &model.sigma * vs.adjoint()).scale(s.coupling);
    }
    let h1 = u0.adjoint() * exchange * &u0;
    let base: Vec<f64> = (0..model.dim)
        .map(|i| dressed.values[i >> n] + (0..n).filter(|&m| sensor_bit(i, m, n) == 1).map(|m| model.sensors[m].detuning).sum::<f64>())
        .collect();
    Ok((u0, base, h1))
}

/// ε = 0 levels closer than this are treated as one cluster by [`joint_rate_operator`].
pub const CLUSTER_WIDTH: f64 = 1e-6;

const MAX_SERIES_ORDER: u32 = 40;

/// Groups of `base` values chained by gaps of at most `width`, with their means.
fn cluster_levels(base: &[f64], width: f64) -> (Vec<usize>, Vec<Vec<usize>>, Vec<f64>) {
    let mut order: Vec<usize> = (0..base.len()).collect();
    order.sort_by(|&a, &b| base[a].total_cmp(&base[b]).then(a.cmp(&b)));
    let mut labels = vec![0; base.len()];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        if k == 0 || base[i] - base[order[k - 1]] > width {
            members.push(Vec::new());
        }
        labels[i] = members.len() - 1;
        members.last_mut().expect("pushed above").push(i);
    }
    for m in &mut members {
        m.sort_unstable();
    }
    let centers = members.iter().map(|m| m.iter().map(|&i| base[i]).sum::<f64>() / m.len() as f64).collect();
    (labels, members, centers)
}

/// Rate operator `Z` for the joint Hamiltonian.
///
/// Same operator as [`rate_operator`] on [`joint_eigenbasis`], but levels that
/// are degenerate at ε = 0 are never diagonalized among themselves. Exact
/// two-photon resonances put states of different sensor sectors into one such
/// cluster; rotating them into each other makes the tiny cross-sector entries
/// of `Z` cancellation-limited. Inside a cluster pair `(a, b)` the transform is
/// expanded about the cluster gap Λ instead:
/// `Z_ab = Σₙ F⁽ⁿ⁾(−Λ) (−1)ⁿ Sⁿ(A_ab) / n!` with `S(X) = h_a X − X h_b`.
pub fn joint_rate_operator(model: &CompositeModel, kernel: &BathKernel) -> Result<RateOperator> {
    let d = model.dim;
    if kernel.params().alpha == 0.0 {
        return Ok(RateOperator { z: Operator::zeros(d, d) });
    }
    let (u0, base, h1) = dressed_frame(model)?;
    let (labels, members, centers) = cluster_levels(&base, CLUSTER_WIDTH);
    let red = jacobi_block_reduce(&base, &h1, &labels)?;
    let v = &u0 * &red.vectors;
    let a_v = v.adjoint() * &model.coupling * &v;
    let f0 = kernel.half_fourier(0.0)?;
    let tau_max = kernel.config().tau_max;

    let block = |m: &[usize], center: f64| {
        Operator::from_fn(m.len(), m.len(), |i, j| {
            if i == j {
                C64::new((base[m[i]] - center) + red.shift[m[i]], 0.0)
            } else {
                red.reduced[(m[i], m[j])]
            }
        })
    };
    let blocks: Vec<Operator> = members.iter().zip(&centers).map(|(m, &c)| block(m, c)).collect();

    let mut y = Operator::zeros(d, d);
    for (a, ma) in members.iter().enumerate() {
        for (b, mb) in members.iter().enumerate() {
            if ma.len() == 1 && mb.len() == 1 {
                let (p, q) = (ma[0], mb[0]);
                let gap = (base[p] - base[q]) + (red.shift[p] - red.shift[q]);
                y[(p, q)] = a_v[(p, q)] * kernel.half_fourier_increment(-gap)?;
                continue;
            }
            let lambda = -(centers[a] - centers[b]);
            let mut term = Operator::from_fn(ma.len(), mb.len(), |i, j| a_v[(ma[i], mb[j])]);
            let mut acc = term.scale(1.0) * kernel.half_fourier_increment(lambda)?;
            let scale = max_norm(&term).max(f64::MIN_POSITIVE);
            for order in 1..=MAX_SERIES_ORDER {
                term = (&blocks[a] * &term - &term * &blocks[b]).scale(-1.0 / order as f64);
                let bound = max_norm(&term) * kernel.l1_norm() * tau_max.powi(order as i32);
                if bound <= 1e-20 * scale * kernel.l1_norm() {
                    break;
                }
                if order == MAX_SERIES_ORDER {
                    return Err(Error::SingularSolve("cluster expansion of the rate operator did not converge".into()));
                }
                acc += &term * kernel.half_fourier_derivative(lambda, order)?;
            }
            for (i, &p) in ma.iter().enumerate() {
                for (j, &q) in mb.iter().enumerate() {
                    y[(p, q)] = acc[(i, j)];
                }
            }
        }
    }
    Ok(RateOperator { z: &v * y * v.adjoint() + model.coupling.scale(1.0) * f0 })
}

/// Phonon part `K + counter-term` for the given mode, on the joint space.
fn phonon_part(model: &CompositeModel, kernel: &BathKernel, mode: PhononMode) -> Result<Option<SuperOperator>> {
    if mode == PhononMode::Off {
        return Ok(None);
    }
    let z = match mode {
        PhononMode::Joint => joint_rate_operator(model, kernel)?,
        PhononMode::Additive => {
            let sm = linalg::lowering();
            let bare_a = sm.adjoint() * &sm;
            let bare = rate_operator(&hermitian_eig(&model.h_emitter)?, &bare_a, kernel)?;
            RateOperator { z: lift(&bare.z, 0, model.sensor_count() + 1) }
        }
        PhononMode::Off => unreachable!(),
    };
    let mut k = phonon_dissipator(&model.coupling, &z)?;
    k.add_assign(&polaron_counter_term(&model.coupling, bath::polaron_shift(kernel.params()))?);
    Ok(Some(k))
}

pub fn build_liouvillian(model: &CompositeModel, mode: PhononMode, kernel: &BathKernel) -> Result<Liouvillian> {
    let mut matrix = hamiltonian_superop(&model.h_prime)?;
    for (c, rate) in model.collapse_operators() {
        matrix.add_assign(&lindblad_dissipator(c, rate)?);
    }
    if let Some(k) = phonon_part(model, kernel, mode)? {
        matrix.add_assign(&k);
    }
    Ok(Liouvillian {
        matrix,
        mode,
        fingerprint: fingerprint(model, kernel, mode),
        excitation_scales: model.excitation_scales(),
    })
}

/// Steady state of `l`.
///
/// The first equation (for ρ₀₀) is replaced by the trace constraint and the
/// bordered system is solved by LU. Rows and columns are first rescaled by the
/// expected sensor-excitation order of each density-matrix element: with
/// ε ≪ Γ the multi-sensor moments sit many orders of magnitude below the
/// ground-state populations and are lost to rounding otherwise.
pub fn steady_state(l: &Liouvillian) -> Result<Operator> {
    let d = l.dim();
    let n = d * d;
    let lm = l.matrix.matrix();
    let s = &l.excitation_scales;
    let col_scale: Vec<f64> = (0..n).map(|k| s[k % d] * s[k / d]).collect();

    let mut m = DMatrix::from_fn(n, n, |r, k| lm[(r, k)] * (col_scale[k] / col_scale[r]));
    for k in 0..n {
        m[(0, k)] = if k % d == k / d { C64::new(col_scale[k], 0.0) } else { C64::new(0.0, 0.0) };
    }
    let mut rhs = DVector::zeros(n);
    rhs[0] = C64::new(1.0, 0.0);

    let lu = m.lu();
    let pivots = lu.u().diagonal();
    let largest = pivots.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let smallest = pivots.iter().fold(f64::INFINITY, |a, z| a.min(z.norm()));
    let pivot_ratio = smallest / largest;
    if !(pivot_ratio > 1e-13) {
        return Err(Error::DegenerateKernel { pivot_ratio });
    }
    let y = lu.solve(&rhs).ok_or_else(|| Error::SingularSolve("LU solve failed".into()))?;
    let x = DVector::from_iterator(n, y.iter().zip(&col_scale).map(|(v, c)| v * *c));

    let rho = hermitian_part(&devec(&x, d));
    let trace = rho.trace();
    if !(trace.re.is_finite() && trace.re.abs() > 0.0) {
        return Err(Error::SingularSolve(format!("steady state has trace {trace}")));
    }
    let rho = rho.unscale(trace.re);

    let residual = (lm * vec_op(&rho)).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let bound = 1e-10 * max_norm(lm);
    if residual > bound {
        return Err(Error::SingularSolve(format!("residual {residual:e} exceeds {bound:e}")));
    }
    if let Ok(eig) = hermitian_eig(&rho) {
        if eig.values[0] < POSITIVITY_FLOOR {
            log::warn!(
                "steady state has eigenvalue {:.3e}; the non-secular phonon dissipator does not enforce positivity",
                eig.values[0]
            );
        }
    }
    Ok(rho)
}

fn inf_norm(m: &DMatrix<C64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Classical fourth-order Runge–Kutta propagation of `ρ₀` to `t_end`.
///
/// For a linear generator one RK4 step is the polynomial
/// `P = I + hL + (hL)²/2 + (hL)³/6 + (hL)⁴/24`; `P^n` is applied by repeated
/// squaring, which reproduces the stepped trajectory without walking it.
pub fn time_evolve_oracle(l: &Liouvillian, rho0: &Operator, t_end: f64, dt: f64) -> Result<Operator> {
    if !(dt > 0.0) || t_end < 0.0 {
        return Err(Error::InvalidParameter { name: "dt", reason: format!("need dt > 0 and t_end >= 0, got {dt}, {t_end}") });
    }
    let lm = l.matrix.matrix();
    let estimate = (inf_norm(lm) * dt).powi(5) / 120.0;
    if estimate >= 1e-10 {
        return Err(Error::StepSizeTooLarge { dt, estimate });
    }
    let steps = (t_end / dt).floor() as u64;
    let remainder = t_end - steps as f64 * dt;

    let mut v = vec_op(rho0);
    let mut power = rk4_step_matrix(lm, dt);
    let mut k = steps;
    while k > 0 {
        if k & 1 == 1 {
            v = &power * v;
        }
        k >>= 1;
        if k > 0 {
            power = &power * &power;
        }
    }
    if remainder > 0.0 {
        v = rk4_step_matrix(lm, remainder) * v;
    }
    Ok(devec(&v, l.dim()))
}

fn rk4_step_matrix(lm: &DMatrix<C64>, h: f64) -> DMatrix<C64> {
    let n = lm.nrows();
    let eye = DMatrix::<C64>::identity(n, n);
    let hl = lm.map(|z| z * h);
    let mut p = &eye + hl.map(|z| z / 4.0);
    p = &eye + (&hl * p).map(|z| z / 3.0);
    p = &eye + (&hl * p).map(|z| z / 2.0);
    &eye + &hl * p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{BathParams, KernelConfig};
    use crate::linalg::{commutator, identity, trace_product};
    use crate::model::{build_composite, EmitterParams, SensorParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_op(rng: &mut ChaCha8Rng, n: usize) -> Operator {
        Operator::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn flat_kernel() -> BathKernel {
        BathKernel::new(BathParams::new(0.0, 2.2, 4.0).unwrap(), KernelConfig::default()).unwrap()
    }

    fn qd_kernel() -> BathKernel {
        BathKernel::new(BathParams::new(0.027, 2.2, 4.0).unwrap(), KernelConfig::default()).unwrap()
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("Joint".parse::<PhononMode>().unwrap(), PhononMode::Joint);
        assert!("lindblad".parse::<PhononMode>().is_err());
        assert_eq!(PhononMode::Additive.to_string(), "additive");
    }

    #[test]
    fn lindblad_zero_rate_is_zero() {
        assert_eq!(lindblad_dissipator(&linalg::lowering(), 0.0).unwrap(), SuperOperator::zeros(2));
        assert!(matches!(lindblad_dissipator(&linalg::lowering(), -1.0), Err(Error::NegativeRate(_))));
    }

    #[test]
    fn lindblad_decays_excited_state() {
        let gamma = 0.3;
        let excited = Operator::from_diagonal(&DVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]));
        let out = lindblad_dissipator(&linalg::lowering(), gamma).unwrap().apply(&excited);
        let expected = Operator::from_diagonal(&DVector::from_vec(vec![C64::new(gamma, 0.0), C64::new(-gamma, 0.0)]));
        assert!(max_norm(&(out - expected)) < 1e-15);
    }

    #[test]
    fn lindblad_is_traceless() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let c = random_op(&mut rng, 4);
            let rho = random_op(&mut rng, 4);
            let out = lindblad_dissipator(&c, 0.7).unwrap().apply(&rho);
            assert!(out.trace().norm() < 1e-12);
        }
    }

    #[test]
    fn rate_operator_vanishes_without_coupling() {
        let m = build_composite(EmitterParams::new(0.0, 0.05, 0.1), &[]).unwrap();
        let z = rate_operator(&hermitian_eig(&m.h_prime).unwrap(), &m.coupling, &flat_kernel()).unwrap();
        assert_eq!(max_norm(&z.z), 0.0);
    }

    #[test]
    fn rate_operator_commuting_case() {
        let k = qd_kernel();
        let m = build_composite(EmitterParams::new(0.1, 0.0, 0.1), &[SensorParams { detuning: 0.3, linewidth: 0.1, coupling: 0.0 }]).unwrap();
        let z = rate_operator(&hermitian_eig(&m.h_prime).unwrap(), &m.coupling, &k).unwrap();
        let expected = m.coupling.map(|v| v * k.half_fourier(0.0).unwrap());
        assert!(max_norm(&(z.z - expected)) < 1e-14);
    }

    /// exp(−iHτ) by scaled Taylor series, independent of the eigensolver.
    fn propagator(h: &Operator, tau: f64) -> Operator {
        let n = h.nrows();
        let squarings = ((max_norm(h) * tau * n as f64).log2().ceil().max(0.0) as u32) + 4;
        let x = h.map(|z| z * C64::new(0.0, -tau / 2f64.powi(squarings as i32)));
        let mut term = identity(n);
        let mut sum = identity(n);
        for k in 1..20 {
            term = (&term * &x).unscale(k as f64);
            sum += &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn rate_operator_matches_time_domain_oracle() {
        let k = qd_kernel();
        let m = build_composite(
            EmitterParams::new(0.02, 0.3, 0.1),
            &[
                SensorParams { detuning: 0.4, linewidth: 0.1, coupling: 0.05 },
                SensorParams { detuning: -0.7, linewidth: 0.1, coupling: 0.08 },
            ],
        )
        .unwrap();
        let z = rate_operator(&joint_eigenbasis(&m).unwrap(), &m.coupling, &k).unwrap();

        // Z = ∫₀^∞ C(τ) A(−τ) dτ with A(−τ) = e^{−iHτ} A e^{iHτ}, composite Simpson.
        let steps = 6000;
        let tau_max = 15.0;
        let h = tau_max / steps as f64;
        let step = propagator(&m.h_prime, h);
        let mut u = identity(8);
        let mut oracle = Operator::zeros(8, 8);
        for s in 0..=steps {
            let tau = s as f64 * h;
            let weight = if s == 0 || s == steps { 1.0 } else if s % 2 == 1 { 4.0 } else { 2.0 };
            let c = crate::bath::bath_correlation(tau, k.params(), 1e-10).unwrap();
            let a_minus = &u * &m.coupling * u.adjoint();
            oracle += a_minus.map(|v| v * c * (weight * h / 3.0));
            u = &step * &u;
        }
        let err = max_norm(&(&z.z - &oracle)) / max_norm(&oracle);
        assert!(err < 1e-6, "relative error {err:e}");
    }

    #[test]
    fn joint_eigenbasis_diagonalizes_h_prime() {
        let m = build_composite(
            EmitterParams::new(0.01, 0.05, 0.1),
            &[
                SensorParams { detuning: -0.05, linewidth: 0.1, coupling: 1e-6 },
                SensorParams { detuning: 0.05, linewidth: 0.1, coupling: 1e-6 },
            ],
        )
        .unwrap();
        let joint = joint_eigenbasis(&m).unwrap();
        let dense = hermitian_eig(&m.h_prime).unwrap();
        assert!(max_norm(&(joint.reconstruct() - &m.h_prime)) < 1e-15);
        for (a, b) in joint.values.iter().zip(&dense.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn cluster_expansion_matches_eigenbasis_rate_operator() {
        let kernel = BathKernel::new(BathParams::new(0.027, 2.2, 4.0).unwrap(), KernelConfig::default()).unwrap();
        for (d1, d2, eps) in [(-0.3, 0.45, 1e-2), (0.025, -0.025, 1e-6), (0.5, -0.5, 1e-3)] {
            let m = build_composite(
                EmitterParams::new(0.0, 0.05, 1.0 / 700.0),
                &[
                    SensorParams { detuning: d1, linewidth: 0.1, coupling: eps },
                    SensorParams { detuning: d2, linewidth: 0.1, coupling: eps },
                ],
            )
            .unwrap();
            let direct = rate_operator(&joint_eigenbasis(&m).unwrap(), &m.coupling, &kernel).unwrap();
            let cluster = joint_rate_operator(&m, &kernel).unwrap();
            let err = max_norm(&(&direct.z - &cluster.z));
            assert!(err < 1e-14, "{d1} {d2}: {err:e}");
        }
    }

    #[test]
    fn phonon_dissipator_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = hermitian_part(&random_op(&mut rng, 4));
        let zero = RateOperator { z: Operator::zeros(4, 4) };
        assert_eq!(phonon_dissipator(&a, &zero).unwrap(), SuperOperator::zeros(4));
        let z = RateOperator { z: random_op(&mut rng, 4) };
        let k = phonon_dissipator(&a, &z).unwrap();
        for _ in 0..10 {
            let rho = random_op(&mut rng, 4);
            let out = k.apply(&rho);
            assert!(out.trace().norm() < 1e-12);
            let direct = -commutator(&a, &(&z.z * &rho)) + commutator(&a, &(&rho * z.z.adjoint()));
            assert!(max_norm(&(&out - &direct)) < 1e-12);
            let dagger = k.apply(&rho.adjoint());
            assert!(max_norm(&(out.adjoint() - dagger)) < 1e-12);
        }
        assert!(matches!(phonon_dissipator(&random_op(&mut rng, 4), &z), Err(Error::NonHermitianCoupling(_))));
    }

    fn reference_model(sensors: &[SensorParams]) -> CompositeModel {
        build_composite(EmitterParams::new(0.0, 0.05, 1.0 / 700.0), sensors).unwrap()
    }

    #[test]
    fn off_mode_equals_joint_without_coupling() {
        let m = reference_model(&[SensorParams { detuning: 0.03, linewidth: 1e-4, coupling: 1e-6 }]);
        let k = flat_kernel();
        let off = build_liouvillian(&m, PhononMode::Off, &k).unwrap();
        let joint = build_liouvillian(&m, PhononMode::Joint, &k).unwrap();
        assert!(max_norm(&(off.matrix().matrix() - joint.matrix().matrix())) <= 1e-14);
    }

    #[test]
    fn liouvillian_shape_and_trace_annihilation() {
        let sensors = [
            SensorParams { detuning: -0.5, linewidth: 2.0 / 700.0, coupling: 1e-6 },
            SensorParams { detuning: -0.45, linewidth: 2.0 / 700.0, coupling: 1e-6 },
        ];
        let m = reference_model(&sensors);
        let k = qd_kernel();
        for mode in PhononMode::ALL {
            let l = build_liouvillian(&m, mode, &k).unwrap();
            assert_eq!(l.matrix().matrix().nrows(), 64);
            let one = vec_op(&identity(8));
            let left = one.adjoint() * l.matrix().matrix();
            assert!(left.iter().all(|z| z.norm() < 1e-10), "{mode}");
        }
    }

    #[test]
    fn additive_mode_lifts_bare_dissipator() {
        let k = qd_kernel();
        let m = reference_model(&[SensorParams { detuning: 0.7, linewidth: 0.1, coupling: 0.01 }]);
        let bare_model = reference_model(&[]);
        let bare_k = phonon_part(&bare_model, &k, PhononMode::Additive).unwrap().unwrap();
        let lifted_k = phonon_part(&m, &k, PhononMode::Additive).unwrap().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rho_e = hermitian_part(&random_op(&mut rng, 2));
        let rho_s = hermitian_part(&random_op(&mut rng, 2));
        let product = linalg::kron(&rho_e, &rho_s);
        let expected = linalg::kron(&bare_k.apply(&rho_e), &rho_s);
        assert!(max_norm(&(lifted_k.apply(&product) - expected)) < 1e-14);
    }

    #[test]
    fn steady_state_pure_decay() {
        let m = build_composite(EmitterParams::new(0.0, 0.0, 0.2), &[]).unwrap();
        let rho = steady_state(&build_liouvillian(&m, PhononMode::Off, &flat_kernel()).unwrap()).unwrap();
        assert!((rho[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!(rho[(1, 1)].norm() < 1e-14);
    }

    #[test]
    fn steady_state_resonance_fluorescence() {
        let gamma = 1.0 / 700.0;
        let omega = 35.0 * gamma;
        let m = build_composite(EmitterParams::new(0.0, omega, gamma), &[]).unwrap();
        let l = build_liouvillian(&m, PhononMode::Off, &flat_kernel()).unwrap();
        let rho = steady_state(&l).unwrap();
        let expected = (omega * omega / 4.0) / (omega * omega / 2.0 + gamma * gamma / 4.0);
        assert!((rho[(1, 1)].re - expected).abs() < 1e-12);
        assert!((expected - 0.5).abs() < 1e-3);
        let evolved = time_evolve_oracle(&l, &identity(2).unscale(2.0), 60_000.0, 0.5).unwrap();
        assert!(max_norm(&(evolved - &rho)) < 1e-8);
    }

    #[test]
    fn steady_state_detects_degenerate_kernel() {
        // Without decay or drive every diagonal state is stationary.
        let h = Operator::from_diagonal(&DVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(0.3, 0.0)]));
        let l = Liouvillian::from_superoperator(hamiltonian_superop(&h).unwrap(), PhononMode::Off);
        assert!(matches!(steady_state(&l), Err(Error::DegenerateKernel { .. })));
    }

    #[test]
    fn oracle_edge_cases() {
        let m = build_composite(EmitterParams::new(0.0, 0.3, 0.2), &[]).unwrap();
        let l = build_liouvillian(&m, PhononMode::Joint, &qd_kernel()).unwrap();
        let mut rho0 = Operator::zeros(2, 2);
        rho0[(1, 1)] = C64::new(1.0, 0.0);
        assert_eq!(time_evolve_oracle(&l, &rho0, 0.0, 0.01).unwrap(), rho0);
        assert!(matches!(time_evolve_oracle(&l, &rho0, 1.0, 1.0), Err(Error::StepSizeTooLarge { .. })));
        for t in [0.37, 3.0, 11.3] {
            let rho = time_evolve_oracle(&l, &rho0, t, 0.01).unwrap();
            assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn joint_steady_state_matches_oracle() {
        let m = build_composite(
            EmitterParams::new(0.0, 0.4, 0.3),
            &[SensorParams { detuning: -0.5, linewidth: 0.4, coupling: 1e-3 }],
        )
        .unwrap();
        let l = build_liouvillian(&m, PhononMode::Joint, &qd_kernel()).unwrap();
        let rho = steady_state(&l).unwrap();
        let mut rho0 = Operator::zeros(4, 4);
        rho0[(0, 0)] = C64::new(1.0, 0.0);
        let evolved = time_evolve_oracle(&l, &rho0, 400.0, 0.005).unwrap();
        assert!(max_norm(&(evolved - &rho)) < 1e-8);
        assert!(trace_product(&rho, &m.sensor_number(0)).re > 0.0);
    }
}
