//! Globally adaptive 21-point Gauss–Kronrod quadrature for complex integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::linalg::C64;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Stopping rule: finish when the summed error estimate drops below
/// `max(abs_tol, rel_tol · |I|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
    /// Uniform panels the range is split into before adapting.
    pub initial_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 0.0, max_intervals: 4000, initial_panels: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: C64,
    pub error: f64,
    pub evaluations: usize,
}

/// Nodes of the 21-point rule on `[a, b]`, in the order [`gk21_combine`] expects.
pub fn gk21_nodes(a: f64, b: f64) -> [f64; 21] {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut nodes = [center; 21];
    for k in 0..10 {
        nodes[2 * k] = center - half * XGK[k];
        nodes[2 * k + 1] = center + half * XGK[k];
    }
    nodes
}

/// Kronrod and Gauss weights on `[-1, 1]` in [`gk21_nodes`] order; Kronrod-only
/// nodes carry a zero Gauss weight.
pub fn gk21_weights() -> ([f64; 21], [f64; 21]) {
    let mut kronrod = [WGK[10]; 21];
    let mut gauss = [0.0; 21];
    for k in 0..10 {
        kronrod[2 * k] = WGK[k];
        kronrod[2 * k + 1] = WGK[k];
        if k % 2 == 1 {
            gauss[2 * k] = WG[k / 2];
            gauss[2 * k + 1] = WG[k / 2];
        }
    }
    (kronrod, gauss)
}

/// Kronrod estimate and error for samples taken at [`gk21_nodes`].
pub fn gk21_combine(a: f64, b: f64, values: &[C64; 21]) -> (C64, f64) {
    let half = 0.5 * (b - a);
    let mut kronrod = values[20] * WGK[10];
    let mut gauss = C64::new(0.0, 0.0);
    for k in 0..10 {
        let pair = values[2 * k] + values[2 * k + 1];
        kronrod += pair * WGK[k];
        if k % 2 == 1 {
            gauss += pair * WG[k / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).norm())
}

struct Panel {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        // ties broken by position so the refinement order is deterministic
        self.error.total_cmp(&other.error).then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Integrate `f` over `[a, b]`. Panels are always split by bisection, so two
/// integrations over the same range sample the same node set up to the depth
/// they share; callers may memoize `f` on the node bit pattern.
pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral>
where
    F: FnMut(f64) -> Result<C64>,
{
    let mut eval_panel = |lo: f64, hi: f64| -> Result<Panel> {
        let nodes = gk21_nodes(lo, hi);
        let mut values = [C64::new(0.0, 0.0); 21];
        for (v, &x) in values.iter_mut().zip(nodes.iter()) {
            *v = f(x)?;
        }
        let (value, error) = gk21_combine(lo, hi, &values);
        Ok(Panel { a: lo, b: hi, value, error })
    };

    let panels = tol.initial_panels.max(1);
    let width = (b - a) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(4 * panels);
    for p in 0..panels {
        let lo = a + width * p as f64;
        let hi = if p + 1 == panels { b } else { a + width * (p + 1) as f64 };
        heap.push(eval_panel(lo, hi)?);
    }
    let mut evaluations = 21 * panels;

    loop {
        let value: C64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error).sum();
        let target = tol.abs_tol.max(tol.rel_tol * value.norm());
        if error <= target {
            return Ok(Integral { value, error, evaluations });
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::QuadratureNonConvergence { estimate: error, target });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::QuadratureNonConvergence { estimate: error, target });
        }
        heap.push(eval_panel(worst.a, mid)?);
        heap.push(eval_panel(mid, worst.b)?);
        evaluations += 42;
    }
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let r = integrate(|x| Ok(C64::new(f(x), 0.0)), a, b, tol)?;
    Ok((r.value.re, r.error))
}
