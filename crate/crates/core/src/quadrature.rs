//! Globally adaptive Gauss–Kronrod (10/21 point) quadrature over a set of
//! user-supplied panels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

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

// Gauss weights for the odd-indexed Kronrod nodes
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Integral value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadValue {
    pub value: f64,
    pub error: f64,
}

impl QuadValue {
    pub fn new(value: f64, error: f64) -> Self {
        QuadValue { value, error }
    }
}

impl std::ops::Add for QuadValue {
    type Output = QuadValue;
    fn add(self, o: QuadValue) -> QuadValue {
        QuadValue::new(self.value + o.value, self.error + o.error)
    }
}

impl std::ops::Sub for QuadValue {
    type Output = QuadValue;
    fn sub(self, o: QuadValue) -> QuadValue {
        QuadValue::new(self.value - o.value, self.error + o.error)
    }
}

impl std::ops::Mul<f64> for QuadValue {
    type Output = QuadValue;
    fn mul(self, k: f64) -> QuadValue {
        QuadValue::new(self.value * k, self.error * k.abs())
    }
}

/// One 21-point Gauss–Kronrod rule on `[a, b]` with the QUADPACK error
/// heuristic.
pub fn gauss_kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> QuadValue {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resabs = resk.abs();
    let mut resg = 0.0;
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let round = 50.0 * f64::EPSILON * resabs;
    if round > err {
        err = round;
    }
    QuadValue::new(result, err)
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    est: QuadValue,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// Outcome of [`integrate_panels`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOutcome {
    pub value: QuadValue,
    pub converged: bool,
    pub segments: usize,
}

/// Integrates `f` over the union of consecutive panels given by sorted
/// `breakpoints`, bisecting the worst segment until the summed error estimate
/// drops below `max(abs_tol, rel_tol·|I|)` or `max_segments` is reached.
pub fn integrate_panels<F: Fn(f64) -> f64>(
    f: &F,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> AdaptiveOutcome {
    let mut heap = BinaryHeap::with_capacity(breakpoints.len() * 2);
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in breakpoints.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let est = gauss_kronrod21(f, w[0], w[1]);
        total += est.value;
        total_err += est.error;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            est,
        });
    }
    let tol = |v: f64| abs_tol.max(rel_tol * v.abs());
    let mut converged = total_err <= tol(total);
    while !converged && heap.len() < max_segments {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot bisect further in floating point
            heap.push(worst);
            break;
        }
        let left = gauss_kronrod21(f, worst.a, mid);
        let right = gauss_kronrod21(f, mid, worst.b);
        total += left.value + right.value - worst.est.value;
        total_err += left.error + right.error - worst.est.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            est: left,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            est: right,
        });
        converged = total_err <= tol(total);
    }
    // recompute sums to shed accumulated update roundoff
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value: f64 = segs.iter().map(|s| s.est.value).sum();
    let error: f64 = segs.iter().map(|s| s.est.error).sum();
    AdaptiveOutcome {
        value: QuadValue::new(value, error),
        converged: converged || error <= tol(value),
        segments: segs.len(),
    }
}
