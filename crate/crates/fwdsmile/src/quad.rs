//! Globally adaptive Gauss-Kronrod quadrature on a finite interval.
//!
//! 10-point Gauss / 21-point Kronrod pair with the usual QUADPACK error
//! estimate; the interval with the largest error estimate is bisected until
//! the accumulated error meets the tolerance.

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[rustfmt::skip]
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

#[rustfmt::skip]
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

#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// One Gauss-Kronrod pass over `[a, b]`: returns `(integral, error_estimate)`.
fn kronrod_21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut kronrod = f_center * WGK[10];
    let mut gauss = 0.0;
    let mut res_abs = kronrod.abs();
    let mut samples = [0.0f64; 21];
    samples[10] = f_center;

    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        samples[j] = f1;
        samples[20 - j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((samples[j] - mean).abs() + (samples[20 - j] - mean).abs());
    }

    let integral = kronrod * half;
    res_abs *= half.abs();
    res_asc *= half.abs();

    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (integral, err)
}

/// Integrates `f` over `[a, b]` to `max(abs_tol, rel_tol * |I|)`.
///
/// Returns `(integral, error_estimate)` or a convergence error when the
/// subdivision budget is exhausted.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_subdivisions: usize,
) -> Result<(f64, f64)> {
    let first = kronrod_21(&f, a, b);
    let mut segments: Vec<(f64, f64, f64, f64)> = alloc::vec![(a, b, first.0, first.1)];
    loop {
        let total: f64 = segments.iter().map(|s| s.2).sum();
        let total_err: f64 = segments.iter().map(|s| s.3).sum();
        if !total.is_finite() {
            return Err(Error::Convergence("quadrature produced a non-finite value"));
        }
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok((total, total_err));
        }
        if segments.len() >= max_subdivisions {
            return Err(Error::Convergence(
                "quadrature subdivision budget exhausted",
            ));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("segment list never empty");
        let (lo, hi, _, _) = segments.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::Convergence(
                "quadrature interval no longer splittable",
            ));
        }
        let left = kronrod_21(&f, lo, mid);
        let right = kronrod_21(&f, mid, hi);
        segments.push((lo, mid, left.0, left.1));
        segments.push((mid, hi, right.0, right.1));
    }
}
