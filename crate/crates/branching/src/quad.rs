//! Adaptive quadrature on finite intervals.
//!
//! Panels are scored with the 21-point Gauss–Kronrod pair and the worst
//! panel is bisected until the summed error estimate meets the requested
//! tolerance.

use crate::error::{Error, Result};
use std::collections::BinaryHeap;

// QUADPACK qk21 abscissae and weights.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_21,
    0.0,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

/// One Gauss–Kronrod evaluation: returns `(kronrod, |kronrod - gauss|)`.
pub fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut gauss = 0.0;
    let mut kronrod = WGK[10] * f_center;
    for j in 0..5 {
        let jtw = 2 * j + 1;
        let x = half * XGK[jtw];
        let f1 = f(center - x);
        let f2 = f(center + x);
        gauss += WG[j] * (f1 + f2);
        kronrod += WGK[jtw] * (f1 + f2);
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let x = half * XGK[jtwm1];
        kronrod += WGK[jtwm1] * (f(center - x) + f(center + x));
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

#[derive(PartialEq)]
struct Panel {
    err: f64,
    a: f64,
    b: f64,
    val: f64,
}

impl Eq for Panel {}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err
            .partial_cmp(&other.err)
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Integrate `f` over `[a, b]` to relative tolerance `rel_tol` (with an
/// absolute floor `abs_floor` for integrals near zero).
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (val, err) = kronrod21(f, a, b);
    if !val.is_finite() {
        return Err(Error::IntegrationFailure("non-finite integrand"));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Panel { err, a, b, val });
    let mut total = val;
    let mut total_err = err;
    for _ in 0..20_000 {
        if total_err <= (rel_tol * total.abs()).max(abs_floor) {
            return Ok(total);
        }
        let worst = heap.pop().ok_or(Error::IntegrationFailure("empty heap"))?;
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval at floating-point resolution; accept its estimate.
            total_err -= worst.err;
            continue;
        }
        let (lv, le) = kronrod21(f, worst.a, mid);
        let (rv, re) = kronrod21(f, mid, worst.b);
        if !(lv.is_finite() && rv.is_finite()) {
            return Err(Error::IntegrationFailure("non-finite integrand"));
        }
        total += lv + rv - worst.val;
        total_err += le + re - worst.err;
        heap.push(Panel {
            err: le,
            a: worst.a,
            b: mid,
            val: lv,
        });
        heap.push(Panel {
            err: re,
            a: mid,
            b: worst.b,
            val: rv,
        });
    }
    if total_err <= (rel_tol * total.abs()).max(abs_floor) * 100.0 {
        // Close enough that the estimate is still useful.
        return Ok(total);
    }
    Err(Error::IntegrationFailure("panel budget exhausted"))
}

/// Integrate over `[a, b]` with `0 <= a < b` where the integrand decays
/// like a power of the argument: panels are laid out geometrically from
/// `max(a, 1)` so that each spans a bounded log range.
pub fn adaptive_power_tail<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut lo = a;
    let first_hi = b.min(a.max(1.0));
    if first_hi > lo {
        total += adaptive(f, lo, first_hi, rel_tol, abs_floor)?;
        lo = first_hi;
    }
    while lo < b {
        let hi = (lo * 4.0).min(b);
        total += adaptive(f, lo, hi, rel_tol, abs_floor * 0.01 + rel_tol * total.abs())?;
        lo = hi;
    }
    Ok(total)
}
