use super::{sphere_measure, Real};
use crate::error::{Error, Result};

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
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
    0.148_874_338_981_631_22,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Tolerances for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_subdivisions: usize,
}

impl<T: Real> Default for QuadConfig<T> {
    fn default() -> Self {
        // 1e-10 in f64; scaled to the precision for narrower types.
        let eps = T::epsilon();
        let rel = T::lit(1e-10).max(eps * T::lit(64.0));
        Self {
            rel_tol: rel,
            abs_tol: T::zero(),
            max_subdivisions: 4000,
        }
    }
}

impl<T: Real> QuadConfig<T> {
    pub fn with_rel_tol(rel_tol: T) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy)]
struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
    magnitude: T,
}

fn kronrod<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Panel<T> {
    let center = T::lit(0.5) * (a + b);
    let half = T::lit(0.5) * (b - a);
    let fc = f(center);
    let mut kron = fc * T::lit(WGK[10]);
    let mut gauss = T::zero();
    let mut magnitude = fc.abs() * T::lit(WGK[10]);
    for j in 0..10 {
        let dx = half * T::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kron = kron + T::lit(WGK[j]) * (f1 + f2);
        magnitude = magnitude + T::lit(WGK[j]) * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    Panel {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
        magnitude: magnitude * half.abs(),
    }
}

/// Globally adaptive Gauss–Kronrod (10/21) integration of `f` over `[a, b]`.
///
/// Panels are bisected in order of decreasing error estimate. The summation
/// order is fixed by the panel list, so results are reproducible.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, cfg: &QuadConfig<T>) -> Result<T> {
    integrate_with_breaks(&f, &[a, b], cfg)
}

pub(crate) fn integrate_with_breaks<T: Real, F: Fn(T) -> T>(
    f: &F,
    breaks: &[T],
    cfg: &QuadConfig<T>,
) -> Result<T> {
    let mut panels: Vec<Panel<T>> = breaks
        .windows(2)
        .filter(|w| w[1] != w[0])
        .map(|w| kronrod(f, w[0], w[1]))
        .collect();
    if panels.is_empty() {
        return Ok(T::zero());
    }
    let eps = T::epsilon();
    loop {
        let total: T = panels.iter().fold(T::zero(), |s, p| s + p.value);
        let err: T = panels.iter().fold(T::zero(), |s, p| s + p.error);
        let mag: T = panels.iter().fold(T::zero(), |s, p| s + p.magnitude);
        let target = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        // Below this level the estimate is dominated by rounding.
        let noise = T::lit(50.0) * eps * mag;
        if err <= target || err <= noise {
            return Ok(total);
        }
        // Pick the worst panel that can still be split.
        let mut worst: Option<usize> = None;
        for (i, p) in panels.iter().enumerate() {
            let width_ok = (p.b - p.a).abs() > T::lit(1e3) * eps * (p.a.abs() + p.b.abs());
            if width_ok && worst.is_none_or(|w| p.error > panels[w].error) {
                worst = Some(i);
            }
        }
        let (Some(w), true) = (worst, panels.len() < cfg.max_subdivisions) else {
            return Err(Error::Quadrature {
                subdivisions: panels.len(),
                estimate: total.to_f64().unwrap_or(f64::NAN),
                error: err.to_f64().unwrap_or(f64::NAN),
            });
        };
        let p = panels[w];
        let mid = T::lit(0.5) * (p.a + p.b);
        panels[w] = kronrod(f, p.a, mid);
        panels.push(kronrod(f, mid, p.b));
    }
}

/// Integral of `f` over `[a, ∞)` via `x = a + s·t/(1−t)`, `t ∈ [0, 1)`.
///
/// `scale` sets where half of the mapped interval lands; pass the natural
/// length scale of the integrand.
pub fn integrate_to_infinity<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    scale: T,
    cfg: &QuadConfig<T>,
) -> Result<T> {
    let g = |t: T| {
        let one_m = T::one() - t;
        let x = a + scale * t / one_m;
        let v = f(x) * scale / (one_m * one_m);
        if v.is_finite() {
            v
        } else {
            T::zero()
        }
    };
    // Extra breakpoints so peaked integrands near `a` are seen by the first pass.
    let breaks: Vec<T> = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0]
        .iter()
        .map(|&t| T::lit(t))
        .collect();
    integrate_with_breaks(&g, &breaks, cfg)
}

/// Upper end of a radial integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialRange<T> {
    Finite(T),
    Infinite,
}

/// `|S^{n−1}| ∫₀^{r_max} f(r) r^{n−1} dr` with the default tolerance.
pub fn radial_integral<T: Real, F: Fn(T) -> T>(n: usize, f: F, r_max: RadialRange<T>) -> Result<T> {
    radial_integral_scaled(n, f, r_max, T::one(), &QuadConfig::default())
}

/// Radial integral with an explicit length scale of the integrand.
///
/// On a finite range, breakpoints are placed at geometrically growing
/// multiples of `scale` so that a bubble of width `scale` is resolved.
pub fn radial_integral_scaled<T: Real, F: Fn(T) -> T>(
    n: usize,
    f: F,
    r_max: RadialRange<T>,
    scale: T,
    cfg: &QuadConfig<T>,
) -> Result<T> {
    let surface = sphere_measure::<T>(n)?;
    if !(scale > T::zero()) {
        return Err(Error::invalid("radial_integral: scale must be positive"));
    }
    let nm1 = (n - 1) as i32;
    let g = |r: T| f(r) * r.powi(nm1);
    let value = match r_max {
        RadialRange::Infinite => integrate_to_infinity(g, T::zero(), scale, cfg)?,
        RadialRange::Finite(r) => {
            if !(r > T::zero()) {
                return Err(Error::invalid("radial_integral: r_max must be positive"));
            }
            let mut breaks = vec![T::zero()];
            let mut b = scale;
            while b < r {
                breaks.push(b);
                b = b * T::lit(4.0);
            }
            breaks.push(r);
            integrate_with_breaks(&g, &breaks, cfg)?
        }
    };
    Ok(surface * value)
}

/// Integral over the unit sphere `S^{n−1}` of a function that depends on
/// `ζ` only through `(ζ₁, ζ₂)`.
///
/// With `ζ₁ = cos α`, `ζ₂ = sin α cos β` the surface element becomes
/// `|S^{n−3}| sin^{n−2}α sin^{n−3}β dβ dα`, so the integral reduces to 2D.
pub fn sphere_integral_axisymmetric<T: Real, F: Fn(T, T) -> T>(
    n: usize,
    f: F,
    cfg: &QuadConfig<T>,
) -> Result<T> {
    if n < 4 {
        return Err(Error::Dimension {
            n,
            reason: "axisymmetric sphere reduction needs n >= 4",
        });
    }
    let outer = sphere_measure::<T>(n - 2)?;
    let (pn2, pn3) = ((n - 2) as i32, (n - 3) as i32);
    let inner_cfg = QuadConfig {
        rel_tol: cfg.rel_tol * T::lit(0.1),
        ..*cfg
    };
    let failure = std::cell::Cell::new(None);
    let g = |alpha: T| {
        let (sa, ca) = alpha.sin_cos();
        let h = |beta: T| f(ca, sa * beta.cos()) * beta.sin().powi(pn3);
        match integrate(h, T::zero(), T::PI(), &inner_cfg) {
            Ok(v) => v * sa.powi(pn2),
            Err(e) => {
                failure.set(Some(e.to_string()));
                T::zero()
            }
        }
    };
    let breaks: Vec<T> = (0..=4).map(|i| T::PI() * T::lit(i as f64 / 4.0)).collect();
    let v = integrate_with_breaks(&g, &breaks, cfg)?;
    if let Some(msg) = failure.take() {
        return Err(Error::invalid(format!("inner sphere quadrature: {msg}")));
    }
    Ok(outer * v)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(order: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); order];
    let mut weights = vec![T::zero(); order];
    let m = order.div_ceil(2);
    let nf = order as f64;
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n in f64.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if order == 0 {
                1.0
            } else if order == 1 {
                x
            } else {
                p1
            };
            let pnm1 = if order == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = T::lit(-x);
        nodes[order - 1 - i] = T::lit(x);
        weights[i] = T::lit(w);
        weights[order - 1 - i] = T::lit(w);
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn kronrod_weights_sum_to_two() {
        let s: f64 = WGK[..10].iter().sum::<f64>() * 2.0 + WGK[10];
        let g: f64 = WG.iter().sum::<f64>() * 2.0;
        assert!((s - 2.0).abs() < 1e-14);
        assert!((g - 2.0).abs() < 1e-14);
    }

    #[test]
    fn polynomials_integrate_exactly() {
        let cfg = QuadConfig::default();
        let v = integrate(
            |x: f64| 7.0 * x.powi(6) - 3.0 * x * x + 1.0,
            -1.0,
            2.0,
            &cfg,
        )
        .unwrap();
        let exact = (2f64.powi(7) + 1.0) - (8.0 + 1.0) + 3.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn peaked_integrand_converges() {
        let cfg = QuadConfig::with_rel_tol(1e-12);
        let v = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, &cfg).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() / exact < 1e-11);
    }

    #[test]
    fn half_line_rational() {
        let cfg = QuadConfig::with_rel_tol(1e-12);
        let v = integrate_to_infinity(|x: f64| 1.0 / (1.0 + x * x), 0.0, 1.0, &cfg).unwrap();
        assert!((v - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn slowly_decaying_integrand_fails_loudly() {
        let cfg = QuadConfig {
            rel_tol: 1e-12,
            abs_tol: 0.0,
            max_subdivisions: 200,
        };
        let r = integrate_to_infinity(|x: f64| 1.0 / (1.0 + x), 0.0, 1.0, &cfg);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn unit_ball_volume_n6() {
        let v = radial_integral(6, |_r: f64| 1.0, RadialRange::Finite(1.0)).unwrap();
        assert!((v - PI.powi(3) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_reduction_recovers_moments() {
        let cfg = QuadConfig::with_rel_tol(1e-11);
        let area = sphere_integral_axisymmetric(6, |_, _| 1.0f64, &cfg).unwrap();
        assert!((area - PI.powi(3)).abs() < 1e-9);
        // ∫ ζ₂² dσ = |S^{n−1}|/n
        let m2 = sphere_integral_axisymmetric(6, |_, z2: f64| z2 * z2, &cfg).unwrap();
        assert!((m2 - PI.powi(3) / 6.0).abs() < 1e-9);
    }

    #[test]
    fn gauss_legendre_exact_degree() {
        let (x, w) = gauss_legendre::<f64>(12);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((s - 2.0 / 23.0).abs() < 1e-14);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }
}
