//! Small numerical kernels shared by the energy, perimeter and solver code.

/// Largest number of nodes accepted by [`exp_divdiff`].
pub const MAX_DIVDIFF_POINTS: usize = 8;

const TAYLOR_TERMS: usize = 32;

/// Divided difference `exp[x_0, ..., x_k]` of the exponential.
///
/// Repeated nodes are allowed (confluent case). Close clusters use the
/// series `e^c Σ_m h_m(x - c) / (m + k)!` with `h_m` the complete
/// homogeneous polynomials, so the result keeps full relative accuracy even
/// when all nodes coincide; wide clusters fall back to the two-term
/// recurrence, whose cancellation is bounded once the spread exceeds one.
pub fn exp_divdiff(points: &[f64]) -> f64 {
    let k = points.len();
    assert!(
        (1..=MAX_DIVDIFF_POINTS).contains(&k),
        "exp_divdiff supports 1..={MAX_DIVDIFF_POINTS} nodes"
    );
    let mut x = [0.0; MAX_DIVDIFF_POINTS];
    x[..k].copy_from_slice(points);
    let x = &mut x[..k];
    x.sort_by(|a, b| a.total_cmp(b));
    sorted_divdiff(x)
}

fn sorted_divdiff(x: &[f64]) -> f64 {
    let k = x.len();
    if k == 1 {
        return x[0].exp();
    }
    let lo = x[0];
    let hi = x[k - 1];
    if hi - lo <= 1.0 {
        return taylor_divdiff(x);
    }
    (sorted_divdiff(&x[1..]) - sorted_divdiff(&x[..k - 1])) / (hi - lo)
}

fn taylor_divdiff(x: &[f64]) -> f64 {
    let order = x.len() - 1;
    let c = x[0];
    let mut h = [0.0; TAYLOR_TERMS];
    h[0] = 1.0;
    for &xj in x {
        let y = xj - c;
        for m in 1..TAYLOR_TERMS {
            h[m] += y * h[m - 1];
        }
    }
    // 1/(m+order)! built incrementally.
    let mut inv_fact = 1.0;
    for j in 2..=order {
        inv_fact /= j as f64;
    }
    let mut sum = 0.0;
    for (m, hm) in h.iter().enumerate() {
        if m > 0 {
            inv_fact /= (m + order) as f64;
        }
        sum += hm * inv_fact;
    }
    c.exp() * sum
}

/// `(e^z - 1) / z`, continuous at `z = 0`.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z * (0.5 + z / 6.0)
    } else {
        z.exp_m1() / z
    }
}

/// `∫_a^b e^{αt} dt`, including the `α = 0` limit.
pub fn exp_integral(alpha: f64, a: f64, b: f64) -> f64 {
    (b - a) * (alpha * a).exp() * phi1(alpha * (b - a))
}

/// Eight-point Gauss–Legendre rule on `[-1, 1]`.
pub const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// Integrates `f` over `[a, b]` with the eight-point Gauss–Legendre rule.
pub fn gauss8(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GAUSS8
        .iter()
        .map(|&(t, w)| w * f(mid + half * t))
        .sum::<f64>()
        * half
}
