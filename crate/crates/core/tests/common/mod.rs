//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use lrl::harmonic::PhasePoint;
use lrl::lattice::TorusLattice;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Adaptive Dormand-Prince 5(4) integration of `y' = f(y)` from 0 to `t`.
pub fn dopri5(f: impl Fn(&[f64]) -> Vec<f64>, y0: &[f64], t: f64, tol: f64) -> Vec<f64> {
    const A: [&[f64]; 6] = [
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
        ],
        &[
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
        ],
        &[
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let n = y0.len();
    let dir = t.signum();
    let mut y = y0.to_vec();
    let mut s = 0.0;
    let mut h = 1e-3 * dir;
    while (t - s) * dir > 0.0 {
        if (s + h - t) * dir > 0.0 {
            h = t - s;
        }
        let mut k: Vec<Vec<f64>> = vec![f(&y)];
        for a in A.iter() {
            let stage: Vec<f64> = (0..n)
                .map(|i| y[i] + h * a.iter().zip(&k).map(|(aj, kj)| aj * kj[i]).sum::<f64>())
                .collect();
            k.push(f(&stage));
        }
        let y5: Vec<f64> = (0..n)
            .map(|i| y[i] + h * B5.iter().zip(&k).map(|(b, kj)| b * kj[i]).sum::<f64>())
            .collect();
        let err = (0..n)
            .map(|i| {
                let e = h * B4
                    .iter()
                    .zip(B5.iter())
                    .zip(&k)
                    .map(|((b4, b5), kj)| (b5 - b4) * kj[i])
                    .sum::<f64>();
                e.abs() / (tol * (1.0 + y[i].abs().max(y5[i].abs())))
            })
            .fold(0.0, f64::max);
        if err <= 1.0 {
            s += h;
            y = y5;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    y
}

/// Neighbour table `(x + e_j, x - e_j)` built from coordinates.
pub fn neighbours(lat: &TorusLattice) -> Vec<Vec<(usize, usize)>> {
    let side = 2 * lat.half_side();
    let wrap = |c: i64| {
        let m = (c + lat.half_side() - 1).rem_euclid(side);
        m - lat.half_side() + 1
    };
    (0..lat.len())
        .map(|x| {
            (0..lat.nu())
                .map(|j| {
                    let mut up = lat.site(x).to_vec();
                    let mut down = up.clone();
                    up[j] = wrap(up[j] + 1);
                    down[j] = wrap(down[j] - 1);
                    (lat.index_of(&up).unwrap(), lat.index_of(&down).unwrap())
                })
                .collect()
        })
        .collect()
}

/// Hamilton's equations for `H = Σ p² + ω²q² + Σ_j λ_j (q_x - q_{x+e_j})² + Σ V(q_x)`
/// in the flat layout `[q, p]`.
pub fn hamilton_rhs(
    lat: &TorusLattice,
    omega: f64,
    lambda: &[f64],
    dv: impl Fn(f64) -> f64,
) -> impl Fn(&[f64]) -> Vec<f64> {
    let nb = neighbours(lat);
    let n = lat.len();
    let lambda = lambda.to_vec();
    move |y: &[f64]| {
        let (q, p) = y.split_at(n);
        let mut out = vec![0.0; 2 * n];
        for x in 0..n {
            out[x] = 2.0 * p[x];
            let mut force = -2.0 * omega * omega * q[x] - dv(q[x]);
            for (j, &(up, down)) in nb[x].iter().enumerate() {
                force -= 2.0 * lambda[j] * (2.0 * q[x] - q[up] - q[down]);
            }
            out[n + x] = force;
        }
        out
    }
}

pub fn flat(x: &PhasePoint) -> Vec<f64> {
    x.q.iter().chain(&x.p).copied().collect()
}

pub fn random_point(n: usize, amplitude: f64, seed: u64) -> PhasePoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = (0..n)
        .map(|_| rng.gen_range(-amplitude..amplitude))
        .collect();
    let p = (0..n)
        .map(|_| rng.gen_range(-amplitude..amplitude))
        .collect();
    PhasePoint::new(q, p).unwrap()
}

/// `h^(-1), h^(0), h^(1)` at site `x` by direct summation over Brillouin-zone momenta.
pub fn naive_kernels(lat: &TorusLattice, omega: f64, lambda: &[f64], t: f64, x: usize) -> [f64; 3] {
    let side = 2 * lat.half_side();
    let n = lat.len() as f64;
    let coords = lat.site(x);
    let mut acc = [0.0; 3];
    for m in 0..lat.len() {
        // momentum multi-index from the same coordinate enumeration
        let k: Vec<f64> = lat
            .site(m)
            .iter()
            .map(|&c| 2.0 * PI * c as f64 / side as f64)
            .collect();
        let gamma2: f64 = omega * omega
            + 4.0
                * lambda
                    .iter()
                    .zip(&k)
                    .map(|(l, kj)| l * (kj / 2.0).sin().powi(2))
                    .sum::<f64>();
        let gamma = gamma2.sqrt();
        let phase: f64 = k.iter().zip(coords).map(|(kj, &c)| kj * c as f64).sum();
        let s = (2.0 * gamma * t).sin();
        let sinc = if gamma == 0.0 { 2.0 * t } else { s / gamma };
        acc[0] += -sinc * phase.cos();
        acc[1] += (2.0 * gamma * t).cos() * phase.cos();
        acc[2] += -gamma * s * phase.cos();
    }
    acc.map(|v| v / n)
}

/// `2^{ν+1} Σ_{|z|_1 <= r} (1 + |z|)^{-(ν+1)}` for `ν = 2` by brute force.
pub fn cnu_partial_2d(r: i64) -> f64 {
    let mut s = 0.0;
    for a in -r..=r {
        let rest = r - a.abs();
        for b in -rest..=rest {
            s += (1.0 + (a.abs() + b.abs()) as f64).powi(-3);
        }
    }
    8.0 * s
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}
