#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use swirlsolve::assembler::{assemble_f_f1, reconstruct_velocity, BaseFlow, FlowIterate, Potentials};
use swirlsolve::background::{solve_background_on_grid, EntranceEnv};
use swirlsolve::grid::{Field2D, Grid2D, Parity};
use swirlsolve::perturbation::{PerturbationInput, PerturbationSpec, ShapeName};
use swirlsolve::thermo::GasParams;
use swirlsolve::transport::{MeridionalMomentum, TransportedFields};

pub fn base(nx: usize, nr: usize) -> BaseFlow {
    let bg = solve_background_on_grid(&EntranceEnv::default(), &GasParams::default(), nx).unwrap();
    BaseFlow::new(bg, Grid2D::new(nx, nr, 1.0).unwrap()).unwrap()
}

pub fn pert(base: &BaseFlow, spec: &PerturbationSpec) -> PerturbationInput {
    PerturbationInput::new(spec, &base.bg, base.grid).unwrap()
}

pub fn background_iterate(base: &BaseFlow) -> FlowIterate {
    let w = TransportedFields::uniform(base.grid, base.s0(), base.k0());
    reconstruct_velocity(base, &Potentials::zeros(base.grid), &w).unwrap()
}

/// Smooth random field `amp * sin(a x + b) cos(c r + d)`, times `r` for odd parity.
pub fn smooth(g: Grid2D, parity: Parity, amp: f64, rng: &mut ChaCha8Rng) -> Field2D {
    let (a, b, c) = (rng.gen_range(0.5..3.0), rng.gen_range(0.0..PI), rng.gen_range(0.5..3.0));
    let amp = amp * rng.gen_range(-1.0..1.0);
    Field2D::from_fn(g, parity, move |x, r| {
        let radial = if parity == Parity::Odd { r } else { 1.0 };
        amp * (a * x + b).sin() * (c * r * r).cos() * radial
    })
}

pub fn random_state(base: &BaseFlow, amp: f64, rng: &mut ChaCha8Rng) -> FlowIterate {
    let g = base.grid;
    let pot = Potentials {
        psi_pert: smooth(g, Parity::Even, amp, rng),
        phi: smooth(g, Parity::Even, amp, rng),
        psi: smooth(g, Parity::Odd, amp, rng),
    };
    let mut w = TransportedFields::uniform(g, base.s0(), base.k0());
    w.s = smooth(g, Parity::Even, amp, rng).map(Parity::Even, |v| v + base.s0());
    w.k = smooth(g, Parity::Even, amp, rng).map(Parity::Even, |v| v + base.k0());
    w.v = smooth(g, Parity::Odd, amp, rng);
    w.lambda = Field2D::from_fn(g, Parity::Even, |_, _| 0.0);
    for i in 0..g.nx {
        for j in 0..g.nr {
            w.lambda.set(i, j, g.r(j) * w.v.get(i, j));
        }
    }
    reconstruct_velocity(base, &pot, &w).unwrap()
}

/// Nodes and weights of the 16-point Gauss-Legendre rule on `[0, 1]`.
pub fn gauss_legendre_16() -> Vec<(f64, f64)> {
    let n = 16;
    (1..=n)
        .map(|k| {
            let mut x = (PI * (k as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for m in 2..=n {
                    let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            (0.5 * (1.0 + x), 0.5 * w)
        })
        .collect()
}

/// Pointwise state relative to the background: `(eta1, eta2, z, v1, v2, s1, s2, s3)`.
pub type Q = [f64; 8];

pub struct Pointwise {
    pub gas: GasParams,
    pub s0: f64,
    pub k0: f64,
    pub phi0: f64,
    pub ubar: f64,
}

impl Pointwise {
    pub fn velocity(&self, q: &Q) -> [f64; 3] {
        [self.ubar + q[3] + q[5], q[4] + q[6], q[7]]
    }

    pub fn tau(&self, q: &Q) -> f64 {
        let u = self.velocity(q);
        self.k0 + q[1] + self.phi0 + q[2] - 0.5 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2])
    }

    pub fn b(&self, q: &Q) -> f64 {
        self.gas.density_h(self.s0 + q[0], self.tau(q)).unwrap()
    }

    /// Gradient of the density map in the order of `Q`.
    pub fn grad_b(&self, q: &Q) -> Q {
        let h = self.b(q);
        let ht = self.gas.density_h_tau(self.s0 + q[0], self.tau(q)).unwrap();
        let u = self.velocity(q);
        [-h / (self.gas.cv * (self.gas.gamma - 1.0)), ht, ht, -ht * u[0], -ht * u[1], -ht * u[0], -ht * u[1], -ht * u[2]]
    }

    /// `A_i = B (ubar e_x + v)_i` and its gradient.
    pub fn grad_a(&self, q: &Q, i: usize) -> Q {
        let dphi = [self.ubar + q[3], q[4]][i];
        let mut g = self.grad_b(q);
        g.iter_mut().for_each(|v| *v *= dphi);
        g[3 + i] += self.b(q);
        g
    }
}

pub const ETA_S: [usize; 5] = [0, 1, 5, 6, 7];
pub const Z_V: [usize; 3] = [2, 3, 4];

pub fn dot(g: &Q, q: &Q, idx: &[usize]) -> f64 {
    idx.iter().map(|&k| g[k] * q[k]).sum()
}

pub fn scaled(q: &Q, t: f64) -> Q {
    let mut out = *q;
    out.iter_mut().for_each(|v| *v *= t);
    out
}

/// Quadrature of the integral definitions of `(F_x, F_r, f1)`.
pub fn quadrature(p: &Pointwise, q: &Q, doping: f64) -> [f64; 3] {
    let rule = gauss_legendre_16();
    let zero = [0.0; 8];
    let bq = p.b(q);
    let mut out = [0.0; 3];
    for (i, slot) in out.iter_mut().take(2).enumerate() {
        let at0 = p.grad_a(&zero, i);
        let mut integral = 0.0;
        for &(t, w) in &rule {
            let gt = p.grad_a(&scaled(q, t), i);
            let mut diff = gt;
            diff.iter_mut().zip(at0.iter()).for_each(|(a, b)| *a -= b);
            integral += w * (dot(&gt, q, &ETA_S) + dot(&diff, q, &Z_V));
        }
        *slot = -bq * q[5 + i] - integral;
    }
    let b0 = p.grad_b(&zero);
    let mut integral = 0.0;
    for &(t, w) in &rule {
        let gt = p.grad_b(&scaled(q, t));
        let mut diff = gt;
        diff.iter_mut().zip(b0.iter()).for_each(|(a, b)| *a -= b);
        integral += w * (dot(&gt, q, &ETA_S) + dot(&diff, q, &Z_V));
    }
    out[2] = integral - doping;
    out
}

/// Largest deviation of the closed forms from quadrature over `nodes` random nodes: relative to
/// the largest of `|F_x|, |F_r|, |f1|` at the node, and relative to each entry.
pub fn closed_form_deviation(seed: u64, nodes: usize) -> (f64, f64) {
    let base = base(17, 9);
    let g = base.grid;
    let spec = PerturbationSpec::single(ShapeName::DopingBump, 0.05);
    let pin = pert(&base, &spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    let mut worst = (0.0f64, 0.0f64);
    while checked < nodes {
        let it = random_state(&base, 0.15, &mut rng);
        let (fx, fr, f1) = assemble_f_f1(&base, &it, &pin);
        for _ in 0..25 {
            let i = rng.gen_range(0..g.nx);
            let j = rng.gen_range(1..g.nr - 1);
            let p = Pointwise {
                gas: base.bg.gas,
                s0: base.s0(),
                k0: base.k0(),
                phi0: base.bg.phi0[i],
                ubar: base.bg.u_bar[i],
            };
            let q: Q = [
                it.w.s.get(i, j) - base.s0(),
                it.w.k.get(i, j) - base.k0(),
                it.pot.psi_pert.get(i, j),
                it.dphi_dx.get(i, j),
                it.dphi_dr.get(i, j),
                it.tx.get(i, j),
                it.tr.get(i, j),
                it.utheta.get(i, j),
            ];
            assert!((p.b(&q) - it.rho.get(i, j)).abs() < 1e-14);
            let doping = pin.b_field.get(i, j) - pin.b0;
            let oracle = quadrature(&p, &q, doping);
            let closed = [fx.get(i, j), fr.get(i, j), f1.get(i, j)];
            let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let gap = closed.iter().zip(oracle).fold(0.0f64, |m, (c, e)| m.max((c - e).abs()));
            worst.0 = worst.0.max(gap / scale);
            for (c, e) in closed.iter().zip(oracle) {
                worst.1 = worst.1.max((c - e).abs() / e.abs());
            }
            checked += 1;
        }
    }
    worst
}


pub const EPS: f64 = 0.1;

pub fn stream(x: f64, r: f64) -> f64 {
    0.5 * r * r + EPS / PI * (PI * x).cos() * r * r * (1.0 - r)
}

/// `Mr = EPS sin(pi x) r (1 - r)` with `Mx` recovered from the trapezoid recursion so that the
/// discrete stream function equals `stream` at every node.
pub fn discrete_div_free(g: Grid2D) -> MeridionalMomentum {
    let mr = Field2D::from_fn(g, Parity::Odd, |x, r| EPS * (PI * x).sin() * r * (1.0 - r));
    let mut mx = Field2D::zeros(g, Parity::Even);
    let h = g.hr();
    for i in 0..g.nx {
        let x = g.x(i);
        mx.set(i, 0, 1.0 + EPS / PI * (PI * x).cos() * 2.0);
        let mut prev = 0.0;
        for j in 1..g.nr {
            let dw = stream(x, g.r(j)) - stream(x, g.r(j - 1));
            let y = 2.0 * dw / h - prev;
            mx.set(i, j, y / g.r(j));
            prev = y;
        }
    }
    MeridionalMomentum::new(mx, mr)
}

pub fn random_compatible(g: Grid2D, rng: &mut ChaCha8Rng) -> Field2D {
    let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let l = g.length;
    Field2D::from_fn(g, Parity::Odd, move |x, r| {
        let xs: f64 = a.iter().enumerate().map(|(k, c)| c * (k as f64 * PI * x / l).cos()).sum();
        let rs = b[0] + b[1] * r + b[2] * (2.0 * r).cos();
        r * xs * rs
    })
}

