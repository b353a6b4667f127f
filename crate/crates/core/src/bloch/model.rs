//! Per-cell density-matrix equations in the rotating frame.

use nalgebra::Matrix3;

use crate::C64;

pub(super) struct CellCheck {
    pub trace_error: f64,
    pub min_population: f64,
    pub max_population: f64,
    pub min_eigenvalue: f64,
    pub excited: f64,
}

pub(super) trait Model: Sync {
    type State: Copy + Send + Sync;

    fn ground(&self) -> Self::State;

    /// Time derivative for angular optical detuning `d`, spin detuning `s`,
    /// probe Rabi field `p` and control field `c`.
    fn deriv(&self, y: &Self::State, d: f64, s: f64, p: C64, c: C64) -> Self::State;

    /// `ρ_eg`, the coherence radiating into the probe mode.
    fn coherence(y: &Self::State) -> C64;

    /// `ρ_es`; zero for the two-level model.
    fn second_coherence(y: &Self::State) -> C64;

    fn axpy(y: &Self::State, a: f64, k: &Self::State) -> Self::State;

    fn check(&self, y: &Self::State) -> CellCheck;
}

fn axpy<const K: usize>(y: &[f64; K], a: f64, k: &[f64; K]) -> [f64; K] {
    let mut o = *y;
    for (o, k) in o.iter_mut().zip(k) {
        *o += a * k;
    }
    o
}

/// State `[ρ_gg, ρ_ee, Re ρ_eg, Im ρ_eg]`.
pub(super) struct TwoLevel {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Model for TwoLevel {
    type State = [f64; 4];

    fn ground(&self) -> [f64; 4] {
        [1.0, 0.0, 0.0, 0.0]
    }

    fn deriv(&self, y: &[f64; 4], d: f64, _s: f64, p: C64, _c: C64) -> [f64; 4] {
        let [gg, ee, re, im] = *y;
        let inv = gg - ee;
        let pump = p.re * im - p.im * re;
        let decay = self.gamma1 * ee;
        [
            -pump + decay,
            pump - decay,
            -self.gamma2 * re + d * im - 0.5 * p.im * inv,
            -self.gamma2 * im - d * re + 0.5 * p.re * inv,
        ]
    }

    fn coherence(y: &[f64; 4]) -> C64 {
        C64::new(y[2], y[3])
    }

    fn second_coherence(_y: &[f64; 4]) -> C64 {
        C64::new(0.0, 0.0)
    }

    fn axpy(y: &[f64; 4], a: f64, k: &[f64; 4]) -> [f64; 4] {
        axpy(y, a, k)
    }

    fn check(&self, y: &[f64; 4]) -> CellCheck {
        let [gg, ee, re, im] = *y;
        let tr = gg + ee;
        let disc = ((gg - ee).powi(2) + 4.0 * (re * re + im * im)).sqrt();
        CellCheck {
            trace_error: (tr - 1.0).abs(),
            min_population: gg.min(ee),
            max_population: gg.max(ee),
            min_eigenvalue: 0.5 * (tr - disc),
            excited: ee,
        }
    }
}

/// Λ system with ground `g`, storage state `s` and excited `e`. State
/// `[ρ_gg, ρ_ss, ρ_ee, ρ_eg, ρ_es, ρ_sg]` with complex entries split into
/// real and imaginary parts.
pub(super) struct Lambda {
    pub gamma1: f64,
    pub gamma2: f64,
    /// Initial population of `s`.
    pub initial_s: f64,
}

impl Lambda {
    fn unpack(y: &[f64; 9]) -> (f64, f64, f64, C64, C64, C64) {
        (
            y[0],
            y[1],
            y[2],
            C64::new(y[3], y[4]),
            C64::new(y[5], y[6]),
            C64::new(y[7], y[8]),
        )
    }
}

impl Model for Lambda {
    type State = [f64; 9];

    fn ground(&self) -> [f64; 9] {
        let mut y = [0.0; 9];
        y[0] = 1.0 - self.initial_s;
        y[1] = self.initial_s;
        y
    }

    fn deriv(&self, y: &[f64; 9], d: f64, s: f64, p: C64, c: C64) -> [f64; 9] {
        let (gg, ss, ee, eg, es, sg) = Self::unpack(y);
        let a = -0.5 * p;
        let b = -0.5 * c;
        let i = C64::new(0.0, 1.0);
        let wa = 2.0 * (a * eg.conj()).im;
        let wb = 2.0 * (b * es.conj()).im;
        let decay = self.gamma1 * ee;
        let deg = -i * (d * eg + a * (gg - ee) + b * sg) - self.gamma2 * eg;
        let des = -i * ((d + s) * es + a * sg.conj() + b * (ss - ee)) - self.gamma2 * es;
        let dsg = -i * (-s * sg + b.conj() * eg - es.conj() * a);
        [
            -wa + 0.5 * decay,
            -wb + 0.5 * decay,
            wa + wb - decay,
            deg.re,
            deg.im,
            des.re,
            des.im,
            dsg.re,
            dsg.im,
        ]
    }

    fn coherence(y: &[f64; 9]) -> C64 {
        C64::new(y[3], y[4])
    }

    fn second_coherence(y: &[f64; 9]) -> C64 {
        C64::new(y[5], y[6])
    }

    fn axpy(y: &[f64; 9], a: f64, k: &[f64; 9]) -> [f64; 9] {
        axpy(y, a, k)
    }

    fn check(&self, y: &[f64; 9]) -> CellCheck {
        let (gg, ss, ee, eg, es, sg) = Self::unpack(y);
        let r = |v: f64| C64::new(v, 0.0);
        let rho = Matrix3::new(
            r(gg), sg.conj(), eg.conj(),
            sg, r(ss), es.conj(),
            eg, es, r(ee),
        );
        let min_eig = rho.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        CellCheck {
            trace_error: (gg + ss + ee - 1.0).abs(),
            min_population: gg.min(ss).min(ee),
            max_population: gg.max(ss).max(ee),
            min_eigenvalue: min_eig,
            excited: ee,
        }
    }
}
