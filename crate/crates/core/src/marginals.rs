//! One-dimensional marginals of |Φ|²: reduced density matrices, analytic
//! CDFs, inverse-CDF sampling and Kolmogorov–Smirnov distances.

use num_complex::Complex64;
use rand::Rng;

use crate::basis::Bases;
use crate::error::{Error, Result};
use crate::hamiltonian::{BasisIndex, MultiIndexSpace};
use crate::wavefield::ConfigPoint;

/// Tabulation resolution for inverse-CDF sampling.
pub const CDF_GRID: usize = 1 << 14;

/// Two-sided 5% Kolmogorov critical value, multiplied by 1/√n.
pub const KS_CRITICAL: f64 = 1.358;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Coordinate {
    X1,
    X2,
    Q,
    Y,
    Z,
}

impl Coordinate {
    pub const ALL: [Coordinate; 5] = [Coordinate::X1, Coordinate::X2, Coordinate::Q, Coordinate::Y, Coordinate::Z];

    pub fn name(self) -> &'static str {
        match self {
            Coordinate::X1 => "x1",
            Coordinate::X2 => "x2",
            Coordinate::Q => "q",
            Coordinate::Y => "y",
            Coordinate::Z => "z",
        }
    }

    pub fn slot(self) -> usize {
        self as usize
    }

    fn level(self, b: &BasisIndex) -> usize {
        match self {
            Coordinate::X1 => b.n,
            Coordinate::X2 => b.m,
            Coordinate::Q => b.k,
            Coordinate::Y => b.l as usize,
            Coordinate::Z => b.s as usize,
        }
    }
}

impl std::str::FromStr for Coordinate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Coordinate::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidParameter {
                key: "coordinate",
                reason: format!("unknown coordinate {s:?}"),
            })
    }
}

/// Reduced one-coordinate density matrix R_ab = Σ_rest c*_{a,rest} c_{b,rest}
/// over the levels (or pointer mode slots) of one coordinate.
pub fn reduced_density(c: &[Complex64], space: &MultiIndexSpace, coord: Coordinate) -> Vec<Complex64> {
    let t = space.pointer_truncation as i64;
    let dim = levels(space, coord);
    let mut r = vec![Complex64::default(); dim * dim];
    for (i, ci) in c.iter().enumerate() {
        if *ci == Complex64::default() {
            continue;
        }
        let mut b = space.index(i);
        // Pointer labels are shifted to slots 0..modes.
        b.l += t;
        b.s += t;
        let a = coord.level(&b);
        for lev in 0..dim {
            let mut other = b;
            match coord {
                Coordinate::X1 => other.n = lev,
                Coordinate::X2 => other.m = lev,
                Coordinate::Q => other.k = lev,
                Coordinate::Y => other.l = lev as i64,
                Coordinate::Z => other.s = lev as i64,
            }
            other.l -= t;
            other.s -= t;
            let j = space.flat(&other).expect("index in range");
            r[a * dim + lev] += ci.conj() * c[j];
        }
    }
    r
}

fn levels(space: &MultiIndexSpace, coord: Coordinate) -> usize {
    match coord {
        Coordinate::X1 | Coordinate::X2 => space.n_electron,
        Coordinate::Q => space.n_photon,
        Coordinate::Y | Coordinate::Z => space.n_modes(),
    }
}

/// tr(R²); 1 for a pure reduced state.
pub fn purity(r: &[Complex64]) -> f64 {
    let dim = (r.len() as f64).sqrt().round() as usize;
    let mut s = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            s += (r[a * dim + b] * r[b * dim + a]).re;
        }
    }
    s
}

/// Analytic marginal CDF of one coordinate.
#[derive(Clone, Debug)]
pub struct MarginalCdf<'a> {
    coord: Coordinate,
    bases: &'a Bases,
    r: Vec<Complex64>,
    dim: usize,
    total: f64,
}

impl<'a> MarginalCdf<'a> {
    pub fn new(c: &[Complex64], space: &MultiIndexSpace, bases: &'a Bases, coord: Coordinate) -> Self {
        let r = reduced_density(c, space, coord);
        let dim = levels(space, coord);
        let total = (0..dim).map(|a| r[a * dim + a].re).sum();
        MarginalCdf {
            coord,
            bases,
            r,
            dim,
            total,
        }
    }

    pub fn coordinate(&self) -> Coordinate {
        self.coord
    }

    /// Interval holding essentially all the probability.
    pub fn support(&self) -> (f64, f64) {
        match self.coord {
            Coordinate::X1 | Coordinate::X2 => (0.0, self.bases.well.length),
            Coordinate::Q => {
                let qmax = (2.0 * self.dim as f64 + 1.0).sqrt() + 7.0;
                (-qmax, qmax)
            }
            Coordinate::Y | Coordinate::Z => self.bases.pointer.domain(),
        }
    }

    /// P(coordinate ≤ x), normalized by the trace of the reduced density.
    pub fn cdf(&self, x: f64) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        match self.coord {
            Coordinate::X1 | Coordinate::X2 => {
                for a in 0..d {
                    for b in 0..d {
                        s += self.r[a * d + b].re * self.bases.well.overlap_cdf(a, b, x);
                    }
                }
            }
            Coordinate::Q => {
                let m = self.bases.oscillator.overlap_cdf_matrix(x);
                for a in 0..d {
                    for b in 0..d {
                        s += self.r[a * d + b].re * m[a * d + b];
                    }
                }
            }
            Coordinate::Y | Coordinate::Z => {
                let p = &self.bases.pointer;
                for a in 0..d {
                    for b in 0..d {
                        let k = p.overlap_cdf(p.mode(a), p.mode(b), x);
                        s += (self.r[a * d + b] * k).re;
                    }
                }
            }
        }
        (s / self.total).clamp(0.0, 1.0)
    }

    /// Tabulated inverse for sampling.
    pub fn inverse(&self) -> InverseCdf {
        let (lo, hi) = self.support();
        let xs: Vec<f64> = (0..=CDF_GRID).map(|i| lo + (hi - lo) * i as f64 / CDF_GRID as f64).collect();
        let mut fs: Vec<f64> = xs.iter().map(|&x| self.cdf(x)).collect();
        // Enforce monotonicity against rounding noise.
        for i in 1..fs.len() {
            if fs[i] < fs[i - 1] {
                fs[i] = fs[i - 1];
            }
        }
        InverseCdf { xs, fs }
    }
}

#[derive(Clone, Debug)]
pub struct InverseCdf {
    xs: Vec<f64>,
    fs: Vec<f64>,
}

impl InverseCdf {
    pub fn sample(&self, u: f64) -> f64 {
        let lo = self.fs[0];
        let hi = *self.fs.last().unwrap();
        let target = lo + u * (hi - lo);
        let i = self.fs.partition_point(|&f| f < target).clamp(1, self.fs.len() - 1);
        let (f0, f1) = (self.fs[i - 1], self.fs[i]);
        let w = if f1 > f0 { (target - f0) / (f1 - f0) } else { 0.5 };
        self.xs[i - 1] + w * (self.xs[i] - self.xs[i - 1])
    }
}

/// Purity below which a reduced state counts as entangled.
const PRODUCT_TOL: f64 = 1e-10;

/// Independent draws from |Φ|² of a product state, one coordinate at a
/// time. Trajectory i uses stream i of the master seed, so any subset of
/// trajectories can be regenerated independently.
pub fn sample_initial(c: &[Complex64], space: &MultiIndexSpace, bases: &Bases, n: usize, seed: u64) -> Result<Vec<ConfigPoint>> {
    if c.len() != space.flat_size {
        return Err(Error::DimensionMismatch {
            expected: space.flat_size,
            got: c.len(),
        });
    }
    let mut inverses = Vec::with_capacity(5);
    for coord in Coordinate::ALL {
        let m = MarginalCdf::new(c, space, bases, coord);
        if (purity(&m.r) - m.total * m.total).abs() > PRODUCT_TOL {
            return Err(Error::NonProductState);
        }
        inverses.push(m.inverse());
    }
    Ok((0..n)
        .map(|i| {
            let mut rng = trajectory_rng(seed, i as u64);
            let mut a = [0.0; 5];
            for (slot, inv) in inverses.iter().enumerate() {
                a[slot] = inv.sample(rng.random::<f64>());
            }
            // The pointer domain is half-open.
            let (_, hi) = bases.pointer.domain();
            for s in [3, 4] {
                if a[s] >= hi {
                    a[s] = -hi;
                }
            }
            ConfigPoint::from_array(a)
        })
        .collect())
}

/// Per-trajectory generator: the master seed with the trajectory id as
/// stream number.
pub fn trajectory_rng(seed: u64, id: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub threshold: f64,
    pub n: usize,
    pub pass: bool,
}

/// sup |F_n − F| for the samples against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let statistic = ks_statistic(samples, cdf);
    let threshold = KS_CRITICAL / (samples.len() as f64).sqrt();
    KsResult {
        statistic,
        threshold,
        n: samples.len(),
        pass: statistic < threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::evolution::{initial_state, InitialSpec};
    use crate::hamiltonian::build_space;
    use crate::quadrature::integrate;

    fn setup(cfg: &ScenarioConfig) -> (MultiIndexSpace, Bases, Vec<Complex64>) {
        let space = build_space(cfg).unwrap();
        let bases = Bases::new(cfg);
        let s = initial_state(&space, &bases, &InitialSpec::photon(cfg.pointer_packet_width_modes)).unwrap();
        (space, bases, s.c)
    }

    #[test]
    fn cdf_matches_quadrature_of_density() {
        let cfg = ScenarioConfig {
            pointer_truncation: 4,
            ..Default::default()
        };
        let space = build_space(&cfg).unwrap();
        let bases = Bases::new(&cfg);
        // A random entangled state.
        let mut rng = trajectory_rng(3, 0);
        let mut c: Vec<Complex64> = (0..space.flat_size)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let nrm = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        c.iter_mut().for_each(|x| *x /= nrm);
        let m = MarginalCdf::new(&c, &space, &bases, Coordinate::X1);
        let r = reduced_density(&c, &space, Coordinate::X1);
        let rho = |x: f64| {
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += r[a * 2 + b].re * bases.well.value(a, x).unwrap() * bases.well.value(b, x).unwrap();
                }
            }
            s
        };
        for x in [2.0, 7.5, 13.0] {
            assert!((integrate(rho, 0.0, x) - m.cdf(x)).abs() < 1e-12);
        }
        for coord in Coordinate::ALL {
            let m = MarginalCdf::new(&c, &space, &bases, coord);
            let (lo, hi) = m.support();
            assert!(m.cdf(lo) < 1e-12, "{coord:?}");
            assert!((m.cdf(hi) - 1.0).abs() < 1e-12, "{coord:?}");
        }
    }

    #[test]
    fn pointer_cdf_matches_quadrature() {
        let cfg = ScenarioConfig::default();
        let (space, bases, c) = setup(&cfg);
        let m = MarginalCdf::new(&c, &space, &bases, Coordinate::Y);
        let r = reduced_density(&c, &space, Coordinate::Y);
        let modes = space.n_modes();
        let p = &bases.pointer;
        let rho = |y: f64| {
            let mut s = Complex64::default();
            for a in 0..modes {
                for b in 0..modes {
                    s += r[a * modes + b] * p.value(p.mode(a), y).unwrap().conj() * p.value(p.mode(b), y).unwrap();
                }
            }
            s.re
        };
        for y in [-300.0, -40.0, 0.0, 65.0] {
            let want = integrate(rho, -1000.0, y);
            assert!((want - m.cdf(y)).abs() < 1e-10, "{y}: {want} vs {}", m.cdf(y));
        }
    }

    #[test]
    fn samples_follow_marginals() {
        let cfg = ScenarioConfig::default();
        let (space, bases, c) = setup(&cfg);
        let n = 40000;
        let pts = sample_initial(&c, &space, &bases, n, 11).unwrap();
        let again = sample_initial(&c, &space, &bases, n, 11).unwrap();
        assert_eq!(pts, again);
        // Mean of x1 is L/2 within 4 standard errors.
        let xs: Vec<f64> = pts.iter().map(|p| p.x1).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 8.0).abs() < 4.0 * (var / n as f64).sqrt());
        // ψ₁² vanishes quadratically at q = 0.
        let band = pts.iter().filter(|p| p.q.abs() < 1e-3).count();
        assert!(band <= 1);
        for coord in Coordinate::ALL {
            let m = MarginalCdf::new(&c, &space, &bases, coord);
            let s: Vec<f64> = pts.iter().map(|p| p.to_array()[coord.slot()]).collect();
            assert!(ks_test(&s, |x| m.cdf(x)).pass, "{coord:?}");
        }
        // Pointer spread matches the rms width of the truncated packet
        // (wider than σ₀: the cut at |l| ≤ 𝓛 leaves ringing tails).
        let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
        let sd = (ys.iter().map(|y| y * y).sum::<f64>() / n as f64).sqrt();
        let modes = space.n_modes();
        let r = reduced_density(&c, &space, Coordinate::Y);
        let p = &bases.pointer;
        let rho = |y: f64| {
            let mut s = Complex64::default();
            for a in 0..modes {
                for b in 0..modes {
                    s += r[a * modes + b] * p.value(p.mode(a), y).unwrap().conj() * p.value(p.mode(b), y).unwrap();
                }
            }
            s.re
        };
        let rms = crate::quadrature::integrate(|y| y * y * rho(y), -1000.0, 1000.0).sqrt();
        assert!((sd / rms - 1.0).abs() < 0.05, "{sd} vs {rms}");
        assert!(rms > cfg.pointer_sigma0());
    }

    #[test]
    fn entangled_state_rejected() {
        let cfg = ScenarioConfig::unmeasured();
        let space = build_space(&cfg).unwrap();
        let bases = Bases::new(&cfg);
        let mut c = vec![Complex64::default(); 8];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        c[space.system_flat(1, 0, 0)] = Complex64::new(h, 0.0);
        c[space.system_flat(0, 0, 1)] = Complex64::new(h, 0.0);
        assert!(matches!(sample_initial(&c, &space, &bases, 5, 1), Err(Error::NonProductState)));
    }

    #[test]
    fn ks_detects_shift() {
        let u: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_test(&u, |x| x).pass);
        assert!(!ks_test(&u, |x| (x - 0.1).clamp(0.0, 1.0)).pass);
        assert!((ks_statistic(&u, |x| x) - 0.0005).abs() < 1e-12);
    }
}
