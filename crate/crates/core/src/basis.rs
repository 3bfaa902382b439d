//! Analytic single-coordinate bases: infinite-well eigenstates for the
//! electrons, Hermite functions for the cavity mode, plane waves for the
//! pointers.
//!
//! Besides values and derivatives, each basis exposes the running overlap
//! `∫ f_a* f_b` from the left domain edge. Those antiderivatives give exact
//! marginal CDFs and the current of the truncated dipole coupling.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::config::{ScenarioConfig, HBAR};
use crate::error::{Error, Result};

fn check_index(what: &'static str, index: usize, limit: usize) -> Result<()> {
    if index < limit {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange {
            what,
            index: index as i64,
            limit,
        })
    }
}

/// Eigenstates of an infinite well on [0, L].
#[derive(Clone, Debug, PartialEq)]
pub struct WellBasis {
    pub length: f64,
    pub mass: f64,
    pub n_levels: usize,
}

impl WellBasis {
    pub fn new(length: f64, mass: f64, n_levels: usize) -> Self {
        WellBasis { length, mass, n_levels }
    }

    /// E_n = (n+1)²π²ħ²/(2mL²).
    pub fn energy(&self, n: usize) -> f64 {
        let a = (n + 1) as f64;
        a * a * PI * PI * HBAR * HBAR / (2.0 * self.mass * self.length * self.length)
    }

    pub fn energies(&self) -> Vec<f64> {
        (0..self.n_levels).map(|n| self.energy(n)).collect()
    }

    fn wavenumber(&self, n: usize) -> f64 {
        (n + 1) as f64 * PI / self.length
    }

    fn inside(&self, x: f64) -> bool {
        (0.0..=self.length).contains(&x)
    }

    /// φ_n(x) = √(2/L) sin((n+1)πx/L), zero outside the well.
    pub fn value(&self, n: usize, x: f64) -> Result<f64> {
        check_index("well level", n, self.n_levels)?;
        if !self.inside(x) {
            return Ok(0.0);
        }
        Ok((2.0 / self.length).sqrt() * (self.wavenumber(n) * x).sin())
    }

    pub fn derivative(&self, n: usize, x: f64) -> Result<f64> {
        check_index("well level", n, self.n_levels)?;
        if !self.inside(x) {
            return Ok(0.0);
        }
        let k = self.wavenumber(n);
        Ok((2.0 / self.length).sqrt() * k * (k * x).cos())
    }

    pub fn second_derivative(&self, n: usize, x: f64) -> Result<f64> {
        let k = self.wavenumber(n);
        Ok(-k * k * self.value(n, x)?)
    }

    /// Values, first and second derivatives of every level at `x`.
    pub fn fill(&self, x: f64, v: &mut [f64], d1: &mut [f64], d2: &mut [f64]) {
        let norm = (2.0 / self.length).sqrt();
        let inside = self.inside(x);
        for n in 0..self.n_levels {
            if !inside {
                v[n] = 0.0;
                d1[n] = 0.0;
                d2[n] = 0.0;
                continue;
            }
            let k = self.wavenumber(n);
            let (s, c) = (k * x).sin_cos();
            v[n] = norm * s;
            d1[n] = norm * k * c;
            d2[n] = -k * k * norm * s;
        }
    }

    /// ⟨a|(x − L/2)|b⟩. Zero on the diagonal and between levels of equal
    /// parity; −16L/(9π²) for (0, 1).
    pub fn dipole(&self, a: usize, b: usize) -> Result<f64> {
        check_index("well level", a, self.n_levels)?;
        check_index("well level", b, self.n_levels)?;
        Ok(dipole_element(self.length, a, b))
    }

    /// ∫₀ˣ φ_a φ_b, with x clamped to the well.
    pub fn overlap_cdf(&self, a: usize, b: usize, x: f64) -> f64 {
        let u = PI * x.clamp(0.0, self.length) / self.length;
        let (a1, b1) = ((a + 1) as f64, (b + 1) as f64);
        if a == b {
            u / PI - (2.0 * a1 * u).sin() / (2.0 * a1 * PI)
        } else {
            ((a1 - b1) * u).sin() / ((a1 - b1) * PI) - ((a1 + b1) * u).sin() / ((a1 + b1) * PI)
        }
    }
}

pub(crate) fn dipole_element(length: f64, a: usize, b: usize) -> f64 {
    let (a1, b1) = ((a + 1) as f64, (b + 1) as f64);
    if (a + b) % 2 == 0 {
        return 0.0;
    }
    let d = a1 * a1 - b1 * b1;
    -8.0 * a1 * b1 * length / (PI * PI * d * d)
}

/// Hermite functions of the dimensionless cavity coordinate q.
#[derive(Clone, Debug, PartialEq)]
pub struct OscillatorBasis {
    pub omega: f64,
    pub n_levels: usize,
}

impl OscillatorBasis {
    pub fn new(omega: f64, n_levels: usize) -> Self {
        OscillatorBasis { omega, n_levels }
    }

    pub fn energy(&self, k: usize) -> f64 {
        HBAR * self.omega * (k as f64 + 0.5)
    }

    pub fn energies(&self) -> Vec<f64> {
        (0..self.n_levels).map(|k| self.energy(k)).collect()
    }

    /// ⟨k|q|k2⟩ = √(max/2) for neighbours, else 0.
    pub fn q_element(&self, k: usize, k2: usize) -> Result<f64> {
        check_index("photon level", k, self.n_levels)?;
        check_index("photon level", k2, self.n_levels)?;
        Ok(q_element(k, k2))
    }

    pub fn value(&self, m: usize, q: f64) -> Result<f64> {
        check_index("photon level", m, self.n_levels)?;
        let mut v = vec![0.0; m + 1];
        hermite_functions(q, &mut v);
        Ok(v[m])
    }

    /// dψ_m/dq = √(m/2)ψ_{m−1} − √((m+1)/2)ψ_{m+1}.
    pub fn derivative(&self, m: usize, q: f64) -> Result<f64> {
        check_index("photon level", m, self.n_levels)?;
        let mut v = vec![0.0; m + 2];
        hermite_functions(q, &mut v);
        Ok(ladder_derivative(&v, m))
    }

    /// Values and derivatives of every level at q.
    pub fn fill(&self, q: f64, v: &mut [f64], d1: &mut [f64]) {
        let m = self.n_levels;
        let mut buf = [0.0; 16];
        let mut heap;
        let all: &mut [f64] = if m < buf.len() {
            &mut buf[..m + 1]
        } else {
            heap = vec![0.0; m + 1];
            &mut heap
        };
        hermite_functions(q, all);
        for k in 0..m {
            v[k] = all[k];
            d1[k] = ladder_derivative(all, k);
        }
    }

    /// ∫_{−∞}^q ψ_a ψ_b for every pair, row-major `n_levels × n_levels`.
    pub fn overlap_cdf_matrix(&self, q: f64) -> Vec<f64> {
        let m = self.n_levels;
        // ψ and ψ' up to index m, which needs ψ up to m + 1.
        let mut psi = vec![0.0; m + 2];
        hermite_functions(q, &mut psi);
        let dpsi: Vec<f64> = (0..=m).map(|k| ladder_derivative(&psi, k)).collect();
        let off = |a: usize, b: usize| (dpsi[a] * psi[b] - psi[a] * dpsi[b]) / (2.0 * (b as f64 - a as f64));
        let mut diag = vec![0.0; m];
        diag[0] = 0.5 * (1.0 + libm::erf(q));
        for a in 0..m.saturating_sub(1) {
            let af = a as f64;
            let lower = if a > 0 { (af / 2.0).sqrt() * off(a - 1, a + 1) } else { 0.0 };
            let upper = ((af + 2.0) / 2.0).sqrt() * off(a, a + 2);
            diag[a + 1] = diag[a] - (psi[a] * psi[a + 1] - lower + upper) / ((af + 1.0) / 2.0).sqrt();
        }
        let mut out = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                out[a * m + b] = if a == b { diag[a] } else { off(a, b) };
            }
        }
        out
    }
}

pub(crate) fn q_element(k: usize, k2: usize) -> f64 {
    if k.abs_diff(k2) == 1 {
        (k.max(k2) as f64 / 2.0).sqrt()
    } else {
        0.0
    }
}

/// ψ_0..ψ_{len−1} at q by the stable three-term recurrence.
pub(crate) fn hermite_functions(q: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * q * q).exp();
    if out.len() > 1 {
        out[1] = 2f64.sqrt() * q * out[0];
    }
    for m in 1..out.len().saturating_sub(1) {
        let mf = m as f64;
        out[m + 1] = (2.0 / (mf + 1.0)).sqrt() * q * out[m] - (mf / (mf + 1.0)).sqrt() * out[m - 1];
    }
}

/// Needs `psi` to hold index m + 1.
fn ladder_derivative(psi: &[f64], m: usize) -> f64 {
    let mf = m as f64;
    let lower = if m > 0 { (mf / 2.0).sqrt() * psi[m - 1] } else { 0.0 };
    lower - ((mf + 1.0) / 2.0).sqrt() * psi[m + 1]
}

/// Periodic plane waves χ_l(y) = (2L_y)^{−1/2} exp(iπly/L_y) on [−L_y, L_y).
///
/// The wavenumbers πl/L_y have period 2L_y, so that is the interval on which
/// the modes are orthonormal.
#[derive(Clone, Debug, PartialEq)]
pub struct PointerBasis {
    pub box_length: f64,
    pub truncation: usize,
    pub mass: f64,
}

impl PointerBasis {
    pub fn new(box_length: f64, truncation: usize, mass: f64) -> Self {
        PointerBasis {
            box_length,
            truncation,
            mass,
        }
    }

    pub fn n_modes(&self) -> usize {
        2 * self.truncation + 1
    }

    /// Mode number l of storage index `idx`.
    pub fn mode(&self, idx: usize) -> i64 {
        idx as i64 - self.truncation as i64
    }

    pub fn index(&self, l: i64) -> Result<usize> {
        if l.unsigned_abs() as usize > self.truncation {
            return Err(Error::IndexOutOfRange {
                what: "pointer mode",
                index: l,
                limit: self.truncation,
            });
        }
        Ok((l + self.truncation as i64) as usize)
    }

    pub fn wavenumber(&self, l: i64) -> f64 {
        PI * l as f64 / self.box_length
    }

    /// ħπl/L_y.
    pub fn momentum(&self, l: i64) -> f64 {
        HBAR * self.wavenumber(l)
    }

    pub fn energy(&self, l: i64) -> f64 {
        let p = self.momentum(l);
        p * p / (2.0 * self.mass)
    }

    pub fn domain(&self) -> (f64, f64) {
        (-self.box_length, self.box_length)
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= -self.box_length && y < self.box_length
    }

    pub fn value(&self, l: i64, y: f64) -> Result<Complex64> {
        self.index(l)?;
        Ok(Complex64::from_polar(
            (2.0 * self.box_length).sqrt().recip(),
            self.wavenumber(l) * y,
        ))
    }

    /// All mode values at y; derivatives are iκ_l times these.
    pub fn fill(&self, y: f64, v: &mut [Complex64]) {
        let norm = (2.0 * self.box_length).sqrt().recip();
        let step = Complex64::from_polar(1.0, PI * y / self.box_length);
        let t = self.truncation;
        v[t] = Complex64::new(norm, 0.0);
        // Cumulative products stay accurate to a few ulps for 𝓛 ~ 10;
        // the phases are re-anchored exactly every few modes regardless.
        for j in 1..=t {
            let up = if j % 8 == 0 {
                Complex64::from_polar(norm, self.wavenumber(j as i64) * y)
            } else {
                v[t + j - 1] * step
            };
            v[t + j] = up;
            v[t - j] = up.conj();
        }
    }

    /// ∫_{−L_y}^y χ_a* χ_b for mode numbers a, b.
    pub fn overlap_cdf(&self, a: i64, b: i64, y: f64) -> Complex64 {
        let ly = self.box_length;
        let y = y.clamp(-ly, ly);
        if a == b {
            return Complex64::new((y + ly) / (2.0 * ly), 0.0);
        }
        let d = self.wavenumber(b - a);
        let num = Complex64::from_polar(1.0, d * y) - Complex64::from_polar(1.0, -d * ly);
        num / Complex64::new(0.0, d * 2.0 * ly)
    }
}

/// Gaussian pointer packet c_l ∝ exp(−(l−l₀)²/(4σ²)), unit sum of squares.
/// The flag is true when essentially all weight sits in one mode.
pub fn pointer_packet(basis: &PointerBasis, sigma_modes: f64, center_mode: i64) -> Result<(Vec<f64>, bool)> {
    if !(sigma_modes > 0.0) {
        return Err(Error::InvalidParameter {
            key: "pointer_packet_width_modes",
            reason: format!("must be positive, got {sigma_modes}"),
        });
    }
    basis.index(center_mode)?;
    let mut c: Vec<f64> = (0..basis.n_modes())
        .map(|i| {
            let d = (basis.mode(i) - center_mode) as f64;
            (-d * d / (4.0 * sigma_modes * sigma_modes)).exp()
        })
        .collect();
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    c.iter_mut().for_each(|x| *x /= norm);
    let peak = c.iter().fold(0.0f64, |m, x| m.max(x * x));
    Ok((c, peak > 1.0 - 1e-6))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LadderCheck {
    /// Max |H_diag − ħω(a†a + 1/2)| over all entries.
    pub max_abs_deviation: f64,
    /// Diagonal of [a, a†]; 1 except the truncation row, which is −(M−1).
    pub commutator_diagonal: Vec<i64>,
    /// Largest off-diagonal commutator entry.
    pub commutator_offdiag_max: i64,
}

/// Build H_field as ħω(m + 1/2) and as ħω(a†a + 1/2) and compare.
///
/// Ladder entries are √m, so products are carried as radicands and only
/// converted once they are perfect squares: the comparison is exact.
pub fn ladder_hamiltonian_check(basis: &OscillatorBasis) -> LadderCheck {
    let m = basis.n_levels;
    // a[i][j] = √radicand with a|j⟩ = √j |j−1⟩.
    let a = |i: usize, j: usize| -> u64 {
        if j == i + 1 {
            j as u64
        } else {
            0
        }
    };
    // (XᵀY)_{ij} = Σ_k √(x_ki · y_kj); each sum here has at most one term,
    // whose radicand must be a perfect square for the entry to be rational.
    let exact_sqrt = |r: u64| -> i64 {
        let s = (r as f64).sqrt().round() as u64;
        assert_eq!(s * s, r, "non-square radicand {r}");
        s as i64
    };
    let mut adag_a = vec![vec![0i64; m]; m];
    let mut a_adag = vec![vec![0i64; m]; m];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                // (a†a)_{ij} = Σ_k a_{ki} a_{kj}
                let r = a(k, i) * a(k, j);
                if r > 0 {
                    adag_a[i][j] += exact_sqrt(r);
                }
                // (aa†)_{ij} = Σ_k a_{ik} a_{jk}
                let r = a(i, k) * a(j, k);
                if r > 0 {
                    a_adag[i][j] += exact_sqrt(r);
                }
            }
        }
    }
    let hw = HBAR * basis.omega;
    let mut dev = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let diag = if i == j { hw * (i as f64 + 0.5) } else { 0.0 };
            let ladder = if i == j {
                hw * (adag_a[i][j] as f64 + 0.5)
            } else {
                hw * adag_a[i][j] as f64
            };
            dev = dev.max((diag - ladder).abs());
        }
    }
    let commutator_diagonal = (0..m).map(|i| a_adag[i][i] - adag_a[i][i]).collect();
    let mut off = 0i64;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                off = off.max((a_adag[i][j] - adag_a[i][j]).abs());
            }
        }
    }
    LadderCheck {
        max_abs_deviation: dev,
        commutator_diagonal,
        commutator_offdiag_max: off,
    }
}

/// The three single-coordinate bases of one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Bases {
    pub well: WellBasis,
    pub oscillator: OscillatorBasis,
    pub pointer: PointerBasis,
}

impl Bases {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        Bases {
            well: WellBasis::new(cfg.well_length, cfg.electron_mass(), cfg.n_electron_levels),
            oscillator: OscillatorBasis::new(cfg.cavity_omega, cfg.n_photon_levels),
            pointer: PointerBasis::new(cfg.pointer_box_length, cfg.effective_pointer_truncation(), cfg.pointer_mass()),
        }
    }
}

/// ⟨0|q|1⟩, used in several closed-form estimates.
pub const Q01: f64 = FRAC_1_SQRT_2;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn well() -> WellBasis {
        let cfg = ScenarioConfig::default();
        WellBasis::new(16.0, cfg.electron_mass(), 4)
    }

    #[test]
    fn resonance_energies() {
        let w = well();
        assert!((w.energy(0) - 0.034973).abs() < 1e-5, "{}", w.energy(0));
        assert!((w.energy(1) - w.energy(0) - 0.104919).abs() < 1e-5);
        assert!(w.energies().windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn well_values() {
        let w = well();
        let l = w.length;
        assert!((w.value(0, l / 2.0).unwrap() - (2.0 / l).sqrt()).abs() < 1e-15);
        assert!(w.value(1, l / 2.0).unwrap().abs() < 1e-15);
        assert_eq!(w.value(0, -0.1).unwrap(), 0.0);
        assert_eq!(w.value(0, l + 0.1).unwrap(), 0.0);
        assert!(w.value(4, 1.0).is_err());
    }

    #[test]
    fn well_orthonormal_by_quadrature() {
        let w = well();
        for a in 0..4 {
            for b in 0..4 {
                let s = integrate(|x| w.value(a, x).unwrap() * w.value(b, x).unwrap(), 0.0, w.length);
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-10, "{a}{b}: {s}");
            }
        }
    }

    #[test]
    fn dipole_against_quadrature() {
        let w = well();
        let l = w.length;
        let d01 = w.dipole(0, 1).unwrap();
        assert!((d01 + 16.0 * l / (9.0 * PI * PI)).abs() < 1e-14);
        assert!((d01.abs() - 2.882).abs() < 1e-3);
        for a in 0..4 {
            for b in 0..4 {
                let s = integrate(|x| w.value(a, x).unwrap() * (x - l / 2.0) * w.value(b, x).unwrap(), 0.0, l);
                assert!((s - w.dipole(a, b).unwrap()).abs() < 1e-10, "{a}{b}");
                assert_eq!(w.dipole(a, b).unwrap(), w.dipole(b, a).unwrap());
            }
            assert_eq!(w.dipole(a, a).unwrap(), 0.0);
        }
    }

    #[test]
    fn well_overlap_cdf_matches_quadrature() {
        let w = well();
        for &x in &[0.0f64, 3.1, 8.0, 12.7, 16.0, 20.0] {
            for a in 0..3 {
                for b in 0..3 {
                    let s = integrate(|t| w.value(a, t).unwrap() * w.value(b, t).unwrap(), 0.0, x.min(w.length));
                    assert!((s - w.overlap_cdf(a, b, x)).abs() < 1e-12, "{a}{b} {x}");
                }
            }
        }
    }

    #[test]
    fn oscillator_values_and_elements() {
        let o = OscillatorBasis::new(0.1594, 4);
        assert!((o.value(0, 0.0).unwrap() - PI.powf(-0.25)).abs() < 1e-15);
        assert_eq!(o.value(1, 0.0).unwrap(), 0.0);
        assert!((o.q_element(0, 1).unwrap() - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((o.q_element(1, 2).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(o.q_element(0, 0).unwrap(), 0.0);
        assert!(o.q_element(0, 4).is_err());
        for a in 0..4 {
            for b in 0..4 {
                let ov = integrate(|q| o.value(a, q).unwrap() * o.value(b, q).unwrap(), -14.0, 14.0);
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ov - want).abs() < 1e-10, "overlap {a}{b}");
                let qe = integrate(|q| o.value(a, q).unwrap() * q * o.value(b, q).unwrap(), -14.0, 14.0);
                assert!((qe - o.q_element(a, b).unwrap()).abs() < 1e-10, "q {a}{b}");
            }
        }
    }

    #[test]
    fn oscillator_cdf_matches_quadrature() {
        let o = OscillatorBasis::new(0.1594, 5);
        for &q in &[-7.0, -1.3, 0.0, 0.4, 2.2, 9.0] {
            let m = o.overlap_cdf_matrix(q);
            for a in 0..5 {
                for b in 0..5 {
                    let s = integrate(|t| o.value(a, t).unwrap() * o.value(b, t).unwrap(), -14.0, q);
                    assert!((s - m[a * 5 + b]).abs() < 1e-11, "{a}{b} q={q}: {s} vs {}", m[a * 5 + b]);
                }
            }
        }
    }

    #[test]
    fn fill_matches_single_calls() {
        let o = OscillatorBasis::new(0.1594, 3);
        let (mut v, mut d) = (vec![0.0; 3], vec![0.0; 3]);
        o.fill(0.37, &mut v, &mut d);
        for k in 0..3 {
            assert_eq!(v[k], o.value(k, 0.37).unwrap());
            assert_eq!(d[k], o.derivative(k, 0.37).unwrap());
        }
    }

    #[test]
    fn pointer_modes() {
        let p = PointerBasis::new(1000.0, 10, 0.24);
        assert_eq!(p.n_modes(), 21);
        assert_eq!(p.index(-10).unwrap(), 0);
        assert!(p.index(11).is_err());
        let mut v = vec![Complex64::default(); 21];
        for &y in &[-999.0, -3.3, 0.0, 417.25, 999.9] {
            p.fill(y, &mut v);
            for i in 0..21 {
                let direct = p.value(p.mode(i), y).unwrap();
                assert!((v[i] - direct).norm() < 1e-15, "{i} {y}");
            }
        }
        // Orthonormal over one period [−L, L).
        for a in -3..=3i64 {
            for b in -3..=3i64 {
                let re = integrate(|y| (p.value(a, y).unwrap().conj() * p.value(b, y).unwrap()).re, -1000.0, 1000.0);
                let im = integrate(|y| (p.value(a, y).unwrap().conj() * p.value(b, y).unwrap()).im, -1000.0, 1000.0);
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((re - want).abs() < 1e-10 && im.abs() < 1e-10, "{a}{b}");
                let c = p.overlap_cdf(a, b, 123.0);
                let re = integrate(|y| (p.value(a, y).unwrap().conj() * p.value(b, y).unwrap()).re, -1000.0, 123.0);
                let im = integrate(|y| (p.value(a, y).unwrap().conj() * p.value(b, y).unwrap()).im, -1000.0, 123.0);
                assert!((c.re - re).abs() < 1e-12 && (c.im - im).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn packet_shape() {
        let p = PointerBasis::new(1000.0, 10, 0.24);
        let (c, degenerate) = pointer_packet(&p, 10f64.sqrt(), 0).unwrap();
        assert!(!degenerate);
        assert!((c.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
        for i in 0..21 {
            assert_eq!(c[i], c[20 - i]);
        }
        // Spatial width vs L/(2πσ_k).
        let psi = |y: f64| -> f64 {
            let mut s = Complex64::default();
            for (i, ci) in c.iter().enumerate() {
                s += p.value(p.mode(i), y).unwrap() * ci;
            }
            s.norm_sqr()
        };
        let var = integrate(|y| y * y * psi(y), -1000.0, 1000.0);
        let sigma0 = 1000.0 / (2.0 * PI * 10f64.sqrt());
        assert!((var.sqrt() / sigma0 - 1.0).abs() < 0.2, "{} vs {sigma0}", var.sqrt());
        let single = PointerBasis::new(1000.0, 0, 0.24);
        assert!(pointer_packet(&single, 1.0, 0).unwrap().1);
        assert!(pointer_packet(&p, 0.0, 0).is_err());
        assert!(pointer_packet(&p, 1.0, 11).is_err());
    }

    #[test]
    fn ladder_exact() {
        for m in 2..8 {
            let r = ladder_hamiltonian_check(&OscillatorBasis::new(0.1594, m));
            assert_eq!(r.max_abs_deviation, 0.0);
            assert_eq!(r.commutator_offdiag_max, 0);
            for i in 0..m - 1 {
                assert_eq!(r.commutator_diagonal[i], 1);
            }
            assert_eq!(r.commutator_diagonal[m - 1], -(m as i64 - 1));
        }
    }
}
