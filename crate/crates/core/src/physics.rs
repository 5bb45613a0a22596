//! Soft-core Coulomb potential and the trapezoidal, elliptically polarized
//! laser pulse.
//!
//! The pulse field is
//!
//! ```text
//! Ex(t) = A sin(wt) f(t),   Ey(t) = eps A cos(wt) f(t)
//! ```
//!
//! with `f` a piecewise-linear trapezoid (ramp up, plateau, ramp down). The
//! vector potential `A(t) = -int_0^t E` and its running integral are evaluated
//! in closed form segment by segment, so they are exact at the ramp corners.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Speed of light in atomic units.
pub const SPEED_OF_LIGHT_AU: f64 = 137.036;
/// Bohr radius in nm.
pub const BOHR_NM: f64 = 0.052_917_7;
/// One atomic unit of intensity in W/cm^2.
pub const INTENSITY_AU_WCM2: f64 = 3.51e16;
/// Carrier frequency of a 526 nm laser.
pub const DEFAULT_OMEGA: f64 = 0.0867;
/// Softening length giving a -0.5 a.u. ground state in 2D.
pub const DEFAULT_SOFTENING: f64 = 0.8;

/// `-1 / sqrt(a^2 + x^2 + y^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftCorePotential {
    a: f64,
}

impl SoftCorePotential {
    pub fn new(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::config("softening", format!("must be positive, got {a}")));
        }
        Ok(SoftCorePotential { a })
    }

    pub fn softening(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn value(&self, x: f64, y: f64) -> f64 {
        -1.0 / (self.a * self.a + x * x + y * y).sqrt()
    }

    /// `(dV/dx, dV/dy) = (x, y) / (a^2 + r^2)^{3/2}`.
    #[inline]
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let s = self.a * self.a + x * x + y * y;
        let inv = 1.0 / (s * s.sqrt());
        (x * inv, y * inv)
    }
}

impl Default for SoftCorePotential {
    fn default() -> Self {
        SoftCorePotential { a: DEFAULT_SOFTENING }
    }
}

/// How the ellipticity enters the field amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntensityConvention {
    /// The x amplitude is `E0` for every ellipticity.
    #[default]
    FixedEx,
    /// Both components scaled by `1/sqrt(1 + eps^2)` so the cycle-averaged
    /// intensity does not depend on ellipticity.
    FixedMeanIntensity,
}

impl IntensityConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            IntensityConvention::FixedEx => "fixed_ex",
            IntensityConvention::FixedMeanIntensity => "fixed_mean_intensity",
        }
    }
}

impl fmt::Display for IntensityConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntensityConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fixed_ex" => Ok(IntensityConvention::FixedEx),
            "fixed_mean_intensity" => Ok(IntensityConvention::FixedMeanIntensity),
            other => Err(format!("unknown intensity convention `{other}` (expected fixed_ex | fixed_mean_intensity)")),
        }
    }
}

/// Laser intensity with its unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intensity {
    AtomicUnits(f64),
    WattsPerCm2(f64),
}

impl Intensity {
    pub fn atomic_units(&self) -> f64 {
        match *self {
            Intensity::AtomicUnits(i) => i,
            Intensity::WattsPerCm2(i) => i / INTENSITY_AU_WCM2,
        }
    }
}

/// Peak field amplitude `E0 = sqrt(I_au)`.
pub fn intensity_to_field(intensity: Intensity) -> Result<f64> {
    let i = intensity.atomic_units();
    if !(i.is_finite() && i >= 0.0) {
        return Err(Error::config("intensity", format!("must be non-negative, got {i}")));
    }
    Ok(i.sqrt())
}

/// Inverse of [`intensity_to_field`], in atomic units.
pub fn field_to_intensity(e0: f64) -> f64 {
    e0 * e0
}

/// Angular frequency (a.u.) of light with the given vacuum wavelength.
pub fn wavelength_nm_to_omega(lambda_nm: f64) -> Result<f64> {
    if !(lambda_nm.is_finite() && lambda_nm > 0.0) {
        return Err(Error::config("wavelength", format!("must be positive, got {lambda_nm}")));
    }
    Ok(2.0 * PI * SPEED_OF_LIGHT_AU / (lambda_nm / BOHR_NM))
}

/// One linear piece `alpha + beta t` of the envelope on `[start, end)`, with
/// the running integrals of the unit field profile at `start`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    start: f64,
    end: f64,
    alpha: f64,
    beta: f64,
    // int_0^start f sin, int_0^start f cos
    g1: [f64; 2],
    // int_0^start (int_0^s f sin), same for cos
    g2: [f64; 2],
}

/// Antiderivatives of `(alpha + beta s) * sin(ws)` (first) and of that
/// antiderivative (second); `cosine` switches the carrier to `cos(ws)`.
#[inline]
fn antiderivatives(alpha: f64, beta: f64, omega: f64, s: f64, cosine: bool) -> (f64, f64) {
    let (sn, cs) = (omega * s).sin_cos();
    let lin = alpha + beta * s;
    let w2 = omega * omega;
    let w3 = w2 * omega;
    if cosine {
        let p = lin * sn / omega + beta * cs / w2;
        let q = -lin * cs / w2 + 2.0 * beta * sn / w3;
        (p, q)
    } else {
        let p = -lin * cs / omega + beta * sn / w2;
        let q = -lin * sn / w2 - 2.0 * beta * cs / w3;
        (p, q)
    }
}

/// Trapezoidal elliptically polarized pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct LaserPulse {
    e0: f64,
    omega: f64,
    epsilon: f64,
    ramp_cycles: u32,
    plateau_cycles: u32,
    convention: IntensityConvention,
    segments: Vec<Segment>,
}

impl LaserPulse {
    /// Reference pulse: 2 ramp cycles, 2 plateau cycles, `FixedEx`.
    pub fn new(e0: f64, omega: f64, epsilon: f64) -> Result<Self> {
        Self::with_shape(e0, omega, epsilon, 2, 2, IntensityConvention::FixedEx)
    }

    pub fn with_shape(
        e0: f64,
        omega: f64,
        epsilon: f64,
        ramp_cycles: u32,
        plateau_cycles: u32,
        convention: IntensityConvention,
    ) -> Result<Self> {
        if !(e0.is_finite() && e0 >= 0.0) {
            return Err(Error::config("intensity", format!("field amplitude must be >= 0, got {e0}")));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::config("omega", format!("must be positive, got {omega}")));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::config("ellipticity", format!("must lie in [0, 1], got {epsilon}")));
        }
        if ramp_cycles == 0 {
            return Err(Error::config("ramp_cycles", "must be at least 1"));
        }
        let mut pulse = LaserPulse {
            e0,
            omega,
            epsilon,
            ramp_cycles,
            plateau_cycles,
            convention,
            segments: Vec::new(),
        };
        pulse.build_segments();
        Ok(pulse)
    }

    pub fn with_convention(self, convention: IntensityConvention) -> Self {
        LaserPulse { convention, ..self }
    }

    fn build_segments(&mut self) {
        let period = self.period();
        let t1 = self.ramp_cycles as f64 * period;
        let t2 = t1 + self.plateau_cycles as f64 * period;
        let t3 = self.duration();
        let pieces = [
            (0.0, t1, 0.0, 1.0 / t1),
            (t1, t2, 1.0, 0.0),
            (t2, t3, t3 / (t3 - t2), -1.0 / (t3 - t2)),
        ];
        let mut g1 = [0.0; 2];
        let mut g2 = [0.0; 2];
        let mut segments = Vec::with_capacity(3);
        for &(start, end, alpha, beta) in pieces.iter().filter(|p| p.1 > p.0) {
            segments.push(Segment {
                start,
                end,
                alpha,
                beta,
                g1,
                g2,
            });
            for (c, cosine) in [false, true].into_iter().enumerate() {
                let (pa, qa) = antiderivatives(alpha, beta, self.omega, start, cosine);
                let (pb, qb) = antiderivatives(alpha, beta, self.omega, end, cosine);
                let len = end - start;
                g2[c] += g1[c] * len + (qb - qa - pa * len);
                g1[c] += pb - pa;
            }
        }
        self.segments = segments;
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn ramp_cycles(&self) -> u32 {
        self.ramp_cycles
    }
    pub fn plateau_cycles(&self) -> u32 {
        self.plateau_cycles
    }
    pub fn convention(&self) -> IntensityConvention {
        self.convention
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// `(2 ramp + plateau)` optical cycles.
    pub fn duration(&self) -> f64 {
        (2 * self.ramp_cycles + self.plateau_cycles) as f64 * self.period()
    }

    /// Amplitude multiplying the x carrier after applying the convention.
    pub fn amplitude(&self) -> f64 {
        match self.convention {
            IntensityConvention::FixedEx => self.e0,
            IntensityConvention::FixedMeanIntensity => self.e0 / (1.0 + self.epsilon * self.epsilon).sqrt(),
        }
    }

    pub fn envelope(&self, t: f64) -> f64 {
        match self.segment_at(t) {
            Some(s) => (s.alpha + s.beta * t).clamp(0.0, 1.0),
            None => 0.0,
        }
    }

    fn segment_at(&self, t: f64) -> Option<Segment> {
        if !(t >= 0.0) || t >= self.duration() {
            return None;
        }
        self.segments
            .iter()
            .rev()
            .find(|s| t >= s.start)
            .copied()
    }

    pub fn field(&self, t: f64) -> (f64, f64) {
        let f = self.envelope(t);
        if f == 0.0 {
            return (0.0, 0.0);
        }
        let amp = self.amplitude();
        let (s, c) = (self.omega * t).sin_cos();
        (amp * s * f, self.epsilon * amp * c * f)
    }

    /// Running integrals `(int_0^t f sin, int_0^t f cos)` and their integrals.
    fn profile_integrals(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        if t <= 0.0 {
            return ([0.0; 2], [0.0; 2]);
        }
        let (seg, end) = match self.segment_at(t) {
            Some(s) => (s, t),
            None => {
                // past the pulse: A is frozen at its final value
                let last = *self.segments.last().expect("pulse has segments");
                (last, last.end)
            }
        };
        let mut g1 = seg.g1;
        let mut g2 = seg.g2;
        for (c, cosine) in [false, true].into_iter().enumerate() {
            let (pa, qa) = antiderivatives(seg.alpha, seg.beta, self.omega, seg.start, cosine);
            let (pb, qb) = antiderivatives(seg.alpha, seg.beta, self.omega, end, cosine);
            let len = end - seg.start;
            g2[c] += g1[c] * len + (qb - qa - pa * len);
            g1[c] += pb - pa;
        }
        // field-free tail: G2 keeps growing linearly with the frozen G1
        if t > end {
            for c in 0..2 {
                g2[c] += g1[c] * (t - end);
            }
        }
        (g1, g2)
    }

    /// `A(t) = -int_0^t E(s) ds`.
    pub fn vector_potential(&self, t: f64) -> (f64, f64) {
        let amp = self.amplitude();
        let (g1, _) = self.profile_integrals(t);
        (-amp * g1[0], -self.epsilon * amp * g1[1])
    }

    /// `int_0^t A(s) ds`; for a free electron starting at rest this is its
    /// displacement.
    pub fn vector_potential_integral(&self, t: f64) -> (f64, f64) {
        let amp = self.amplitude();
        let (_, g2) = self.profile_integrals(t);
        (-amp * g2[0], -self.epsilon * amp * g2[1])
    }

    /// Mean of `A` over `[t0, t1]` (t1 > t0).
    pub fn mean_vector_potential(&self, t0: f64, t1: f64) -> (f64, f64) {
        let (a0, b0) = self.vector_potential_integral(t0);
        let (a1, b1) = self.vector_potential_integral(t1);
        let h = t1 - t0;
        ((a1 - a0) / h, (b1 - b0) / h)
    }

    /// `int_{t0}^{t1} E(s) ds = A(t0) - A(t1)`.
    pub fn field_integral(&self, t0: f64, t1: f64) -> (f64, f64) {
        let (a0, b0) = self.vector_potential(t0);
        let (a1, b1) = self.vector_potential(t1);
        (a0 - a1, b0 - b1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_pulse(eps: f64) -> LaserPulse {
        LaserPulse::new(0.1, DEFAULT_OMEGA, eps).unwrap()
    }

    /// Adaptive Simpson quadrature, independent of the closed forms.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
            let m = 0.5 * (a + b);
            let fm = f(m);
            (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
        }
        #[allow(clippy::too_many_arguments)]
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            fa: f64,
            b: f64,
            fb: f64,
            m: f64,
            fm: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let (lm, flm, left) = simpson(f, a, fa, m, fm);
            let (rm, frm, right) = simpson(f, m, fm, b, fb);
            let delta = left + right - whole;
            if depth == 0 || delta.abs() <= 15.0 * tol {
                return left + right + delta / 15.0;
            }
            rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
                + rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
        }
        // pre-split so nodes cannot all land on zeros of a periodic integrand
        let panels = 37;
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let (lo, hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
                let (fa, fb) = (f(lo), f(hi));
                let (m, fm, whole) = simpson(f, lo, fa, hi, fb);
                rec(f, lo, fa, hi, fb, m, fm, whole, tol / panels as f64, 50)
            })
            .sum()
    }

    /// Quadrature of -E over [0, t], split at the envelope corners.
    fn quad_vector_potential(p: &LaserPulse, t: f64) -> (f64, f64) {
        let period = p.period();
        let mut knots = vec![0.0];
        for c in [p.ramp_cycles(), p.ramp_cycles() + p.plateau_cycles()] {
            let k = c as f64 * period;
            if k < t {
                knots.push(k);
            }
        }
        knots.push(t);
        let mut ax = 0.0;
        let mut ay = 0.0;
        for w in knots.windows(2) {
            ax -= adaptive_simpson(&|s| p.field(s).0, w[0], w[1], 1e-14);
            ay -= adaptive_simpson(&|s| p.field(s).1, w[0], w[1], 1e-14);
        }
        (ax, ay)
    }

    #[test]
    fn potential_values() {
        let v = SoftCorePotential::new(0.8).unwrap();
        assert_eq!(v.value(0.0, 0.0), -1.25);
        assert!((v.value(0.6, 0.0) + 1.0).abs() < 1e-15);
        let far = v.value(100.0, 0.0);
        assert!((far + 0.01).abs() < 4e-5);
        assert!(far > -0.01);
        assert!(SoftCorePotential::new(0.0).is_err());
    }

    #[test]
    fn envelope_corners() {
        let p = reference_pulse(0.0);
        let c = p.period();
        assert_eq!(p.envelope(0.0), 0.0);
        assert!((p.envelope(2.0 * c) - 1.0).abs() < 1e-15);
        assert!((p.envelope(4.0 * c) - 1.0).abs() < 1e-15);
        assert!(p.envelope(6.0 * c).abs() < 1e-15);
        assert!((p.envelope(c) - 0.5).abs() < 1e-15);
        assert_eq!(p.envelope(7.0 * c), 0.0);
        assert!((p.duration() - 6.0 * c).abs() < 1e-12);
    }

    #[test]
    fn envelope_is_continuous_at_corners() {
        let p = reference_pulse(0.3);
        for k in [2.0, 4.0] {
            let t = k * p.period();
            let left = p.envelope(t * (1.0 - 1e-15));
            let right = p.envelope(t);
            assert!((left - right).abs() < 1e-12);
        }
    }

    #[test]
    fn field_examples() {
        let lin = reference_pulse(0.0);
        for t in [0.0, 10.0, 123.4, 300.0] {
            assert_eq!(lin.field(t).1, 0.0);
        }
        let circ = reference_pulse(1.0);
        assert_eq!(circ.field(0.0), (0.0, 0.0));
        let c = circ.period();
        for k in 0..50 {
            let t = 2.0 * c + k as f64 * 2.0 * c / 50.0;
            let (ex, ey) = circ.field(t);
            assert!(((ex * ex + ey * ey).sqrt() - 0.1).abs() < 1e-12);
        }
        assert_eq!(circ.field(circ.duration() + 1.0), (0.0, 0.0));
    }

    #[test]
    fn mean_intensity_convention_rescales() {
        let p = reference_pulse(1.0).with_convention(IntensityConvention::FixedMeanIntensity);
        assert!((p.amplitude() - 0.1 / 2f64.sqrt()).abs() < 1e-15);
        let p0 = reference_pulse(0.0).with_convention(IntensityConvention::FixedMeanIntensity);
        assert_eq!(p0.amplitude(), 0.1);
    }

    #[test]
    fn intensity_conversion() {
        let e = intensity_to_field(Intensity::WattsPerCm2(3.51e14)).unwrap();
        assert!((e - 0.1).abs() < 1e-15);
        assert!((Intensity::WattsPerCm2(3.51e14).atomic_units() - 0.01).abs() < 1e-16);
        assert_eq!(intensity_to_field(Intensity::AtomicUnits(0.0)).unwrap(), 0.0);
        assert!((intensity_to_field(Intensity::WattsPerCm2(3.51e16)).unwrap() - 1.0).abs() < 1e-15);
        assert!(intensity_to_field(Intensity::AtomicUnits(-1.0)).is_err());
        assert!((field_to_intensity(intensity_to_field(Intensity::AtomicUnits(0.037)).unwrap()) - 0.037).abs() < 1e-16);
    }

    #[test]
    fn wavelength_526() {
        let w = wavelength_nm_to_omega(526.0).unwrap();
        assert!((w - 0.0867).abs() < 5e-4, "{w}");
    }

    #[test]
    fn vector_potential_basics() {
        let lin = reference_pulse(0.0);
        assert_eq!(lin.vector_potential(0.0), (0.0, 0.0));
        for t in [5.0, 100.0, 250.0, 1000.0] {
            assert_eq!(lin.vector_potential(t).1, 0.0);
        }
        // integer-cycle ramps leave no residual drift
        let circ = reference_pulse(1.0);
        let (ax, ay) = circ.vector_potential(circ.duration());
        assert!(ax.abs() < 1e-12 && ay.abs() < 1e-12, "{ax} {ay}");
    }

    #[test]
    fn vector_potential_matches_quadrature() {
        for eps in [0.0, 0.5, 1.0] {
            let p = reference_pulse(eps);
            let t_end = p.duration();
            for t in [t_end, 0.37 * t_end, 0.5 * p.period(), 0.81 * t_end, 2.0 * p.period()] {
                let (ax, ay) = p.vector_potential(t);
                let (qx, qy) = quad_vector_potential(&p, t);
                assert!((ax - qx).abs() < 1e-10, "eps={eps} t={t}: {ax} vs {qx}");
                assert!((ay - qy).abs() < 1e-10, "eps={eps} t={t}: {ay} vs {qy}");
            }
        }
    }

    #[test]
    fn vector_potential_integral_matches_quadrature() {
        let p = reference_pulse(0.7);
        let t_end = p.duration();
        for t in [0.3 * t_end, t_end, t_end + 40.0] {
            let qx = adaptive_simpson(&|s| p.vector_potential(s).0, 0.0, t, 1e-13);
            let qy = adaptive_simpson(&|s| p.vector_potential(s).1, 0.0, t, 1e-13);
            let (ix, iy) = p.vector_potential_integral(t);
            assert!((ix - qx).abs() < 1e-8, "{ix} vs {qx}");
            assert!((iy - qy).abs() < 1e-8, "{iy} vs {qy}");
        }
    }

    #[test]
    fn rejects_bad_pulses() {
        assert!(matches!(LaserPulse::new(0.1, 0.0867, 1.5), Err(Error::Config { ref field, .. }) if field == "ellipticity"));
        assert!(LaserPulse::new(0.1, -1.0, 0.5).is_err());
        assert!(LaserPulse::new(-0.1, 0.1, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn potential_symmetries(x in -50.0f64..50.0, y in -50.0f64..50.0) {
            let v = SoftCorePotential::default();
            let r = v.value(x, y);
            prop_assert!(r < 0.0);
            for other in [v.value(-x, -y), v.value(x, -y), v.value(-x, y), v.value(y, x)] {
                prop_assert!((other - r).abs() < 1e-15);
            }
        }

        #[test]
        fn field_is_minus_derivative_of_vector_potential(frac in 0.02f64..0.98, eps in 0.0f64..=1.0) {
            let p = reference_pulse(eps);
            let c = p.period();
            let t = frac * p.duration();
            // stay clear of the corners where dE/dt jumps
            prop_assume!([2.0 * c, 4.0 * c].iter().all(|k| (t - k).abs() > 0.1));
            let h = 1e-3;
            let (axp, ayp) = p.vector_potential(t + h);
            let (axm, aym) = p.vector_potential(t - h);
            let (ex, ey) = p.field(t);
            prop_assert!((-(axp - axm) / (2.0 * h) - ex).abs() < 1e-8);
            prop_assert!((-(ayp - aym) / (2.0 * h) - ey).abs() < 1e-8);
        }

        #[test]
        fn envelope_in_unit_interval(t in -10.0f64..600.0) {
            let e = reference_pulse(0.2).envelope(t);
            prop_assert!((0.0..=1.0).contains(&e));
        }
    }
}
