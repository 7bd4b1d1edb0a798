//! Grid-sampled signal/control envelopes and spin waves.
//!
//! Pulses are sampled uniformly over an explicit time window (us) and are
//! zero outside it. Spin waves are sampled uniformly over `z / L` in [0, 1].
//! All integrals use the trapezoidal rule.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Trapezoidal integral of uniformly spaced samples.
pub(crate) fn trapezoid<I: IntoIterator<Item = f64>>(values: I, step: f64) -> f64 {
    let mut it = values.into_iter().peekable();
    let Some(first) = it.next() else { return 0.0 };
    let mut sum = 0.5 * first;
    let mut last = first;
    let mut count = 1usize;
    for v in it {
        sum += v;
        last = v;
        count += 1;
    }
    if count == 1 {
        return 0.0;
    }
    (sum - 0.5 * last) * step
}

fn weighted_inner(a: &[C64], b: &[C64], step: f64) -> C64 {
    let n = a.len();
    let mut acc = C64::new(0.0, 0.0);
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
        acc += x.conj() * y * w;
    }
    acc * step
}

fn overlap_of(a: &[C64], b: &[C64], step: f64) -> Result<f64> {
    let na = weighted_inner(a, a, step).re;
    let nb = weighted_inner(b, b, step).re;
    if na <= 0.0 || nb <= 0.0 {
        return Err(Error::Degenerate("overlap of a zero-energy field"));
    }
    Ok((weighted_inner(a, b, step).norm_sqr() / (na * nb)).min(1.0))
}

/// A complex envelope sampled uniformly over `[t_start, t_end]` (us).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPulse {
    t_start: f64,
    t_end: f64,
    samples: Vec<C64>,
}

impl SampledPulse {
    pub fn new(t_start: f64, t_end: f64, samples: Vec<C64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("samples", "a pulse needs at least two samples"));
        }
        if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
            return Err(invalid(
                "window",
                format!("need t_end > t_start, got [{t_start}, {t_end}]"),
            ));
        }
        if samples
            .iter()
            .any(|s| !(s.re.is_finite() && s.im.is_finite()))
        {
            return Err(invalid("samples", "non-finite amplitude"));
        }
        Ok(Self {
            t_start,
            t_end,
            samples,
        })
    }

    pub fn from_real(t_start: f64, t_end: f64, samples: &[f64]) -> Result<Self> {
        Self::new(
            t_start,
            t_end,
            samples.iter().map(|&x| C64::new(x, 0.0)).collect(),
        )
    }

    /// Sample `f(t)` at `n` uniformly spaced times.
    pub fn from_fn(t_start: f64, t_end: f64, n: usize, f: impl Fn(f64) -> C64) -> Result<Self> {
        let n = n.max(2);
        let dt = (t_end - t_start) / (n - 1) as f64;
        Self::new(
            t_start,
            t_end,
            (0..n).map(|k| f(t_start + dt * k as f64)).collect(),
        )
    }

    pub fn constant(t_start: f64, t_end: f64, n: usize, value: f64) -> Result<Self> {
        Self::from_fn(t_start, t_end, n, |_| C64::new(value, 0.0))
    }

    pub fn zeros(t_start: f64, t_end: f64, n: usize) -> Result<Self> {
        Self::constant(t_start, t_end, n, 0.0)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.duration() / (self.samples.len() - 1) as f64
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn time(&self, k: usize) -> f64 {
        if k + 1 == self.samples.len() {
            self.t_end
        } else {
            self.t_start + self.dt() * k as f64
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(|k| self.time(k))
    }

    /// Real parts of the samples (controls are real envelopes).
    pub fn real_parts(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.re).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    /// Linear interpolation; zero outside the window.
    pub fn value_at(&self, t: f64) -> C64 {
        let eps = 1e-12 * self.duration().max(1.0);
        if t < self.t_start - eps || t > self.t_end + eps {
            return C64::new(0.0, 0.0);
        }
        let x = ((t - self.t_start) / self.dt()).clamp(0.0, (self.samples.len() - 1) as f64);
        let k = (x.floor() as usize).min(self.samples.len() - 2);
        let f = x - k as f64;
        self.samples[k] * (1.0 - f) + self.samples[k + 1] * f
    }

    /// Trapezoidal `int |E|^2 dt` over the whole window.
    pub fn energy(&self) -> f64 {
        trapezoid(self.samples.iter().map(|s| s.norm_sqr()), self.dt())
    }

    /// `int |E|^2 dt` over a sub-window, integrating the piecewise-linear
    /// interpolant of `|E|^2` (consistent with [`SampledPulse::energy`]).
    pub fn energy_in(&self, from: f64, to: f64) -> Result<f64> {
        let eps = 1e-9 * self.duration().max(1.0);
        if from.is_nan()
            || to.is_nan()
            || from > to
            || from < self.t_start - eps
            || to > self.t_end + eps
        {
            return Err(Error::OutOfRange {
                what: "sub-window",
                value: if from < self.t_start - eps { from } else { to },
                min: self.t_start,
                max: self.t_end,
            });
        }
        let from = from.max(self.t_start);
        let to = to.min(self.t_end);
        let dt = self.dt();
        let intensity = |k: usize| self.samples[k].norm_sqr();
        let interp = |t: f64| {
            let x = ((t - self.t_start) / dt).clamp(0.0, (self.samples.len() - 1) as f64);
            let k = (x.floor() as usize).min(self.samples.len() - 2);
            let f = x - k as f64;
            (k, intensity(k) * (1.0 - f) + intensity(k + 1) * f)
        };
        let (ka, ia) = interp(from);
        let (kb, ib) = interp(to);
        if ka == kb {
            return Ok(0.5 * (ia + ib) * (to - from));
        }
        // Partial first cell, whole interior cells, partial last cell.
        let mut total = 0.5 * (ia + intensity(ka + 1)) * (self.time(ka + 1) - from);
        for k in ka + 1..kb {
            total += 0.5 * (intensity(k) + intensity(k + 1)) * dt;
        }
        total += 0.5 * (intensity(kb) + ib) * (to - self.time(kb));
        Ok(total)
    }

    /// Sample order reversed within the same window.
    pub fn time_reverse(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self {
            samples,
            ..self.clone()
        }
    }

    /// Same samples on a window starting at `t_start`.
    pub fn shifted_to(&self, t_start: f64) -> Self {
        Self {
            t_start,
            t_end: t_start + self.duration(),
            samples: self.samples.clone(),
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * c).collect(),
            ..self.clone()
        }
    }

    /// Rescale to unit energy.
    pub fn normalize(&self) -> Result<Self> {
        let e = self.energy();
        if e <= 0.0 || !e.is_finite() {
            return Err(Error::Degenerate("cannot normalize a zero-energy pulse"));
        }
        Ok(self.scaled(C64::new(1.0 / e.sqrt(), 0.0)))
    }

    /// Linear interpolation onto `n` samples over `window`; zero outside the
    /// original window.
    pub fn resample(&self, n: usize, window: (f64, f64)) -> Result<Self> {
        if n < 2 {
            return Err(invalid("n", "resampling needs at least two samples"));
        }
        let (a, b) = window;
        if a == self.t_start && b == self.t_end && n == self.samples.len() {
            return Ok(self.clone());
        }
        Self::from_fn(a, b, n, |t| self.value_at(t))
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.samples.len() == other.samples.len()
            && self.t_start == other.t_start
            && self.t_end == other.t_end
    }

    /// `|<a,b>|^2 / (|a|^2 |b|^2)`. Inputs on different grids are resampled
    /// onto the finer spacing over the union of their windows.
    pub fn overlap(a: &Self, b: &Self) -> Result<f64> {
        if a.same_grid(b) {
            return overlap_of(&a.samples, &b.samples, a.dt());
        }
        let dt = a.dt().min(b.dt());
        let lo = a.t_start.min(b.t_start);
        let hi = a.t_end.max(b.t_end);
        let n = (((hi - lo) / dt).round() as usize + 1).max(2);
        let ra = a.resample(n, (lo, hi))?;
        let rb = b.resample(n, (lo, hi))?;
        overlap_of(&ra.samples, &rb.samples, ra.dt())
    }

    /// Overlap after moving `b` onto `a`'s window (compares shapes only).
    pub fn shape_overlap(a: &Self, b: &Self) -> Result<f64> {
        Self::overlap(a, &b.shifted_to(a.t_start))
    }

    /// Time of the intensity maximum, refined by a parabola through the
    /// three samples around the peak.
    pub fn peak_time(&self) -> f64 {
        let (k, _) = self
            .samples
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (k, s)| {
                if s.norm_sqr() > acc.1 {
                    (k, s.norm_sqr())
                } else {
                    acc
                }
            });
        if k == 0 || k + 1 == self.samples.len() {
            return self.time(k);
        }
        let (y0, y1, y2) = (
            self.samples[k - 1].norm_sqr(),
            self.samples[k].norm_sqr(),
            self.samples[k + 1].norm_sqr(),
        );
        let denom = y0 - 2.0 * y1 + y2;
        let shift = if denom.abs() > 0.0 {
            0.5 * (y0 - y2) / denom
        } else {
            0.0
        };
        self.time(k) + shift * self.dt()
    }

    /// Time by which a fraction `q` of the energy has arrived.
    pub fn energy_quantile(&self, q: f64) -> f64 {
        let total = self.energy();
        if total <= 0.0 {
            return self.t_start;
        }
        let dt = self.dt();
        let mut acc = 0.0;
        for k in 0..self.samples.len() - 1 {
            let (i0, i1) = (self.samples[k].norm_sqr(), self.samples[k + 1].norm_sqr());
            let cell = 0.5 * (i0 + i1) * dt;
            if acc + cell >= q * total {
                let f = if cell > 0.0 {
                    (q * total - acc) / cell
                } else {
                    0.0
                };
                return self.time(k) + f * dt;
            }
            acc += cell;
        }
        self.t_end
    }

    pub fn write_csv<W: Write>(&self, writer: W, preamble: Option<&str>) -> Result<()> {
        write_columns(writer, preamble, "t_us", self.times(), &self.samples)
    }

    pub fn save_csv(&self, path: &Path, preamble: Option<&str>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?, preamble)
    }

    /// Parse `t_us,re[,im]` with a header row; lines starting with `#` are
    /// ignored. Times must be uniformly spaced.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let (t, v) = read_columns(reader)?;
        let n = t.len();
        if n < 2 {
            return Err(Error::Format("a pulse needs at least two rows".into()));
        }
        let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
        let uniform = t
            .iter()
            .enumerate()
            .all(|(k, &tk)| (tk - (t[0] + dt * k as f64)).abs() <= 1e-6 * dt.abs().max(1e-12));
        if !uniform {
            return Err(Error::Format("time column is not uniformly spaced".into()));
        }
        Self::new(t[0], t[n - 1], v)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Spin coherence `S(z)` sampled uniformly over `z / L` in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinWave {
    samples: Vec<C64>,
}

impl SpinWave {
    pub fn new(samples: Vec<C64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("samples", "a spin wave needs at least two samples"));
        }
        if samples
            .iter()
            .any(|s| !(s.re.is_finite() && s.im.is_finite()))
        {
            return Err(invalid("samples", "non-finite amplitude"));
        }
        Ok(Self { samples })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![C64::new(0.0, 0.0); n])
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> C64) -> Result<Self> {
        let n = n.max(2);
        let h = 1.0 / (n - 1) as f64;
        Self::new((0..n).map(|j| f(h * j as f64)).collect())
    }

    pub(crate) fn from_vec_unchecked(samples: Vec<C64>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.samples.len() - 1) as f64
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.step();
        (0..self.samples.len()).map(move |j| h * j as f64)
    }

    /// `int |S|^2 dz/L`: the stored excitation in the signal's energy units.
    pub fn energy(&self) -> f64 {
        trapezoid(self.samples.iter().map(|s| s.norm_sqr()), self.step())
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * c).collect(),
        }
    }

    pub fn normalize(&self) -> Result<Self> {
        let e = self.energy();
        if e <= 0.0 || !e.is_finite() {
            return Err(Error::Degenerate("cannot normalize a zero spin wave"));
        }
        Ok(self.scaled(C64::new(1.0 / e.sqrt(), 0.0)))
    }

    /// Global phase chosen so the largest-magnitude sample is real positive.
    pub fn phase_fixed(&self) -> Self {
        let peak = self
            .samples
            .iter()
            .copied()
            .fold(C64::new(0.0, 0.0), |acc, s| {
                if s.norm() > acc.norm() {
                    s
                } else {
                    acc
                }
            });
        if peak.norm() == 0.0 {
            return self.clone();
        }
        self.scaled(peak.conj() / peak.norm())
    }

    pub fn value_at(&self, z: f64) -> C64 {
        if !(0.0..=1.0).contains(&z) {
            return C64::new(0.0, 0.0);
        }
        let x = z / self.step();
        let k = (x.floor() as usize).min(self.samples.len() - 2);
        let f = x - k as f64;
        self.samples[k] * (1.0 - f) + self.samples[k + 1] * f
    }

    pub fn resample(&self, n: usize) -> Result<Self> {
        if n == self.samples.len() {
            return Ok(self.clone());
        }
        Self::from_fn(n, |z| self.value_at(z))
    }

    pub fn overlap(a: &Self, b: &Self) -> Result<f64> {
        if a.len() == b.len() {
            return overlap_of(&a.samples, &b.samples, a.step());
        }
        let n = a.len().max(b.len());
        let (ra, rb) = (a.resample(n)?, b.resample(n)?);
        overlap_of(&ra.samples, &rb.samples, ra.step())
    }

    pub fn write_csv<W: Write>(&self, writer: W, preamble: Option<&str>) -> Result<()> {
        write_columns(writer, preamble, "z_norm", self.positions(), &self.samples)
    }

    pub fn save_csv(&self, path: &Path, preamble: Option<&str>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?, preamble)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let (z, v) = read_columns(reader)?;
        let n = z.len();
        if n < 2 || z[0].abs() > 1e-9 || (z[n - 1] - 1.0).abs() > 1e-9 {
            return Err(Error::Format(
                "spin wave must be sampled over [0, 1]".into(),
            ));
        }
        Self::new(v)
    }
}

fn write_columns<W: Write>(
    mut writer: W,
    preamble: Option<&str>,
    axis: &str,
    coords: impl Iterator<Item = f64>,
    values: &[C64],
) -> Result<()> {
    if let Some(text) = preamble {
        for line in text.lines() {
            writeln!(writer, "# {line}")?;
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([axis, "re", "im"])?;
    for (x, v) in coords.zip(values) {
        w.write_record([x.to_string(), v.re.to_string(), v.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn read_columns<R: Read>(reader: R) -> Result<(Vec<f64>, Vec<C64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let width = rdr.headers()?.len();
    if !(2..=3).contains(&width) {
        return Err(Error::Format(format!(
            "expected 2 or 3 columns, found {width}"
        )));
    }
    let mut axis = Vec::new();
    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("row {}: column {}: {e}", row + 1, i + 1)))
        };
        axis.push(field(0)?);
        let im = if width == 3 { field(2)? } else { 0.0 };
        values.push(C64::new(field(1)?, im));
    }
    Ok((axis, values))
}

/// Built-in real input shapes on a writing window `[-duration, 0]`.
pub mod shapes {
    use std::f64::consts::PI;

    use serde::{Deserialize, Serialize};

    use super::SampledPulse;
    use crate::error::Result;

    /// Gaussian on `[-window_us, 0]` peaking `lead_us` before the window end.
    pub fn trailing_gaussian(
        window_us: f64,
        lead_us: f64,
        sigma_us: f64,
        n: usize,
    ) -> Result<SampledPulse> {
        SampledPulse::from_fn(-window_us, 0.0, n, |t| {
            num_complex::Complex64::new((-0.5 * ((t + lead_us) / sigma_us).powi(2)).exp(), 0.0)
        })
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
    #[serde(rename_all = "snake_case")]
    pub enum Shape {
        Gaussian,
        RoundedStep,
        SincSegment,
        DescendingRamp,
    }

    impl Shape {
        pub const ALL: [Shape; 4] = [
            Shape::Gaussian,
            Shape::RoundedStep,
            Shape::SincSegment,
            Shape::DescendingRamp,
        ];

        pub fn name(self) -> &'static str {
            match self {
                Shape::Gaussian => "gaussian",
                Shape::RoundedStep => "rounded_step",
                Shape::SincSegment => "sinc_segment",
                Shape::DescendingRamp => "descending_ramp",
            }
        }

        /// Profile on the unit interval (0 = leading edge, 1 = t = 0).
        pub fn profile(self, x: f64) -> f64 {
            match self {
                Shape::Gaussian => (-0.5 * ((x - 0.5) / 0.15).powi(2)).exp(),
                Shape::RoundedStep => {
                    if x < 0.3 {
                        0.5 * (1.0 - (PI * x / 0.3).cos())
                    } else {
                        1.0
                    }
                }
                Shape::SincSegment => {
                    let u = -PI + 2.0 * PI * x;
                    if u.abs() < 1e-12 {
                        1.0
                    } else {
                        u.sin() / u
                    }
                }
                Shape::DescendingRamp => 1.0 - x,
            }
        }

        pub fn sample(self, duration_us: f64, n: usize) -> Result<SampledPulse> {
            SampledPulse::from_fn(-duration_us, 0.0, n, |t| {
                num_complex::Complex64::new(self.profile((t + duration_us) / duration_us), 0.0)
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn real(p: &SampledPulse) -> Vec<f64> {
        p.real_parts()
    }

    fn ramp(n: usize, rising: bool) -> SampledPulse {
        SampledPulse::from_fn(0.0, 1.0, n, |t| {
            C64::new(if rising { t } else { 1.0 - t }, 0.0)
        })
        .unwrap()
    }

    #[test]
    fn time_reverse_ramp() {
        let p = SampledPulse::from_real(0.0, 3.0, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        let r = p.time_reverse();
        assert_eq!(real(&r), vec![3.0, 2.0, 1.0, 0.0]);
        assert_eq!(r.window(), (0.0, 3.0));
        assert_eq!(r.time_reverse(), p);
        assert_eq!(r.energy(), p.energy());
    }

    #[test]
    fn symmetric_pulse_is_its_own_reverse() {
        let p = SampledPulse::from_fn(-1.0, 1.0, 101, |t| C64::new((-t * t).exp(), 0.0)).unwrap();
        assert_relative_eq!(
            SampledPulse::overlap(&p, &p.time_reverse()).unwrap(),
            1.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn normalize_examples() {
        let p = SampledPulse::constant(0.0, 1.0, 11, 2.0).unwrap();
        let n = p.normalize().unwrap();
        for s in n.samples() {
            assert_relative_eq!(s.re, 1.0, max_relative = 1e-12);
        }
        let nn = n.normalize().unwrap();
        assert_relative_eq!(nn.energy(), 1.0, max_relative = 1e-12);
        let z = SampledPulse::zeros(0.0, 1.0, 5).unwrap();
        assert!(matches!(z.normalize(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn energy_examples() {
        let p = SampledPulse::constant(0.0, 2.0, 21, 1.0).unwrap();
        assert_relative_eq!(p.energy(), 2.0, max_relative = 1e-12);
        assert_eq!(SampledPulse::zeros(0.0, 2.0, 21).unwrap().energy(), 0.0);
        assert!(p.energy_in(-1.0, 1.0).is_err());
        assert!(p.energy_in(0.5, 2.5).is_err());
        assert!(p.energy_in(1.5, 0.5).is_err());
    }

    #[test]
    fn energy_additive_over_subwindows() {
        let p = SampledPulse::from_fn(0.0, 5.0, 64, |t| C64::new(t.sin(), 0.3 * t)).unwrap();
        let seam = 2.345;
        let total = p.energy_in(0.0, seam).unwrap() + p.energy_in(seam, 5.0).unwrap();
        assert_relative_eq!(total, p.energy(), max_relative = 1e-12);
        assert_relative_eq!(
            p.energy_in(0.0, 5.0).unwrap(),
            p.energy(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn overlap_examples() {
        let p = ramp(201, true);
        assert_relative_eq!(
            SampledPulse::overlap(&p, &p.scaled(C64::new(3.0, 0.0))).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        let a = SampledPulse::constant(0.0, 1.0, 11, 1.0).unwrap();
        let b = SampledPulse::constant(2.0, 3.0, 11, 1.0).unwrap();
        assert_eq!(SampledPulse::overlap(&a, &b).unwrap(), 0.0);
        // <t, 1-t>^2 / (|t|^2 |1-t|^2) = (1/6)^2 / (1/9) = 1/4
        let ov = SampledPulse::overlap(&ramp(2001, true), &ramp(2001, false)).unwrap();
        assert!((ov - 0.25).abs() < 1e-5, "{ov}");
        let z = SampledPulse::zeros(0.0, 1.0, 11).unwrap();
        assert!(SampledPulse::overlap(&a, &z).is_err());
    }

    #[test]
    fn overlap_across_grids() {
        let f = |t: f64| C64::new((-(t - 1.0).powi(2)).exp(), 0.0);
        let fine = SampledPulse::from_fn(-3.0, 5.0, 801, f).unwrap();
        let coarse = SampledPulse::from_fn(-2.0, 4.0, 61, f).unwrap();
        let ov = SampledPulse::overlap(&fine, &coarse).unwrap();
        assert!(ov > 0.999, "{ov}");
    }

    #[test]
    fn resample_examples() {
        let p = SampledPulse::from_fn(0.0, 2.0, 21, |t| C64::new(t * t, -t)).unwrap();
        assert_eq!(p.resample(21, (0.0, 2.0)).unwrap(), p);
        let back = p
            .resample(81, (0.0, 2.0))
            .unwrap()
            .resample(21, (0.0, 2.0))
            .unwrap();
        for (a, b) in back.samples().iter().zip(p.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
        let c = SampledPulse::constant(0.0, 1.0, 5, 0.7).unwrap();
        let r = c.resample(17, (0.1, 0.9)).unwrap();
        assert!(r.samples().iter().all(|s| (s.re - 0.7).abs() < 1e-12));
        let outside = c.resample(5, (2.0, 3.0)).unwrap();
        assert!(outside.samples().iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn peak_time_is_subsample_accurate() {
        let p = SampledPulse::from_fn(0.0, 10.0, 101, |t| {
            C64::new((-(t - 4.337).powi(2)).exp(), 0.0)
        })
        .unwrap();
        assert!((p.peak_time() - 4.337).abs() < 1e-3);
    }

    #[test]
    fn csv_round_trip_and_two_column_input() {
        let p = SampledPulse::from_fn(-2.0, 0.0, 9, |t| C64::new(t, 0.5 * t)).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf, Some("config_hash=abc")).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# config_hash=abc\nt_us,re,im\n"));
        let q = SampledPulse::read_csv(buf.as_slice()).unwrap();
        assert_eq!(q.len(), p.len());
        for (a, b) in q.samples().iter().zip(p.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
        let two = "t_us,re\n0,1\n0.5,2\n1,3\n";
        let r = SampledPulse::read_csv(two.as_bytes()).unwrap();
        assert_eq!(real(&r), vec![1.0, 2.0, 3.0]);
        assert!(SampledPulse::read_csv("t_us,re\n0,1\n0.5,2\n2,3\n".as_bytes()).is_err());
        assert!(SampledPulse::read_csv("t_us,re\n0,x\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn spin_wave_basics() {
        let s = SpinWave::from_fn(129, |z| C64::new(0.0, -z)).unwrap();
        assert_relative_eq!(s.energy(), 1.0 / 3.0, max_relative = 1e-4);
        let fixed = s.phase_fixed();
        let peak = fixed.samples()[128];
        assert!(peak.re > 0.0 && peak.im.abs() < 1e-15);
        assert_relative_eq!(
            SpinWave::overlap(&s, &fixed).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(s.normalize().unwrap().energy(), 1.0, max_relative = 1e-12);
        let coarse = s.resample(33).unwrap();
        assert!(SpinWave::overlap(&s, &coarse).unwrap() > 1.0 - 1e-9);
        let mut buf = Vec::new();
        s.write_csv(&mut buf, None).unwrap();
        assert_eq!(SpinWave::read_csv(buf.as_slice()).unwrap().len(), 129);
    }

    #[test]
    fn shapes_live_on_writing_window() {
        for shape in shapes::Shape::ALL {
            let p = shape.sample(20.0, 201).unwrap();
            assert_eq!(p.window(), (-20.0, 0.0));
            assert!(p.energy() > 0.0, "{}", shape.name());
        }
        let ramp = shapes::Shape::DescendingRamp.sample(10.0, 11).unwrap();
        assert_relative_eq!(ramp.samples()[0].re, 1.0);
        assert!(ramp.samples()[10].re.abs() < 1e-15);
    }
}
