//! Sample models and their complex frequency response `H(omega)`.

mod dispersion;
mod material;

pub use dispersion::{broadening_factors, DispersionReport};
pub use material::{sellmeier_dn_domega, sellmeier_index, Material};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{mirror_to_delay, SPEED_OF_LIGHT};

/// A single reflecting layer, `H = r exp(i omega T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleLayer {
    /// Real reflection amplitude.
    pub r: f64,
    /// Delay `T = n d / c` (s).
    pub delay: f64,
}

impl SingleLayer {
    pub fn new(r: f64, delay: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::invalid("r", format!("must lie in [0, 1], got {r}")));
        }
        if !delay.is_finite() {
            return Err(Error::invalid("delay", "must be finite"));
        }
        Ok(Self { r, delay })
    }

    /// Perfect mirror at delay `delay`.
    pub fn mirror(delay: f64) -> Self {
        Self { r: 1.0, delay }
    }

    pub fn reflectivity(&self) -> f64 {
        self.r * self.r
    }
}

/// How the refractive index of a slab depends on frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndexModel {
    /// First-order expansion `n0 + n'(omega - omega_ref)` about
    /// `reference_omega`; the dispersion content the broadening formulas
    /// are built on.
    Linearized { reference_omega: f64 },
    /// Full Sellmeier index at every frequency.
    Sellmeier,
}

/// Mirror behind a dispersive window traversed `passes` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersiveSlab {
    /// Geometric thickness (m).
    pub thickness: f64,
    pub material: Material,
    /// Reflection amplitude of the backing mirror.
    pub r: f64,
    pub passes: u32,
    /// Extra vacuum delay in front of the slab (s).
    #[serde(default)]
    pub offset: f64,
    pub index_model: IndexModel,
}

impl DispersiveSlab {
    /// Double-pass slab linearised about `reference_omega`.
    pub fn new(material: Material, thickness: f64, r: f64, reference_omega: f64) -> Result<Self> {
        if !(thickness >= 0.0 && thickness.is_finite()) {
            return Err(Error::invalid("thickness", format!("must be >= 0, got {thickness}")));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::invalid("r", format!("must lie in [0, 1], got {r}")));
        }
        if !(reference_omega > 0.0) {
            return Err(Error::NonPositiveFrequency(reference_omega));
        }
        material.index(reference_omega)?;
        Ok(Self {
            thickness,
            material,
            r,
            passes: 2,
            offset: 0.0,
            index_model: IndexModel::Linearized { reference_omega },
        })
    }

    fn index(&self, omega: f64) -> Result<f64> {
        match self.index_model {
            IndexModel::Sellmeier => self.material.index(omega),
            IndexModel::Linearized { reference_omega } => {
                let n0 = self.material.index(reference_omega)?;
                let dn = self.material.dn_domega(reference_omega)?;
                Ok(n0 + dn * (omega - reference_omega))
            }
        }
    }

    fn path(&self) -> f64 {
        self.passes as f64 * self.thickness
    }

    /// Phase `passes omega n(omega) thickness / c + omega offset`.
    pub fn phase(&self, omega: f64) -> Result<f64> {
        Ok(omega * (self.index(omega)? * self.path() / SPEED_OF_LIGHT + self.offset))
    }

    /// Group delay `d phase / d omega` (s), analytic for the linearised model.
    pub fn group_delay(&self, omega: f64) -> Result<f64> {
        let l = self.path() / SPEED_OF_LIGHT;
        let dn = match self.index_model {
            IndexModel::Sellmeier => self.material.dn_domega(omega)?,
            IndexModel::Linearized { reference_omega } => self.material.dn_domega(reference_omega)?,
        };
        Ok(self.offset + l * (self.index(omega)? + omega * dn))
    }
}

/// Two parallel interfaces separated by an air gap.
///
/// `H = exp(i omega tau_1) [r1 + sum_{k=1..K} t1^2 r2 (r1' r2)^(k-1) exp(i omega k tau_d)]`
/// with `r1' = -r1` the reflection seen from inside the gap, `tau_1 = 2 x1 / c`
/// and `tau_d = 2 gap / c`, so positions and the gap are measured on the
/// reference-mirror axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSample {
    pub r1: f64,
    pub r2: f64,
    pub t1: f64,
    /// Gap width (m).
    pub gap: f64,
    /// First-interface position on the mirror axis (m).
    pub x1: f64,
    pub echo_count: usize,
}

impl GapSample {
    pub fn new(r1: f64, r2: f64, t1: f64, gap: f64, x1: f64, echo_count: usize) -> Result<Self> {
        for (name, v) in [("r1", r1), ("r2", r2), ("t1", t1)] {
            if !(v.abs() <= 1.0) {
                return Err(Error::invalid(name, format!("|{name}| must be <= 1, got {v}")));
            }
        }
        if r1 * r1 + t1 * t1 > 1.0 + 1e-12 {
            return Err(Error::invalid("t1", "energy bound r1^2 + t1^2 <= 1 violated"));
        }
        if !(gap >= 0.0 && gap.is_finite() && x1.is_finite()) {
            return Err(Error::invalid("gap", "gap must be >= 0 and positions finite"));
        }
        let sample = Self {
            r1,
            r2,
            t1,
            gap,
            x1,
            echo_count,
        };
        let peak = sample.peak_magnitude();
        if peak > 1.0 + 1e-12 {
            return Err(Error::invalid(
                "echo_count",
                format!("series truncated after {echo_count} echoes reaches |H| = {peak:.6} > 1"),
            ));
        }
        Ok(sample)
    }

    fn series_magnitude(&self, phase: f64) -> f64 {
        let step = Complex64::from_polar(1.0, phase);
        let mut carrier = Complex64::new(1.0, 0.0);
        let mut h = Complex64::new(self.r1, 0.0);
        for k in 1..=self.echo_count {
            carrier *= step;
            h += self.term(k) * carrier;
        }
        h.norm()
    }

    /// Maximum of `|H|` over the round-trip phase of the gap. A truncated
    /// series is not automatically passive, so the constructor checks this.
    pub fn peak_magnitude(&self) -> f64 {
        use std::f64::consts::PI;
        const GRID: usize = 2048;
        let step = 2.0 * PI / GRID as f64;
        let values: Vec<f64> = (0..GRID).map(|i| self.series_magnitude(i as f64 * step)).collect();
        let mut best = values.iter().cloned().fold(0.0, f64::max);
        for i in 0..GRID {
            let (l, c, r) = (values[(i + GRID - 1) % GRID], values[i], values[(i + 1) % GRID]);
            if c >= l && c >= r {
                // golden-section refinement of the local maximum
                let (mut a, mut b) = ((i as f64 - 1.0) * step, (i as f64 + 1.0) * step);
                let g = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..80 {
                    let x1 = b - g * (b - a);
                    let x2 = a + g * (b - a);
                    if self.series_magnitude(x1) > self.series_magnitude(x2) {
                        b = x2;
                    } else {
                        a = x1;
                    }
                }
                best = best.max(self.series_magnitude(0.5 * (a + b)));
            }
        }
        best
    }

    /// Lossless interface pair described by its two reflectivities (amplitudes).
    pub fn lossless(r1: f64, r2: f64, gap: f64, x1: f64) -> Result<Self> {
        Self::new(r1, r2, (1.0 - r1 * r1).max(0.0).sqrt(), gap, x1, 4)
    }

    pub fn first_delay(&self) -> f64 {
        mirror_to_delay(self.x1)
    }

    pub fn echo_delay(&self) -> f64 {
        mirror_to_delay(self.gap)
    }

    /// Complex amplitude of the `k`-th term of the ray series (k = 0 is the
    /// direct reflection from the first interface).
    pub fn term(&self, k: usize) -> f64 {
        if k == 0 {
            self.r1
        } else {
            self.t1 * self.t1 * self.r2 * (-self.r1 * self.r2).powi(k as i32 - 1)
        }
    }
}

/// Any supported sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Sample {
    Layer(SingleLayer),
    Slab(DispersiveSlab),
    Gap(GapSample),
}

impl From<SingleLayer> for Sample {
    fn from(v: SingleLayer) -> Self {
        Sample::Layer(v)
    }
}

impl From<DispersiveSlab> for Sample {
    fn from(v: DispersiveSlab) -> Self {
        Sample::Slab(v)
    }
}

impl From<GapSample> for Sample {
    fn from(v: GapSample) -> Self {
        Sample::Gap(v)
    }
}

impl Sample {
    /// `H(omega)`; rejects non-positive frequencies.
    pub fn respond(&self, omega: f64) -> Result<Complex64> {
        if !(omega > 0.0) {
            return Err(Error::NonPositiveFrequency(omega));
        }
        Ok(match self {
            Sample::Layer(l) => Complex64::from_polar(l.r, omega * l.delay),
            Sample::Slab(s) => Complex64::from_polar(s.r, s.phase(omega)?),
            Sample::Gap(g) => {
                let step = Complex64::from_polar(1.0, omega * g.echo_delay());
                let mut h = Complex64::new(g.r1, 0.0);
                let mut carrier = Complex64::new(1.0, 0.0);
                for k in 1..=g.echo_count {
                    carrier *= step;
                    h += g.term(k) * carrier;
                }
                h * Complex64::from_polar(1.0, omega * g.first_delay())
            }
        })
    }

    /// Range of delays (s) over which the sample returns light for
    /// frequencies in `[omega_lo, omega_hi]`.
    pub fn delay_extent(&self, omega_lo: f64, omega_hi: f64) -> Result<(f64, f64)> {
        Ok(match self {
            Sample::Layer(l) => (l.delay, l.delay),
            Sample::Slab(s) => {
                let a = s.group_delay(omega_lo)?;
                let b = s.group_delay(omega_hi)?;
                let c = s.group_delay(0.5 * (omega_lo + omega_hi))?;
                (a.min(b).min(c), a.max(b).max(c))
            }
            Sample::Gap(g) => {
                let t0 = g.first_delay();
                let t1 = t0 + g.echo_count as f64 * g.echo_delay();
                (t0.min(t1), t0.max(t1))
            }
        })
    }

    /// Delay of the first (or only) reflection at `omega`.
    pub fn nominal_delay(&self, omega: f64) -> Result<f64> {
        Ok(match self {
            Sample::Layer(l) => l.delay,
            Sample::Slab(s) => s.group_delay(omega)?,
            Sample::Gap(g) => g.first_delay(),
        })
    }
}
