use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::map_model::{Observable, PiecewiseMap};
use crate::numeric::compensated_sum;
use crate::par;

/// Law of the initial points before burn-in.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    Lebesgue,
    /// Piecewise constant density on equal grid cells (e.g. an Ulam density).
    Grid(Vec<f64>),
}

/// `N` orbits of length `n` after `burn_in` steps, seeded per orbit.
///
/// Orbit `i` draws from ChaCha8 seeded by `seed` on stream `i`, so every
/// orbit is a fixed function of `(seed, i)` whatever the thread layout.
#[derive(Debug, Clone)]
pub struct OrbitEnsemble {
    pub map: PiecewiseMap,
    pub n_orbits: usize,
    pub horizon: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub law: InitialLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sampler {
    /// Iterate the map in floating point.
    Iterate,
    /// `2x mod 1` as a shift on fresh random binary digits; exact in law,
    /// unlike floating point iteration which reaches `0` in 53 steps.
    BinaryShift,
}

const DEFAULT_BURN_IN: usize = 1_000;

impl OrbitEnsemble {
    pub fn new(map: PiecewiseMap, n_orbits: usize, horizon: usize, seed: u64) -> Self {
        Self { map, n_orbits, horizon, burn_in: DEFAULT_BURN_IN, seed, law: InitialLaw::Lebesgue }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_law(mut self, law: InitialLaw) -> Self {
        self.law = law;
        self
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self { horizon, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_orbits == 0 || self.horizon == 0 {
            return Err(Error::InvalidParameter("ensemble needs at least one orbit of positive length".into()));
        }
        if let InitialLaw::Grid(w) = &self.law {
            if w.is_empty() || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidParameter(
                    "grid law needs finite nonnegative weights with positive mass".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn sampler(&self) -> Sampler {
        if self.map.is_binary_shift() && self.law == InitialLaw::Lebesgue {
            Sampler::BinaryShift
        } else {
            Sampler::Iterate
        }
    }

    pub fn rng(&self, i: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        rng
    }

    /// The points of orbit `i` after burn-in, as an endless iterator.
    pub fn orbit(&self, i: usize) -> Orbit<'_> {
        let mut rng = self.rng(i);
        let mut orbit = match self.sampler() {
            Sampler::BinaryShift => {
                let window = rng.next_u64();
                Orbit::Shift { rng, window, buffer: 0, left: 0 }
            }
            Sampler::Iterate => {
                let x = match &self.law {
                    InitialLaw::Lebesgue => rng.random::<f64>(),
                    InitialLaw::Grid(w) => sample_grid(w, &mut rng),
                };
                Orbit::Map { map: &self.map, x }
            }
        };
        for _ in 0..self.burn_in {
            orbit.next();
        }
        orbit
    }

    /// `f(i, orbit_i)` for every orbit, in index order.
    pub fn map_orbits<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, Orbit<'_>) -> T + Sync + Send,
    {
        par::map_range(self.n_orbits, |i| f(i, self.orbit(i)))
    }

    /// Space-time average of `φ` over the ensemble.
    pub fn mean(&self, phi: &Observable) -> f64 {
        let n = self.horizon;
        let per: Vec<f64> = self.map_orbits(|_, orbit| compensated_sum(orbit.take(n).map(|x| phi.eval(x))) / n as f64);
        compensated_sum(per.iter().copied()) / per.len() as f64
    }
}

fn sample_grid(w: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let total: f64 = w.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut bin = w.len() - 1;
    for (i, x) in w.iter().enumerate() {
        acc += x;
        if acc > target {
            bin = i;
            break;
        }
    }
    (bin as f64 + rng.random::<f64>()) / w.len() as f64
}

// Orbits live on the stack one at a time, so the large RNG variant is fine.
#[allow(clippy::large_enum_variant)]
pub enum Orbit<'a> {
    Map {
        map: &'a PiecewiseMap,
        x: f64,
    },
    /// Binary digits `window` are the next 64 digits of the point.
    Shift {
        rng: ChaCha8Rng,
        window: u64,
        buffer: u64,
        left: u32,
    },
}

impl Iterator for Orbit<'_> {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        match self {
            Orbit::Map { map, x } => {
                let out = *x;
                *x = map.step(out).clamp(0.0, 1.0);
                Some(out)
            }
            Orbit::Shift { rng, window, buffer, left } => {
                // Midpoint of the dyadic interval fixed by the top 53 digits.
                let out = ((*window >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
                if *left == 0 {
                    *buffer = rng.next_u64();
                    *left = 64;
                }
                *window = (*window << 1) | (*buffer >> 63);
                *buffer <<= 1;
                *left -= 1;
                Some(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::{builtin_map, BuiltinParams};

    fn map(name: &str) -> PiecewiseMap {
        builtin_map(name, &BuiltinParams::default()).unwrap()
    }

    #[test]
    fn shift_sampler_follows_the_doubling_map() {
        let ens = OrbitEnsemble::new(map("doubling"), 4, 100, 3);
        assert_eq!(ens.sampler(), Sampler::BinaryShift);
        let pts: Vec<f64> = ens.orbit(2).take(200).collect();
        for w in pts.windows(2) {
            // Both points are dyadic midpoints at resolution 2^-53.
            let image = (2.0 * w[0]) % 1.0;
            assert!((image - w[1]).abs() <= 2f64.powi(-52), "{} {}", image, w[1]);
        }
        assert!(pts.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn orbits_depend_only_on_seed_and_index() {
        let ens = OrbitEnsemble::new(map("ulam"), 8, 50, 42).with_burn_in(10);
        let a: Vec<Vec<f64>> = ens.map_orbits(|_, o| o.take(50).collect());
        let b: Vec<f64> = ens.orbit(5).take(50).collect();
        assert_eq!(a[5], b);
        assert_ne!(a[4], a[5]);
        let other = OrbitEnsemble { seed: 43, ..ens.clone() };
        assert_ne!(other.orbit(5).next(), ens.orbit(5).next());
    }

    #[test]
    fn grid_law_respects_weights() {
        let ens = OrbitEnsemble::new(map("ulam"), 4000, 1, 1)
            .with_burn_in(0)
            .with_law(InitialLaw::Grid(vec![0.0, 3.0, 1.0, 0.0]));
        let xs: Vec<f64> = ens.map_orbits(|_, mut o| o.next().unwrap());
        assert!(xs.iter().all(|&x| (0.25..0.75).contains(&x)));
        let share = xs.iter().filter(|&&x| x < 0.5).count() as f64 / xs.len() as f64;
        assert!((share - 0.75).abs() < 0.03, "{share}");
        assert!(OrbitEnsemble::new(map("ulam"), 1, 1, 0).with_law(InitialLaw::Grid(vec![0.0])).validate().is_err());
    }

    #[test]
    fn lebesgue_is_invariant_for_the_shift_sampler() {
        let ens = OrbitEnsemble::new(map("doubling"), 2000, 200, 9);
        let m = ens.mean(&Observable::parse("x").unwrap());
        assert!((m - 0.5).abs() < 3e-3, "{m}");
    }
}
