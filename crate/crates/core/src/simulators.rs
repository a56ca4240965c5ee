//! Seeded generators for the synthetic benchmarks.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::dataset::{Curve, Dataset};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("need at least 3 curves, got {0}")]
    TooFewCurves(usize),
    #[error("unknown scenario `{0}` (expected three_class or waveform)")]
    UnknownScenario(String),
    #[error("invalid simulation setting: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    ThreeClass,
    Waveform,
}

impl FromStr for Scenario {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "three_class" | "three-class" | "three_class_nonlinear" => Ok(Self::ThreeClass),
            "waveform" => Ok(Self::Waveform),
            _ => Err(SimError::UnknownScenario(s.to_string())),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ThreeClass => "three_class",
            Self::Waveform => "waveform",
        })
    }
}

/// How curve labels are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassSampling {
    /// `n·π` rounded by largest remainder, then shuffled.
    #[default]
    ExactCounts,
    /// Independent draws from the class probabilities.
    Multinomial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub seed: u64,
    /// Overrides the scenario's noise standard deviation.
    pub noise_sd: Option<f64>,
    /// Waveform only: use this mixing weight for every curve.
    pub fixed_u: Option<f64>,
    pub class_sampling: ClassSampling,
}

impl SimSpec {
    pub fn new(scenario: Scenario, n: usize, seed: u64) -> Self {
        Self {
            scenario,
            n,
            seed,
            noise_sd: None,
            fixed_u: None,
            class_sampling: ClassSampling::default(),
        }
    }
}

impl Scenario {
    pub fn proportions(self) -> Vec<f64> {
        match self {
            Self::ThreeClass => vec![0.4, 0.3, 0.3],
            Self::Waveform => vec![1.0 / 3.0; 3],
        }
    }

    pub fn noise_sd(self) -> f64 {
        match self {
            Self::ThreeClass => 0.1,
            Self::Waveform => 1.0,
        }
    }

    pub fn grid(self) -> Vec<f64> {
        match self {
            Self::ThreeClass => (0..50).map(|j| j as f64 / 49.0).collect(),
            Self::Waveform => (1..=21).map(f64::from).collect(),
        }
    }

    /// Class mean functions on `grid`. For the waveform the mean is taken
    /// over the mixing weight, i.e. the midpoint of the two base waves.
    pub fn true_means(self, grid: &[f64]) -> Vec<Vec<f64>> {
        (0..3)
            .map(|c| match self {
                Self::ThreeClass => grid.iter().map(|&x| three_class_mean(c, x)).collect(),
                Self::Waveform => grid.iter().map(|&t| waveform_curve(c, 0.5, t)).collect(),
            })
            .collect()
    }
}

/// Mean function of class `class` (0-based) of the three-class scenario.
pub fn three_class_mean(class: usize, x: f64) -> f64 {
    match class {
        0 => 0.8 + 0.5 * (-1.5 * x).exp() * (1.3 * PI * x).sin(),
        1 => 0.5 + 0.8 * (-x).exp() * (0.9 * PI * x).sin(),
        2 => 1.0 + 0.5 * (-x).exp() * (1.2 * PI * x).sin(),
        _ => panic!("three-class scenario has classes 0..3, got {class}"),
    }
}

/// Triangular base waves: `h1(t) = max(6 − |t − 11|, 0)`, `h2(t) = h1(t − 4)`,
/// `h3(t) = h1(t + 4)`; `which` is 1, 2 or 3.
pub fn waveform_h(which: usize, t: f64) -> f64 {
    let shift = match which {
        1 => 0.0,
        2 => 4.0,
        3 => -4.0,
        _ => panic!("base waves are numbered 1..=3, got {which}"),
    };
    (6.0 - (t - shift - 11.0).abs()).max(0.0)
}

/// Noise-free waveform of class `class` (0-based) with mixing weight `u`.
pub fn waveform_curve(class: usize, u: f64, t: f64) -> f64 {
    let (a, b) = match class {
        0 => (1, 2),
        1 => (2, 3),
        2 => (1, 3),
        _ => panic!("waveform scenario has classes 0..3, got {class}"),
    };
    u * waveform_h(a, t) + (1.0 - u) * waveform_h(b, t)
}

fn exact_counts(n: usize, pi: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = pi.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..pi.len()).collect();
    // stable sort keeps ties in class order
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())));
    let missing = n - counts.iter().sum::<usize>();
    for &c in order.iter().take(missing) {
        counts[c] += 1;
    }
    counts
}

fn draw_labels(n: usize, pi: &[f64], sampling: ClassSampling, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match sampling {
        ClassSampling::ExactCounts => {
            let mut labels: Vec<usize> = exact_counts(n, pi)
                .into_iter()
                .enumerate()
                .flat_map(|(c, k)| std::iter::repeat_n(c, k))
                .collect();
            labels.shuffle(rng);
            labels
        }
        ClassSampling::Multinomial => (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (c, p) in pi.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return c;
                    }
                }
                pi.len() - 1
            })
            .collect(),
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Labelled dataset for `spec`. Labels use stream 0 of the seed, curve `i`
/// uses stream `i + 1`.
pub fn generate(spec: &SimSpec) -> Result<Dataset, SimError> {
    if spec.n < 3 {
        return Err(SimError::TooFewCurves(spec.n));
    }
    let sd = spec.noise_sd.unwrap_or(spec.scenario.noise_sd());
    if !(sd >= 0.0) {
        return Err(SimError::Invalid(format!("noise sd {sd}")));
    }
    if let Some(u) = spec.fixed_u {
        if !(0.0..=1.0).contains(&u) {
            return Err(SimError::Invalid(format!("mixing weight {u}")));
        }
    }
    let grid = spec.scenario.grid();
    let labels = draw_labels(
        spec.n,
        &spec.scenario.proportions(),
        spec.class_sampling,
        &mut stream(spec.seed, 0),
    );
    let curves = labels
        .iter()
        .enumerate()
        .map(|(i, &class)| {
            let mut rng = stream(spec.seed, i as u64 + 1);
            let y = match spec.scenario {
                Scenario::ThreeClass => grid.iter().map(|&x| three_class_mean(class, x)).collect::<Vec<_>>(),
                Scenario::Waveform => {
                    let u = spec.fixed_u.unwrap_or_else(|| rng.random::<f64>());
                    grid.iter().map(|&t| waveform_curve(class, u, t)).collect()
                }
            };
            let y = y
                .into_iter()
                .map(|v| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    v + sd * e
                })
                .collect();
            Curve::new(grid.clone(), y)
        })
        .collect();
    Ok(Dataset::new(curves, Some(labels)).expect("generated curves are valid"))
}

pub fn gen_three_class(n: usize, seed: u64) -> Result<Dataset, SimError> {
    generate(&SimSpec::new(Scenario::ThreeClass, n, seed))
}

pub fn gen_waveform(n: usize, seed: u64) -> Result<Dataset, SimError> {
    generate(&SimSpec::new(Scenario::Waveform, n, seed))
}
