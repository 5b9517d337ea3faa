//! Least-squares fit of a line cut against the instrument forward model.
//!
//! The free physical parameters are mapped onto the unit box and searched by
//! the bounded simplex. Amplitude and baseline enter linearly and are solved
//! in closed form at every evaluation.

use rayon::prelude::*;

use super::simplex::{minimize, SimplexOptions};
use super::{integrate_boxes, LineCut};
use crate::beam::divergence_angle;
use crate::error::{domain, Error, Result};
use crate::instrument::{simulate, InstrumentModel, View};
use crate::rng::{streams, Philox4x32};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameter {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub free: bool,
}

impl Parameter {
    pub fn fixed(value: f64) -> Self {
        Self {
            value,
            lower: value,
            upper: value,
            free: false,
        }
    }

    pub fn free(value: f64, lower: f64, upper: f64) -> Self {
        Self {
            value,
            lower,
            upper,
            free: true,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.lower <= self.value && self.value <= self.upper) || !self.value.is_finite() {
            return Err(domain(format!(
                "{name} = {} lies outside [{}, {}]",
                self.value, self.lower, self.upper
            )));
        }
        if self.free && !(self.upper > self.lower) {
            return Err(domain(format!("free parameter {name} needs lower < upper")));
        }
        Ok(())
    }

    fn to_unit(&self, v: f64) -> f64 {
        (v - self.lower) / (self.upper - self.lower)
    }

    fn from_unit(&self, u: f64) -> f64 {
        self.lower + u * (self.upper - self.lower)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Uniform,
    /// variance = counts, floored at one
    Poisson,
}

impl Weighting {
    pub fn as_str(self) -> &'static str {
        match self {
            Weighting::Uniform => "uniform",
            Weighting::Poisson => "poisson",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "uniform" => Some(Weighting::Uniform),
            "poisson" => Some(Weighting::Poisson),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitModel {
    /// effective transmitting width per period, m
    pub open_width: Parameter,
    pub fractional_fwhm: Parameter,
    /// one per template composition entry, same order; renormalised before use
    pub species_weights: Vec<Parameter>,
    /// baseline upper bound as a fraction of the data maximum
    pub baseline_fraction_max: f64,
    pub weighting: Weighting,
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl FitModel {
    /// Everything fixed at the template's values, width bounded by the period.
    pub fn for_template(template: &InstrumentModel) -> Self {
        let period = template.spec.period;
        let width = template.spec.open_width() - 2.0 * template.erosion_margin;
        let open_width = Parameter {
            value: width,
            lower: 0.05 * period,
            upper: 0.95 * period,
            free: false,
        };
        let fractional_fwhm = Parameter {
            value: template.beam.fractional_fwhm,
            lower: 0.0,
            upper: 0.2,
            free: false,
        };
        let species_weights = template
            .beam
            .normalized_composition()
            .iter()
            .map(|(_, w)| Parameter {
                value: *w,
                lower: 0.0,
                upper: 1.0,
                free: false,
            })
            .collect();
        Self {
            open_width,
            fractional_fwhm,
            species_weights,
            baseline_fraction_max: 0.05,
            weighting: Weighting::Uniform,
            restarts: 3,
            max_iterations: 500,
            tolerance: 1e-8,
            seed: 0,
        }
    }

    fn validate(&self, template: &InstrumentModel) -> Result<()> {
        self.open_width.validate("open_width")?;
        if !(self.open_width.lower > 0.0 && self.open_width.upper < template.spec.period) {
            return Err(domain("open width bounds must lie inside (0, period)"));
        }
        self.fractional_fwhm.validate("fractional_fwhm")?;
        if !(self.fractional_fwhm.lower >= 0.0 && self.fractional_fwhm.upper < 1.0) {
            return Err(domain("fractional FWHM bounds must lie inside [0, 1)"));
        }
        if self.species_weights.len() != template.beam.composition.len() {
            return Err(domain(format!(
                "{} species weights for {} species",
                self.species_weights.len(),
                template.beam.composition.len()
            )));
        }
        for (i, p) in self.species_weights.iter().enumerate() {
            p.validate(&format!("species_weights[{i}]"))?;
            if p.lower < 0.0 {
                return Err(domain("species weights must be non-negative"));
            }
        }
        if !(self.baseline_fraction_max >= 0.0) {
            return Err(domain("baseline bound must be non-negative"));
        }
        if !(self.tolerance > 0.0) {
            return Err(domain("tolerance must be positive"));
        }
        Ok(())
    }

    fn parameters(&self) -> Vec<&Parameter> {
        let mut all = vec![&self.open_width, &self.fractional_fwhm];
        all.extend(self.species_weights.iter());
        all
    }

    fn free_count(&self) -> usize {
        self.parameters().iter().filter(|p| p.free).count()
    }

    fn start_point(&self) -> Vec<f64> {
        self.parameters()
            .iter()
            .filter(|p| p.free)
            .map(|p| p.to_unit(p.value))
            .collect()
    }

    /// Physical values `[width, fwhm, weights…]` for a point of the unit box.
    fn expand(&self, u: &[f64]) -> Vec<f64> {
        let mut free = u.iter();
        self.parameters()
            .iter()
            .map(|p| if p.free { p.from_unit(*free.next().unwrap()) } else { p.value })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitValues {
    pub open_width: f64,
    pub fractional_fwhm: f64,
    pub species_weights: Vec<f64>,
    pub amplitude: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub values: FitValues,
    /// weighted residual sum of squares at `values`
    pub residual: f64,
    pub initial_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// best residual so far, starting with the initial one
    pub history: Vec<f64>,
    /// `amplitude·simulated + baseline` at the data positions
    pub model_cut: LineCut,
}

/// Output window needed to simulate `data` without wrap-around from the blur.
fn view_for(data: &LineCut, template: &InstrumentModel) -> Result<View> {
    let divergence = divergence_angle(&template.geometry)?;
    let reach_x = data
        .positions
        .iter()
        .fold(0.0f64, |m, p| m.max(p.abs()))
        + data.box_width / 2.0;
    let reach_y = data.center_y.abs() + data.box_height / 2.0;
    let margin = divergence + 2.0 * data.box_width;
    Ok(View {
        half_width: reach_x + margin,
        half_height: reach_y + margin,
    })
}

/// Simulated line cut at `data`'s box positions, before amplitude and baseline.
pub fn forward_cut(
    template: &InstrumentModel,
    open_width: f64,
    fractional_fwhm: f64,
    species_weights: &[f64],
    data: &LineCut,
) -> Result<Vec<f64>> {
    if species_weights.len() != template.beam.composition.len() {
        return Err(domain("species weights do not match the template composition"));
    }
    let mut model = template.clone();
    model.erosion_margin = (template.spec.open_width() - open_width) / 2.0;
    model.beam.fractional_fwhm = fractional_fwhm;
    for ((_, w), &v) in model.beam.composition.iter_mut().zip(species_weights) {
        *w = v;
    }
    let view = view_for(data, template)?;
    model.view = Some(view);
    let map = simulate(&model)?;
    let g = map.grid();
    let (x0, x1) = g.span_x();
    let (y0, y1) = g.span_y();
    if x0 > -view.half_width + g.pitch || x1 < view.half_width - g.pitch || y0 > -view.half_height + g.pitch || y1 < view.half_height - g.pitch {
        return Err(Error::OutOfBounds(format!(
            "line cut needs ±{:.1} urad but the far field spans ±{:.1} urad",
            view.half_width * 1e6,
            x1 * 1e6
        )));
    }
    Ok(integrate_boxes(&map, &data.positions, data.center_y, data.box_width, data.box_height))
}

struct Profiled {
    amplitude: f64,
    baseline: f64,
    residual: f64,
}

/// Minimises Σ w (d − A·s − b)² over A ≥ 0, 0 ≤ b ≤ b_max.
fn profile(data: &[f64], sim: &[f64], weights: &[f64], b_max: f64) -> Profiled {
    let sse = |a: f64, b: f64| -> f64 {
        data.iter()
            .zip(sim)
            .zip(weights)
            .map(|((d, s), w)| w * (d - a * s - b).powi(2))
            .sum()
    };
    let (mut sw, mut ss, mut sd, mut sss, mut ssd) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((d, s), w) in data.iter().zip(sim).zip(weights) {
        sw += w;
        ss += w * s;
        sd += w * d;
        sss += w * s * s;
        ssd += w * s * d;
    }
    let amp_for = |b: f64| if sss > 0.0 { ((ssd - b * ss) / sss).max(0.0) } else { 0.0 };
    let mut candidates = vec![(amp_for(0.0), 0.0), (amp_for(b_max), b_max), (0.0, (sd / sw).clamp(0.0, b_max))];
    let det = sw * sss - ss * ss;
    if det > 1e-12 * sw * sss {
        let a = (sw * ssd - ss * sd) / det;
        let b = (sd - a * ss) / sw;
        if a >= 0.0 && (0.0..=b_max).contains(&b) {
            candidates.push((a, b));
        }
    }
    candidates
        .into_iter()
        .map(|(a, b)| Profiled {
            amplitude: a,
            baseline: b,
            residual: sse(a, b),
        })
        .min_by(|x, y| x.residual.total_cmp(&y.residual))
        .unwrap()
}

pub fn fit_profile(data: &LineCut, model: &FitModel, template: &InstrumentModel) -> Result<FitResult> {
    template.validate()?;
    model.validate(template)?;
    if data.is_empty() {
        return Err(domain("empty line cut"));
    }
    if data.values.iter().any(|v| !v.is_finite()) {
        return Err(domain("line cut contains non-finite values"));
    }
    let weights: Vec<f64> = match model.weighting {
        Weighting::Uniform => vec![1.0; data.len()],
        Weighting::Poisson => data.values.iter().map(|d| 1.0 / d.max(1.0)).collect(),
    };
    let b_max = model.baseline_fraction_max * data.max();
    let n_species = template.beam.composition.len();

    let evaluate = |params: &[f64]| -> Result<(Vec<f64>, Profiled)> {
        let weights_s = &params[2..2 + n_species];
        if weights_s.iter().sum::<f64>() <= 0.0 {
            // all species switched off: nothing reaches the detector
            let sim = vec![0.0; data.len()];
            let p = profile(&data.values, &sim, &weights, b_max);
            return Ok((sim, p));
        }
        let sim = forward_cut(template, params[0], params[1], weights_s, data)?;
        let p = profile(&data.values, &sim, &weights, b_max);
        Ok((sim, p))
    };
    let objective = |u: &[f64]| -> Result<f64> {
        let params = model.expand(u);
        let (_, p) = evaluate(&params)?;
        if p.residual.is_finite() {
            Ok(p.residual)
        } else {
            Err(Error::NonFiniteResidual(params))
        }
    };

    let start = model.start_point();
    let initial_residual = objective(&start)?;
    let mut history = vec![initial_residual];
    let (best_u, iterations, converged) = if model.free_count() == 0 {
        (start, 0, true)
    } else {
        let scale: f64 = data
            .values
            .iter()
            .zip(&weights)
            .map(|(d, w)| w * d * d)
            .sum();
        let opts = SimplexOptions {
            max_iterations: model.max_iterations,
            tolerance: model.tolerance,
            absolute_floor: 1e-14 * scale.max(f64::MIN_POSITIVE),
            initial_step: 0.1,
        };
        let rng = Philox4x32::new(model.seed);
        let mut starts = vec![start.clone()];
        for r in 0..model.restarts {
            let mut seq_index = (r * start.len()) as u64;
            let point = (0..start.len())
                .map(|_| {
                    let b = rng.draw(streams::RESTARTS, seq_index);
                    seq_index += 1;
                    crate::rng::unit_f64(b[0], b[1])
                })
                .collect();
            starts.push(point);
        }
        let runs: Vec<_> = starts
            .par_iter()
            .map(|s| minimize(&objective, s, &opts))
            .collect::<Result<Vec<_>>>()?;
        let mut running = initial_residual;
        for run in &runs {
            for &v in &run.history {
                running = running.min(v);
                history.push(running);
            }
        }
        // first best wins ties, so the result does not depend on scheduling
        let best = runs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .unwrap();
        let iterations = runs.iter().map(|r| r.iterations).sum();
        let run = &runs[best];
        if run.value > initial_residual {
            (start, iterations, run.converged)
        } else {
            (run.point.clone(), iterations, run.converged)
        }
    };

    let params = model.expand(&best_u);
    let (sim, p) = evaluate(&params)?;
    let total_weight: f64 = params[2..].iter().sum();
    let species_weights = params[2..]
        .iter()
        .map(|w| if total_weight > 0.0 { w / total_weight } else { 0.0 })
        .collect();
    let model_cut = LineCut {
        values: sim.iter().map(|s| p.amplitude * s + p.baseline).collect(),
        ..data.clone()
    };
    Ok(FitResult {
        values: FitValues {
            open_width: params[0],
            fractional_fwhm: params[1],
            species_weights,
            amplitude: p.amplitude,
            baseline: p.baseline,
        },
        residual: p.residual,
        initial_residual,
        iterations,
        converged,
        history,
        model_cut,
    })
}
