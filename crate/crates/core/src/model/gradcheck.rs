use super::network::{batch_tensor, Model, ParamStore};
use super::tape::{Tape, Var};
use super::ModelError;
use crate::image::Image;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Lower bound on the relative-error denominator, so entries whose
    /// gradient is numerically zero are compared absolutely.
    pub floor: f64,
    /// Check at most this many evenly spaced entries per tensor.
    pub max_per_group: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-4,
            floor: 1e-8,
            max_per_group: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Frozen tensors are reported but not differentiated.
    pub skipped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupReport>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups
            .iter()
            .filter(|g| !g.skipped)
            .map(|g| g.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error() < tolerance
    }
}

/// Compares reverse-mode gradients of `loss` against central differences.
pub fn grad_check<F>(store: &ParamStore<f64>, loss: F, opts: &GradCheckOptions) -> Result<GradCheckReport, ModelError>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var, ModelError>,
{
    let evaluate = |s: &ParamStore<f64>| -> Result<f64, ModelError> {
        let mut tape = Tape::new();
        let vars = s.register(&mut tape);
        let l = loss(&mut tape, &vars)?;
        Ok(tape.value(l).data[0])
    };
    let mut tape = Tape::new();
    let vars = store.register(&mut tape);
    let l = loss(&mut tape, &vars)?;
    let grads = tape.backward(l)?;

    let mut work = store.clone();
    let mut groups = Vec::with_capacity(store.entries.len());
    for (i, entry) in store.entries.iter().enumerate() {
        if !entry.trainable {
            groups.push(GroupReport {
                name: entry.name.clone(),
                checked: 0,
                max_rel_error: 0.0,
                max_abs_error: 0.0,
                skipped: true,
            });
            continue;
        }
        let n = entry.tensor.len();
        let analytic = grads.wrt(vars[i], n);
        let stride = opts.max_per_group.map_or(1, |m| n.div_ceil(m.max(1)));
        let (mut max_rel, mut max_abs, mut checked) = (0.0f64, 0.0f64, 0);
        for j in (0..n).step_by(stride.max(1)) {
            let orig = entry.tensor.data[j];
            work.entries[i].tensor.data[j] = orig + opts.step;
            let plus = evaluate(&work)?;
            work.entries[i].tensor.data[j] = orig - opts.step;
            let minus = evaluate(&work)?;
            work.entries[i].tensor.data[j] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = analytic[j];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(opts.floor);
            max_rel = max_rel.max(rel);
            max_abs = max_abs.max(abs);
            checked += 1;
        }
        groups.push(GroupReport {
            name: entry.name.clone(),
            checked,
            max_rel_error: max_rel,
            max_abs_error: max_abs,
            skipped: false,
        });
    }
    Ok(GradCheckReport { groups })
}

/// Gradient check of the full reconstruction loss of `model` on `images`.
pub fn model_grad_check(model: &Model<f64>, images: &[&Image], opts: &GradCheckOptions) -> Result<GradCheckReport, ModelError> {
    let batch = batch_tensor::<f64>(images)?;
    grad_check(
        &model.params,
        |tape, vars| {
            let x = tape.leaf(batch.clone());
            let out = model.network.forward(tape, vars, x)?;
            tape.mse(out.reconstruction, &batch, None)
        },
        opts,
    )
}
