use super::family::{FamilySpec, Zoo, ZooRun};
use crate::banding::PerformanceBand;
use crate::error::{Error, Result};
use crate::prediction::MetricKind;

#[derive(Clone, Debug)]
pub enum FlipOutcome {
    /// An existing band member already assigns the target class.
    Member { run: ZooRun },
    /// A new family member inside the band assigns the target class.
    Found { run: ZooRun, candidates_tried: usize },
    Exhausted { candidates_tried: usize },
}

impl FlipOutcome {
    pub fn run(&self) -> Option<&ZooRun> {
        match self {
            FlipOutcome::Member { run } | FlipOutcome::Found { run, .. } => Some(run),
            FlipOutcome::Exhausted { .. } => None,
        }
    }

    pub fn is_exhausted(&self) -> bool {
        matches!(self, FlipOutcome::Exhausted { .. })
    }
}

/// Looks for a run of `family` whose utility lies in `band` and which gives
/// `target_class` to `target_instance`. Band members are checked first; then
/// at most `budget` family candidates are evaluated in enumeration order.
pub fn flip_search(
    zoo: &Zoo,
    family: &FamilySpec,
    band: &PerformanceBand,
    members: &[ZooRun],
    target_instance: &str,
    target_class: bool,
    budget: usize,
) -> Result<FlipOutcome> {
    if budget == 0 {
        return Err(Error::InvalidArgument("flip search budget must be at least 1".into()));
    }
    let fairness = zoo.fairness();
    let position = fairness.index().position(target_instance).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "instance `{target_instance}` is not in fairness index `{}`",
            fairness.index().name()
        ))
    })?;
    let point = fairness.points()[position];

    for z in members.iter().filter(|z| band.contains(z.run.run_id())) {
        if z.run.preds_fairness().preds()[position] == target_class {
            return Ok(FlipOutcome::Member { run: z.clone() });
        }
    }

    let tag = family.kind.tag();
    let candidates = family.candidates(zoo.train(), zoo.domain_box())?;
    let available = candidates.len().min(budget);
    for (tried, (id, model)) in candidates.into_iter().take(budget).enumerate() {
        if model.predict(point) != target_class {
            continue;
        }
        let z = zoo.evaluate(&id, &tag, model)?;
        if !band.key().admits(&z.run.utility()) {
            continue;
        }
        verify(zoo, &z, position, target_class, band)?;
        return Ok(FlipOutcome::Found {
            run: z,
            candidates_tried: tried + 1,
        });
    }
    Ok(FlipOutcome::Exhausted {
        candidates_tried: available,
    })
}

fn verify(zoo: &Zoo, z: &ZooRun, position: usize, target_class: bool, band: &PerformanceBand) -> Result<()> {
    let labels = zoo.validation().labels();
    let recomputed = z.run.confusion(labels)?.metric(MetricKind::Accuracy)?;
    let correct = zoo
        .validation()
        .points()
        .iter()
        .zip(labels.labels())
        .filter(|(p, l)| z.model.predict(**p) == **l)
        .count() as u64;
    if recomputed != z.run.utility()
        || correct * recomputed.den() != recomputed.num() * labels.len() as u64
        || !band.key().admits(&recomputed)
        || z.model.predict(zoo.fairness().points()[position]) != target_class
        || z.run.preds_fairness().preds()[position] != target_class
    {
        return Err(Error::Invariant(format!(
            "flip candidate `{}` failed re-verification",
            z.run.run_id()
        )));
    }
    Ok(())
}
