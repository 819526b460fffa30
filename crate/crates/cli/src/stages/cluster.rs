use std::collections::BTreeSet;

use qtkit_core::environments::{cooccurrence, expand_held_labels, label_atoms, AtomLabels, Cooccurrence, EnvLabel};

use super::Ctx;
use crate::error::{AtPath, CliError, Result};

pub fn run(ctx: &Ctx) -> Result<()> {
    let outputs = [ctx.labels_path(), ctx.held_path(), ctx.report_path("cluster_report.csv")];
    if ctx.up_to_date(&outputs)? {
        log::info!("cluster: outputs up to date, skipping");
        return Ok(());
    }
    let ds = ctx.load_dataset()?;
    let cfg = &ctx.cfg.cluster;
    let (labels, report) = label_atoms(&ds, &cfg.soap(), &cfg.per_element()?)?;
    ctx.write_stamped(&outputs[0], &labels.to_text())?;
    ctx.write_stamped(&outputs[2], &report.to_csv())?;

    let universe = labels.all_labels();
    let co = cooccurrence(&labels, &universe);
    let (seed, held) = if cfg.held.is_empty() {
        auto_held(&labels, &co, ctx)?
    } else {
        let seed = cfg
            .held
            .iter()
            .map(|s| s.parse::<EnvLabel>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::usage(format!("cluster.held: {e}")))?;
        let held = if cfg.expand { expand_held_labels(&co, &seed, cfg.expand_threshold) } else { seed.iter().copied().collect() };
        (seed, held)
    };
    log::info!("cluster: holding out {} labels from seed {}", held.len(), join(&seed));

    // `label role` per line; role is `seed` or `expanded`.
    let mut body = String::new();
    for l in &held {
        let role = if seed.contains(l) { "seed" } else { "expanded" };
        body.push_str(&format!("{l} {role}\n"));
    }
    ctx.write_stamped(&outputs[1], &body)
}

fn join(labels: &[EnvLabel]) -> String {
    labels.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn share(labels: &AtomLabels, held: &BTreeSet<EnvLabel>) -> f64 {
    let n = labels.by_molecule.len().max(1);
    let hit = labels.by_molecule.values().filter(|v| v.iter().any(|l| held.contains(l))).count();
    hit as f64 / n as f64
}

/// Rarest label whose (expanded) held set covers a molecule share inside
/// `[min_share, max_share]`.
fn auto_held(labels: &AtomLabels, co: &Cooccurrence, ctx: &Ctx) -> Result<(Vec<EnvLabel>, BTreeSet<EnvLabel>)> {
    let cfg = &ctx.cfg.cluster;
    let mut order: Vec<usize> = (0..co.labels.len()).filter(|&i| co.support[i] > 0).collect();
    order.sort_by_key(|&i| (co.support[i], co.labels[i]));
    for i in order {
        let seed = vec![co.labels[i]];
        let held = if cfg.expand { expand_held_labels(co, &seed, cfg.expand_threshold) } else { seed.iter().copied().collect() };
        let s = share(labels, &held);
        if s >= cfg.min_share && s <= cfg.max_share {
            return Ok((seed, held));
        }
    }
    Err(CliError::At {
        path: ctx.labels_path(),
        source: qtkit_core::Error::Validation(format!(
            "no environment label holds out between {} and {} of the molecules",
            cfg.min_share, cfg.max_share
        )),
    })
}

/// Reads `held.txt` back into the held label set.
pub fn read_held(ctx: &Ctx) -> Result<BTreeSet<EnvLabel>> {
    let path = ctx.held_path();
    let text = ctx.read_text(&path)?;
    let mut out = BTreeSet::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tok = line.split_whitespace().next().unwrap_or(line);
        let l: EnvLabel = tok
            .parse()
            .map_err(|e: qtkit_core::Error| qtkit_core::Error::Parse { line: ln + 1, msg: e.to_string() })
            .at(&path)?;
        out.insert(l);
    }
    Ok(out)
}
