use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use multimax::banding::{partition, BandingPolicy};
use multimax::fairness::fair_ensemble;
use multimax::ingest::{export_run_set, AuditManifest, Vocabulary};
use multimax::profiles::{fairness_profile, multiplicity_panel, stability_profile, ProfileStyle, ProfileVariant};
use multimax::report::{audit, audit_runs, compare_policies, AuditConfig, FairEnsembleRecord};
use multimax::zoo::{scenarios, FamilyKind};

const EXIT_OTHER: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_COMPUTATION: u8 = 3;

#[derive(Parser)]
#[command(name = "multimax", version, about = "Audit model multiplicity within performance bands")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileKind {
    Stability,
    Fairness,
    Panel,
}

#[derive(Subcommand)]
enum Command {
    /// Band the runs of a manifest and write report.json plus profiles.
    Audit {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render one profile. `panel` takes one manifest per fold.
    Profile {
        #[arg(long, value_enum)]
        kind: ProfileKind,
        #[arg(long, required = true)]
        manifest: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "faithful")]
        variant: ProfileVariant,
        #[arg(long)]
        top_n: Option<usize>,
        #[arg(long)]
        max_instances: Option<usize>,
    },
    /// Build f* for one band, print its metrics and optionally write its
    /// fairness-set predictions.
    FairModel {
        #[arg(long)]
        manifest: PathBuf,
        /// Band label (e.g. `98/100`, `0.98`) or its displayed utility.
        #[arg(long)]
        band: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic model zoo and export it with a manifest.
    Zoo {
        /// linear, poly:<d>, knn:<k> or tree:<d>
        #[arg(long, required_unless_present = "scenario")]
        family: Option<FamilyKind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// One of the built-in scenarios instead of the demo data.
        #[arg(long, conflicts_with = "family")]
        scenario: Option<String>,
        #[arg(long, default_value_t = 30)]
        n_per_class: usize,
        #[arg(long, default_value_t = 20)]
        fairness_per_class: usize,
    },
    /// Band counts and top-band ambiguity under several policies.
    Compare {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long = "band", required = true)]
        bands: Vec<BandingPolicy>,
        #[arg(long)]
        json: bool,
    },
}

fn load(manifest: &Path) -> anyhow::Result<(AuditManifest, multimax::ingest::AuditInput, AuditConfig)> {
    let m = AuditManifest::load(manifest)?;
    let input = m.load_inputs()?;
    let config = AuditConfig::from_manifest(&m)?;
    Ok((m, input, config))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Audit { manifest, out } => {
            let report = audit(&manifest, &out)?;
            println!(
                "{} runs, {} bands; report written to {}",
                report.data.runs,
                report.bands.len(),
                out.join("report.json").display()
            );
            for b in &report.bands {
                println!(
                    "  {:>12}  runs {:>6}  vectors {:>6}  ambiguity {}",
                    b.epsilon_display,
                    b.run_ids.len(),
                    b.unique_vector_counts.len(),
                    b.ambiguity.to_decimal(4)
                );
            }
        }
        Command::Profile {
            kind,
            manifest,
            out,
            variant,
            top_n,
            max_instances,
        } => {
            let style = ProfileStyle::default();
            if !matches!(kind, ProfileKind::Panel) && manifest.len() != 1 {
                bail!(multimax::Error::InvalidArgument(
                    "stability and fairness profiles take exactly one manifest".into()
                ));
            }
            let written = match kind {
                ProfileKind::Panel => {
                    let mut folds = Vec::with_capacity(manifest.len());
                    for path in &manifest {
                        let (_, input, config) = load(path)?;
                        let mut fold = audit_runs(&input.set, None, &config)?.fold;
                        fold.fold_id = path.display().to_string();
                        folds.push(fold);
                    }
                    multiplicity_panel(&folds, &style)?.write(&out, "panel")?
                }
                ProfileKind::Stability | ProfileKind::Fairness => {
                    let (_, input, mut config) = load(&manifest[0])?;
                    config.top_n = top_n.unwrap_or(config.top_n);
                    config.max_instances = max_instances.unwrap_or(config.max_instances);
                    let bands = partition(&input.set, &config.policy)?.bands;
                    let top = &bands[..config.top_n.min(bands.len())];
                    if matches!(kind, ProfileKind::Stability) {
                        stability_profile(top, &input.set, config.top_n, &style)?.write(&out, "stability")?
                    } else {
                        fairness_profile(top, &input.set, variant, config.max_instances, config.seed, &style)?
                            .write(&out, &format!("fairness-{variant}"))?
                    }
                }
            };
            println!("{}\n{}", written.0.display(), written.1.display());
        }
        Command::FairModel { manifest, band, out } => {
            let (_, input, config) = load(&manifest)?;
            let banding = partition(&input.set, &config.policy)?;
            let Some(b) = banding.find(&band) else {
                let known: Vec<String> = banding.bands.iter().map(|b| b.label()).collect();
                bail!(multimax::Error::InvalidArgument(format!(
                    "no band `{band}`; bands are {}",
                    known.join(", ")
                )));
            };
            let fe = fair_ensemble(b, &input.set)?;
            if let Some(path) = &out {
                let mut body = String::from("run_id,instance_id,prediction\n");
                for (id, &p) in fe.fstar_preds.index().ids().iter().zip(fe.fstar_preds.preds()) {
                    body.push_str(&format!("fstar,{id},{}\n", input.vocab.value_of(p)));
                }
                fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
            }
            let record = FairEnsembleRecord {
                fairness_favourable: fe.fstar_preds.preds().iter().filter(|&&p| p).count(),
                validation: fe.validation,
                fairness: fe.fairness,
            };
            println!("{}", serde_json::to_string_pretty(&record)?);
        }
        Command::Zoo {
            family,
            seed,
            out,
            scenario,
            n_per_class,
            fairness_per_class,
        } => {
            let (sc, tag) = match (&scenario, family) {
                (Some(name), _) => (scenarios::by_name(name, seed)?, name.clone()),
                (None, Some(kind)) => (scenarios::demo(kind, seed, n_per_class, fairness_per_class)?, kind.tag()),
                (None, None) => unreachable!("clap requires --family or --scenario"),
            };
            let mut provenance = BTreeMap::new();
            provenance.insert("generator".to_string(), "multimax zoo".into());
            provenance.insert(
                if scenario.is_some() { "scenario" } else { "family" }.to_string(),
                tag.into(),
            );
            provenance.insert("seed".to_string(), (seed as i64).into());
            let path = export_run_set(&out, &sc.set, &Vocabulary::binary(), provenance)?;
            println!("{} runs exported; manifest {}", sc.set.len(), path.display());
        }
        Command::Compare { manifest, bands, json } => {
            let (_, input, _) = load(&manifest)?;
            let rows = compare_policies(&input.set, &bands)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&rows)?);
            } else {
                println!("{:<12} {:>8} {:>12} {:>10}", "policy", "bands", "top runs", "top amb.");
                for r in rows {
                    println!(
                        "{:<12} {:>8} {:>12} {:>10}",
                        r.policy,
                        r.band_count,
                        r.top_band_runs,
                        r.top_band_ambiguity.to_decimal(4)
                    );
                }
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<multimax::Error>() {
        Some(e) if e.is_validation() => EXIT_VALIDATION,
        Some(multimax::Error::Io { .. }) => EXIT_OTHER,
        Some(_) => EXIT_COMPUTATION,
        None => EXIT_OTHER,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
