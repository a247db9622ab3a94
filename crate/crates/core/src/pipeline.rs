//! End-to-end orchestration: load -> fit -> align -> cluster -> report.
//!
//! Every stage persists its artifact under the output directory and records
//! a fingerprint of the resolved config and seed; a rerun reuses any
//! up-to-date artifact, so the pipeline resumes from the last completed
//! stage. Failures abort with the stage name and a pointer to the persisted
//! progress.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::align::{align_across_groups, align_chain, AlignedChain};
use crate::config::{load_config, RunConfig};
use crate::data::{dichotomize, load_responses, ResponseMatrix};
use crate::diagnostics::{posterior_predictive_check, rhat};
use crate::error::{Error, Result};
use crate::latent::LatentConfig;
use crate::lsirm::{posterior_mean_positions, sample_posterior_chains};
use crate::ns::{
    adjust_centers, center_density, cluster_count_mode, make_domain, run_ensemble,
    select_centers_bic, DensityGrid, Domain2D, NsFitConfig,
};
use crate::persist::{
    load_binary_matrix, load_chain, load_density, load_json, save_binary_matrix,
    save_chain, save_density, save_ensemble, save_json, OutputLayout,
};
use crate::plot::emit_plots;
use crate::report::{
    center_distance_table, grand_mean_difference, letter_label, match_center_labels,
    membership_counts, positive_proportions, AnalysisReport, ClusterReport, ClusterSolution,
    ConvergenceSummary, CrossGroupReport, GroupReport, REPORT_SCHEMA_VERSION,
};
use crate::seed::derive_seed;

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Load,
    Fit,
    Align,
    Cluster,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Load => "load",
            Stage::Fit => "fit",
            Stage::Align => "align",
            Stage::Cluster => "cluster",
            Stage::Report => "report",
        }
    }

    /// Distinct process exit code per failing stage.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Load => 2,
            Stage::Fit => 3,
            Stage::Align => 4,
            Stage::Cluster => 5,
            Stage::Report => 6,
        }
    }
}

/// A stage failure with a pointer to the persisted progress.
#[derive(Debug)]
pub struct PipelineFailure {
    pub stage: Stage,
    pub error: Error,
    pub progress: PathBuf,
}

impl std::fmt::Display for PipelineFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "stage {} failed: {}; persisted progress in {}",
            self.stage.name(),
            self.error,
            self.progress.display()
        )
    }
}

impl std::error::Error for PipelineFailure {}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn fingerprint(cfg: &RunConfig, tag: &str) -> String {
    let mut payload = serde_json::to_vec(cfg).expect("config serializes");
    payload.extend_from_slice(tag.as_bytes());
    format!("{:016x}", fnv1a(&payload))
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct StageCache {
    fingerprints: BTreeMap<String, String>,
}

impl StageCache {
    fn load(path: &Path) -> Self {
        fs::read(path)
            .ok()
            .and_then(|bytes| serde_json::from_slice(&bytes).ok())
            .unwrap_or_default()
    }

    fn fresh(&self, tag: &str, fp: &str) -> bool {
        self.fingerprints.get(tag).is_some_and(|have| have == fp)
    }

    fn set(&mut self, tag: &str, fp: String, path: &Path) -> Result<()> {
        self.fingerprints.insert(tag.to_string(), fp);
        save_json(self, path)?;
        Ok(())
    }
}

/// Per-group clustering artifact persisted by the cluster stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClusterStageOutput {
    domain: Domain2D,
    report: ClusterReport,
}

/// Run the pipeline from a config file. See [`run_pipeline_with`].
pub fn run_pipeline(
    config_path: &Path,
    opts: &PipelineOptions,
) -> std::result::Result<AnalysisReport, PipelineFailure> {
    let cfg = load_config(config_path).map_err(|error| PipelineFailure {
        stage: Stage::Load,
        error,
        progress: opts.out_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
    })?;
    run_pipeline_with(cfg, opts)
}

/// Run the full pipeline for one or two groups and write every artifact.
pub fn run_pipeline_with(
    cfg: RunConfig,
    opts: &PipelineOptions,
) -> std::result::Result<AnalysisReport, PipelineFailure> {
    Ok(run_pipeline_until(cfg, opts, Stage::Report)?
        .expect("full pipeline produces a report"))
}

/// Run the pipeline through `stop` (inclusive), persisting each stage's
/// artifact; later reruns resume from what exists. Only a full run returns
/// a report.
pub fn run_pipeline_until(
    mut cfg: RunConfig,
    opts: &PipelineOptions,
    stop: Stage,
) -> std::result::Result<Option<AnalysisReport>, PipelineFailure> {
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out_dir {
        cfg.pipeline.out_dir = out.clone();
    }
    let layout = OutputLayout::new(&cfg.pipeline.out_dir);
    let fail = |stage: Stage, error: Error| PipelineFailure {
        stage,
        error,
        progress: layout.root.clone(),
    };
    let run = || -> std::result::Result<Option<AnalysisReport>, PipelineFailure> {
        cfg.validate().map_err(|e| fail(Stage::Load, e))?;
        if cfg.pipeline.responses.is_empty() {
            return Err(fail(
                Stage::Load,
                Error::Config("pipeline.responses must name one or two CSV files".into()),
            ));
        }
        fs::create_dir_all(&layout.root).map_err(|e| fail(Stage::Load, e.into()))?;
        let mut cache = StageCache::load(&layout.fingerprints());
        let cache_path = layout.fingerprints();

        let labels: Vec<String> = if cfg.pipeline.group_labels.is_empty() {
            (1..=cfg.pipeline.responses.len())
                .map(|g| format!("group-{g}"))
                .collect()
        } else {
            cfg.pipeline.group_labels.clone()
        };

        // ---- load + dichotomize -------------------------------------------
        let mut matrices: Vec<ResponseMatrix> = Vec::new();
        for (g, path) in cfg.pipeline.responses.clone().iter().enumerate() {
            let tag = format!("data:{}", labels[g]);
            let fp = fingerprint(&cfg, &format!("{tag}:{}", path.display()));
            let dir = layout.binary_dir(&labels[g]);
            let matrix = if cache.fresh(&tag, &fp) && dir.join("binary.csv").exists() {
                load_binary_matrix(&dir).map_err(|e| fail(Stage::Load, e))?
            } else {
                let likert =
                    load_responses(path, cfg.pipeline.layout).map_err(|e| fail(Stage::Load, e))?;
                let mut binary = dichotomize(&likert, cfg.dichotomize_threshold)
                    .map_err(|e| fail(Stage::Load, e))?;
                binary.group_label = Some(labels[g].clone());
                save_binary_matrix(&binary, &dir).map_err(|e| fail(Stage::Load, e))?;
                cache
                    .set(&tag, fp, &cache_path)
                    .map_err(|e| fail(Stage::Load, e))?;
                binary
            };
            matrices.push(matrix);
        }
        if stop == Stage::Load {
            return Ok(None);
        }

        // ---- fit ----------------------------------------------------------
        let n_chains = cfg.pipeline.n_chains;
        let mut raw_chains: Vec<Vec<crate::lsirm::PosteriorChain>> = Vec::new();
        for (g, x) in matrices.iter().enumerate() {
            let tag = format!("chains:{}", labels[g]);
            let fp = fingerprint(&cfg, &tag);
            let all_exist = (0..n_chains)
                .all(|c| layout.chain_dir(&labels[g], c).join("manifest.json").exists());
            let chains = if cache.fresh(&tag, &fp) && all_exist {
                (0..n_chains)
                    .map(|c| Ok(load_chain(&layout.chain_dir(&labels[g], c))?.chain))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| fail(Stage::Fit, e))?
            } else {
                let group_seed = derive_seed(cfg.seed, 0x100 + g as u64);
                let chains = sample_posterior_chains(x, &cfg, group_seed, n_chains)
                    .map_err(|e| fail(Stage::Fit, e))?;
                for (c, chain) in chains.iter().enumerate() {
                    save_chain(&chain.clone().into(), &layout.chain_dir(&labels[g], c))
                        .map_err(|e| fail(Stage::Fit, e))?;
                }
                cache
                    .set(&tag, fp, &cache_path)
                    .map_err(|e| fail(Stage::Fit, e))?;
                chains
            };
            raw_chains.push(chains);
        }
        if stop == Stage::Fit {
            return Ok(None);
        }

        // ---- align --------------------------------------------------------
        // Within each group every chain is aligned to its own best draw and
        // then mapped onto the group's first chain so position diagnostics
        // compare like with like; the second group's first chain is mapped
        // onto the first group's.
        let mut aligned_groups: Vec<Vec<AlignedChain>> = Vec::new();
        for (g, chains) in raw_chains.into_iter().enumerate() {
            let tag = format!("aligned:{}", labels[g]);
            let fp = fingerprint(&cfg, &tag);
            let all_exist = (0..n_chains)
                .all(|c| layout.aligned_dir(&labels[g], c).join("manifest.json").exists());
            let aligned = if cache.fresh(&tag, &fp) && all_exist {
                (0..n_chains)
                    .map(|c| load_chain(&layout.aligned_dir(&labels[g], c))?.into_aligned())
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| fail(Stage::Align, e))?
            } else {
                let mut iter = chains.into_iter();
                let mut first =
                    align_chain(iter.next().expect("n_chains >= 1")).map_err(|e| fail(Stage::Align, e))?;
                if g > 0 {
                    first = align_across_groups(&aligned_groups[0][0], first)
                        .map_err(|e| fail(Stage::Align, e))?;
                }
                let mut aligned = vec![first];
                for chain in iter {
                    let within = align_chain(chain).map_err(|e| fail(Stage::Align, e))?;
                    let common = align_across_groups(&aligned[0], within)
                        .map_err(|e| fail(Stage::Align, e))?;
                    aligned.push(common);
                }
                for (c, a) in aligned.iter().enumerate() {
                    save_chain(&a.clone().into(), &layout.aligned_dir(&labels[g], c))
                        .map_err(|e| fail(Stage::Align, e))?;
                }
                cache
                    .set(&tag, fp, &cache_path)
                    .map_err(|e| fail(Stage::Align, e))?;
                aligned
            };
            aligned_groups.push(aligned);
        }
        if stop == Stage::Align {
            return Ok(None);
        }

        // ---- cluster ------------------------------------------------------
        let mut positions: Vec<(LatentConfig, LatentConfig)> = Vec::new();
        for aligned in &aligned_groups {
            positions.push(
                posterior_mean_positions(&aligned[0].chain).map_err(|e| fail(Stage::Cluster, e))?,
            );
        }
        // shared domain over both groups' mean item positions
        let pooled: Vec<crate::latent::Point> = positions
            .iter()
            .flat_map(|(_, w)| w.points().iter().copied())
            .collect();
        let domain =
            make_domain(&pooled, cfg.ns.margin).map_err(|e| fail(Stage::Cluster, e))?;

        let mut cluster_outputs: Vec<ClusterStageOutput> = Vec::new();
        let mut densities: Vec<Option<DensityGrid>> = Vec::new();
        for (g, (z_mean, w_mean)) in positions.iter().enumerate() {
            let tag = format!("cluster:{}", labels[g]);
            let fp = fingerprint(&cfg, &tag);
            let out_json = layout.solution_json(&labels[g]);
            if cache.fresh(&tag, &fp) && out_json.exists() {
                let stored: ClusterStageOutput =
                    load_json(&out_json).map_err(|e| fail(Stage::Cluster, e))?;
                let density =
                    load_density(&layout.density_dir(&labels[g])).map_err(|e| fail(Stage::Cluster, e))?;
                cluster_outputs.push(stored);
                densities.push(Some(density));
                continue;
            }
            let fit_cfg = NsFitConfig::resolve(&cfg.ns, w_mean.len(), &domain)
                .map_err(|e| fail(Stage::Cluster, e))?;
            let ens_seed = derive_seed(cfg.seed, 0x200 + g as u64);
            let ensemble = run_ensemble(
                w_mean.points(),
                &domain,
                &fit_cfg,
                cfg.ns.n_runs,
                ens_seed,
            )
            .map_err(|e| fail(Stage::Cluster, e))?;
            save_ensemble(&ensemble, &layout.ensemble_csv(&labels[g]))
                .map_err(|e| fail(Stage::Cluster, e))?;
            let (histogram, mode) =
                cluster_count_mode(&ensemble).map_err(|e| fail(Stage::Cluster, e))?;
            let selection = select_centers_bic(
                &ensemble,
                w_mean.points(),
                &domain,
                mode,
                cfg.ns.bic_penalty,
            )
            .map_err(|e| fail(Stage::Cluster, e))?;
            let density = center_density(&ensemble, &domain, cfg.ns.kde_grid, cfg.ns.kde_bandwidth)
                .map_err(|e| fail(Stage::Cluster, e))?;
            save_density(&density, &layout.density_dir(&labels[g]))
                .map_err(|e| fail(Stage::Cluster, e))?;
            let adjusted = adjust_centers(&selection.state, &density, cfg.ns.tau)
                .map_err(|e| fail(Stage::Cluster, e))?;

            // labels: reference group letters its centers in (x, y) order;
            // the other group inherits by nearest-center matching
            let (center_labels, centers) = if g == 0 {
                let mut centers = adjusted.centers.clone();
                centers.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
                let labels: Vec<String> =
                    (0..centers.len()).map(letter_label).collect();
                (labels, centers)
            } else {
                let reference = &cluster_outputs[0].report.solution.centers;
                let matching = match_center_labels(reference, &adjusted.centers);
                (matching.labels, adjusted.centers.clone())
            };
            let solution = ClusterSolution::build(
                center_labels,
                centers,
                adjusted.dropped.clone(),
                w_mean,
                z_mean,
            )
            .map_err(|e| fail(Stage::Cluster, e))?;
            let counts = membership_counts(&solution);
            let report = ClusterReport {
                histogram,
                mode,
                selected_run: selection.run_index,
                bic: selection.bic,
                alpha: selection.state.alpha,
                omega: selection.state.omega,
                alpha_bounds: fit_cfg.alpha_bounds,
                omega_bounds: fit_cfg.omega_bounds,
                kde_bandwidth: density.bandwidth,
                solution,
                membership_counts: counts,
            };
            let output = ClusterStageOutput {
                domain: domain.clone(),
                report,
            };
            save_json(&output, &out_json).map_err(|e| fail(Stage::Cluster, e))?;
            cache
                .set(&tag, fp, &cache_path)
                .map_err(|e| fail(Stage::Cluster, e))?;
            cluster_outputs.push(output);
            densities.push(Some(density));
        }
        if stop == Stage::Cluster {
            return Ok(None);
        }

        // ---- report ---------------------------------------------------
        let mut groups: Vec<GroupReport> = Vec::new();
        for (g, x) in matrices.iter().enumerate() {
            let aligned = &aligned_groups[g];
            let chain_refs: Vec<&crate::lsirm::PosteriorChain> =
                aligned.iter().map(|a| &a.chain).collect();
            let rhat_report = rhat(&chain_refs).map_err(|e| fail(Stage::Report, e))?;
            let convergence = ConvergenceSummary {
                n_parameters: rhat_report.names.len(),
                rhat_min: rhat_report.min(),
                rhat_max: rhat_report.max(),
                rhat_fraction_below_1_05: rhat_report.fraction_below(1.05),
                split_single_chain: rhat_report.split_single_chain,
                n_chains,
                acceptance: aligned[0].chain.acceptance.clone(),
            };
            let ppc = posterior_predictive_check(
                &aligned[0].chain,
                x,
                cfg.pipeline.ppc_reps,
                derive_seed(cfg.seed, 0x300 + g as u64),
            )
            .map_err(|e| fail(Stage::Report, e))?;
            let proportions = positive_proportions(x).map_err(|e| fail(Stage::Report, e))?;
            let (z_mean, w_mean) = positions[g].clone();
            groups.push(GroupReport {
                label: labels[g].clone(),
                n_respondents: x.n_respondents(),
                n_items: x.n_items(),
                item_ids: x.item_ids.clone(),
                positive_proportions: proportions,
                convergence,
                ppc,
                cluster: cluster_outputs[g].report.clone(),
                item_positions: w_mean,
                student_positions: z_mean,
            });
        }

        let cross_group = if groups.len() == 2 {
            let a = groups[0]
                .cluster
                .solution
                .labeled_centers()
                .map_err(|e| fail(Stage::Report, e))?;
            let b = groups[1]
                .cluster
                .solution
                .labeled_centers()
                .map_err(|e| fail(Stage::Report, e))?;
            let table = center_distance_table(&a, &b, cfg.pipeline.highlight_threshold)
                .map_err(|e| fail(Stage::Report, e))?;
            let label_match = match_center_labels(
                &groups[0].cluster.solution.centers,
                &groups[1].cluster.solution.centers,
            );
            // membership table over the union of labels, centers then "M"
            let mut membership_labels: Vec<String> = Vec::new();
            for g in &groups {
                for (label, _) in &g.cluster.membership_counts {
                    if label != "M" && !membership_labels.contains(label) {
                        membership_labels.push(label.clone());
                    }
                }
            }
            membership_labels.sort();
            membership_labels.push("M".to_string());
            let counts: Vec<Vec<usize>> = groups
                .iter()
                .map(|g| {
                    membership_labels
                        .iter()
                        .map(|label| {
                            g.cluster
                                .membership_counts
                                .iter()
                                .find(|(l, _)| l == label)
                                .map_or(0, |(_, c)| *c)
                        })
                        .collect()
                })
                .collect();
            let gmd = grand_mean_difference(
                &groups[0].positive_proportions,
                &groups[1].positive_proportions,
            );
            Some(CrossGroupReport {
                distance_table: table,
                membership_labels,
                membership_counts: counts,
                grand_mean_difference: gmd,
                label_match,
            })
        } else {
            None
        };

        let report = AnalysisReport {
            schema_version: REPORT_SCHEMA_VERSION,
            seed: cfg.seed,
            config: cfg.clone(),
            groups,
            cross_group,
        };
        report.validate().map_err(|e| fail(Stage::Report, e))?;
        save_json(&report, &layout.report_json()).map_err(|e| fail(Stage::Report, e))?;
        write_tables(&report, &layout.tables_dir()).map_err(|e| fail(Stage::Report, e))?;
        emit_plots(&report, &densities, &layout.plots_dir()).map_err(|e| fail(Stage::Report, e))?;
        Ok(Some(report))
    };
    run()
}

fn write_tables(report: &AnalysisReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;

    // per-item positive proportions, one column per group
    let mut w = csv::Writer::from_path(dir.join("positive_proportions.csv"))?;
    let mut header = vec!["item".to_string()];
    header.extend(report.groups.iter().map(|g| g.label.clone()));
    if report.groups.len() == 2 {
        header.push("difference".to_string());
    }
    w.write_record(&header)?;
    if let Some(first) = report.groups.first() {
        for (i, item) in first.item_ids.iter().enumerate() {
            let mut record = vec![item.clone()];
            for g in &report.groups {
                record.push(match g.positive_proportions.get(i).copied().flatten() {
                    Some(p) => p.to_string(),
                    None => String::new(),
                });
            }
            if report.groups.len() == 2 {
                let a = report.groups[0].positive_proportions.get(i).copied().flatten();
                let b = report.groups[1].positive_proportions.get(i).copied().flatten();
                record.push(match (a, b) {
                    (Some(a), Some(b)) => (a - b).to_string(),
                    _ => String::new(),
                });
            }
            w.write_record(&record)?;
        }
    }
    w.flush()?;

    // center distances: one row per ordered pair over the shared labels
    let mut w = csv::Writer::from_path(dir.join("center_distances.csv"))?;
    if let Some(cross) = &report.cross_group {
        w.write_record(["from", "to", "group_a", "group_b", "highlight"])?;
        let t = &cross.distance_table;
        for (i, from) in t.labels.iter().enumerate() {
            for (j, to) in t.labels.iter().enumerate() {
                w.write_record([
                    from.clone(),
                    to.clone(),
                    t.group_a[i][j].to_string(),
                    t.group_b[i][j].to_string(),
                    t.highlight[i][j].to_string(),
                ])?;
            }
        }
    } else if let Some(g) = report.groups.first() {
        w.write_record(["from", "to", "distance"])?;
        let sol = &g.cluster.solution;
        for (i, from) in sol.center_labels.iter().enumerate() {
            for (j, to) in sol.center_labels.iter().enumerate() {
                w.write_record([
                    from.clone(),
                    to.clone(),
                    sol.center_distances[i][j].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;

    // student membership counts per group
    let mut w = csv::Writer::from_path(dir.join("membership_counts.csv"))?;
    let mut header = vec!["cluster".to_string()];
    header.extend(report.groups.iter().map(|g| g.label.clone()));
    w.write_record(&header)?;
    if let Some(cross) = &report.cross_group {
        for (li, label) in cross.membership_labels.iter().enumerate() {
            let mut record = vec![label.clone()];
            for counts in &cross.membership_counts {
                record.push(counts[li].to_string());
            }
            w.write_record(&record)?;
        }
    } else if let Some(g) = report.groups.first() {
        for (label, count) in &g.cluster.membership_counts {
            w.write_record([label.clone(), count.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
