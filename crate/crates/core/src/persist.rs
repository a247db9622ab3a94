//! Artifact persistence.
//!
//! Chains persist as a directory holding a JSON manifest (config echo, seed,
//! acceptance rates, alignment record) plus one CSV table per parameter
//! block. Floats are written with Rust's shortest round-trip formatting, so
//! save/load is bit-exact at full double precision.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::align::{AlignedChain, RigidTransform};
use crate::config::RunConfig;
use crate::data::ResponseMatrix;
use crate::error::{Error, Result};
use crate::latent::Point;
use crate::lsirm::{AcceptanceRates, LsirmParams, PosteriorChain};
use crate::ns::{DensityGrid, NsEnsemble, NsRun, NsState};

/// Schema version of every persisted artifact.
pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

/// A chain plus its alignment record, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredChain {
    pub chain: PosteriorChain,
    pub transforms: Option<Vec<RigidTransform>>,
    pub reference_index: Option<usize>,
    pub cross_group: Option<RigidTransform>,
}

impl From<PosteriorChain> for StoredChain {
    fn from(chain: PosteriorChain) -> Self {
        Self {
            chain,
            transforms: None,
            reference_index: None,
            cross_group: None,
        }
    }
}

impl From<AlignedChain> for StoredChain {
    fn from(a: AlignedChain) -> Self {
        Self {
            chain: a.chain,
            transforms: Some(a.transforms),
            reference_index: Some(a.reference_index),
            cross_group: a.cross_group,
        }
    }
}

impl StoredChain {
    /// Reconstruct the aligned view; errors when the stored chain was never
    /// aligned.
    pub fn into_aligned(self) -> Result<AlignedChain> {
        match (self.transforms, self.reference_index) {
            (Some(transforms), Some(reference_index)) if self.chain.aligned => Ok(AlignedChain {
                chain: self.chain,
                transforms,
                reference_index,
                cross_group: self.cross_group,
            }),
            _ => Err(Error::Contract(
                "stored chain carries no alignment record".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChainManifest {
    schema_version: u32,
    seed: u64,
    config: RunConfig,
    acceptance: AcceptanceRates,
    aligned: bool,
    reference_index: Option<usize>,
    cross_group: Option<RigidTransform>,
    group_label: Option<String>,
    respondent_ids: Vec<String>,
    item_ids: Vec<String>,
    n_draws: usize,
}

fn write_csv<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: Iterator<Item = R>,
    R: IntoIterator<Item = f64>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv(path: &Path, expect_cols: usize) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (idx, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != expect_cols {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: idx + 2,
                column: record.len(),
                message: format!("expected {expect_cols} fields, got {}", record.len()),
            });
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, s)| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 2,
                    column: col + 1,
                    message: format!("bad float {s:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Write a chain directory: `manifest.json`, `beta.csv`, `theta.csv`,
/// `z.csv`, `w.csv`, `scalars.csv`, and `transforms.csv` when aligned.
pub fn save_chain(stored: &StoredChain, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let chain = &stored.chain;
    let manifest = ChainManifest {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        seed: chain.seed,
        config: chain.config.clone(),
        acceptance: chain.acceptance.clone(),
        aligned: chain.aligned,
        reference_index: stored.reference_index,
        cross_group: stored.cross_group,
        group_label: chain.group_label.clone(),
        respondent_ids: chain.respondent_ids.clone(),
        item_ids: chain.item_ids.clone(),
        n_draws: chain.n_draws(),
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_vec_pretty(&manifest)?,
    )?;

    write_csv(
        &dir.join("beta.csv"),
        &chain.item_ids.iter().map(|i| format!("beta_{i}")).collect::<Vec<_>>(),
        chain.draws.iter().map(|d| d.beta.iter().copied().collect::<Vec<_>>()),
    )?;
    write_csv(
        &dir.join("theta.csv"),
        &chain
            .respondent_ids
            .iter()
            .map(|r| format!("theta_{r}"))
            .collect::<Vec<_>>(),
        chain.draws.iter().map(|d| d.theta.iter().copied().collect::<Vec<_>>()),
    )?;
    let point_header = |ids: &[String]| -> Vec<String> {
        ids.iter()
            .flat_map(|id| [format!("{id}_x"), format!("{id}_y")])
            .collect()
    };
    write_csv(
        &dir.join("z.csv"),
        &point_header(&chain.respondent_ids),
        chain
            .draws
            .iter()
            .map(|d| d.z.iter().flat_map(|p| [p[0], p[1]]).collect::<Vec<_>>()),
    )?;
    write_csv(
        &dir.join("w.csv"),
        &point_header(&chain.item_ids),
        chain
            .draws
            .iter()
            .map(|d| d.w.iter().flat_map(|p| [p[0], p[1]]).collect::<Vec<_>>()),
    )?;
    write_csv(
        &dir.join("scalars.csv"),
        &[
            "gamma".to_string(),
            "sigma_theta_sq".to_string(),
            "log_posterior".to_string(),
        ],
        chain
            .draws
            .iter()
            .zip(&chain.log_posterior)
            .map(|(d, lp)| vec![d.gamma, d.sigma_theta_sq, *lp]),
    )?;
    if let Some(transforms) = &stored.transforms {
        write_csv(
            &dir.join("transforms.csv"),
            &["r00", "r01", "r10", "r11", "tx", "ty"]
                .map(String::from)
                .to_vec(),
            transforms.iter().map(|t| {
                vec![
                    t.rotation[0][0],
                    t.rotation[0][1],
                    t.rotation[1][0],
                    t.rotation[1][1],
                    t.translation[0],
                    t.translation[1],
                ]
            }),
        )?;
    }
    Ok(())
}

/// Load a chain directory written by [`save_chain`].
pub fn load_chain(dir: &Path) -> Result<StoredChain> {
    let manifest: ChainManifest =
        serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    if manifest.schema_version != ARTIFACT_SCHEMA_VERSION {
        return Err(Error::Contract(format!(
            "unsupported chain schema version {}",
            manifest.schema_version
        )));
    }
    let n = manifest.respondent_ids.len();
    let p = manifest.item_ids.len();
    let beta = read_csv(&dir.join("beta.csv"), p)?;
    let theta = read_csv(&dir.join("theta.csv"), n)?;
    let z = read_csv(&dir.join("z.csv"), 2 * n)?;
    let w = read_csv(&dir.join("w.csv"), 2 * p)?;
    let scalars = read_csv(&dir.join("scalars.csv"), 3)?;
    let n_draws = manifest.n_draws;
    for (name, len) in [
        ("beta", beta.len()),
        ("theta", theta.len()),
        ("z", z.len()),
        ("w", w.len()),
        ("scalars", scalars.len()),
    ] {
        if len != n_draws {
            return Err(Error::Contract(format!(
                "{name}.csv has {len} rows, manifest says {n_draws}"
            )));
        }
    }
    let to_points = |row: &[f64]| -> Vec<Point> {
        row.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
    };
    let draws: Vec<LsirmParams> = (0..n_draws)
        .map(|d| LsirmParams {
            beta: beta[d].clone(),
            theta: theta[d].clone(),
            z: to_points(&z[d]),
            w: to_points(&w[d]),
            gamma: scalars[d][0],
            sigma_theta_sq: scalars[d][1],
        })
        .collect();
    let log_posterior = scalars.iter().map(|r| r[2]).collect();
    let transforms = if manifest.aligned {
        let rows = read_csv(&dir.join("transforms.csv"), 6)?;
        Some(
            rows.iter()
                .map(|r| RigidTransform {
                    rotation: [[r[0], r[1]], [r[2], r[3]]],
                    translation: [r[4], r[5]],
                })
                .collect(),
        )
    } else {
        None
    };
    let chain = PosteriorChain {
        draws,
        log_posterior,
        acceptance: manifest.acceptance,
        seed: manifest.seed,
        config: manifest.config,
        aligned: manifest.aligned,
        respondent_ids: manifest.respondent_ids,
        item_ids: manifest.item_ids,
        group_label: manifest.group_label,
    };
    Ok(StoredChain {
        chain,
        transforms,
        reference_index: manifest.reference_index,
        cross_group: manifest.cross_group,
    })
}

/// Write an ensemble as one CSV row per run; centers encode as
/// `x y;x y;...` in one field.
pub fn save_ensemble(e: &NsEnsemble, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["run", "seed", "m", "alpha", "omega", "log_posterior", "centers"])?;
    for r in &e.runs {
        let centers = r
            .state
            .centers
            .iter()
            .map(|c| format!("{} {}", c[0], c[1]))
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            r.run.to_string(),
            r.seed.to_string(),
            r.state.m().to_string(),
            r.state.alpha.to_string(),
            r.state.omega.to_string(),
            r.log_posterior.to_string(),
            centers,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Load an ensemble CSV written by [`save_ensemble`].
pub fn load_ensemble(path: &Path) -> Result<NsEnsemble> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut runs = Vec::new();
    for (idx, record) in rd.records().enumerate() {
        let record = record?;
        let line = idx + 2;
        let fail = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            column: 1,
            message: msg,
        };
        if record.len() != 7 {
            return Err(fail(format!("expected 7 fields, got {}", record.len())));
        }
        let centers: Vec<Point> = record[6]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|pair| {
                let mut it = pair.split(' ');
                let x = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| fail(format!("bad center {pair:?}")))?;
                let y = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| fail(format!("bad center {pair:?}")))?;
                Ok([x, y])
            })
            .collect::<Result<_>>()?;
        let m: usize = record[2].parse().map_err(|_| fail("bad m".into()))?;
        if m != centers.len() {
            return Err(fail(format!("m = {m} but {} centers listed", centers.len())));
        }
        runs.push(NsRun {
            run: record[0].parse().map_err(|_| fail("bad run".into()))?,
            seed: record[1].parse().map_err(|_| fail("bad seed".into()))?,
            state: NsState {
                centers,
                alpha: record[3].parse().map_err(|_| fail("bad alpha".into()))?,
                omega: record[4].parse().map_err(|_| fail("bad omega".into()))?,
            },
            log_posterior: record[5]
                .parse()
                .map_err(|_| fail("bad log_posterior".into()))?,
        });
    }
    Ok(NsEnsemble { runs })
}

#[derive(Debug, Serialize, Deserialize)]
struct DensityMeta {
    schema_version: u32,
    nx: usize,
    ny: usize,
    bandwidth: (f64, f64),
}

/// Write a density grid as a gridded CSV (x, y, density) plus a small meta
/// sidecar.
pub fn save_density(g: &DensityGrid, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("density.csv"))?;
    w.write_record(["x", "y", "density"])?;
    for (iy, y) in g.ys.iter().enumerate() {
        for (ix, x) in g.xs.iter().enumerate() {
            w.write_record([
                x.to_string(),
                y.to_string(),
                g.values[iy * g.nx() + ix].to_string(),
            ])?;
        }
    }
    w.flush()?;
    let meta = DensityMeta {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        nx: g.nx(),
        ny: g.ny(),
        bandwidth: g.bandwidth,
    };
    fs::write(dir.join("density_meta.json"), serde_json::to_vec_pretty(&meta)?)?;
    Ok(())
}

/// Load a density grid written by [`save_density`].
pub fn load_density(dir: &Path) -> Result<DensityGrid> {
    let meta: DensityMeta =
        serde_json::from_slice(&fs::read(dir.join("density_meta.json"))?)?;
    let rows = read_csv(&dir.join("density.csv"), 3)?;
    if rows.len() != meta.nx * meta.ny {
        return Err(Error::Contract(format!(
            "density.csv has {} rows, meta says {}x{}",
            rows.len(),
            meta.nx,
            meta.ny
        )));
    }
    let xs: Vec<f64> = rows[..meta.nx].iter().map(|r| r[0]).collect();
    let ys: Vec<f64> = (0..meta.ny).map(|iy| rows[iy * meta.nx][1]).collect();
    let values: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    Ok(DensityGrid {
        xs,
        ys,
        values,
        bandwidth: meta.bandwidth,
    })
}

/// Write a binary response matrix as a wide CSV of 0/1 cells (empty =
/// missing) with a JSON sidecar for the group label.
pub fn save_binary_matrix(x: &ResponseMatrix, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("binary.csv"))?;
    let mut header = vec!["respondent".to_string()];
    header.extend(x.item_ids.iter().cloned());
    w.write_record(&header)?;
    for k in 0..x.n_respondents() {
        let mut record = vec![x.respondent_ids[k].clone()];
        for i in 0..x.n_items() {
            record.push(match x.get(k, i) {
                Some(v) => v.to_string(),
                None => String::new(),
            });
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    #[derive(Serialize)]
    struct Sidecar<'a> {
        schema_version: u32,
        group_label: &'a Option<String>,
    }
    fs::write(
        dir.join("matrix_meta.json"),
        serde_json::to_vec_pretty(&Sidecar {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            group_label: &x.group_label,
        })?,
    )?;
    Ok(())
}

/// Load a binary matrix written by [`save_binary_matrix`].
pub fn load_binary_matrix(dir: &Path) -> Result<ResponseMatrix> {
    #[derive(Deserialize)]
    struct Sidecar {
        group_label: Option<String>,
    }
    let sidecar: Sidecar = serde_json::from_slice(&fs::read(dir.join("matrix_meta.json"))?)?;
    let path = dir.join("binary.csv");
    let mut rd = csv::Reader::from_path(&path)?;
    let headers = rd.headers()?.clone();
    let item_ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut respondent_ids = Vec::new();
    let mut values = Vec::new();
    for (idx, record) in rd.records().enumerate() {
        let record = record?;
        respondent_ids.push(record[0].to_string());
        for (col, cell) in record.iter().skip(1).enumerate() {
            if cell.is_empty() {
                values.push(None);
            } else {
                let v: u8 = cell.parse().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 2,
                    column: col + 2,
                    message: format!("bad binary cell {cell:?}"),
                })?;
                values.push(Some(v));
            }
        }
    }
    ResponseMatrix::new(respondent_ids, item_ids, values, sidecar.group_label)
}

/// Write a simulated binary matrix in the Likert CSV format the loaders
/// read: positives code as 5 ("Very much"), negatives as 1 ("Not at all"),
/// so `dichotomize` at any threshold in 2..=5 reproduces the matrix exactly.
pub fn save_likert_csv(x: &ResponseMatrix, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["respondent".to_string()];
    header.extend(x.item_ids.iter().cloned());
    w.write_record(&header)?;
    for k in 0..x.n_respondents() {
        let mut record = vec![x.respondent_ids[k].clone()];
        for i in 0..x.n_items() {
            record.push(match x.get(k, i) {
                Some(1) => "5".to_string(),
                Some(_) => "1".to_string(),
                None => String::new(),
            });
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Write any serializable artifact as pretty JSON.
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

/// Read an artifact written by [`save_json`].
pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Paths of the per-stage artifacts under one output directory.
#[derive(Debug, Clone)]
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn binary_dir(&self, group: &str) -> PathBuf {
        self.root.join("data").join(group)
    }

    pub fn chain_dir(&self, group: &str, chain: usize) -> PathBuf {
        self.root.join("chains").join(group).join(format!("chain_{chain}"))
    }

    pub fn aligned_dir(&self, group: &str, chain: usize) -> PathBuf {
        self.root.join("aligned").join(group).join(format!("chain_{chain}"))
    }

    pub fn ensemble_csv(&self, group: &str) -> PathBuf {
        self.root.join("cluster").join(group).join("ensemble.csv")
    }

    pub fn density_dir(&self, group: &str) -> PathBuf {
        self.root.join("cluster").join(group)
    }

    pub fn solution_json(&self, group: &str) -> PathBuf {
        self.root.join("cluster").join(group).join("solution.json")
    }

    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn tables_dir(&self) -> PathBuf {
        self.root.join("tables")
    }

    pub fn plots_dir(&self) -> PathBuf {
        self.root.join("plots")
    }

    pub fn fingerprints(&self) -> PathBuf {
        self.root.join("stage_fingerprints.json")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::align_chain;
    use crate::config::RunConfig;
    use crate::lsirm::sample_posterior;
    use crate::ns::{Domain2D, NsFitConfig, run_ensemble, center_density};
    use crate::config::{BandwidthName, BandwidthRule, NsConfig};

    fn small_chain() -> PosteriorChain {
        let values: Vec<Option<u8>> = (0..12).map(|i| Some((i % 2) as u8)).collect();
        let x = ResponseMatrix::new(
            (0..4).map(|k| format!("r{k}")).collect(),
            (0..3).map(|i| format!("i{i}")).collect(),
            values,
            Some("g".into()),
        )
        .unwrap();
        let mut cfg = RunConfig::default();
        cfg.mcmc.n_iter = 120;
        cfg.mcmc.burn_in = 20;
        cfg.mcmc.thin_to = 40;
        sample_posterior(&x, &cfg, 7).unwrap()
    }

    #[test]
    fn chain_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let chain = small_chain();
        save_chain(&chain.clone().into(), dir.path()).unwrap();
        let loaded = load_chain(dir.path()).unwrap();
        assert_eq!(loaded.chain.n_draws(), chain.n_draws());
        for (a, b) in chain.draws.iter().zip(&loaded.chain.draws) {
            for (x, y) in a.beta.iter().zip(&b.beta) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in a.z.iter().zip(&b.z) {
                assert_eq!(x[0].to_bits(), y[0].to_bits());
                assert_eq!(x[1].to_bits(), y[1].to_bits());
            }
            assert_eq!(a.gamma.to_bits(), b.gamma.to_bits());
            assert_eq!(a.sigma_theta_sq.to_bits(), b.sigma_theta_sq.to_bits());
        }
        for (a, b) in chain.log_posterior.iter().zip(&loaded.chain.log_posterior) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(loaded.chain.config, chain.config);
        assert!(loaded.transforms.is_none());
    }

    #[test]
    fn aligned_chain_roundtrips_with_transforms() {
        let dir = tempfile::tempdir().unwrap();
        let aligned = align_chain(small_chain()).unwrap();
        save_chain(&aligned.clone().into(), dir.path()).unwrap();
        let loaded = load_chain(dir.path()).unwrap().into_aligned().unwrap();
        assert_eq!(loaded.reference_index, aligned.reference_index);
        assert_eq!(loaded.transforms.len(), aligned.transforms.len());
        for (a, b) in aligned.transforms.iter().zip(&loaded.transforms) {
            assert_eq!(a.rotation[0][0].to_bits(), b.rotation[0][0].to_bits());
            assert_eq!(a.translation[1].to_bits(), b.translation[1].to_bits());
        }
    }

    #[test]
    fn ensemble_and_density_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let dom = Domain2D::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let w = vec![[0.2, 0.2], [0.25, 0.22], [0.8, 0.8], [0.78, 0.82]];
        let cfg = NsConfig {
            ns_iter: 300,
            ns_burn_in: 100,
            ..NsConfig::default()
        };
        let fit_cfg = NsFitConfig::resolve(&cfg, w.len(), &dom).unwrap();
        let e = run_ensemble(&w, &dom, &fit_cfg, 3, 11).unwrap();
        let csv = dir.path().join("ensemble.csv");
        save_ensemble(&e, &csv).unwrap();
        let back = load_ensemble(&csv).unwrap();
        assert_eq!(e, back);

        let g = center_density(&e, &dom, 16, BandwidthRule::Rule(BandwidthName::Silverman))
            .unwrap();
        save_density(&g, dir.path()).unwrap();
        let gb = load_density(dir.path()).unwrap();
        assert_eq!(g, gb);
    }

    #[test]
    fn binary_matrix_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let x = ResponseMatrix::new(
            vec!["a".into(), "b".into()],
            vec!["q1".into(), "q2".into(), "q3".into()],
            vec![Some(1), None, Some(0), Some(0), Some(1), None],
            Some("pilot".into()),
        )
        .unwrap();
        save_binary_matrix(&x, dir.path()).unwrap();
        let back = load_binary_matrix(dir.path()).unwrap();
        assert_eq!(x, back);
    }

    #[test]
    fn likert_export_rereads_identically() {
        let dir = tempfile::tempdir().unwrap();
        let x = ResponseMatrix::new(
            vec!["a".into(), "b".into()],
            vec!["q1".into(), "q2".into()],
            vec![Some(1), Some(0), None, Some(1)],
            None,
        )
        .unwrap();
        let path = dir.path().join("sim.csv");
        save_likert_csv(&x, &path).unwrap();
        let likert = crate::data::load_responses(&path, crate::data::Layout::Wide).unwrap();
        let binary = crate::data::dichotomize(&likert, 4).unwrap();
        assert_eq!(binary.values(), x.values());
    }
}
