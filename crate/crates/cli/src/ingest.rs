//! Turning a raw table into rescaled source and target samples.

use rand::seq::SliceRandom;
use serde::Serialize;
use tl2_core::{Dataset, RngSeed, Role};

use crate::config::IngestConfig;
use crate::error::{CliError, CliResult};
use crate::table::Table;

/// Observed range of one feature over the pooled source and target rows;
/// `x = min + u·(max − min)` inverts the rescaling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl FeatureRange {
    pub fn rescale(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub features: Vec<String>,
    pub ranges: Vec<FeatureRange>,
    pub source: Dataset,
    /// Every target row.
    pub target: Dataset,
    /// Training subsample and the remaining rows, when a target size is set.
    pub split: Option<(Dataset, Dataset)>,
    pub rows_read: usize,
    pub rows_dropped: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Source,
    Target,
    Dropped,
}

pub fn ingest(table: &Table, cfg: &IngestConfig, seed: RngSeed) -> CliResult<Ingested> {
    let resp = table.column(&cfg.response)?;
    let group = cfg.group.as_deref().map(|g| table.column(g)).transpose()?;
    let feats: Vec<usize> = if cfg.features.is_empty() {
        (0..table.header.len()).filter(|&c| c != resp && Some(c) != group).collect()
    } else {
        cfg.features.iter().map(|f| table.column(f)).collect::<CliResult<_>>()?
    };
    if feats.is_empty() {
        return Err(CliError::Input("no feature columns".into()));
    }
    if feats.iter().any(|&c| c == resp || Some(c) == group) {
        return Err(CliError::Input("a feature column doubles as response or group".into()));
    }

    let n = table.rows.len();
    let sides = assign_sides(table, cfg, group, seed)?;
    let used: Vec<usize> = (0..n).filter(|&r| sides[r] != Side::Dropped).collect();
    let mut raw = vec![Vec::with_capacity(feats.len()); n];
    let mut ys = vec![0.0; n];
    for &r in &used {
        for &c in &feats {
            raw[r].push(table.number(r, c)?);
        }
        ys[r] = table.number(r, resp)?;
    }

    let ranges: Vec<FeatureRange> = feats
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let (min, max) = used
                .iter()
                .map(|&r| raw[r][j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if !(max > min) {
                return Err(CliError::Input(format!("feature column `{}` is constant", table.header[c])));
            }
            Ok(FeatureRange { name: table.header[c].clone(), min, max })
        })
        .collect::<CliResult<_>>()?;

    let build = |rows: &[usize], role: Role| -> CliResult<Dataset> {
        let xs = rows
            .iter()
            .flat_map(|&r| raw[r].iter().zip(&ranges).map(|(&v, rg)| rg.rescale(v)))
            .collect();
        Ok(Dataset::from_columns(feats.len(), role, xs, rows.iter().map(|&r| ys[r]).collect())?)
    };

    let mut source_rows: Vec<usize> = used.iter().copied().filter(|&r| sides[r] == Side::Source).collect();
    let target_rows: Vec<usize> = used.iter().copied().filter(|&r| sides[r] == Side::Target).collect();
    if source_rows.is_empty() || target_rows.is_empty() {
        return Err(CliError::Input(format!(
            "ingestion left {} source and {} target rows",
            source_rows.len(),
            target_rows.len()
        )));
    }
    if cfg.n_source > 0 {
        source_rows = subsample(&source_rows, cfg.n_source, seed.child(2), "source")?.0;
    }
    let split = if cfg.n_target > 0 {
        if cfg.n_target >= target_rows.len() {
            return Err(CliError::Input(format!(
                "target size {} leaves no held-out rows out of {}",
                cfg.n_target,
                target_rows.len()
            )));
        }
        let (train, held) = subsample(&target_rows, cfg.n_target, seed.child(3), "target")?;
        Some((build(&train, Role::Target)?, build(&held, Role::Target)?))
    } else {
        None
    };
    Ok(Ingested {
        features: ranges.iter().map(|r| r.name.clone()).collect(),
        source: build(&source_rows, Role::Source)?,
        target: build(&target_rows, Role::Target)?,
        split,
        rows_read: n,
        rows_dropped: n - used.len(),
        ranges,
    })
}

fn assign_sides(table: &Table, cfg: &IngestConfig, group: Option<usize>, seed: RngSeed) -> CliResult<Vec<Side>> {
    let n = table.rows.len();
    match group {
        Some(g) => {
            if cfg.source_groups.is_empty() {
                return Err(CliError::Input("a group column needs `ingest.source_groups`".into()));
            }
            Ok(table
                .rows
                .iter()
                .map(|row| {
                    let v = &row[g];
                    if cfg.source_groups.contains(v) {
                        Side::Source
                    } else if cfg.target_groups.is_empty() || cfg.target_groups.contains(v) {
                        Side::Target
                    } else {
                        Side::Dropped
                    }
                })
                .collect())
        }
        None => {
            if cfg.source_rows == 0 || cfg.source_rows >= n {
                return Err(CliError::Input(format!(
                    "without a group column `ingest.source_rows` must lie in 1..{n}"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut seed.child(1).stream());
            let mut sides = vec![Side::Target; n];
            for &r in &order[..cfg.source_rows] {
                sides[r] = Side::Source;
            }
            Ok(sides)
        }
    }
}

/// Seeded subsample of `k` rows and the rest, both in file order.
fn subsample(rows: &[usize], k: usize, seed: RngSeed, what: &str) -> CliResult<(Vec<usize>, Vec<usize>)> {
    if k > rows.len() {
        return Err(CliError::Input(format!("{what} size {k} exceeds the {} available rows", rows.len())));
    }
    let mut order = rows.to_vec();
    order.shuffle(&mut seed.stream());
    let mut take = order[..k].to_vec();
    let mut rest = order[k..].to_vec();
    take.sort_unstable();
    rest.sort_unstable();
    Ok((take, rest))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> Table {
        let mut lines = text.lines();
        let split = |l: &str| l.split(',').map(str::to_string).collect::<Vec<_>>();
        let header = split(lines.next().unwrap());
        Table { header, rows: lines.map(split).collect() }
    }

    fn grouped() -> IngestConfig {
        IngestConfig {
            response: "rings".into(),
            group: Some("sex".into()),
            source_groups: vec!["M".into()],
            target_groups: vec!["F".into()],
            ..IngestConfig::default()
        }
    }

    const ABALONE: &str = "sex,len,wt,rings\nM,0.4,2,7\nF,0.6,4,9\nI,0.9,9,5\nF,0.2,3,11\nM,0.5,6,8\n";

    #[test]
    fn pooled_minmax_and_group_split() {
        let out = ingest(&table(ABALONE), &grouped(), RngSeed::new(1, 0)).unwrap();
        assert_eq!(out.features, vec!["len", "wt"]);
        assert_eq!(out.ranges[0], FeatureRange { name: "len".into(), min: 0.2, max: 0.6 });
        assert_eq!(out.ranges[1], FeatureRange { name: "wt".into(), min: 2.0, max: 6.0 });
        assert_eq!(out.rows_dropped, 1);
        assert_eq!(out.source.ys(), &[7.0, 8.0]);
        assert_eq!(out.target.ys(), &[9.0, 11.0]);
        assert_eq!(out.target.x(0), &[1.0, 0.5]);
        assert_eq!(out.source.x(0), &[(0.4 - 0.2) / (0.6 - 0.2), 0.0]);
        assert!(out.split.is_none());
    }

    #[test]
    fn unit_range_columns_are_unchanged() {
        let t = table("g,a,y\ns,0,1\nt,1,2\ns,0.3,3\nt,0.7071,4\n");
        let cfg = IngestConfig { group: Some("g".into()), source_groups: vec!["s".into()], ..IngestConfig::default() };
        let out = ingest(&t, &cfg, RngSeed::new(1, 0)).unwrap();
        assert_eq!(out.source.xs_flat(), &[0.0, 0.3]);
        assert_eq!(out.target.xs_flat(), &[1.0, 0.7071]);
    }

    #[test]
    fn random_split_and_holdout() {
        let mut text = String::from("a,b,y\n");
        for i in 0..40 {
            text.push_str(&format!("{},{},{}\n", i, (i * 7) % 13, i % 5));
        }
        let cfg = IngestConfig { source_rows: 25, n_source: 20, n_target: 10, ..IngestConfig::default() };
        let out = ingest(&table(&text), &cfg, RngSeed::new(4, 0)).unwrap();
        assert_eq!((out.source.len(), out.target.len()), (20, 15));
        let (train, held) = out.split.as_ref().unwrap();
        assert_eq!((train.len(), held.len()), (10, 5));
        let again = ingest(&table(&text), &cfg, RngSeed::new(4, 0)).unwrap();
        assert_eq!(again.source, out.source);
    }

    #[test]
    fn descriptive_errors() {
        let cases: Vec<(&str, IngestConfig, &str)> = vec![
            (ABALONE, IngestConfig { response: "age".into(), ..grouped() }, "missing column `age`"),
            ("sex,len,rings\nM,0.4,7\nF,x,9\n", grouped(), "non-numeric value `x`"),
            ("sex,len,wt,rings\nM,1,2,7\nF,1,4,9\n", grouped(), "`len` is constant"),
            (ABALONE, IngestConfig { n_target: 2, ..grouped() }, "no held-out"),
            (ABALONE, IngestConfig { response: "rings".into(), ..IngestConfig::default() }, "source_rows"),
        ];
        for (text, cfg, needle) in cases {
            let err = ingest(&table(text), &cfg, RngSeed::new(1, 0)).unwrap_err();
            assert!(matches!(err, CliError::Input(_)));
            assert!(err.to_string().contains(needle), "{err}");
        }
    }
}
